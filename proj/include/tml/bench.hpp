#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tml/gdc.hpp"

namespace tml {

enum class BenchBlock { GDC, SelfAttention };

struct BenchReport {
    BenchBlock block = BenchBlock::GDC;
    std::vector<std::int64_t> sizes;       // pixel counts n, strictly increasing
    std::vector<double> median_ns;         // per size
    std::vector<double> ratios;            // median(s[i+1]) / median(s[i])
    double loglog_slope = 0.0;             // least-squares slope of log t vs log n
    int repeats = 0;
};

// Times the block forward pass single-threaded: warmup runs discarded,
// median of `repeats` timed runs per size. For self-attention the token
// count equals the pixel count; sizes whose S x S map would exceed the
// memory bound are rejected with a config error.
inline constexpr std::int64_t kAttentionMemoryBound = 2ll << 30;  // bytes for the S*S map

BenchReport scaling_bench(BenchBlock block, const std::vector<std::int64_t>& sizes,
                          int repeats = 5, std::uint64_t seed = 0);

// CSV rows: block,n,median_ns,ratio (empty ratio for the first size).
std::string bench_csv(const BenchReport& report, bool header = true);

}  // namespace tml
