#include "tml/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "tml/f32.hpp"

namespace tml {

namespace {

using Clock = std::chrono::steady_clock;

double time_once(const std::function<void()>& fn) {
    auto t0 = Clock::now();
    fn();
    auto t1 = Clock::now();
    return static_cast<double>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::int64_t isqrt(std::int64_t n) {
    auto r = static_cast<std::int64_t>(std::llround(std::sqrt(static_cast<double>(n))));
    while (r * r > n) --r;
    while ((r + 1) * (r + 1) <= n) ++r;
    return r;
}

}  // namespace

BenchReport scaling_bench(BenchBlock block, const std::vector<std::int64_t>& sizes, int repeats,
                          std::uint64_t seed) {
    if (repeats < 5) throw ConfigError("scaling_bench needs at least 5 repeats");
    for (std::size_t i = 1; i < sizes.size(); ++i)
        if (sizes[i] <= sizes[i - 1]) throw ConfigError("bench sizes must strictly increase");
    if (sizes.empty()) throw ConfigError("bench needs at least one size");

    BenchReport report;
    report.block = block;
    report.sizes = sizes;
    report.repeats = repeats;
    Rng rng(seed);

    for (std::int64_t n : sizes) {
        std::function<void()> run;
        if (block == BenchBlock::GDC) {
            std::int64_t side = isqrt(n);
            if (side * side != n) throw ConfigError("gdc bench sizes must be perfect squares");
            GDCConfig cfg;  // fixed S = 64, E = 32 across sizes
            cfg.in_channels = 8;
            cfg.out_channels = 8;
            GDCParams params = gdc_init<float>(cfg, rng);
            // Nonzero diff so the dynamic path does real work.
            for (auto& v : params.diff.data()) v = static_cast<float>(rng.uniform(-0.1, 0.1));
            Tensor x = Tensor::randn(rng, {1, cfg.in_channels, side, side});
            run = [params, cfg, x]() mutable {
                Tensor y = gdc_forward<float>(nullptr, x, params, cfg);
                volatile float sink = y.data()[0];
                (void)sink;
            };
        } else {
            if (n * n * 4 > kAttentionMemoryBound)
                throw ConfigError("attention size " + std::to_string(n) +
                                  " exceeds the S*S map memory bound");
            std::int64_t e = 32;
            Tensor q = Tensor::randn(rng, {n, e});
            Tensor k = Tensor::randn(rng, {n, e});
            Tensor v = Tensor::randn(rng, {n, e});
            run = [q, k, v]() {
                Tensor y = self_attention<float>(nullptr, q, k, v);
                volatile float sink = y.data()[0];
                (void)sink;
            };
        }
        time_once(run);  // warmup, discarded
        std::vector<double> times(static_cast<std::size_t>(repeats));
        for (auto& t : times) t = time_once(run);
        report.median_ns.push_back(median_of(times));
    }

    for (std::size_t i = 1; i < report.median_ns.size(); ++i)
        report.ratios.push_back(report.median_ns[i] / report.median_ns[i - 1]);

    if (sizes.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        auto m = static_cast<double>(sizes.size());
        for (std::size_t i = 0; i < sizes.size(); ++i) {
            double x = std::log(static_cast<double>(sizes[i]));
            double y = std::log(report.median_ns[i]);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        report.loglog_slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    }
    return report;
}

std::string bench_csv(const BenchReport& report, bool header) {
    std::ostringstream out;
    if (header) out << "block,n,median_ns,ratio\n";
    const char* name = report.block == BenchBlock::GDC ? "gdc" : "self-attention";
    for (std::size_t i = 0; i < report.sizes.size(); ++i) {
        out << name << "," << report.sizes[i] << "," << static_cast<std::int64_t>(report.median_ns[i]) << ",";
        if (i > 0) out << report.ratios[i - 1];
        out << "\n";
    }
    return out.str();
}

}  // namespace tml
