#pragma once

#include <string>
#include <vector>

#include "tml/image.hpp"
#include "tml/rng.hpp"

namespace tml {

// Parametric normal -> low degradation: low = clamp(g * img^gamma + noise, 0, 1).
// Parameters are drawn per image from the ranges below and logged so a pair
// is re-derivable from its seed.
struct SyntheticDarkener {
    float gamma_min = 1.5f, gamma_max = 3.5f;
    float gain_min = 0.1f, gain_max = 0.5f;
    float noise_sigma_max = 0.03f;
};

struct DarkenParams {
    float gamma = 2.0f;
    float gain = 0.3f;
    float sigma = 0.0f;
};

DarkenParams sample_darken_params(const SyntheticDarkener& d, Rng& rng);
ImageBuffer darken(const ImageBuffer& img, const DarkenParams& p, Rng& rng);

// Procedural normal-light image: smooth gradients plus soft blobs, bright
// enough to leave headroom for darkening.
ImageBuffer synth_normal_image(Rng& rng, std::int64_t width, std::int64_t height);

struct DatasetSpec {
    enum class Mode { PairedDir, NormalDir };
    Mode mode = Mode::NormalDir;
    std::string normal_dir;
    std::string low_dir;  // PairedDir only; 1:1 filename correspondence
};

// Sorted for run-to-run determinism.
std::vector<std::string> list_ppm_files(const std::string& dir);

struct PairedSample {
    std::string name;
    ImageBuffer normal;
    ImageBuffer low;
};

std::vector<PairedSample> load_paired(const DatasetSpec& spec, AccessLog* log = nullptr);
std::vector<ImageBuffer> load_normals(const DatasetSpec& spec, AccessLog* log = nullptr);

// Full synthetic corpus derived from one seed: supervised pairs for step 1,
// normal-only images for step 2, held-out pairs for evaluation.
struct SynthCorpus {
    std::vector<PairedSample> train;
    std::vector<ImageBuffer> step2;
    std::vector<PairedSample> test;
};

SynthCorpus make_synth_corpus(std::uint64_t seed, const SyntheticDarkener& darkener,
                              std::int64_t image_size, int train_pairs, int step2_normals,
                              int test_pairs);

}  // namespace tml
