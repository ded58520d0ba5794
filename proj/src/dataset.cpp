#include "tml/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

namespace fs = std::filesystem;

namespace tml {

DarkenParams sample_darken_params(const SyntheticDarkener& d, Rng& rng) {
    DarkenParams p;
    p.gamma = static_cast<float>(rng.uniform(d.gamma_min, d.gamma_max));
    p.gain = static_cast<float>(rng.uniform(d.gain_min, d.gain_max));
    p.sigma = static_cast<float>(rng.uniform(0.0, d.noise_sigma_max));
    return p;
}

ImageBuffer darken(const ImageBuffer& img, const DarkenParams& p, Rng& rng) {
    ImageBuffer out = img;
    for (float& v : out.pixels) {
        float dark = p.gain * std::pow(std::max(v, 0.0f), p.gamma);
        if (p.sigma > 0.0f) dark += static_cast<float>(rng.normal(0.0, p.sigma));
        v = std::min(1.0f, std::max(0.0f, dark));
    }
    return out;
}

ImageBuffer synth_normal_image(Rng& rng, std::int64_t width, std::int64_t height) {
    ImageBuffer img = ImageBuffer::filled(width, height, 0.0f);
    float base[3], gx[3], gy[3];
    for (int c = 0; c < 3; ++c) {
        base[c] = static_cast<float>(rng.uniform(0.35, 0.7));
        gx[c] = static_cast<float>(rng.uniform(-0.25, 0.25));
        gy[c] = static_cast<float>(rng.uniform(-0.25, 0.25));
    }
    struct Blob {
        float cx, cy, r, amp[3];
    };
    std::vector<Blob> blobs(3 + rng.below(4));
    for (auto& b : blobs) {
        b.cx = static_cast<float>(rng.uniform(0.0, 1.0));
        b.cy = static_cast<float>(rng.uniform(0.0, 1.0));
        b.r = static_cast<float>(rng.uniform(0.08, 0.35));
        for (int c = 0; c < 3; ++c) b.amp[c] = static_cast<float>(rng.uniform(-0.3, 0.35));
    }
    for (std::int64_t y = 0; y < height; ++y) {
        float fy = static_cast<float>(y) / static_cast<float>(height);
        for (std::int64_t x = 0; x < width; ++x) {
            float fx = static_cast<float>(x) / static_cast<float>(width);
            for (int c = 0; c < 3; ++c) {
                float v = base[c] + gx[c] * fx + gy[c] * fy;
                for (const auto& b : blobs) {
                    float dx = fx - b.cx, dy = fy - b.cy;
                    v += b.amp[c] * std::exp(-(dx * dx + dy * dy) / (2.0f * b.r * b.r));
                }
                img.at(y, x, c) = std::min(0.98f, std::max(0.08f, v));
            }
        }
    }
    return img;
}

std::vector<std::string> list_ppm_files(const std::string& dir) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".ppm")
            names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    return names;
}

std::vector<PairedSample> load_paired(const DatasetSpec& spec, AccessLog* log) {
    if (spec.mode != DatasetSpec::Mode::PairedDir)
        throw ConfigError("load_paired requires paired-dir mode");
    auto normals = list_ppm_files(spec.normal_dir);
    auto lows = list_ppm_files(spec.low_dir);
    if (normals != lows)
        throw ConfigError("paired dirs must hold the same filenames (" +
                          std::to_string(normals.size()) + " normal vs " +
                          std::to_string(lows.size()) + " low)");
    if (normals.empty()) throw ConfigError("empty paired dataset: " + spec.normal_dir);
    std::vector<PairedSample> out;
    out.reserve(normals.size());
    for (const auto& name : normals) {
        PairedSample s;
        s.name = name;
        s.normal = load_ppm(spec.normal_dir + "/" + name, log);
        s.low = load_ppm(spec.low_dir + "/" + name, log);
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<ImageBuffer> load_normals(const DatasetSpec& spec, AccessLog* log) {
    auto names = list_ppm_files(spec.normal_dir);
    if (names.empty()) throw ConfigError("empty dataset: " + spec.normal_dir);
    std::vector<ImageBuffer> out;
    out.reserve(names.size());
    for (const auto& name : names) out.push_back(load_ppm(spec.normal_dir + "/" + name, log));
    return out;
}

SynthCorpus make_synth_corpus(std::uint64_t seed, const SyntheticDarkener& darkener,
                              std::int64_t image_size, int train_pairs, int step2_normals,
                              int test_pairs) {
    if (image_size < 8) throw ConfigError("image-size too small for the synthetic generator");
    SynthCorpus c;
    Rng img_rng = Rng(seed).fork(0x7261696e);   // image content stream
    Rng dark_rng = Rng(seed).fork(0x6461726b);  // degradation stream
    auto make_pair = [&](int idx) {
        PairedSample s;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d.ppm", idx);
        s.name = buf;
        s.normal = synth_normal_image(img_rng, image_size, image_size);
        s.low = darken(s.normal, sample_darken_params(darkener, dark_rng), dark_rng);
        return s;
    };
    for (int i = 0; i < train_pairs; ++i) c.train.push_back(make_pair(i));
    for (int i = 0; i < step2_normals; ++i)
        c.step2.push_back(synth_normal_image(img_rng, image_size, image_size));
    for (int i = 0; i < test_pairs; ++i) c.test.push_back(make_pair(i));
    return c;
}

}  // namespace tml
