#pragma once

#include <string>

#include "tml/dataset.hpp"
#include "tml/trainer.hpp"

namespace tml {

// Flat, typed key-value run configuration (TOML-style `key = value` lines,
// `#` comments, optional `[run]` / `[defaults]` section headers). Unknown
// keys are rejected. Serialization appends a `[defaults]` echo of the
// paper's full-scale values for reference.
struct RunConfig {
    std::uint64_t seed = 0;
    std::int64_t image_size = 64;  // desk default; full scale is 400x640
    int batch_size = 4;
    double learning_rate = 1e-3;   // desk default; full-scale default 4e-5
    double weight_decay = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int epochs_tm = 12;
    int epochs_pm = 10;
    int epochs_em = 12;
    std::string loss = "smooth-l1";

    std::int64_t depth = 3;
    std::int64_t base_channels = 16;
    std::string gdc_stages = "bottleneck";  // comma-separated stage names
    std::int64_t gdc_grid_h = 8;
    std::int64_t gdc_grid_w = 8;
    std::int64_t gdc_embed = 32;
    std::int64_t gdc_k_kernel = 1;
    std::int64_t gdc_q_kernel = 3;
    std::int64_t gdc_out_kernel = 1;
    bool gdc_tm = true;
    bool gdc_pm = true;
    bool gdc_em = true;
    std::string em_mode = "residual";  // direct | residual | off

    std::string data_mode = "synthetic";  // synthetic | paired-dir | normal-dir
    std::string normal_dir;
    std::string low_dir;
    int synth_train_pairs = 50;
    int synth_step2_normals = 200;
    int synth_test_pairs = 10;
    double darken_gamma_min = 1.5;
    double darken_gamma_max = 3.5;
    double darken_gain_min = 0.1;
    double darken_gain_max = 0.5;
    double darken_noise_sigma_max = 0.03;

    UGDCConfig model_config(Role role) const;
    TrainConfig train_config() const;
    SyntheticDarkener darkener() const;
    EmMode em_mode_enum() const;  // throws ConfigError when em is off
    bool em_enabled() const { return em_mode != "off"; }
    void validate() const;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);
std::string serialize_run_config(const RunConfig& cfg);
void write_resolved_config(const RunConfig& cfg, const std::string& out_dir);

}  // namespace tml
