#include "tml/config.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace tml {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "on" || v == "true") return true;
    if (v == "off" || v == "false") return false;
    throw ConfigError(key + ": expected on/off, got '" + v + "'");
}

template <class T>
T parse_num(const std::string& key, const std::string& v) {
    std::istringstream in(v);
    T out;
    in >> out;
    if (in.fail() || !in.eof()) throw ConfigError(key + ": bad numeric value '" + v + "'");
    return out;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"seed", [](RunConfig& c, const std::string& v) { c.seed = parse_num<std::uint64_t>("seed", v); }},
        {"image-size", [](RunConfig& c, const std::string& v) { c.image_size = parse_num<std::int64_t>("image-size", v); }},
        {"batch-size", [](RunConfig& c, const std::string& v) { c.batch_size = parse_num<int>("batch-size", v); }},
        {"learning-rate", [](RunConfig& c, const std::string& v) { c.learning_rate = parse_num<double>("learning-rate", v); }},
        {"weight-decay", [](RunConfig& c, const std::string& v) { c.weight_decay = parse_num<double>("weight-decay", v); }},
        {"beta1", [](RunConfig& c, const std::string& v) { c.beta1 = parse_num<double>("beta1", v); }},
        {"beta2", [](RunConfig& c, const std::string& v) { c.beta2 = parse_num<double>("beta2", v); }},
        {"epsilon", [](RunConfig& c, const std::string& v) { c.epsilon = parse_num<double>("epsilon", v); }},
        {"epochs-tm", [](RunConfig& c, const std::string& v) { c.epochs_tm = parse_num<int>("epochs-tm", v); }},
        {"epochs-pm", [](RunConfig& c, const std::string& v) { c.epochs_pm = parse_num<int>("epochs-pm", v); }},
        {"epochs-em", [](RunConfig& c, const std::string& v) { c.epochs_em = parse_num<int>("epochs-em", v); }},
        {"loss", [](RunConfig& c, const std::string& v) { c.loss = v; }},
        {"depth", [](RunConfig& c, const std::string& v) { c.depth = parse_num<std::int64_t>("depth", v); }},
        {"base-channels", [](RunConfig& c, const std::string& v) { c.base_channels = parse_num<std::int64_t>("base-channels", v); }},
        {"gdc-stages", [](RunConfig& c, const std::string& v) { c.gdc_stages = v; }},
        {"gdc-grid-h", [](RunConfig& c, const std::string& v) { c.gdc_grid_h = parse_num<std::int64_t>("gdc-grid-h", v); }},
        {"gdc-grid-w", [](RunConfig& c, const std::string& v) { c.gdc_grid_w = parse_num<std::int64_t>("gdc-grid-w", v); }},
        {"gdc-embed", [](RunConfig& c, const std::string& v) { c.gdc_embed = parse_num<std::int64_t>("gdc-embed", v); }},
        {"gdc-k-kernel", [](RunConfig& c, const std::string& v) { c.gdc_k_kernel = parse_num<std::int64_t>("gdc-k-kernel", v); }},
        {"gdc-q-kernel", [](RunConfig& c, const std::string& v) { c.gdc_q_kernel = parse_num<std::int64_t>("gdc-q-kernel", v); }},
        {"gdc-out-kernel", [](RunConfig& c, const std::string& v) { c.gdc_out_kernel = parse_num<std::int64_t>("gdc-out-kernel", v); }},
        {"gdc-tm", [](RunConfig& c, const std::string& v) { c.gdc_tm = parse_bool("gdc-tm", v); }},
        {"gdc-pm", [](RunConfig& c, const std::string& v) { c.gdc_pm = parse_bool("gdc-pm", v); }},
        {"gdc-em", [](RunConfig& c, const std::string& v) { c.gdc_em = parse_bool("gdc-em", v); }},
        {"em-mode", [](RunConfig& c, const std::string& v) { c.em_mode = v; }},
        {"data-mode", [](RunConfig& c, const std::string& v) { c.data_mode = v; }},
        {"normal-dir", [](RunConfig& c, const std::string& v) { c.normal_dir = v; }},
        {"low-dir", [](RunConfig& c, const std::string& v) { c.low_dir = v; }},
        {"synth-train-pairs", [](RunConfig& c, const std::string& v) { c.synth_train_pairs = parse_num<int>("synth-train-pairs", v); }},
        {"synth-step2-normals", [](RunConfig& c, const std::string& v) { c.synth_step2_normals = parse_num<int>("synth-step2-normals", v); }},
        {"synth-test-pairs", [](RunConfig& c, const std::string& v) { c.synth_test_pairs = parse_num<int>("synth-test-pairs", v); }},
        {"darken-gamma-min", [](RunConfig& c, const std::string& v) { c.darken_gamma_min = parse_num<double>("darken-gamma-min", v); }},
        {"darken-gamma-max", [](RunConfig& c, const std::string& v) { c.darken_gamma_max = parse_num<double>("darken-gamma-max", v); }},
        {"darken-gain-min", [](RunConfig& c, const std::string& v) { c.darken_gain_min = parse_num<double>("darken-gain-min", v); }},
        {"darken-gain-max", [](RunConfig& c, const std::string& v) { c.darken_gain_max = parse_num<double>("darken-gain-max", v); }},
        {"darken-noise-sigma-max", [](RunConfig& c, const std::string& v) { c.darken_noise_sigma_max = parse_num<double>("darken-noise-sigma-max", v); }},
    };
    return table;
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::string section = "run";
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            if (section != "run" && section != "defaults")
                throw ConfigError("line " + std::to_string(lineno) + ": unknown section [" +
                                  section + "]");
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        auto it = setters().find(key);
        if (it == setters().end())
            throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        // [defaults] is a documentation echo; its keys are validated but not applied.
        if (section == "run") it->second(cfg, value);
    }
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_run_config(text);
}

void RunConfig::validate() const {
    if (loss != "smooth-l1") throw ConfigError("loss: only smooth-l1 is supported");
    if (em_mode != "direct" && em_mode != "residual" && em_mode != "off")
        throw ConfigError("em-mode must be direct, residual, or off");
    if (data_mode != "synthetic" && data_mode != "paired-dir" && data_mode != "normal-dir")
        throw ConfigError("data-mode must be synthetic, paired-dir, or normal-dir");
    if (batch_size < 1 || epochs_tm < 1 || epochs_pm < 1 || epochs_em < 1)
        throw ConfigError("batch size and epochs must be positive");
    if (learning_rate <= 0.0) throw ConfigError("learning-rate must be positive");
    if (image_size < 1 || image_size % (std::int64_t(1) << depth))
        throw ConfigError("image-size must be a positive multiple of 2^depth");
    model_config(Role::TM).validate();
}

UGDCConfig RunConfig::model_config(Role role) const {
    UGDCConfig m;
    m.depth = depth;
    m.base_channels = base_channels;
    m.gdc.grid_h = gdc_grid_h;
    m.gdc.grid_w = gdc_grid_w;
    m.gdc.embed = gdc_embed;
    m.gdc.k_kernel = gdc_k_kernel;
    m.gdc.q_kernel = gdc_q_kernel;
    m.gdc.out_kernel = gdc_out_kernel;
    bool enabled = role == Role::TM ? gdc_tm : role == Role::PM ? gdc_pm : gdc_em;
    m.gdc_stages.clear();
    if (enabled) {
        std::istringstream in(gdc_stages);
        std::string stage;
        while (std::getline(in, stage, ',')) {
            stage = trim(stage);
            if (!stage.empty()) m.gdc_stages.insert(stage);
        }
    }
    return m;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig t;
    t.optimizer.lr = static_cast<float>(learning_rate);
    t.optimizer.weight_decay = static_cast<float>(weight_decay);
    t.optimizer.beta1 = static_cast<float>(beta1);
    t.optimizer.beta2 = static_cast<float>(beta2);
    t.optimizer.eps = static_cast<float>(epsilon);
    t.batch_size = batch_size;
    t.epochs_tm = epochs_tm;
    t.epochs_pm = epochs_pm;
    t.epochs_em = epochs_em;
    t.seed = seed;
    t.em_enabled = em_enabled();
    t.em_mode = em_mode == "direct" ? EmMode::Direct : EmMode::Residual;
    return t;
}

SyntheticDarkener RunConfig::darkener() const {
    SyntheticDarkener d;
    d.gamma_min = static_cast<float>(darken_gamma_min);
    d.gamma_max = static_cast<float>(darken_gamma_max);
    d.gain_min = static_cast<float>(darken_gain_min);
    d.gain_max = static_cast<float>(darken_gain_max);
    d.noise_sigma_max = static_cast<float>(darken_noise_sigma_max);
    return d;
}

EmMode RunConfig::em_mode_enum() const {
    if (em_mode == "direct") return EmMode::Direct;
    if (em_mode == "residual") return EmMode::Residual;
    throw ConfigError("em is disabled in this config");
}

std::string serialize_run_config(const RunConfig& c) {
    std::ostringstream out;
    out << "[run]\n";
    out << "seed = " << c.seed << "\n";
    out << "image-size = " << c.image_size << "\n";
    out << "batch-size = " << c.batch_size << "\n";
    out << "learning-rate = " << c.learning_rate << "\n";
    out << "weight-decay = " << c.weight_decay << "\n";
    out << "beta1 = " << c.beta1 << "\n";
    out << "beta2 = " << c.beta2 << "\n";
    out << "epsilon = " << c.epsilon << "\n";
    out << "epochs-tm = " << c.epochs_tm << "\n";
    out << "epochs-pm = " << c.epochs_pm << "\n";
    out << "epochs-em = " << c.epochs_em << "\n";
    out << "loss = " << c.loss << "\n";
    out << "depth = " << c.depth << "\n";
    out << "base-channels = " << c.base_channels << "\n";
    out << "gdc-stages = " << c.gdc_stages << "\n";
    out << "gdc-grid-h = " << c.gdc_grid_h << "\n";
    out << "gdc-grid-w = " << c.gdc_grid_w << "\n";
    out << "gdc-embed = " << c.gdc_embed << "\n";
    out << "gdc-k-kernel = " << c.gdc_k_kernel << "\n";
    out << "gdc-q-kernel = " << c.gdc_q_kernel << "\n";
    out << "gdc-out-kernel = " << c.gdc_out_kernel << "\n";
    out << "gdc-tm = " << (c.gdc_tm ? "on" : "off") << "\n";
    out << "gdc-pm = " << (c.gdc_pm ? "on" : "off") << "\n";
    out << "gdc-em = " << (c.gdc_em ? "on" : "off") << "\n";
    out << "em-mode = " << c.em_mode << "\n";
    out << "data-mode = " << c.data_mode << "\n";
    if (!c.normal_dir.empty()) out << "normal-dir = " << c.normal_dir << "\n";
    if (!c.low_dir.empty()) out << "low-dir = " << c.low_dir << "\n";
    out << "synth-train-pairs = " << c.synth_train_pairs << "\n";
    out << "synth-step2-normals = " << c.synth_step2_normals << "\n";
    out << "synth-test-pairs = " << c.synth_test_pairs << "\n";
    out << "darken-gamma-min = " << c.darken_gamma_min << "\n";
    out << "darken-gamma-max = " << c.darken_gamma_max << "\n";
    out << "darken-gain-min = " << c.darken_gain_min << "\n";
    out << "darken-gain-max = " << c.darken_gain_max << "\n";
    out << "darken-noise-sigma-max = " << c.darken_noise_sigma_max << "\n";
    out << "\n# Full-scale values reported for the published training setup.\n";
    out << "[defaults]\n";
    out << "learning-rate = 4e-05\n";
    out << "batch-size = 8\n";
    out << "epochs-tm = 12\n";
    out << "epochs-pm = 10\n";
    out << "epochs-em = 12\n";
    out << "image-size = 400\n";
    return out.str();
}

void write_resolved_config(const RunConfig& cfg, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::ofstream out(out_dir + "/resolved-config.toml");
    if (!out) throw IoError("cannot write resolved config in " + out_dir);
    out << serialize_run_config(cfg);
}

}  // namespace tml
