// Command-line front end: synthetic data generation, the two training steps,
// enhancement, metrics, verification checks, and the scaling benchmark.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tml/bench.hpp"
#include "tml/config.hpp"
#include "tml/gradcheck.hpp"
#include "tml/metrics.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFail = 1;
constexpr int kExitUsage = 2;

tml::RunConfig load_config(const std::string& path, std::uint64_t* seed_override) {
    tml::RunConfig cfg = path.empty() ? tml::RunConfig{} : tml::load_run_config(path);
    if (seed_override) cfg.seed = *seed_override;
    cfg.validate();
    return cfg;
}

void write_log(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw tml::IoError("cannot write " + path);
    out << text;
}

tml::Model load_model(const std::string& path) {
    tml::Role role;
    tml::UGDCConfig cfg = tml::checkpoint_peek_config(path, &role);
    tml::Rng rng(0);
    tml::Model m = tml::build_model<float>(role, cfg, rng);
    tml::checkpoint_load(path, m);
    return m;
}

tml::SynthCorpus corpus_from(const tml::RunConfig& cfg) {
    return tml::make_synth_corpus(cfg.seed, cfg.darkener(), cfg.image_size,
                                  cfg.synth_train_pairs, cfg.synth_step2_normals,
                                  cfg.synth_test_pairs);
}

// ---------------------------------------------------------------------------

int cmd_synth(const tml::RunConfig& cfg, const std::string& out_dir) {
    tml::SynthCorpus corpus = corpus_from(cfg);
    for (const char* sub : {"train/normal", "train/low", "step2/normal", "test/normal",
                            "test/low"})
        fs::create_directories(fs::path(out_dir) / sub);

    json manifest;
    manifest["seed"] = cfg.seed;
    manifest["image_size"] = cfg.image_size;
    auto save_pairs = [&](const std::vector<tml::PairedSample>& pairs, const std::string& split) {
        json names = json::array();
        for (const auto& s : pairs) {
            tml::save_ppm(out_dir + "/" + split + "/normal/" + s.name, s.normal);
            tml::save_ppm(out_dir + "/" + split + "/low/" + s.name, s.low);
            names.push_back(s.name);
        }
        manifest[split] = names;
    };
    save_pairs(corpus.train, "train");
    save_pairs(corpus.test, "test");
    json step2 = json::array();
    for (std::size_t i = 0; i < corpus.step2.size(); ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04zu.ppm", i);
        tml::save_ppm(out_dir + "/step2/normal/" + std::string(buf), corpus.step2[i]);
        step2.push_back(buf);
    }
    manifest["step2"] = step2;
    write_log(out_dir + "/manifest.json", manifest.dump(2) + "\n");
    tml::write_resolved_config(cfg, out_dir);
    std::cout << "synth: " << corpus.train.size() << " train pairs, " << corpus.step2.size()
              << " step-2 normals, " << corpus.test.size() << " test pairs -> " << out_dir
              << "\n";
    return kExitOk;
}

int cmd_train_tm(const tml::RunConfig& cfg, const std::string& out_dir) {
    std::vector<tml::PairedSample> pairs;
    if (cfg.data_mode == "synthetic") {
        pairs = corpus_from(cfg).train;
    } else {
        tml::DatasetSpec spec;
        spec.mode = tml::DatasetSpec::Mode::PairedDir;
        spec.normal_dir = cfg.normal_dir;
        spec.low_dir = cfg.low_dir;
        pairs = tml::load_paired(spec);
    }
    fs::create_directories(out_dir);
    std::ostringstream log;
    tml::TrainResult tm =
        tml::train_tm(pairs, cfg.model_config(tml::Role::TM), cfg.train_config(), &log);
    tml::checkpoint_save(out_dir + "/tm.ckpt", tm.model, &tm.optimizer);
    write_log(out_dir + "/tm-log.csv", log.str());
    tml::write_resolved_config(cfg, out_dir);
    std::cout << "train-tm: final loss " << tm.epoch_losses.back() << ", checkpoint "
              << out_dir << "/tm.ckpt\n";
    std::cout << log.str();
    return kExitOk;
}

int cmd_train(const tml::RunConfig& cfg, const std::string& tm_ckpt,
              const std::string& out_dir) {
    if (tm_ckpt.empty() || !fs::is_regular_file(tm_ckpt))
        throw tml::ConfigError("missing troublemaker checkpoint");
    tml::Model tm = load_model(tm_ckpt);
    tm.frozen = true;

    std::vector<tml::ImageBuffer> normals;
    if (cfg.data_mode == "synthetic") {
        normals = corpus_from(cfg).step2;
    } else {
        tml::DatasetSpec spec;
        spec.normal_dir = cfg.normal_dir;
        normals = tml::load_normals(spec);
    }
    fs::create_directories(out_dir);
    std::ostringstream log;
    tml::TrainConfig tc = cfg.train_config();
    tml::Step2Result r = tml::train_pm_em(tm, normals, cfg.model_config(tml::Role::PM),
                                          cfg.model_config(tml::Role::EM), tc, &log);
    tml::checkpoint_save(out_dir + "/pm.ckpt", r.pm.model, &r.pm.optimizer);
    if (tc.em_enabled)
        tml::checkpoint_save(out_dir + "/em.ckpt", r.em.model, &r.em.optimizer);
    write_log(out_dir + "/step2-log.csv", log.str());
    tml::write_resolved_config(cfg, out_dir);
    std::cout << "train: pm loss " << r.pm.epoch_losses.back();
    if (tc.em_enabled) std::cout << ", em loss " << r.em.epoch_losses.back();
    std::cout << ", checkpoints -> " << out_dir << "\n";
    std::cout << log.str();
    return kExitOk;
}

int cmd_enhance(const tml::RunConfig& cfg, const std::string& pm_ckpt,
                const std::string& em_ckpt, const std::string& in_dir,
                const std::string& out_dir, bool dump_residual) {
    tml::Model pm = load_model(pm_ckpt);
    pm.frozen = true;
    tml::Model em;
    bool have_em = !em_ckpt.empty();
    if (have_em) {
        em = load_model(em_ckpt);
        em.frozen = true;
    }
    tml::EmMode mode = cfg.em_mode == "off" ? tml::EmMode::Residual : cfg.em_mode_enum();
    fs::create_directories(out_dir);
    for (const auto& name : tml::list_ppm_files(in_dir)) {
        tml::ImageBuffer low = tml::load_ppm(in_dir + "/" + name);
        tml::ImageBuffer residual;
        tml::ImageBuffer enhanced =
            tml::enhance(pm, have_em ? &em : nullptr, mode, low,
                         dump_residual && have_em ? &residual : nullptr);
        tml::save_ppm(out_dir + "/" + name, enhanced);
        if (dump_residual && have_em && mode == tml::EmMode::Residual) {
            std::string base = name.substr(0, name.size() - 4);
            tml::save_ppm(out_dir + "/" + base + "-residual.ppm", residual);
        }
    }
    tml::write_resolved_config(cfg, out_dir);
    std::cout << "enhance: wrote " << tml::list_ppm_files(in_dir).size() << " images -> "
              << out_dir << "\n";
    return kExitOk;
}

int cmd_metrics(const std::string& pred, const std::string& ref) {
    std::vector<std::pair<std::string, std::string>> pairs;  // (pred path, ref path)
    if (fs::is_directory(pred) != fs::is_directory(ref))
        throw tml::ConfigError("--pred and --ref must both be files or both directories");
    if (fs::is_directory(pred)) {
        auto names = tml::list_ppm_files(pred);
        if (names != tml::list_ppm_files(ref))
            throw tml::ConfigError("prediction/reference directories hold different files");
        for (const auto& n : names) pairs.emplace_back(pred + "/" + n, ref + "/" + n);
    } else {
        pairs.emplace_back(pred, ref);
    }
    double psnr_sum = 0, ssim_sum = 0;
    std::cout << "name,psnr,ssim\n";
    for (const auto& [p, r] : pairs) {
        tml::ImageBuffer a = tml::load_ppm(p), b = tml::load_ppm(r);
        double ps = tml::psnr(a, b), ss = tml::ssim(a, b);
        psnr_sum += ps;
        ssim_sum += ss;
        std::cout << fs::path(p).filename().string() << "," << ps << "," << ss << "\n";
    }
    std::cout << "mean," << psnr_sum / pairs.size() << "," << ssim_sum / pairs.size() << "\n";
    return kExitOk;
}

int cmd_check_grad(std::uint64_t seed, int probes) {
    // The suite runs on the f64 instantiation so the finite-difference
    // stencil is not drowned by rounding noise; the graph code is identical.
    auto results = tml::gradient_suite<double>(seed, probes);
    double worst = 0;
    for (const auto& r : results) {
        std::cout << (r.max_rel <= 1e-3 ? "pass " : "FAIL ") << r.op << " max_rel=" << r.max_rel
                  << " probes=" << r.probes << "\n";
        worst = std::max(worst, r.max_rel);
    }
    std::cout << "check-grad: " << results.size() << " ops, worst max_rel=" << worst << "\n";
    return worst <= 1e-3 ? kExitOk : kExitVerifyFail;
}

int cmd_check_equiv(std::uint64_t seed) {
    double worst = 0;
    for (std::int64_t S : {4, 16, 64})
        for (std::int64_t E : {8, 32})
            for (std::uint64_t trial = 0; trial < 10; ++trial) {
                tml::Rng rng(seed + trial * 1009 + static_cast<std::uint64_t>(S * 131 + E));
                tml::Tensor q = tml::Tensor::randn(rng, {S, E});
                tml::Tensor k = tml::Tensor::randn(rng, {S, E});
                std::int64_t H = 1;
                while (H * H < S) ++H;  // S is a perfect square here
                tml::Tensor via_conv = tml::attention_map_via_conv(q, k, H, S / H);
                tml::Tensor direct =
                    tml::matmul<float>(nullptr, q, tml::transpose2d<float>(nullptr, k));
                for (std::int64_t i = 0; i < direct.size(); ++i)
                    worst = std::max(worst, std::abs(static_cast<double>(via_conv.data()[i]) -
                                                     static_cast<double>(direct.data()[i])));
            }
    std::cout << "check-equiv: max |A' - QK^T| = " << worst << " (bound 1e-5)\n";
    return worst <= 1e-5 ? kExitOk : kExitVerifyFail;
}

int cmd_bench(const std::string& block_name, std::vector<std::int64_t> sizes, int repeats,
              std::uint64_t seed, const std::string& out_csv) {
    tml::BenchBlock block;
    if (block_name == "gdc")
        block = tml::BenchBlock::GDC;
    else if (block_name == "attention")
        block = tml::BenchBlock::SelfAttention;
    else
        throw tml::ConfigError("unknown bench block '" + block_name + "'");
    if (sizes.empty())
        sizes = block == tml::BenchBlock::GDC
                    ? std::vector<std::int64_t>{64 * 64, 128 * 128, 256 * 256, 512 * 512}
                    : std::vector<std::int64_t>{32 * 32, 48 * 48, 64 * 64, 96 * 96};
    tml::BenchReport report = tml::scaling_bench(block, sizes, repeats, seed);
    std::string csv = tml::bench_csv(report);
    if (!out_csv.empty()) write_log(out_csv, csv);
    std::cout << csv;
    std::cout << "loglog_slope," << report.loglog_slope << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"TroubleMaker-learning low-light enhancement toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", checkpoint, em_checkpoint, in_dir;
    std::string pred, ref, block = "gdc", out_csv, em_mode_flag;
    std::vector<std::int64_t> sizes;
    std::uint64_t seed = 0;
    bool have_seed = false;
    int probes = 20, repeats = 5;
    bool dump_residual = false;
    std::string gdc_tm, gdc_pm, gdc_em;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "run configuration file");
        cmd->add_option("--seed", seed, "root seed override")->each([&](const std::string&) {
            have_seed = true;
        });
        cmd->add_option("--out", out_dir, "output directory");
    };
    auto add_toggles = [&](CLI::App* cmd) {
        cmd->add_option("--em-mode", em_mode_flag, "direct|residual|off");
        cmd->add_option("--gdc-tm", gdc_tm, "on|off: GDC block in TM");
        cmd->add_option("--gdc-pm", gdc_pm, "on|off: GDC block in PM");
        cmd->add_option("--gdc-em", gdc_em, "on|off: GDC block in EM");
    };

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic paired corpus");
    add_common(synth);
    CLI::App* train_tm = app.add_subcommand("train-tm", "step 1: train the troublemaker");
    add_common(train_tm);
    add_toggles(train_tm);
    CLI::App* train = app.add_subcommand("train", "step 2: train PM and EM with TM frozen");
    add_common(train);
    add_toggles(train);
    train->add_option("--checkpoint", checkpoint, "troublemaker checkpoint from train-tm");
    CLI::App* enhance = app.add_subcommand("enhance", "enhance low-light images");
    add_common(enhance);
    enhance->add_option("--checkpoint", checkpoint, "predicting-model checkpoint")->required();
    enhance->add_option("--em-checkpoint", em_checkpoint, "enhancing-model checkpoint");
    enhance->add_option("--in", in_dir, "directory of low-light .ppm images")->required();
    enhance->add_flag("--residual", dump_residual, "also write residual maps");
    enhance->add_option("--em-mode", em_mode_flag, "direct|residual");
    CLI::App* metrics = app.add_subcommand("metrics", "PSNR/SSIM for prediction vs reference");
    metrics->add_option("--pred", pred, "prediction image or directory")->required();
    metrics->add_option("--ref", ref, "reference image or directory")->required();
    CLI::App* check_grad = app.add_subcommand("check-grad", "finite-difference gradient suite");
    check_grad->add_option("--seed", seed, "suite seed");
    check_grad->add_option("--probes", probes, "probes per op (>= 20 for verification)");
    CLI::App* check_equiv =
        app.add_subcommand("check-equiv", "attention-map-by-convolution equivalence");
    check_equiv->add_option("--seed", seed, "trial seed");
    CLI::App* bench = app.add_subcommand("bench", "forward-pass scaling benchmark");
    bench->add_option("--block", block, "gdc|attention");
    bench->add_option("--sizes", sizes, "pixel counts, strictly increasing");
    bench->add_option("--repeats", repeats, "timed repeats per size (>= 5)");
    bench->add_option("--seed", seed, "input seed");
    bench->add_option("--csv", out_csv, "also write the CSV report to this path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (check_grad->parsed()) return cmd_check_grad(seed, probes);
        if (check_equiv->parsed()) return cmd_check_equiv(seed);
        if (bench->parsed()) return cmd_bench(block, sizes, repeats, seed, out_csv);
        if (metrics->parsed()) return cmd_metrics(pred, ref);

        tml::RunConfig cfg = load_config(config_path, have_seed ? &seed : nullptr);
        if (!em_mode_flag.empty()) cfg.em_mode = em_mode_flag;
        auto apply_toggle = [](const std::string& v, bool& field, const char* name) {
            if (v.empty()) return;
            if (v != "on" && v != "off") throw tml::ConfigError(std::string(name) + " must be on|off");
            field = v == "on";
        };
        apply_toggle(gdc_tm, cfg.gdc_tm, "--gdc-tm");
        apply_toggle(gdc_pm, cfg.gdc_pm, "--gdc-pm");
        apply_toggle(gdc_em, cfg.gdc_em, "--gdc-em");
        cfg.validate();

        if (synth->parsed()) return cmd_synth(cfg, out_dir);
        if (train_tm->parsed()) return cmd_train_tm(cfg, out_dir);
        if (train->parsed()) return cmd_train(cfg, checkpoint, out_dir);
        if (enhance->parsed())
            return cmd_enhance(cfg, checkpoint, em_checkpoint, in_dir, out_dir, dump_residual);
        throw tml::ConfigError("no subcommand");
    } catch (const tml::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    } catch (const tml::CheckpointError& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    } catch (const tml::IoError& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return kExitVerifyFail;
    }
}
