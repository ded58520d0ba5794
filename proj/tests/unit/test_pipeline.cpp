#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tml/config.hpp"
#include "tml/loss.hpp"

using namespace tml;
namespace fs = std::filesystem;

namespace {

UGDCConfig tiny_cfg() {
    UGDCConfig cfg;
    cfg.depth = 1;
    cfg.base_channels = 2;
    cfg.gdc.grid_h = 2;
    cfg.gdc.grid_w = 2;
    cfg.gdc.embed = 2;
    return cfg;
}

std::string temp_path(const char* name) {
    return (fs::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("smooth-L1 closed forms and branch continuity") {
    auto loss_at = [](float d) {
        Tensor pred = Tensor::full({5}, d);
        Tensor target = Tensor::zeros({5});
        return smooth_l1<float>(nullptr, pred, target).item();
    };
    CHECK(std::abs(loss_at(0.0f) - 0.0f) <= 1e-7);
    CHECK(std::abs(loss_at(0.5f) - 0.125f) <= 1e-7);
    CHECK(std::abs(loss_at(2.0f) - 1.5f) <= 1e-7);
    CHECK(std::abs(loss_at(-2.0f) - 1.5f) <= 1e-7);
    CHECK(std::abs(loss_at(1.0f + 1e-4f) - loss_at(1.0f - 1e-4f)) < 1e-3);
}

TEST_CASE("AdamW follows a scalar reference implementation") {
    Tensor p = Tensor::full({1}, 1.0f);
    AdamWConfig cfg;
    cfg.lr = 0.01f;
    AdamW opt(cfg);
    opt.attach({{"p", &p}});
    double w = 1.0, m = 0.0, v = 0.0;
    for (int step = 1; step <= 10; ++step) {
        float g = 0.3f * float(step);  // arbitrary deterministic gradients
        p.ensure_grad();
        p.grad()[0] = g;
        opt.step();
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * double(g) * g;
        double mhat = m / (1.0 - std::pow(0.9, step));
        double vhat = v / (1.0 - std::pow(0.999, step));
        w -= 0.01 * (mhat / (std::sqrt(vhat) + 1e-8) + 0.01 * w);
        CHECK(std::abs(p.data()[0] - w) <= 1e-6);
    }
    // missing gradient is a contract violation
    Tensor q = Tensor::full({1}, 1.0f);
    AdamW opt2(cfg);
    opt2.attach({{"q", &q}});
    CHECK_THROWS_AS(opt2.step(), ContractError);
}

TEST_CASE("checkpoint round-trips byte-exactly and rejects corruption") {
    Rng rng(61);
    Model m = build_model<float>(Role::PM, tiny_cfg(), rng);
    AdamW opt;
    opt.attach(m.named_params());
    std::string path = temp_path("tml-test.ckpt");
    checkpoint_save(path, m, &opt);

    Model m2 = build_model<float>(Role::PM, tiny_cfg(), rng);
    AdamW opt2;
    opt2.attach(m2.named_params());
    checkpoint_load(path, m2, &opt2);
    CHECK(parameter_bytes(m) == parameter_bytes(m2));

    // a second save of the loaded model is byte-identical
    std::string path2 = temp_path("tml-test2.ckpt");
    checkpoint_save(path2, m2, &opt2);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    std::stringstream s1, s2;
    s1 << f1.rdbuf();
    s2 << f2.rdbuf();
    CHECK(s1.str() == s2.str());

    // flipped payload byte -> checksum failure
    std::string bytes = s1.str();
    std::string corrupt_path = temp_path("tml-corrupt.ckpt");
    std::string corrupt = bytes;
    corrupt[corrupt.size() / 2] ^= 0x40;
    std::ofstream(corrupt_path, std::ios::binary) << corrupt;
    CHECK_THROWS_AS(checkpoint_load(corrupt_path, m2), ChecksumError);

    // headerless stub -> truncation; mid-file cut -> checksum failure
    std::ofstream(corrupt_path, std::ios::binary) << bytes.substr(0, 10);
    CHECK_THROWS_AS(checkpoint_load(corrupt_path, m2), TruncationError);
    std::ofstream(corrupt_path, std::ios::binary) << bytes.substr(0, bytes.size() / 3);
    CHECK_THROWS_AS(checkpoint_load(corrupt_path, m2), CheckpointError);

    // bad version field (bytes 4..7 after the magic)
    corrupt = bytes;
    corrupt[4] = char(0x99);
    std::ofstream(corrupt_path, std::ios::binary) << corrupt;
    CHECK_THROWS_AS(checkpoint_load(corrupt_path, m2), VersionError);

    // mismatched architecture
    UGDCConfig other = tiny_cfg();
    other.base_channels = 4;
    Model m3 = build_model<float>(Role::PM, other, rng);
    CHECK_THROWS_AS(checkpoint_load(path, m3), ConfigError);

    Role role;
    UGDCConfig peeked = checkpoint_peek_config(path, &role);
    CHECK(role == Role::PM);
    CHECK(peeked == tiny_cfg());
    fs::remove(path);
    fs::remove(path2);
    fs::remove(corrupt_path);
}

TEST_CASE("darken follows clamp(gain * v^gamma + noise)") {
    ImageBuffer img = ImageBuffer::filled(4, 4, 0.64f);
    DarkenParams p;
    p.gamma = 2.0f;
    p.gain = 0.5f;
    p.sigma = 0.0f;
    Rng rng(67);
    ImageBuffer low = darken(img, p, rng);
    for (float v : low.pixels) CHECK(v == doctest::Approx(0.5f * 0.64f * 0.64f).epsilon(1e-6));
}

TEST_CASE("synthetic corpus is seed-deterministic") {
    SyntheticDarkener d;
    SynthCorpus a = make_synth_corpus(99, d, 16, 2, 3, 1);
    SynthCorpus b = make_synth_corpus(99, d, 16, 2, 3, 1);
    CHECK(a.train.size() == 2);
    CHECK(a.step2.size() == 3);
    CHECK(a.test.size() == 1);
    CHECK(a.train[0].low.pixels == b.train[0].low.pixels);
    CHECK(a.step2[2].pixels == b.step2[2].pixels);
    SynthCorpus c = make_synth_corpus(100, d, 16, 2, 3, 1);
    CHECK(a.train[0].normal.pixels != c.train[0].normal.pixels);
}

TEST_CASE("two identically seeded training runs emit identical logs") {
    SyntheticDarkener d;
    SynthCorpus corpus = make_synth_corpus(5, d, 16, 4, 4, 0);
    TrainConfig tc;
    tc.batch_size = 2;
    tc.epochs_tm = 2;
    tc.epochs_pm = 1;
    tc.epochs_em = 1;
    tc.optimizer.lr = 1e-3f;
    tc.seed = 5;
    auto run = [&]() {
        std::ostringstream log;
        TrainResult tm = train_tm(corpus.train, tiny_cfg(), tc, &log);
        tm.model.frozen = true;
        train_pm_em(tm.model, corpus.step2, tiny_cfg(), tiny_cfg(), tc, &log);
        return log.str();
    };
    std::string log1 = run();
    std::string log2 = run();
    CHECK(log1 == log2);
    CHECK(log1.find("tm,1,") != std::string::npos);
    CHECK(log1.find("pm,1,") != std::string::npos);
    CHECK(log1.find("em,1,") != std::string::npos);
}

TEST_CASE("step 2 requires a frozen troublemaker") {
    SyntheticDarkener d;
    SynthCorpus corpus = make_synth_corpus(6, d, 16, 1, 2, 0);
    TrainConfig tc;
    tc.epochs_pm = 1;
    tc.epochs_em = 1;
    tc.batch_size = 2;
    Rng rng(71);
    Model tm = build_model<float>(Role::TM, tiny_cfg(), rng);
    CHECK_THROWS_AS(train_pm_em(tm, corpus.step2, tiny_cfg(), tiny_cfg(), tc), ContractError);
}

TEST_CASE("the data layer logs every opened file") {
    std::string dir = temp_path("tml-data");
    fs::create_directories(dir + "/normal");
    SyntheticDarkener d;
    SynthCorpus corpus = make_synth_corpus(7, d, 16, 0, 2, 0);
    save_ppm(dir + "/normal/a.ppm", corpus.step2[0]);
    save_ppm(dir + "/normal/b.ppm", corpus.step2[1]);
    DatasetSpec spec;
    spec.normal_dir = dir + "/normal";
    AccessLog log;
    auto normals = load_normals(spec, &log);
    CHECK(normals.size() == 2);
    REQUIRE(log.opened.size() == 2);
    for (const auto& p : log.opened) CHECK(p.find("/normal/") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("ppm io round-trips byte-exactly") {
    SyntheticDarkener d;
    SynthCorpus corpus = make_synth_corpus(8, d, 16, 0, 1, 0);
    std::string p1 = temp_path("tml-a.ppm"), p2 = temp_path("tml-b.ppm");
    save_ppm(p1, corpus.step2[0]);
    ImageBuffer decoded = load_ppm(p1);
    save_ppm(p2, decoded);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::stringstream s1, s2;
    s1 << f1.rdbuf();
    s2 << f2.rdbuf();
    CHECK(s1.str() == s2.str());
    CHECK(s1.str().size() == 16 * 16 * 3 + 13);  // "P6\n16 16\n255\n" + payload
    fs::remove(p1);
    fs::remove(p2);
}

TEST_CASE("reflect padding and cropping invert each other") {
    SyntheticDarkener d;
    SynthCorpus corpus = make_synth_corpus(9, d, 20, 0, 1, 0);
    ImageBuffer img = crop(corpus.step2[0], 18, 14);
    ImageBuffer padded = pad_reflect(img, 8);
    CHECK(padded.width == 24);
    CHECK(padded.height == 16);
    ImageBuffer back = crop(padded, 18, 14);
    CHECK(back.pixels == img.pixels);
}
