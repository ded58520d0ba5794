#include <doctest.h>

#include "tml/config.hpp"

using namespace tml;

namespace {

UGDCConfig small_cfg() {
    UGDCConfig cfg;
    cfg.depth = 2;
    cfg.base_channels = 4;
    cfg.gdc.grid_h = 2;
    cfg.gdc.grid_w = 2;
    cfg.gdc.embed = 4;
    return cfg;
}

}  // namespace

TEST_CASE("forward preserves spatial shape and respects divisibility") {
    Rng rng(41);
    Model m = build_model<float>(Role::PM, small_cfg(), rng);
    Tensor x = Tensor::randn(rng, {2, 3, 16, 24});
    Tensor y = forward(m, x);
    CHECK(y.shape() == Shape{2, 3, 16, 24});
    for (float v : y.data()) {
        CHECK(v > 0.0f);  // sigmoid head
        CHECK(v < 1.0f);
    }
    Tensor bad = Tensor::randn(rng, {1, 3, 10, 16});
    CHECK_THROWS_AS(forward(m, bad), ShapeError);
}

TEST_CASE("default configuration parameter count is pinned") {
    RunConfig rc;
    Rng rng(0);
    Model m = build_model<float>(Role::PM, rc.model_config(Role::PM), rng);
    CHECK(m.param_count() == 391139);
    CHECK(model_flops(m, 64, 64) == 160964608);
}

TEST_CASE("EM head starts at zero and residual mode opens as the identity") {
    Rng rng(43);
    Model em = build_model<float>(Role::EM, small_cfg(), rng);
    for (float v : em.head.w.data()) CHECK(v == 0.0f);
    Tensor h = Tensor::randn(rng, {1, 3, 8, 8}, 0.5f, 0.1f);
    for (float& v : h.data()) v = std::min(0.99f, std::max(0.01f, v));
    Tensor out = em_apply(em, h, EmMode::Residual);
    for (std::int64_t i = 0; i < h.size(); ++i) CHECK(out.data()[i] == h.data()[i]);
    // direct mode at zero init is NOT the identity
    Tensor direct = em_apply(em, h, EmMode::Direct);
    CHECK(direct.data()[0] == doctest::Approx(0.5f).epsilon(1e-5));
}

TEST_CASE("frozen model rejects taped forwards but allows inference") {
    Rng rng(47);
    Model m = build_model<float>(Role::TM, small_cfg(), rng);
    m.frozen = true;
    Tensor x = Tensor::randn(rng, {1, 3, 8, 8});
    CHECK_NOTHROW(forward(m, x));
    Tape tape;
    CHECK_THROWS_AS(forward(m, x, &tape), ContractError);
    CHECK_THROWS_AS(m.watch_params(tape), ContractError);
}

TEST_CASE("gdc stage placement follows the config") {
    UGDCConfig cfg = small_cfg();
    cfg.gdc_stages = {"enc0", "dec1"};
    Rng rng(53);
    Model m = build_model<float>(Role::PM, cfg, rng);
    CHECK(m.enc[0].use_gdc);
    CHECK(!m.enc[1].use_gdc);
    CHECK(!m.bottleneck.use_gdc);
    CHECK(m.dec[1].use_gdc);
    cfg.gdc_stages = {"enc9"};
    CHECK_THROWS_AS(build_model<float>(Role::PM, cfg, rng), ConfigError);
}

TEST_CASE("named parameter order is stable and build-complete") {
    Rng rng(59);
    Model m = build_model<float>(Role::PM, small_cfg(), rng);
    auto names = m.named_params();
    CHECK(names.front().first == "enc0.conv1.w");
    CHECK(names.back().first == "head.b");
    std::int64_t total = 0;
    for (auto& [n, t] : names) total += t->size();
    CHECK(total == m.param_count());
}
