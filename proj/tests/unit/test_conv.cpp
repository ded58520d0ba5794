#include <doctest.h>

#include "tml/f32.hpp"

using namespace tml;

namespace {

// Straight 7-loop reference convolution: no im2col, no gemm.
Tensor conv_oracle(const Tensor& x, const Tensor& w, const Tensor& b, ConvSpec s) {
    std::int64_t N = x.extent(0), C = x.extent(1), H = x.extent(2), W = x.extent(3);
    std::int64_t O = w.extent(0);
    std::int64_t OH = s.out_extent(H, s.kh), OW = s.out_extent(W, s.kw);
    Tensor y({N, O, OH, OW});
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t o = 0; o < O; ++o)
            for (std::int64_t oh = 0; oh < OH; ++oh)
                for (std::int64_t ow = 0; ow < OW; ++ow) {
                    double acc = b.data()[o];
                    for (std::int64_t c = 0; c < C; ++c)
                        for (std::int64_t kh = 0; kh < s.kh; ++kh)
                            for (std::int64_t kw = 0; kw < s.kw; ++kw) {
                                std::int64_t ih = oh * s.stride + kh - s.pad;
                                std::int64_t iw = ow * s.stride + kw - s.pad;
                                if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                                acc += double(x.data()[((n * C + c) * H + ih) * W + iw]) *
                                       double(w.data()[((o * C + c) * s.kh + kh) * s.kw + kw]);
                            }
                    y.data()[((n * O + o) * OH + oh) * OW + ow] = float(acc);
                }
    return y;
}

Tensor dynamic_oracle(const Tensor& x, const Tensor& k) {
    std::int64_t N = x.extent(0), E = x.extent(1), H = x.extent(2), W = x.extent(3);
    std::int64_t S = k.extent(1);
    Tensor y({N, S, H, W});
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t s = 0; s < S; ++s)
            for (std::int64_t h = 0; h < H; ++h)
                for (std::int64_t w = 0; w < W; ++w) {
                    double acc = 0;
                    for (std::int64_t e = 0; e < E; ++e)
                        acc += double(k.data()[(n * S + s) * E + e]) *
                               double(x.data()[((n * E + e) * H + h) * W + w]);
                    y.data()[((n * S + s) * H + h) * W + w] = float(acc);
                }
    return y;
}

}  // namespace

TEST_CASE("conv2d matches the naive oracle over randomized cases") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        std::int64_t k = std::int64_t(1) + 2 * rng.below(3);  // 1, 3, 5
        ConvSpec spec{k, k, std::int64_t(1) + std::int64_t(rng.below(2)), (k - 1) / 2};
        std::int64_t C = 1 + std::int64_t(rng.below(8)), O = 1 + std::int64_t(rng.below(8));
        std::int64_t H = k + std::int64_t(rng.below(12)), W = k + std::int64_t(rng.below(12));
        Tensor x = Tensor::randn(rng, {2, C, H, W}, 0.0f, 0.5f);
        Tensor w = Tensor::randn(rng, {O, C, k, k}, 0.0f, 0.5f);
        Tensor b = Tensor::randn(rng, {O});
        Tensor fast = conv2d<float>(nullptr, x, w, b, spec);
        Tensor ref = conv_oracle(x, w, b, spec);
        REQUIRE(fast.shape() == ref.shape());
        for (std::int64_t i = 0; i < ref.size(); ++i)
            CHECK(std::abs(fast.data()[i] - ref.data()[i]) <= 1e-5);
    }
}

TEST_CASE("conv2d backward matches oracle finite differences in f64") {
    Rng rng(13);
    ConvSpec spec{3, 3, 1, 1};
    TensorT<double> x = TensorT<double>::randn(rng, {1, 2, 5, 4});
    TensorT<double> w = TensorT<double>::randn(rng, {3, 2, 3, 3});
    TensorT<double> b = TensorT<double>::randn(rng, {3});
    auto run = [&](TapeT<double>* t) {
        return reduce_mean(t, conv2d(t, x, w, b, spec));
    };
    TapeT<double> tape;
    tape.watch(x);
    tape.watch(w);
    TensorT<double> loss = run(&tape);
    tape.backward(loss);
    for (auto* p : {&x, &w}) {
        TensorT<double> g = p->grad_tensor();
        for (std::int64_t i = 0; i < p->size(); ++i) {
            double orig = p->data()[i];
            double h = 1e-6;
            p->data()[i] = orig + h;
            double fp = run(nullptr).item();
            p->data()[i] = orig - h;
            double fm = run(nullptr).item();
            p->data()[i] = orig;
            CHECK(g.data()[i] == doctest::Approx((fp - fm) / (2 * h)).epsilon(1e-5));
        }
    }
}

TEST_CASE("conv2d_dynamic matches its oracle and reduces to matmul at 1x1") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        std::int64_t E = 1 + std::int64_t(rng.below(8)), S = 1 + std::int64_t(rng.below(10));
        std::int64_t H = 1 + std::int64_t(rng.below(8)), W = 1 + std::int64_t(rng.below(8));
        Tensor x = Tensor::randn(rng, {2, E, H, W});
        Tensor k = Tensor::randn(rng, {2, S, E});
        Tensor fast = conv2d_dynamic<float>(nullptr, x, k);
        Tensor ref = dynamic_oracle(x, k);
        for (std::int64_t i = 0; i < ref.size(); ++i)
            CHECK(std::abs(fast.data()[i] - ref.data()[i]) <= 1e-6);
    }
    // H = W = 1: out[n,s] = sum_e k[n,s,e] x[n,e] — a per-sample matmul
    Tensor x = Tensor::randn(rng, {1, 5, 1, 1});
    Tensor k = Tensor::randn(rng, {1, 4, 5});
    Tensor y = conv2d_dynamic<float>(nullptr, x, k);
    Tensor mm = matmul<float>(nullptr, k.viewed_as({4, 5}), x.viewed_as({5, 1}));
    for (std::int64_t i = 0; i < 4; ++i)
        CHECK(y.data()[i] == doctest::Approx(mm.data()[i]).epsilon(1e-6));
}

TEST_CASE("patch_pool averages half-open windows") {
    Tensor x({1, 1, 4, 6});
    for (std::int64_t i = 0; i < 24; ++i) x.data()[i] = float(i);
    Tensor y = patch_pool<float>(nullptr, x, 2, 2);
    CHECK(y.shape() == Shape{1, 1, 2, 2});
    // window rows 0-1, cols 0-2: mean of {0,1,2,6,7,8}
    CHECK(y.data()[0] == doctest::Approx(4.0f));
    CHECK(y.data()[3] == doctest::Approx(19.0f));
    // pooling to the input size is the identity
    Tensor id = patch_pool<float>(nullptr, x, 4, 6);
    for (std::int64_t i = 0; i < 24; ++i) CHECK(id.data()[i] == x.data()[i]);
}

TEST_CASE("downsample/upsample round trip") {
    Rng rng(19);
    Tensor x = Tensor::randn(rng, {1, 3, 4, 6});
    Tensor up = upsample2x<float>(nullptr, x);
    CHECK(up.shape() == Shape{1, 3, 8, 12});
    Tensor down = downsample2x<float>(nullptr, up);
    for (std::int64_t i = 0; i < x.size(); ++i) CHECK(down.data()[i] == x.data()[i]);
    CHECK_THROWS_AS(downsample2x<float>(nullptr, Tensor({1, 1, 3, 4})), ShapeError);
}
