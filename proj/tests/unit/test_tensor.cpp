#include <doctest.h>

#include <cstring>

#include "tml/f32.hpp"

using namespace tml;

TEST_CASE("randn moments at 1e5 samples") {
    Rng rng(7);
    Tensor t = Tensor::randn(rng, {100000});
    double sum = 0, sq = 0;
    for (float v : t.data()) {
        sum += v;
        sq += double(v) * v;
    }
    double mean = sum / t.size();
    double var = sq / t.size() - mean * mean;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(std::sqrt(var) - 1.0) < 0.02);
}

TEST_CASE("random streams are deterministic and byte-identical per seed") {
    Rng a(123), b(123), c(124);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng d(123);
    (void)c.next_u64();
    Tensor ta = Tensor::randn(d, {257});
    Rng e(123);
    Tensor tb = Tensor::randn(e, {257});
    CHECK(std::memcmp(ta.data().data(), tb.data().data(), sizeof(float) * 257) == 0);
}

TEST_CASE("fan-out accumulates gradients") {
    Tensor x = Tensor::full({3}, 1.5f);
    Tape tape;
    tape.watch(x);
    Tensor y = add(&tape, x, x);  // both operands are the same leaf
    Tensor loss = reduce_sum(&tape, y);
    tape.backward(loss);
    for (float g : x.grad()) CHECK(g == doctest::Approx(2.0f));
}

TEST_CASE("reshape shares buffers and round-trips") {
    Rng rng(1);
    Tensor x = Tensor::randn(rng, {2, 3, 4});
    Tensor v = x.viewed_as({4, 6});
    CHECK(v.same_buffers(x.viewed_as({4, 6})));
    v.data()[0] = 42.0f;
    CHECK(x.data()[0] == 42.0f);
    CHECK(v.viewed_as({2, 3, 4}).shape() == x.shape());
    CHECK_THROWS_AS(x.viewed_as({5, 5}), ShapeError);
}

TEST_CASE("matmul against a hand oracle, with gradients") {
    Rng rng(3);
    Tensor a = Tensor::randn(rng, {3, 4});
    Tensor b = Tensor::randn(rng, {4, 2});
    Tape tape;
    tape.watch(a);
    tape.watch(b);
    Tensor y = matmul(&tape, a, b);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j) {
            float acc = 0;
            for (int k = 0; k < 4; ++k) acc += a.data()[i * 4 + k] * b.data()[k * 2 + j];
            CHECK(y.data()[i * 2 + j] == doctest::Approx(acc).epsilon(1e-5));
        }
    Tensor loss = reduce_sum(&tape, y);
    tape.backward(loss);
    // d(sum AB)/dA = 1 B^T: row sums of B
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 4; ++k)
            CHECK(a.grad()[i * 4 + k] ==
                  doctest::Approx(b.data()[k * 2] + b.data()[k * 2 + 1]).epsilon(1e-5));
}

TEST_CASE("softmax rows sum to one and are shift-invariant") {
    Rng rng(5);
    Tensor x = Tensor::randn(rng, {4, 7});
    Tensor y = softmax<float>(nullptr, x);
    for (int r = 0; r < 4; ++r) {
        float s = 0;
        for (int c = 0; c < 7; ++c) s += y.data()[r * 7 + c];
        CHECK(s == doctest::Approx(1.0f).epsilon(1e-6));
    }
    Tensor shifted = x.clone();
    for (float& v : shifted.data()) v += 100.0f;
    Tensor y2 = softmax<float>(nullptr, shifted);
    for (std::int64_t i = 0; i < y.size(); ++i)
        CHECK(y2.data()[i] == doctest::Approx(y.data()[i]).epsilon(1e-5));
}

TEST_CASE("concat_channels layout") {
    Tensor a = Tensor::full({1, 1, 2, 2}, 1.0f);
    Tensor b = Tensor::full({1, 2, 2, 2}, 2.0f);
    Tensor y = concat_channels<float>(nullptr, a, b);
    CHECK(y.shape() == Shape{1, 3, 2, 2});
    CHECK(y.data()[0] == 1.0f);
    CHECK(y.data()[4] == 2.0f);
    CHECK(y.data()[8] == 2.0f);
}

TEST_CASE("tape misuse is rejected") {
    Tensor x = Tensor::full({2}, 1.0f);
    Tape tape;
    tape.watch(x);
    Tensor y = reduce_sum(&tape, x);
    tape.backward(y);
    CHECK_THROWS_AS(tape.backward(y), ContractError);
    Tape t2;
    Tensor v = Tensor::full({2}, 1.0f);
    t2.watch(v);
    Tensor w = add(&t2, v, v);
    CHECK_THROWS_AS(t2.backward(w), ContractError);  // non-scalar loss
}
