#pragma once

#include <cmath>
#include <cstdint>

#include "tml/conv.hpp"
#include "tml/tensor.hpp"

namespace tml {

// Global dynamic convolution block. The pooled-patch grid is fixed
// (S = grid_h * grid_w) independent of input size, so the dynamic stage costs
// O(S*E*H*W) — linear in pixel count for fixed S, E.
struct GDCConfig {
    std::int64_t grid_h = 8;
    std::int64_t grid_w = 8;
    std::int64_t embed = 32;       // E
    std::int64_t in_channels = 0;  // C
    std::int64_t out_channels = 0; // O
    std::int64_t k_kernel = 1;     // conv before adding diff
    std::int64_t q_kernel = 3;     // projection of X to E channels
    std::int64_t out_kernel = 1;   // final transform of the correlation map

    std::int64_t tokens() const { return grid_h * grid_w; }  // S
};

template <class R>
struct GDCParamsT {
    TensorT<R> k_w, k_b;      // [E, C, k, k], [E]
    TensorT<R> q_w, q_b;      // [E, C, k, k], [E]
    TensorT<R> out_w, out_b;  // [O, S, k, k], [O]
    TensorT<R> diff;          // [S, E], trainable offset added to the kernels

    template <class F>
    void for_each(F&& f) {
        f("k.w", k_w);
        f("k.b", k_b);
        f("q.w", q_w);
        f("q.b", q_b);
        f("out.w", out_w);
        f("out.b", out_b);
        f("diff", diff);
    }
};

namespace detail {

// He-style fan-in scaled uniform init: U(-sqrt(6/fan_in), +sqrt(6/fan_in)).
template <class R>
TensorT<R> he_uniform(Rng& rng, Shape shape, std::int64_t fan_in) {
    TensorT<R> t(std::move(shape));
    double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (R& v : t.data()) v = static_cast<R>(rng.uniform(-limit, limit));
    return t;
}

}  // namespace detail

template <class R>
GDCParamsT<R> gdc_init(const GDCConfig& cfg, Rng& rng) {
    if (cfg.in_channels < 1 || cfg.out_channels < 1 || cfg.embed < 1 || cfg.tokens() < 1)
        throw ConfigError("gdc config has non-positive extents");
    GDCParamsT<R> p;
    std::int64_t C = cfg.in_channels, E = cfg.embed, S = cfg.tokens(), O = cfg.out_channels;
    p.k_w = detail::he_uniform<R>(rng, {E, C, cfg.k_kernel, cfg.k_kernel},
                                  C * cfg.k_kernel * cfg.k_kernel);
    p.k_b = TensorT<R>::zeros({E});
    p.q_w = detail::he_uniform<R>(rng, {E, C, cfg.q_kernel, cfg.q_kernel},
                                  C * cfg.q_kernel * cfg.q_kernel);
    p.q_b = TensorT<R>::zeros({E});
    p.out_w = detail::he_uniform<R>(rng, {O, S, cfg.out_kernel, cfg.out_kernel},
                                    S * cfg.out_kernel * cfg.out_kernel);
    p.out_b = TensorT<R>::zeros({O});
    // Zero diff makes the block a plain composition of static convs at start.
    p.diff = TensorT<R>::zeros({S, E});
    return p;
}

// Adds diff [S,E] to each sample of k [N,S,E].
template <class R>
TensorT<R> add_diff(TapeT<R>* tape, TensorT<R> k, TensorT<R> diff) {
    if (k.ndim() != 3 || diff.ndim() != 2 || k.extent(1) != diff.extent(0) ||
        k.extent(2) != diff.extent(1))
        throw ShapeError("add_diff: " + shape_str(k.shape()) + " vs " + shape_str(diff.shape()));
    std::int64_t N = k.extent(0), SE = diff.size();
    TensorT<R> out(k.shape());
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t i = 0; i < SE; ++i)
            out.data()[n * SE + i] = k.data()[n * SE + i] + diff.data()[i];
    if (detail::taping(tape, {&k, &diff}, out))
        tape->record([k, diff, out, N, SE]() mutable {
            const auto& g = out.grad();
            for (std::int64_t n = 0; n < N; ++n)
                for (std::int64_t i = 0; i < SE; ++i) {
                    k.grad()[n * SE + i] += g[n * SE + i];
                    diff.grad()[i] += g[n * SE + i];
                }
        });
    return out;
}

// K' = Conv(Patch(X)) + diff; Q' = Conv(X); A' = Conv_K'(Q'); Y = Conv(A').
template <class R>
TensorT<R> gdc_forward(TapeT<R>* tape, TensorT<R> x, GDCParamsT<R>& params,
                       const GDCConfig& cfg) {
    if (x.ndim() != 4) throw ShapeError("gdc_forward expects [N,C,H,W]");
    std::int64_t N = x.extent(0);
    std::int64_t S = cfg.tokens(), E = cfg.embed;
    if (x.extent(1) != cfg.in_channels)
        throw ShapeError("gdc_forward channel count " + std::to_string(x.extent(1)));

    // Dynamic kernels from pooled patches.
    TensorT<R> pooled = patch_pool(tape, x, cfg.grid_h, cfg.grid_w);
    ConvSpec kspec{cfg.k_kernel, cfg.k_kernel, 1, (cfg.k_kernel - 1) / 2};
    TensorT<R> kmap = conv2d(tape, pooled, params.k_w, params.k_b, kspec);  // [N,E,gh,gw]
    // [N,E,S] -> per-token E-vectors [N,S,E]
    TensorT<R> kflat = reshape(tape, kmap, {N, E, S});
    TensorT<R> kernels(Shape{N, S, E});
    {
        TensorT<R> src = kflat;
        TensorT<R>& dst = kernels;
        for (std::int64_t n = 0; n < N; ++n)
            for (std::int64_t e = 0; e < E; ++e)
                for (std::int64_t s = 0; s < S; ++s)
                    dst.data()[(n * S + s) * E + e] = src.data()[(n * E + e) * S + s];
        if (detail::taping(tape, {&src}, dst))
            tape->record([src, dst, N, E, S]() mutable {
                for (std::int64_t n = 0; n < N; ++n)
                    for (std::int64_t e = 0; e < E; ++e)
                        for (std::int64_t s = 0; s < S; ++s)
                            src.grad()[(n * E + e) * S + s] += dst.grad()[(n * S + s) * E + e];
            });
    }
    kernels = add_diff(tape, kernels, params.diff);

    ConvSpec qspec{cfg.q_kernel, cfg.q_kernel, 1, (cfg.q_kernel - 1) / 2};
    TensorT<R> q = conv2d(tape, x, params.q_w, params.q_b, qspec);  // [N,E,H,W]
    TensorT<R> amap = conv2d_dynamic(tape, q, kernels);             // [N,S,H,W]
    ConvSpec ospec{cfg.out_kernel, cfg.out_kernel, 1, (cfg.out_kernel - 1) / 2};
    return conv2d(tape, amap, params.out_w, params.out_b, ospec);   // [N,O,H,W]
}

// Multiply-accumulate count of the four stages for one sample.
inline std::int64_t gdc_flops(const GDCConfig& cfg, std::int64_t H, std::int64_t W) {
    std::int64_t S = cfg.tokens(), E = cfg.embed, C = cfg.in_channels, O = cfg.out_channels;
    std::int64_t macs = 0;
    macs += H * W * C;                                        // patch pooling
    macs += S * E * C * cfg.k_kernel * cfg.k_kernel;          // kernel projection
    macs += H * W * E * C * cfg.q_kernel * cfg.q_kernel;      // query projection
    macs += H * W * S * E;                                    // dynamic convolution
    macs += H * W * O * S * cfg.out_kernel * cfg.out_kernel;  // output transform
    return macs;
}

// ---------------------------------------------------------------------------
// Reference self-attention and the attention-map equivalence
// ---------------------------------------------------------------------------

struct AttentionConfig {
    std::int64_t tokens = 0;
    std::int64_t d_k = 0;
};

// Y = softmax(Q K^T / sqrt(d_k)) V over [S,E] operands.
template <class R>
TensorT<R> self_attention(TapeT<R>* tape, TensorT<R> q, TensorT<R> k, TensorT<R> v) {
    if (q.ndim() != 2 || k.shape() != q.shape() || v.shape() != q.shape())
        throw ShapeError("self_attention expects equal [S,E] Q, K, V");
    std::int64_t E = q.extent(1);
    TensorT<R> a = matmul(tape, q, transpose2d(tape, k));
    a = scalar_mul(tape, a, static_cast<R>(1.0 / std::sqrt(static_cast<double>(E))));
    return matmul(tape, softmax(tape, a), v);
}

// Computes the attention map A = Q K^T by the convolution route: Q reshaped
// to a feature map [1,E,H,W], each row of K applied as a 1x1xE kernel.
template <class R>
TensorT<R> attention_map_via_conv(TensorT<R> q, TensorT<R> k, std::int64_t H, std::int64_t W) {
    if (q.ndim() != 2 || k.shape() != q.shape())
        throw ShapeError("attention_map_via_conv expects equal [S,E] Q and K");
    std::int64_t S = q.extent(0), E = q.extent(1);
    if (H * W != S) throw ShapeError("map shape H*W != S");
    // Q is stored token-major [S,E]; the feature map wants channel-major
    // [E,S], i.e. a plain transpose followed by a relabeling to [1,E,H,W].
    TensorT<R> qmap = transpose2d<R>(nullptr, q).viewed_as({1, E, H, W});
    TensorT<R> kernels = k.viewed_as({1, S, E});
    // amap[s, t] = K[s]·Q[t]; the contract indexes query tokens first.
    TensorT<R> amap = conv2d_dynamic<R>(nullptr, qmap, kernels);  // [1,S,H,W]
    return transpose2d<R>(nullptr, amap.viewed_as({S, S}));
}

}  // namespace tml
