#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tml/loss.hpp"
#include "tml/ugdc.hpp"

namespace tml {

// Relative error with denominator max(|a|, |b|, 1e-6).
inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

struct GradCheckResult {
    std::string op;
    double max_rel = 0.0;
    int probes = 0;
};

namespace detail {

// Pushes coordinates away from non-differentiable kink points so the
// central-difference stencil never straddles one.
template <class R>
void avoid_kinks(TensorT<R>& x, const std::vector<double>& kinks, double margin) {
    for (R& v : x.data())
        for (double k : kinks) {
            double d = static_cast<double>(v) - k;
            if (std::abs(d) < margin) v = static_cast<R>(k + (d < 0 ? -margin : margin));
        }
}

}  // namespace detail

// One probe = a fresh random input plus a set of sampled coordinates checked
// by scalar central differences against the tape gradient. coords < 0 checks
// every coordinate.
template <class R>
GradCheckResult grad_check(const std::string& name,
                           const std::function<TensorT<R>(TapeT<R>*, TensorT<R>)>& f,
                           const std::function<TensorT<R>(Rng&)>& make_input, Rng& rng,
                           int probes = 20, int coords = -1,
                           R h = std::is_same_v<R, double> ? R(1e-6) : R(1e-3)) {
    GradCheckResult result{name, 0.0, probes};
    for (int p = 0; p < probes; ++p) {
        TensorT<R> x = make_input(rng);
        TapeT<R> tape;
        tape.watch(x);
        TensorT<R> loss = f(&tape, x);
        tape.backward(loss);
        TensorT<R> analytic = x.grad_tensor();

        std::int64_t total = x.size();
        std::int64_t sample = coords < 0 ? total : std::min<std::int64_t>(coords, total);
        TensorT<R> probe = x.clone();
        for (std::int64_t s = 0; s < sample; ++s) {
            std::int64_t i = coords < 0 ? s : static_cast<std::int64_t>(rng.below(
                                                  static_cast<std::uint64_t>(total)));
            R orig = probe.data()[i];
            probe.data()[i] = orig + h;
            R fp = f(nullptr, probe.clone()).item();
            probe.data()[i] = orig - h;
            R fm = f(nullptr, probe.clone()).item();
            probe.data()[i] = orig;
            double numeric = static_cast<double>(fp - fm) / (2.0 * static_cast<double>(h));
            result.max_rel = std::max(
                result.max_rel, rel_err(static_cast<double>(analytic.data()[i]), numeric));
        }
    }
    return result;
}

template <class R>
void GDCParams_check(std::vector<GradCheckResult>& results, const GDCConfig& cfg, Rng& init,
                     Rng& fixed, Rng& rng, int probes);

// Finite-difference suite over every differentiable op, the GDC block end to
// end, smooth-L1, and the full UGDC model at [1,3,16,16]. Each op is
// scalarized by a fixed random weighting so gradients stay O(1).
template <class R>
std::vector<GradCheckResult> gradient_suite(std::uint64_t seed, int probes = 20) {
    std::vector<GradCheckResult> results;
    Rng rng(seed);
    Rng fixed(seed + 0x517cc1b7);

    auto randn_maker = [](Shape shape, double sigma = 1.0) {
        return std::function<TensorT<R>(Rng&)>([shape, sigma](Rng& r) {
            return TensorT<R>::randn(r, shape, R(0), static_cast<R>(sigma));
        });
    };
    // sum(y * w) with a fixed weight tensor of y's shape.
    auto weigh = [](TapeT<R>* t, TensorT<R> y, const TensorT<R>& w) {
        return reduce_sum(t, mul(t, y, w.viewed_as(y.shape())));
    };

    using Fn = std::function<TensorT<R>(TapeT<R>*, TensorT<R>)>;

    {  // elementwise binary ops against a fixed second operand
        TensorT<R> b = TensorT<R>::randn(fixed, {4, 6});
        TensorT<R> w = TensorT<R>::randn(fixed, {4, 6});
        results.push_back(grad_check<R>(
            "add", Fn([b, w, weigh](TapeT<R>* t, TensorT<R> x) mutable {
                return weigh(t, add(t, x, b), w);
            }),
            randn_maker({4, 6}), rng, probes));
        results.push_back(grad_check<R>(
            "sub", Fn([b, w, weigh](TapeT<R>* t, TensorT<R> x) mutable {
                return weigh(t, sub(t, b, x), w);
            }),
            randn_maker({4, 6}), rng, probes));
        results.push_back(grad_check<R>(
            "mul", Fn([b, w, weigh](TapeT<R>* t, TensorT<R> x) mutable {
                return weigh(t, mul(t, x, b), w);
            }),
            randn_maker({4, 6}), rng, probes));
        results.push_back(grad_check<R>(
            "scalar-mul", Fn([w, weigh](TapeT<R>* t, TensorT<R> x) mutable {
                return weigh(t, scalar_mul(t, x, R(-1.7)), w);
            }),
            randn_maker({4, 6}), rng, probes));
        auto away_from_zero = [](Rng& r) {
            TensorT<R> x = TensorT<R>::randn(r, {4, 6});
            detail::avoid_kinks(x, {0.0}, 0.05);
            return x;
        };
        results.push_back(grad_check<R>(
            "relu", Fn([w, weigh](TapeT<R>* t, TensorT<R> x) mutable {
                return weigh(t, relu(t, x), w);
            }),
            away_from_zero, rng, probes));
        results.push_back(grad_check<R>(
            "leaky-relu", Fn([w, weigh](TapeT<R>* t, TensorT<R> x) mutable {
                return weigh(t, leaky_relu(t, x, R(0.2)), w);
            }),
            away_from_zero, rng, probes));
        results.push_back(grad_check<R>(
            "sigmoid", Fn([w, weigh](TapeT<R>* t, TensorT<R> x) mutable {
                return weigh(t, sigmoid(t, x), w);
            }),
            randn_maker({4, 6}), rng, probes));
        results.push_back(grad_check<R>(
            "tanh", Fn([w, weigh](TapeT<R>* t, TensorT<R> x) mutable {
                return weigh(t, tanh_op(t, x), w);
            }),
            randn_maker({4, 6}), rng, probes));
    }

    {  // matmul: left and right operands
        TensorT<R> other = TensorT<R>::randn(fixed, {4, 3});
        TensorT<R> w = TensorT<R>::randn(fixed, {5, 3});
        results.push_back(grad_check<R>(
            "matmul.lhs", Fn([other, w, weigh](TapeT<R>* t, TensorT<R> x) mutable {
                return weigh(t, matmul(t, x, other), w);
            }),
            randn_maker({5, 4}), rng, probes));
        TensorT<R> lhs = TensorT<R>::randn(fixed, {5, 4});
        results.push_back(grad_check<R>(
            "matmul.rhs", Fn([lhs, w, weigh](TapeT<R>* t, TensorT<R> x) mutable {
                return weigh(t, matmul(t, lhs, x), w);
            }),
            randn_maker({4, 3}), rng, probes));
    }

    {  // layout ops
        TensorT<R> w = TensorT<R>::randn(fixed, {24});
        results.push_back(grad_check<R>(
            "transpose", Fn([w, weigh](TapeT<R>* t, TensorT<R> x) mutable {
                return weigh(t, transpose2d(t, x), w);
            }),
            randn_maker({4, 6}), rng, probes));
        TensorT<R> cat_other = TensorT<R>::randn(fixed, {1, 2, 3, 4});
        TensorT<R> cat_w = TensorT<R>::randn(fixed, {1, 5, 3, 4});
        results.push_back(grad_check<R>(
            "concat-channels", Fn([cat_other, cat_w, weigh](TapeT<R>* t, TensorT<R> x) mutable {
                return weigh(t, concat_channels(t, x, cat_other), cat_w);
            }),
            randn_maker({1, 3, 3, 4}), rng, probes));
    }

    {  // softmax and reductions
        TensorT<R> w = TensorT<R>::randn(fixed, {3, 8});
        results.push_back(grad_check<R>(
            "softmax", Fn([w, weigh](TapeT<R>* t, TensorT<R> x) mutable {
                return weigh(t, softmax(t, x), w);
            }),
            randn_maker({3, 8}), rng, probes));
        results.push_back(grad_check<R>(
            "sum", Fn([](TapeT<R>* t, TensorT<R> x) { return reduce_sum(t, x); }),
            randn_maker({3, 8}), rng, probes));
        results.push_back(grad_check<R>(
            "mean", Fn([](TapeT<R>* t, TensorT<R> x) { return reduce_mean(t, x); }),
            randn_maker({3, 8}), rng, probes));
    }

    {  // conv2d w.r.t. input, weights, bias
        ConvSpec spec{3, 3, 1, 1};
        TensorT<R> cw = TensorT<R>::randn(fixed, {4, 3, 3, 3}, R(0), R(0.5));
        TensorT<R> cb = TensorT<R>::randn(fixed, {4});
        TensorT<R> w = TensorT<R>::randn(fixed, {1, 4, 6, 5});
        results.push_back(grad_check<R>(
            "conv2d.x", Fn([cw, cb, spec, w, weigh](TapeT<R>* t, TensorT<R> x) mutable {
                return weigh(t, conv2d(t, x, cw, cb, spec), w);
            }),
            randn_maker({1, 3, 6, 5}), rng, probes));
        TensorT<R> cx = TensorT<R>::randn(fixed, {1, 3, 6, 5});
        results.push_back(grad_check<R>(
            "conv2d.w", Fn([cx, cb, spec, w, weigh](TapeT<R>* t, TensorT<R> x) mutable {
                return weigh(t, conv2d(t, cx, x, cb, spec), w);
            }),
            randn_maker({4, 3, 3, 3}, 0.5), rng, probes));
        TensorT<R> cw2 = cw;
        results.push_back(grad_check<R>(
            "conv2d.b", Fn([cx, cw2, spec, w, weigh](TapeT<R>* t, TensorT<R> x) mutable {
                return weigh(t, conv2d(t, cx, cw2, x, spec), w);
            }),
            randn_maker({4}), rng, probes));
    }

    {  // conv2d_dynamic w.r.t. input and kernels
        TensorT<R> kern = TensorT<R>::randn(fixed, {2, 5, 4});
        TensorT<R> w = TensorT<R>::randn(fixed, {2, 5, 3, 4});
        results.push_back(grad_check<R>(
            "conv2d-dynamic.x", Fn([kern, w, weigh](TapeT<R>* t, TensorT<R> x) mutable {
                return weigh(t, conv2d_dynamic(t, x, kern), w);
            }),
            randn_maker({2, 4, 3, 4}), rng, probes));
        TensorT<R> dx = TensorT<R>::randn(fixed, {2, 4, 3, 4});
        results.push_back(grad_check<R>(
            "conv2d-dynamic.kernels", Fn([dx, w, weigh](TapeT<R>* t, TensorT<R> x) mutable {
                return weigh(t, conv2d_dynamic(t, dx, x), w);
            }),
            randn_maker({2, 5, 4}), rng, probes));
    }

    {  // pooling and resampling
        TensorT<R> w = TensorT<R>::randn(fixed, {1, 2, 2, 2});
        results.push_back(grad_check<R>(
            "patch-pool", Fn([w, weigh](TapeT<R>* t, TensorT<R> x) mutable {
                return weigh(t, patch_pool(t, x, 2, 2), w);
            }),
            randn_maker({1, 2, 5, 6}), rng, probes));
        TensorT<R> wd = TensorT<R>::randn(fixed, {1, 2, 3, 2});
        results.push_back(grad_check<R>(
            "downsample2x", Fn([wd, weigh](TapeT<R>* t, TensorT<R> x) mutable {
                return weigh(t, downsample2x(t, x), wd);
            }),
            randn_maker({1, 2, 6, 4}), rng, probes));
        TensorT<R> wu = TensorT<R>::randn(fixed, {1, 2, 6, 4});
        results.push_back(grad_check<R>(
            "upsample2x", Fn([wu, weigh](TapeT<R>* t, TensorT<R> x) mutable {
                return weigh(t, upsample2x(t, x), wu);
            }),
            randn_maker({1, 2, 3, 2}), rng, probes));
    }

    {  // smooth-L1 against a fixed target, kept clear of the |d| = 1 kink
        TensorT<R> target = TensorT<R>::zeros({4, 6});
        auto clear_of_kink = [](Rng& r) {
            TensorT<R> x = TensorT<R>::randn(r, {4, 6});
            detail::avoid_kinks(x, {-1.0, 1.0}, 0.05);
            return x;
        };
        results.push_back(grad_check<R>(
            "smooth-l1", Fn([target](TapeT<R>* t, TensorT<R> x) mutable {
                return smooth_l1(t, x, target);
            }),
            clear_of_kink, rng, probes));
    }

    {  // GDC block end-to-end: input and every parameter
        GDCConfig cfg;
        cfg.grid_h = 2;
        cfg.grid_w = 2;
        cfg.embed = 3;
        cfg.in_channels = 2;
        cfg.out_channels = 2;
        Rng init(seed + 11);
        GDCParams_check<R>(results, cfg, init, fixed, rng, probes);
    }

    {  // full UGDC at [1,3,16,16]: input and representative parameters
        UGDCConfig cfg;
        cfg.base_channels = 4;
        cfg.gdc.grid_h = 2;
        cfg.gdc.grid_w = 2;
        cfg.gdc.embed = 4;
        Rng init(seed + 13);
        ModelT<R> model = build_model<R>(Role::PM, cfg, init);
        TensorT<R> w = TensorT<R>::randn(fixed, {1, 3, 16, 16});
        results.push_back(grad_check<R>(
            "ugdc.x", Fn([model, w, weigh](TapeT<R>* t, TensorT<R> x) mutable {
                return weigh(t, forward(model, x, t), w);
            }),
            randn_maker({1, 3, 16, 16}, 0.5), rng, probes, 4));
        TensorT<R> x0 = TensorT<R>::randn(fixed, {1, 3, 16, 16}, R(0), R(0.5));
        for (const char* pname : {"enc0.conv1.w", "bottleneck.gdc.diff", "head.w"}) {
            ModelT<R> m = model;  // shared buffers; grad isolated per probe below
            auto params = m.named_params();
            TensorT<R>* slot = nullptr;
            for (auto& [n, t] : params)
                if (n == pname) slot = t;
            Shape pshape = slot->shape();
            std::string sname = pname;
            results.push_back(grad_check<R>(
                "ugdc." + sname,
                Fn([m, x0, w, weigh, sname](TapeT<R>* t, TensorT<R> x) mutable {
                    ModelT<R> local = m;
                    for (auto& [n, pt] : local.named_params())
                        if (n == sname) *pt = x;
                    return weigh(t, forward(local, x0, t), w);
                }),
                randn_maker(pshape, 0.5), rng, probes, 4));
        }
    }

    return results;
}

// GDC entries split out to keep gradient_suite readable.
template <class R>
void GDCParams_check(std::vector<GradCheckResult>& results, const GDCConfig& cfg, Rng& init,
                     Rng& fixed, Rng& rng, int probes) {
    GDCParamsT<R> params = gdc_init<R>(cfg, init);
    for (auto& v : params.diff.data()) v = static_cast<R>(init.uniform(-0.2, 0.2));
    TensorT<R> w = TensorT<R>::randn(fixed, {1, cfg.out_channels, 6, 6});
    TensorT<R> x0 = TensorT<R>::randn(fixed, {1, cfg.in_channels, 6, 6}, R(0), R(0.5));
    auto weigh = [](TapeT<R>* t, TensorT<R> y, const TensorT<R>& w2) {
        return reduce_sum(t, mul(t, y, w2.viewed_as(y.shape())));
    };
    using Fn = std::function<TensorT<R>(TapeT<R>*, TensorT<R>)>;
    results.push_back(grad_check<R>(
        "gdc.x", Fn([params, cfg, w, weigh](TapeT<R>* t, TensorT<R> x) mutable {
            return weigh(t, gdc_forward(t, x, params, cfg), w);
        }),
        [cfg](Rng& r) { return TensorT<R>::randn(r, {1, cfg.in_channels, 6, 6}, R(0), R(0.5)); },
        rng, probes, 8));
    struct Entry {
        const char* name;
        TensorT<R> GDCParamsT<R>::* member;
    };
    const Entry entries[] = {
        {"gdc.k_w", &GDCParamsT<R>::k_w},     {"gdc.k_b", &GDCParamsT<R>::k_b},
        {"gdc.q_w", &GDCParamsT<R>::q_w},     {"gdc.q_b", &GDCParamsT<R>::q_b},
        {"gdc.out_w", &GDCParamsT<R>::out_w}, {"gdc.out_b", &GDCParamsT<R>::out_b},
        {"gdc.diff", &GDCParamsT<R>::diff},
    };
    for (const Entry& e : entries) {
        Shape pshape = (params.*(e.member)).shape();
        auto member = e.member;
        results.push_back(grad_check<R>(
            e.name, Fn([params, cfg, x0, w, weigh, member](TapeT<R>* t, TensorT<R> x) mutable {
                GDCParamsT<R> local = params;
                local.*member = x;
                return weigh(t, gdc_forward(t, x0, local, cfg), w);
            }),
            [pshape](Rng& r) { return TensorT<R>::randn(r, pshape, R(0), R(0.5)); }, rng,
            probes, 8));
    }
}

}  // namespace tml
