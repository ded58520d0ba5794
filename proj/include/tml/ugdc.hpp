#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tml/gdc.hpp"

namespace tml {

enum class Role { TM, PM, EM };
enum class EmMode { Direct, Residual };
enum class Head { Sigmoid, Tanh, None };

inline const char* role_name(Role r) {
    switch (r) {
        case Role::TM: return "TM";
        case Role::PM: return "PM";
        default: return "EM";
    }
}

struct UGDCConfig {
    std::int64_t depth = 3;
    std::int64_t base_channels = 16;
    std::int64_t in_channels = 3;
    std::int64_t out_channels = 3;
    // Stage identifiers where a GDC block replaces the stage's second conv:
    // enc0..enc{depth-1}, bottleneck, dec0..dec{depth-1}.
    std::set<std::string> gdc_stages{"bottleneck"};
    GDCConfig gdc;  // grid/embed/kernel sizes; channels filled per stage

    bool operator==(const UGDCConfig& o) const {
        return depth == o.depth && base_channels == o.base_channels &&
               in_channels == o.in_channels && out_channels == o.out_channels &&
               gdc_stages == o.gdc_stages && gdc.grid_h == o.gdc.grid_h &&
               gdc.grid_w == o.gdc.grid_w && gdc.embed == o.gdc.embed &&
               gdc.k_kernel == o.gdc.k_kernel && gdc.q_kernel == o.gdc.q_kernel &&
               gdc.out_kernel == o.gdc.out_kernel;
    }

    std::vector<std::string> stage_names() const {
        std::vector<std::string> names;
        for (std::int64_t l = 0; l < depth; ++l) names.push_back("enc" + std::to_string(l));
        names.push_back("bottleneck");
        for (std::int64_t l = 0; l < depth; ++l) names.push_back("dec" + std::to_string(l));
        return names;
    }

    void validate() const {
        if (depth < 1 || base_channels < 1) throw ConfigError("depth/base-channels must be >= 1");
        auto names = stage_names();
        for (const auto& s : gdc_stages)
            if (std::find(names.begin(), names.end(), s) == names.end())
                throw ConfigError("unknown gdc stage '" + s + "'");
    }
};

template <class R>
struct ConvLayerT {
    TensorT<R> w, b;
    ConvSpec spec;
};

template <class R>
struct StageT {
    std::string name;
    ConvLayerT<R> conv1;
    bool use_gdc = false;
    ConvLayerT<R> conv2;    // when !use_gdc
    GDCParamsT<R> gdc;      // when use_gdc
    GDCConfig gdc_cfg;
};

template <class R>
class ModelT {
public:
    Role role = Role::TM;
    UGDCConfig config;
    std::vector<StageT<R>> enc;
    StageT<R> bottleneck;
    std::vector<StageT<R>> dec;  // dec[l] operates at encoder level l's resolution
    ConvLayerT<R> head;          // 1x1 projection to out_channels
    bool frozen = false;

    // Stable, build-order parameter enumeration.
    std::vector<std::pair<std::string, TensorT<R>*>> named_params() {
        std::vector<std::pair<std::string, TensorT<R>*>> out;
        auto add_stage = [&out](StageT<R>& s) {
            out.emplace_back(s.name + ".conv1.w", &s.conv1.w);
            out.emplace_back(s.name + ".conv1.b", &s.conv1.b);
            if (s.use_gdc) {
                s.gdc.for_each([&out, &s](const char* n, TensorT<R>& t) {
                    out.emplace_back(s.name + ".gdc." + n, &t);
                });
            } else {
                out.emplace_back(s.name + ".conv2.w", &s.conv2.w);
                out.emplace_back(s.name + ".conv2.b", &s.conv2.b);
            }
        };
        for (auto& s : enc) add_stage(s);
        add_stage(bottleneck);
        for (auto it = dec.rbegin(); it != dec.rend(); ++it) add_stage(*it);
        out.emplace_back("head.w", &head.w);
        out.emplace_back("head.b", &head.b);
        return out;
    }

    std::int64_t param_count() {
        std::int64_t n = 0;
        for (auto& [name, t] : named_params()) n += t->size();
        return n;
    }

    void watch_params(TapeT<R>& tape) {
        if (frozen) throw ContractError("watch_params on a frozen model");
        for (auto& [name, t] : named_params()) tape.watch(*t);
    }

    void zero_grads() {
        for (auto& [name, t] : named_params()) t->zero_grad();
    }
};

namespace detail {

template <class R>
ConvLayerT<R> make_conv(Rng& rng, std::int64_t in, std::int64_t out, std::int64_t k,
                        bool zero_init = false) {
    ConvLayerT<R> c;
    c.spec = ConvSpec{k, k, 1, (k - 1) / 2};
    c.w = zero_init ? TensorT<R>::zeros({out, in, k, k})
                    : he_uniform<R>(rng, {out, in, k, k}, in * k * k);
    c.b = TensorT<R>::zeros({out});
    return c;
}

template <class R>
StageT<R> make_stage(Rng& rng, const UGDCConfig& cfg, const std::string& name, std::int64_t in,
                     std::int64_t out) {
    StageT<R> s;
    s.name = name;
    s.conv1 = make_conv<R>(rng, in, out, 3);
    s.use_gdc = cfg.gdc_stages.count(name) > 0;
    if (s.use_gdc) {
        s.gdc_cfg = cfg.gdc;
        s.gdc_cfg.in_channels = out;
        s.gdc_cfg.out_channels = out;
        s.gdc = gdc_init<R>(s.gdc_cfg, rng);
    } else {
        s.conv2 = make_conv<R>(rng, out, out, 3);
    }
    return s;
}

}  // namespace detail

template <class R>
ModelT<R> build_model(Role role, const UGDCConfig& cfg, Rng& rng) {
    cfg.validate();
    ModelT<R> m;
    m.role = role;
    m.config = cfg;
    std::int64_t ch = cfg.in_channels;
    for (std::int64_t l = 0; l < cfg.depth; ++l) {
        std::int64_t out = cfg.base_channels << l;
        m.enc.push_back(detail::make_stage<R>(rng, cfg, "enc" + std::to_string(l), ch, out));
        ch = out;
    }
    std::int64_t bch = cfg.base_channels << cfg.depth;
    m.bottleneck = detail::make_stage<R>(rng, cfg, "bottleneck", ch, bch);
    m.dec.resize(cfg.depth);
    std::int64_t deep = bch;
    for (std::int64_t l = cfg.depth - 1; l >= 0; --l) {
        std::int64_t skip = cfg.base_channels << l;
        m.dec[l] = detail::make_stage<R>(rng, cfg, "dec" + std::to_string(l), deep + skip, skip);
        deep = skip;
    }
    // EM's output head starts at zero so residual mode opens as the identity.
    m.head = detail::make_conv<R>(rng, cfg.base_channels, cfg.out_channels, 1,
                                  role == Role::EM);
    return m;
}

namespace detail {

template <class R>
TensorT<R> run_stage(TapeT<R>* tape, StageT<R>& s, TensorT<R> x) {
    x = conv2d(tape, x, s.conv1.w, s.conv1.b, s.conv1.spec);
    x = leaky_relu(tape, x, R(0.1));
    if (s.use_gdc)
        x = gdc_forward(tape, x, s.gdc, s.gdc_cfg);
    else
        x = conv2d(tape, x, s.conv2.w, s.conv2.b, s.conv2.spec);
    return leaky_relu(tape, x, R(0.1));
}

}  // namespace detail

// U-Net forward; final activation selected by `head` (sigmoid squashes to
// [0,1], tanh to [-1,1] for the residual path).
template <class R>
TensorT<R> forward(ModelT<R>& m, TensorT<R> x, TapeT<R>* tape = nullptr,
                   Head head = Head::Sigmoid) {
    if (m.frozen && tape) throw ContractError("forward through a frozen model with a tape");
    if (x.ndim() != 4 || x.extent(1) != m.config.in_channels)
        throw ShapeError("forward expects [N," + std::to_string(m.config.in_channels) + ",H,W]");
    std::int64_t div = std::int64_t(1) << m.config.depth;
    if (x.extent(2) % div || x.extent(3) % div)
        throw ShapeError("spatial extents must be divisible by 2^depth = " + std::to_string(div));

    std::vector<TensorT<R>> skips;
    for (auto& s : m.enc) {
        x = detail::run_stage(tape, s, x);
        skips.push_back(x);
        x = downsample2x(tape, x);
    }
    x = detail::run_stage(tape, m.bottleneck, x);
    for (std::int64_t l = m.config.depth - 1; l >= 0; --l) {
        x = upsample2x(tape, x);
        x = concat_channels(tape, skips[static_cast<std::size_t>(l)], x);
        x = detail::run_stage(tape, m.dec[static_cast<std::size_t>(l)], x);
    }
    x = conv2d(tape, x, m.head.w, m.head.b, m.head.spec);
    switch (head) {
        case Head::Sigmoid: return sigmoid(tape, x);
        case Head::Tanh: return tanh_op(tape, x);
        default: return x;
    }
}

// Clamp to [0,1]; gradient passes only through the interior.
template <class R>
TensorT<R> clamp01(TapeT<R>* tape, TensorT<R> a) {
    TensorT<R> out(a.shape());
    for (std::int64_t i = 0; i < a.size(); ++i)
        out.data()[i] = std::min(R(1), std::max(R(0), a.data()[i]));
    if (detail::taping(tape, {&a}, out))
        tape->record([a, out]() mutable {
            for (std::int64_t i = 0; i < a.size(); ++i)
                if (a.data()[i] > R(0) && a.data()[i] < R(1)) a.grad()[i] += out.grad()[i];
        });
    return out;
}

// Direct mode: H = EM(H'). Residual mode: H = clamp(H' - r, 0, 1) with the
// residual head bounded in [-1,1] so the correction can take either sign.
template <class R>
TensorT<R> em_apply(ModelT<R>& em, TensorT<R> h_prime, EmMode mode, TapeT<R>* tape = nullptr) {
    if (mode == EmMode::Direct) return forward(em, h_prime, tape, Head::Sigmoid);
    TensorT<R> residual = forward(em, h_prime, tape, Head::Tanh);
    return clamp01(tape, sub(tape, h_prime, residual));
}

// MAC count of a forward pass at H x W for one sample.
template <class R>
std::int64_t model_flops(ModelT<R>& m, std::int64_t H, std::int64_t W) {
    auto conv_macs = [](const ConvLayerT<R>& c, std::int64_t h, std::int64_t w) {
        return h * w * c.w.extent(0) * c.w.extent(1) * c.spec.kh * c.spec.kw;
    };
    auto stage_macs = [&](StageT<R>& s, std::int64_t h, std::int64_t w) {
        std::int64_t macs = conv_macs(s.conv1, h, w);
        if (s.use_gdc)
            macs += gdc_flops(s.gdc_cfg, h, w);
        else
            macs += conv_macs(s.conv2, h, w);
        return macs;
    };
    std::int64_t macs = 0, h = H, w = W;
    for (auto& s : m.enc) {
        macs += stage_macs(s, h, w);
        h /= 2;
        w /= 2;
    }
    macs += stage_macs(m.bottleneck, h, w);
    for (std::int64_t l = m.config.depth - 1; l >= 0; --l) {
        h *= 2;
        w *= 2;
        macs += stage_macs(m.dec[static_cast<std::size_t>(l)], h, w);
    }
    macs += conv_macs(m.head, H, W);
    return macs;
}

}  // namespace tml
