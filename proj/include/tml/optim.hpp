#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tml/f32.hpp"

namespace tml {

struct AdamWConfig {
    float lr = 4e-5f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
    float weight_decay = 1e-2f;
};

// AdamW with decoupled weight decay: the decay term is applied directly to
// the parameters, never folded into the gradient moments.
class AdamW {
public:
    struct Slot {
        std::vector<float> m, v;
    };

    AdamW() = default;
    explicit AdamW(AdamWConfig cfg) : cfg_(cfg) {}

    const AdamWConfig& config() const { return cfg_; }
    std::uint64_t step_count() const { return step_; }
    std::vector<Slot>& slots() { return slots_; }
    std::uint64_t& step_counter() { return step_; }

    void attach(std::vector<std::pair<std::string, Tensor*>> params) {
        params_ = std::move(params);
        slots_.resize(params_.size());
        for (std::size_t i = 0; i < params_.size(); ++i) {
            slots_[i].m.assign(static_cast<std::size_t>(params_[i].second->size()), 0.0f);
            slots_[i].v.assign(static_cast<std::size_t>(params_[i].second->size()), 0.0f);
        }
        step_ = 0;
    }

    void step() {
        ++step_;
        float bc1 = 1.0f - std::pow(cfg_.beta1, static_cast<float>(step_));
        float bc2 = 1.0f - std::pow(cfg_.beta2, static_cast<float>(step_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            Tensor& p = *params_[i].second;
            if (!p.has_grad())
                throw ContractError("parameter '" + params_[i].first + "' has no gradient");
            auto& g = p.grad();
            auto& m = slots_[i].m;
            auto& v = slots_[i].v;
            auto& w = p.data();
            for (std::size_t j = 0; j < w.size(); ++j) {
                m[j] = cfg_.beta1 * m[j] + (1.0f - cfg_.beta1) * g[j];
                v[j] = cfg_.beta2 * v[j] + (1.0f - cfg_.beta2) * g[j] * g[j];
                float mhat = m[j] / bc1;
                float vhat = v[j] / bc2;
                w[j] -= cfg_.lr * (mhat / (std::sqrt(vhat) + cfg_.eps) +
                                   cfg_.weight_decay * w[j]);
            }
        }
    }

private:
    AdamWConfig cfg_;
    std::vector<std::pair<std::string, Tensor*>> params_;
    std::vector<Slot> slots_;
    std::uint64_t step_ = 0;
};

}  // namespace tml
