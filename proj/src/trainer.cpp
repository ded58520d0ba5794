#include "tml/trainer.hpp"

#include <cmath>

namespace tml {

Tensor stack_images(const std::vector<const ImageBuffer*>& batch) {
    if (batch.empty()) throw ContractError("empty batch");
    std::int64_t h = batch[0]->height, w = batch[0]->width;
    Tensor t({static_cast<std::int64_t>(batch.size()), 3, h, w});
    std::int64_t hw = h * w;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const ImageBuffer& img = *batch[b];
        if (img.height != h || img.width != w) throw ShapeError("batch images differ in size");
        float* dst = t.data().data() + static_cast<std::int64_t>(b) * 3 * hw;
        for (std::int64_t p = 0; p < hw; ++p)
            for (int c = 0; c < 3; ++c) dst[c * hw + p] = img.pixels[p * 3 + c];
    }
    return t;
}

namespace {

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t count, int batch_size,
                                                    Rng& rng) {
    std::vector<std::size_t> order(count);
    for (std::size_t i = 0; i < count; ++i) order[i] = i;
    for (std::size_t i = count; i > 1; --i) {
        std::size_t j = rng.below(i);
        std::swap(order[i - 1], order[j]);
    }
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t i = 0; i < count; i += static_cast<std::size_t>(batch_size))
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                             order.begin() +
                                 static_cast<std::ptrdiff_t>(std::min(
                                     count, i + static_cast<std::size_t>(batch_size))));
    return batches;
}

void log_epoch(std::ostream* log, const char* phase, int epoch, double loss) {
    if (log) *log << phase << "," << epoch << "," << loss << "\n";
}

void check_finite(double loss, const char* phase) {
    if (!std::isfinite(loss))
        throw ContractError(std::string(phase) + ": non-finite training loss");
}

}  // namespace

TrainResult train_tm(const std::vector<PairedSample>& pairs, const UGDCConfig& tm_cfg,
                     const TrainConfig& cfg, std::ostream* log) {
    if (pairs.empty()) throw ConfigError("train_tm: empty dataset");
    if (cfg.batch_size < 1) throw ConfigError("batch size must be >= 1");
    Rng rng(cfg.seed);
    TrainResult result;
    result.model = build_model<float>(Role::TM, tm_cfg, rng);
    result.optimizer = AdamW(cfg.optimizer);
    result.optimizer.attach(result.model.named_params());

    for (int epoch = 1; epoch <= cfg.epochs_tm; ++epoch) {
        double epoch_loss = 0.0;
        auto batches = epoch_batches(pairs.size(), cfg.batch_size, rng);
        for (const auto& batch : batches) {
            std::vector<const ImageBuffer*> ins, targets;
            for (std::size_t idx : batch) {
                ins.push_back(&pairs[idx].normal);
                targets.push_back(&pairs[idx].low);
            }
            Tape tape;
            result.model.zero_grads();
            result.model.watch_params(tape);
            Tensor pred = forward(result.model, stack_images(ins), &tape);
            Tensor loss = smooth_l1(&tape, pred, stack_images(targets));
            tape.backward(loss);
            result.optimizer.step();
            epoch_loss += static_cast<double>(loss.item());
        }
        epoch_loss /= static_cast<double>(batches.size());
        check_finite(epoch_loss, "tm");
        log_epoch(log, "tm", epoch, epoch_loss);
        result.epoch_losses.push_back(epoch_loss);
    }
    return result;
}

Step2Result train_pm_em(Model& tm, const std::vector<ImageBuffer>& normals,
                        const UGDCConfig& pm_cfg, const UGDCConfig& em_cfg,
                        const TrainConfig& cfg, std::ostream* log) {
    if (!tm.frozen) throw ContractError("step 2 requires a frozen TM");
    if (normals.empty()) throw ConfigError("train_pm_em: empty dataset");
    Rng rng(cfg.seed + 1);
    Step2Result result;
    result.pm.model = build_model<float>(Role::PM, pm_cfg, rng);
    result.pm.optimizer = AdamW(cfg.optimizer);
    result.pm.optimizer.attach(result.pm.model.named_params());

    for (int epoch = 1; epoch <= cfg.epochs_pm; ++epoch) {
        double epoch_loss = 0.0;
        auto batches = epoch_batches(normals.size(), cfg.batch_size, rng);
        for (const auto& batch : batches) {
            std::vector<const ImageBuffer*> ins;
            for (std::size_t idx : batch) ins.push_back(&normals[idx]);
            Tensor reference = stack_images(ins);
            Tensor pl = forward(tm, reference);  // tape-free: TM is frozen
            Tape tape;
            result.pm.model.zero_grads();
            result.pm.model.watch_params(tape);
            Tensor pred = forward(result.pm.model, pl, &tape);
            Tensor loss = smooth_l1(&tape, pred, reference);
            tape.backward(loss);
            result.pm.optimizer.step();
            epoch_loss += static_cast<double>(loss.item());
        }
        epoch_loss /= static_cast<double>(batches.size());
        check_finite(epoch_loss, "pm");
        log_epoch(log, "pm", epoch, epoch_loss);
        result.pm.epoch_losses.push_back(epoch_loss);
    }

    if (!cfg.em_enabled) return result;

    result.pm.model.frozen = true;
    result.em.model = build_model<float>(Role::EM, em_cfg, rng);
    result.em.optimizer = AdamW(cfg.optimizer);
    result.em.optimizer.attach(result.em.model.named_params());
    for (int epoch = 1; epoch <= cfg.epochs_em; ++epoch) {
        double epoch_loss = 0.0;
        auto batches = epoch_batches(normals.size(), cfg.batch_size, rng);
        for (const auto& batch : batches) {
            std::vector<const ImageBuffer*> ins;
            for (std::size_t idx : batch) ins.push_back(&normals[idx]);
            Tensor reference = stack_images(ins);
            Tensor h_prime = forward(result.pm.model, forward(tm, reference));
            Tape tape;
            result.em.model.zero_grads();
            result.em.model.watch_params(tape);
            Tensor pred = em_apply(result.em.model, h_prime, cfg.em_mode, &tape);
            Tensor loss = smooth_l1(&tape, pred, reference);
            tape.backward(loss);
            result.em.optimizer.step();
            epoch_loss += static_cast<double>(loss.item());
        }
        epoch_loss /= static_cast<double>(batches.size());
        check_finite(epoch_loss, "em");
        log_epoch(log, "em", epoch, epoch_loss);
        result.em.epoch_losses.push_back(epoch_loss);
    }
    result.pm.model.frozen = false;
    return result;
}

ImageBuffer enhance(Model& pm, Model* em, EmMode mode, const ImageBuffer& low,
                    ImageBuffer* residual_out) {
    std::int64_t multiple = std::int64_t(1) << pm.config.depth;
    ImageBuffer padded = pad_reflect(low, multiple);
    Tensor x = image_to_tensor(padded);
    Tensor h = forward(pm, x);
    if (em) {
        if (residual_out && mode == EmMode::Residual) {
            Tensor residual = forward<float>(*em, h, nullptr, Head::Tanh);
            float mx = 0.0f;
            for (float v : residual.data()) mx = std::max(mx, std::abs(v));
            Tensor norm = residual.clone();
            if (mx > 0.0f)
                for (float& v : norm.data()) v = std::abs(v) / mx;
            *residual_out = tensor_to_image(norm);
            h = clamp01<float>(nullptr, sub<float>(nullptr, h, residual));
        } else {
            h = em_apply(*em, h, mode);
        }
    }
    return crop(tensor_to_image(h), low.width, low.height);
}

}  // namespace tml
