#pragma once

#include <ostream>
#include <vector>

#include "tml/checkpoint.hpp"
#include "tml/dataset.hpp"
#include "tml/optim.hpp"

namespace tml {

struct TrainConfig {
    AdamWConfig optimizer;  // lr 4e-5, betas 0.9/0.999, eps 1e-8, wd 1e-2
    int batch_size = 8;     // full-scale default; desk configs use 4
    int epochs_tm = 15;
    int epochs_pm = 15;
    int epochs_em = 30;
    std::uint64_t seed = 0;
    EmMode em_mode = EmMode::Residual;
    bool em_enabled = true;
};

struct TrainResult {
    Model model;
    AdamW optimizer;
    std::vector<double> epoch_losses;
};

// Step 1: supervised TM training on (normal input, low target) pairs.
// Logs one `tm,<epoch>,<loss>` line per epoch when `log` is given.
TrainResult train_tm(const std::vector<PairedSample>& pairs, const UGDCConfig& tm_cfg,
                     const TrainConfig& cfg, std::ostream* log = nullptr);

struct Step2Result {
    TrainResult pm;
    TrainResult em;  // empty model when EM is disabled
};

// Step 2: TM stays frozen; PM trains on PL = TM(I) against I, then PM is
// frozen and EM trains on PM(TM(I)) against I. Strictly sequential phases.
Step2Result train_pm_em(Model& tm, const std::vector<ImageBuffer>& normals,
                        const UGDCConfig& pm_cfg, const UGDCConfig& em_cfg,
                        const TrainConfig& cfg, std::ostream* log = nullptr);

// H = em_apply(EM, PM(low)); pads/crops to the model's divisibility
// requirement. `em` may be null (PM-only ablations). When residual_out is
// given (residual mode), the residual map is stored there normalized by its
// max as a grayscale image.
ImageBuffer enhance(Model& pm, Model* em, EmMode mode, const ImageBuffer& low,
                    ImageBuffer* residual_out = nullptr);

// [B,3,H,W] batch from equally sized images.
Tensor stack_images(const std::vector<const ImageBuffer*>& batch);

}  // namespace tml
