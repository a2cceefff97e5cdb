#pragma once

#include <vector>

#include "hoidet/model.hpp"

namespace hoidet {

/// AdamW: decoupled weight decay is applied directly (not scaled by the
/// step size), so a zero step size still shrinks parameters when decay > 0.
struct OptimizerConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
};

struct TrainConfig {
    OptimizerConfig optim;
    int steps = 1000;
    CostWeights cost_weights;
    LossWeights loss_weights;
    FocalParams focal;
};

/// One full-batch step. `loss.total` is the mean over images of the
/// auxiliary-summed objective (the quantity optimized); the component
/// fields are means of the final decoder layer's terms.
struct StepLog {
    int step = 0;
    LossBreakdown loss;
};

struct TrainResult {
    ParamSet params;
    std::vector<StepLog> log;
};

/// Deterministic full-batch training from the seeded initialization in
/// `cfg`. Throws std::invalid_argument on an empty or inconsistent
/// dataset, std::runtime_error (with the step index) if the loss turns
/// non-finite.
TrainResult train(const std::vector<Tensor>& images,
                  const std::vector<std::vector<GtInstance>>& gts, const ModelConfig& cfg,
                  const TrainConfig& tcfg);

/// In-place AdamW update; m/v must persist across calls, t is 1-based.
void adamw_step(ParamSet& params, const std::vector<Tensor>& grads, std::vector<Tensor>& m,
                std::vector<Tensor>& v, int t, const OptimizerConfig& opt);

}  // namespace hoidet
