#pragma once

#include <vector>

#include "hoidet/assignment.hpp"

namespace hoidet {

struct LossWeights {
    double lambda_b = 2.5;
    double lambda_u = 1.0;
    double lambda_c = 1.0;
    double lambda_a = 1.0;
};

struct FocalParams {
    double gamma = 2.0;
};

/// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] before any
/// logarithm so saturated sigmoid/softmax outputs keep losses finite.
inline constexpr double kProbClamp = 1e-7;

struct LossBreakdown {
    double box = 0.0;
    double giou = 0.0;
    double obj_class = 0.0;
    double action = 0.0;
    double total = 0.0;
};

/// Mean over real ground truths of human L1 + object L1; 0 without gts.
double box_loss(const std::vector<GtInstance>& gts, const std::vector<Prediction>& preds,
                const Assignment& assignment);

/// Mean over real ground truths of 2 - giou_h - giou_o; 0 without gts.
double giou_loss(const std::vector<GtInstance>& gts, const std::vector<Prediction>& preds,
                 const Assignment& assignment);

/// Mean over all queries of the negative log-likelihood of the target
/// object class (the gt class when matched, the no-pair class otherwise).
double class_loss(const std::vector<GtInstance>& gts, const std::vector<Prediction>& preds,
                  const Assignment& assignment);

/// target 1: -(1-p)^gamma log p; target 0: -p^gamma log(1-p).
double focal_elementwise(double target, double p, const FocalParams& focal = {});

/// Element-wise focal losses over every query (matched queries against
/// their gt action vector, padded ones against all-zero), normalized by
/// the number of positive action labels, clamped to >= 1.
double action_loss(const std::vector<GtInstance>& gts, const std::vector<Prediction>& preds,
                   const Assignment& assignment, const FocalParams& focal = {});

double combine_losses(double box, double giou, double obj_class, double action,
                      const LossWeights& weights);

LossBreakdown total_loss(const std::vector<GtInstance>& gts, const std::vector<Prediction>& preds,
                         const Assignment& assignment, const LossWeights& weights,
                         const FocalParams& focal = {});

/// Sum of total_loss over decoder layers, each layer matched independently.
double aux_total_loss(const std::vector<GtInstance>& gts,
                      const std::vector<std::vector<Prediction>>& per_layer_preds,
                      const CostWeights& cost_weights, const LossWeights& loss_weights,
                      const FocalParams& focal = {});

}  // namespace hoidet
