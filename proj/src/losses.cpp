#include "hoidet/losses.hpp"

#include <algorithm>
#include <cmath>

namespace hoidet {

namespace {

double clamp_prob(double p) {
    return std::clamp(p, kProbClamp, 1.0 - kProbClamp);
}

}  // namespace

double box_loss(const std::vector<GtInstance>& gts, const std::vector<Prediction>& preds,
                const Assignment& assignment) {
    if (gts.empty()) return 0.0;
    double sum = 0.0;
    for (size_t i = 0; i < gts.size(); ++i) {
        const Prediction& p = preds[static_cast<size_t>(assignment.gt_to_pred[i])];
        sum += l1(gts[i].human_box, p.human_box) + l1(gts[i].object_box, p.object_box);
    }
    return sum / static_cast<double>(gts.size());
}

double giou_loss(const std::vector<GtInstance>& gts, const std::vector<Prediction>& preds,
                 const Assignment& assignment) {
    if (gts.empty()) return 0.0;
    double sum = 0.0;
    for (size_t i = 0; i < gts.size(); ++i) {
        const Prediction& p = preds[static_cast<size_t>(assignment.gt_to_pred[i])];
        sum += 2.0 - giou(gts[i].human_box, p.human_box) - giou(gts[i].object_box, p.object_box);
    }
    return sum / static_cast<double>(gts.size());
}

double class_loss(const std::vector<GtInstance>& gts, const std::vector<Prediction>& preds,
                  const Assignment& assignment) {
    const size_t n_q = preds.size();
    double sum = 0.0;
    for (size_t slot = 0; slot < n_q; ++slot) {
        const Prediction& p = preds[static_cast<size_t>(assignment.gt_to_pred[slot])];
        const size_t no_pair = p.object_probs.size() - 1;
        const size_t target = assignment.is_padded(static_cast<int>(slot))
                                  ? no_pair
                                  : static_cast<size_t>(gts[slot].object_class);
        sum += -std::log(clamp_prob(p.object_probs[target]));
    }
    return sum / static_cast<double>(n_q);
}

double focal_elementwise(double target, double p, const FocalParams& focal) {
    p = clamp_prob(p);
    if (target > 0.5) return -std::pow(1.0 - p, focal.gamma) * std::log(p);
    return -std::pow(p, focal.gamma) * std::log(1.0 - p);
}

double action_loss(const std::vector<GtInstance>& gts, const std::vector<Prediction>& preds,
                   const Assignment& assignment, const FocalParams& focal) {
    double positives = 0.0;
    for (const GtInstance& gt : gts) {
        for (double a : gt.actions) positives += a;
    }
    const double denom = std::max(1.0, positives);

    double sum = 0.0;
    for (size_t slot = 0; slot < preds.size(); ++slot) {
        const Prediction& p = preds[static_cast<size_t>(assignment.gt_to_pred[slot])];
        const bool padded = assignment.is_padded(static_cast<int>(slot));
        for (size_t j = 0; j < p.action_probs.size(); ++j) {
            const double target = padded ? 0.0 : gts[slot].actions[j];
            sum += focal_elementwise(target, p.action_probs[j], focal);
        }
    }
    return sum / denom;
}

double combine_losses(double box, double giou_term, double obj_class, double action,
                      const LossWeights& weights) {
    return weights.lambda_b * box + weights.lambda_u * giou_term +
           weights.lambda_c * obj_class + weights.lambda_a * action;
}

LossBreakdown total_loss(const std::vector<GtInstance>& gts, const std::vector<Prediction>& preds,
                         const Assignment& assignment, const LossWeights& weights,
                         const FocalParams& focal) {
    LossBreakdown out;
    out.box = box_loss(gts, preds, assignment);
    out.giou = giou_loss(gts, preds, assignment);
    out.obj_class = class_loss(gts, preds, assignment);
    out.action = action_loss(gts, preds, assignment, focal);
    out.total = combine_losses(out.box, out.giou, out.obj_class, out.action, weights);
    return out;
}

double aux_total_loss(const std::vector<GtInstance>& gts,
                      const std::vector<std::vector<Prediction>>& per_layer_preds,
                      const CostWeights& cost_weights, const LossWeights& loss_weights,
                      const FocalParams& focal) {
    double sum = 0.0;
    for (const auto& layer_preds : per_layer_preds) {
        const Assignment assignment = match(gts, layer_preds, cost_weights);
        sum += total_loss(gts, layer_preds, assignment, loss_weights, focal).total;
    }
    return sum;
}

}  // namespace hoidet
