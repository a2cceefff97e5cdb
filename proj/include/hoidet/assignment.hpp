#pragma once

#include <cstddef>
#include <vector>

#include "hoidet/geometry.hpp"

namespace hoidet {

/// One annotated human-object pair. Object classes are 0-based; the
/// "no pair" class used for unmatched queries is index n_obj (the last
/// entry of a prediction's class distribution).
struct GtInstance {
    NormBox human_box;
    NormBox object_box;
    int object_class = 0;
    std::vector<double> actions;  // multi-hot, length n_act

    /// Object-less instances (V-COCO) carry the all-zero sentinel box.
    bool has_object() const {
        return !(object_box.cx == 0.0 && object_box.cy == 0.0 &&
                 object_box.w == 0.0 && object_box.h == 0.0);
    }
};

/// One query's outputs. object_probs has n_obj + 1 entries (softmax,
/// last = no pair); action_probs has n_act entries (sigmoid).
struct Prediction {
    NormBox human_box;
    NormBox object_box;
    std::vector<double> object_probs;
    std::vector<double> action_probs;
};

struct CostWeights {
    double eta_b = 2.5;
    double eta_u = 1.0;
    double eta_c = 1.0;
    double eta_a = 1.0;
    double epsilon = 1e-4;
};

/// Result of the bipartite matching: gt slot i (real or padding) goes to
/// prediction gt_to_pred[i]. Slots >= n_real are padding.
struct Assignment {
    std::vector<int> gt_to_pred;
    int n_real = 0;

    bool is_padded(int slot) const { return slot >= n_real; }
    int padded_size() const { return static_cast<int>(gt_to_pred.size()) - n_real; }
};

/// max of the human-box L1 and the object-box L1.
double pair_box_cost(const GtInstance& gt, const Prediction& pred);

/// max of -giou over the human pair and the object pair.
double pair_giou_cost(const GtInstance& gt, const Prediction& pred);

/// -p(gt class).
double object_class_cost(const GtInstance& gt, const Prediction& pred);

/// Positive and negative action terms averaged with inverse-count weights.
double action_class_cost(const GtInstance& gt, const Prediction& pred, double epsilon);

double combine_costs(double box, double giou, double obj_class, double action,
                     const CostWeights& weights);

/// n_q x n_q matrix, row i = gt slot (padded rows are all zero),
/// column j = prediction. Throws std::invalid_argument if there are more
/// ground truths than predictions.
std::vector<std::vector<double>> build_cost_matrix(const std::vector<GtInstance>& gts,
                                                   const std::vector<Prediction>& preds,
                                                   const CostWeights& weights);

/// Minimum-cost perfect assignment, O(n^3). Returns perm with perm[row] = col.
/// Among equal-cost optima the lexicographically smallest permutation by row
/// order is returned. Throws std::invalid_argument on non-square or
/// non-finite input.
std::vector<int> hungarian(const std::vector<std::vector<double>>& cost);

Assignment match(const std::vector<GtInstance>& gts, const std::vector<Prediction>& preds,
                 const CostWeights& weights);

}  // namespace hoidet
