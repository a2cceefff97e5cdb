#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hoidet/assignment.hpp"
#include "hoidet/losses.hpp"
#include "hoidet/tape.hpp"

namespace hoidet {

/// Network hyper-parameters. The backbone halves each spatial dimension
/// three times, so image size must be exactly 8x the grid size.
struct ModelConfig {
    int image_h = 64;
    int image_w = 64;
    int grid_h = 8;
    int grid_w = 8;
    int backbone_channels = 8;
    int d_model = 32;
    int n_heads = 4;
    int n_encoder_layers = 2;
    int n_decoder_layers = 2;
    int ffn_hidden_dim = 64;
    int n_queries = 8;
    int n_obj_classes = 3;
    int n_act_classes = 3;
    std::uint64_t seed = 1;

    /// Throws std::invalid_argument when any invariant fails:
    /// dimensions >= 1, d_model divisible by n_heads and by 4 (positional
    /// encoding splits channels into x/y sine/cosine quadruples), image
    /// size = 8 * grid size, at least one decoder layer.
    void validate() const;

    /// Full-scale defaults: 100 queries, d_model 256, 6+6 layers, 8 heads,
    /// 80 object and 117 action classes.
    static ModelConfig paper();
    /// Small config that trains in seconds on a CPU.
    static ModelConfig desk();
    /// Minimal config for finite-difference gradient checks.
    static ModelConfig tiny();
};

/// Named, ordered parameter collection. Order is fixed by init_params so
/// gradient vectors and optimizer state can align by index.
struct ParamSet {
    std::vector<std::string> names;
    std::vector<Tensor> values;

    void add(std::string name, Tensor value);
    int index_of(const std::string& name) const;  // -1 when absent
    const Tensor& at(const std::string& name) const;
    Tensor& at(const std::string& name);
    size_t total_scalars() const;
};

/// Seeded initialization: uniform fan-in scaling for weights, zero biases,
/// unit-normal query vectors, unit/zero layer-norm affines.
ParamSet init_params(const ModelConfig& cfg);

/// Fixed 2D sinusoidal encoding, one row per grid position (row-major
/// y * grid_w + x), d_model columns: first half y-frequencies, second half
/// x-frequencies, temperature 10000. Entries lie in [-1, 1].
Tensor positional_encoding(const ModelConfig& cfg);

/// Node ids of one decoder layer's head outputs inside a forward graph.
struct TapeLayerOutputs {
    Tape::Id human_boxes = -1;   // [n_queries, 4], sigmoid range
    Tape::Id object_boxes = -1;  // [n_queries, 4]
    Tape::Id object_probs = -1;  // [n_queries, n_obj_classes + 1], softmax
    Tape::Id action_probs = -1;  // [n_queries, n_act_classes], sigmoid
};

/// A recorded forward pass: the tape plus the ids needed to read outputs
/// or attach a loss. Non-copyable (owns the tape).
struct ForwardGraph {
    Tape tape;
    std::vector<Tape::Id> param_ids;        // aligned with ParamSet order
    std::vector<TapeLayerOutputs> layers;   // one per decoder layer
};

/// Records backbone -> projection -> encoder -> decoder -> shared heads
/// for one image ([3, image_h, image_w]). Throws std::invalid_argument on
/// shape mismatch.
void build_forward(const Tensor& image, const ParamSet& params, const ModelConfig& cfg,
                   ForwardGraph& out);

/// Per-decoder-layer predictions; the last layer is the inference output.
std::vector<std::vector<Prediction>> forward(const Tensor& image, const ParamSet& params,
                                             const ModelConfig& cfg);

/// Individual stages, for direct inspection. Each runs the same graph
/// definitions as forward().
Tensor backbone_forward(const Tensor& image, const ParamSet& params,
                        const ModelConfig& cfg);  // -> [backbone_channels, grid_h, grid_w]
Tensor encoder_forward(const Tensor& z_seq, const Tensor& pos, const ParamSet& params,
                       const ModelConfig& cfg);  // [HW, d_model] -> [HW, d_model]
std::vector<Tensor> decoder_forward(const Tensor& z_e_seq, const Tensor& pos,
                                    const Tensor& queries, const ParamSet& params,
                                    const ModelConfig& cfg);  // per layer [n_queries, d_model]
std::vector<Prediction> heads_forward(const Tensor& embeddings, const ParamSet& params,
                                      const ModelConfig& cfg);

struct LossGradients {
    double total = 0.0;                   // sum over decoder layers
    LossBreakdown final_layer;            // last layer's components
    std::vector<Assignment> assignments;  // the per-layer matchings used
    std::vector<Tensor> grads;            // aligned with ParamSet order
};

/// Gradient of the auxiliary-summed total loss w.r.t. every parameter.
/// Each decoder layer is matched independently; the matchings are then
/// held fixed, so the loss is differentiated piecewise. Throws
/// std::runtime_error naming the component if any loss term is non-finite.
LossGradients loss_gradients(const Tensor& image, const std::vector<GtInstance>& gts,
                             const ParamSet& params, const ModelConfig& cfg,
                             const CostWeights& cost_weights, const LossWeights& loss_weights,
                             const FocalParams& focal = {});

/// The same scalar loss_gradients differentiates, evaluated with the given
/// fixed per-layer assignments. This is the function finite differences
/// must probe: the matching is part of the surrounding step, not of the
/// differentiated function.
double frozen_loss(const Tensor& image, const std::vector<GtInstance>& gts,
                   const ParamSet& params, const ModelConfig& cfg,
                   const std::vector<Assignment>& assignments, const LossWeights& loss_weights,
                   const FocalParams& focal = {});

}  // namespace hoidet
