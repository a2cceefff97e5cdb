#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hoidet/assignment.hpp"
#include "hoidet/tape.hpp"

namespace hoidet {

/// Synthetic rectangle-scene generator. Action labels are pure functions
/// of box geometry, so a model that recovers the boxes can recover the
/// actions, and stored labels can always be re-derived from stored boxes.
struct SynthConfig {
    std::uint64_t seed = 7;
    int n_images = 8;
    int image_h = 64;
    int image_w = 64;
    int n_obj_classes = 3;
    int n_act_classes = 3;  // capped at the 3 spatial relations below
    int min_instances = 1;
    int max_instances = 2;
    /// Fraction of instances generated without an object box (all-zero
    /// sentinel, action 0 only). 0 keeps every label geometry-derivable.
    double objectless_fraction = 0.0;

    void validate() const;  // throws std::invalid_argument
};

struct SynthImage {
    std::string id;
    Tensor raster;  // [3, image_h, image_w], values in [0, 1]
    std::vector<GtInstance> gts;
};

struct SynthDataset {
    int n_obj_classes = 0;
    int n_act_classes = 0;
    std::vector<std::string> object_names;
    std::vector<std::string> action_names;
    std::vector<int> hoi_counts;  // [n_obj * n_act], instances per (object, action)
    std::vector<SynthImage> images;
};

/// The spatial-relation action vocabulary, evaluated on a human/object box
/// pair. Index 0: boxes overlap. Index 1: disjoint but centers closer
/// than 0.3. Index 2: centers at least 0.3 apart and axis-aligned within
/// 0.05. Returns a multi-hot vector of length n_act (n_act <= 3).
std::vector<double> relation_labels(const NormBox& human, const NormBox& object, int n_act);

/// Paints the instances into a [3, h, w] raster: humans fill channel 0,
/// objects fill channel 1 at a class-coded intensity plus channel 2.
void render_scene(Tensor& raster, const std::vector<GtInstance>& gts, int n_obj_classes);

/// Deterministic scene generation; every instance carries exactly one
/// positive action (the relation it was constructed to satisfy).
SynthDataset generate_synthetic(const SynthConfig& cfg);

}  // namespace hoidet
