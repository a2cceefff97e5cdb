#pragma once

#include <vector>

#include "hoidet/assignment.hpp"

namespace hoidet {

/// One scored human-object interaction detection.
struct HoiDetection {
    NormBox human_box;
    NormBox object_box;
    int object_class = 0;  // 0-based real class
    int action_class = 0;
    double score = 0.0;  // object confidence x action probability
    int query_index = 0;  // provenance, used for deterministic tie order
};

struct EvalConfig {
    double iou_threshold = 0.5;
    int top_k = 100;
    int rare_threshold = 10;  // training instances below this = rare class
    double score_threshold = 0.0;  // detections must score strictly above
    int min_bin_instances = 10;  // bins with fewer ground truths are omitted
    std::vector<int> excluded_actions;  // action ids skipped by the V-COCO report

    void validate() const;  // throws std::invalid_argument
};

/// Expands every query into one detection per action class. The object
/// class and its confidence come from the best real class; when the
/// no-pair class wins the argmax the best real class is the second
/// highest entry overall. Detections scoring <= score_threshold are
/// dropped.
std::vector<HoiDetection> decode(const std::vector<Prediction>& preds, const EvalConfig& cfg);

/// The k highest-scoring detections; ties broken by query index, then
/// action index.
std::vector<HoiDetection> top_k_select(std::vector<HoiDetection> detections, int k);

}  // namespace hoidet
