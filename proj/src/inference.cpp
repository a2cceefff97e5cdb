#include "hoidet/inference.hpp"

#include <algorithm>
#include <stdexcept>

namespace hoidet {

void EvalConfig::validate() const {
    if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) {
        throw std::invalid_argument("EvalConfig: iou_threshold must be in (0, 1)");
    }
    if (top_k < 1) throw std::invalid_argument("EvalConfig: top_k must be >= 1");
    if (rare_threshold < 0) throw std::invalid_argument("EvalConfig: rare_threshold must be >= 0");
    if (min_bin_instances < 0) {
        throw std::invalid_argument("EvalConfig: min_bin_instances must be >= 0");
    }
}

std::vector<HoiDetection> decode(const std::vector<Prediction>& preds, const EvalConfig& cfg) {
    cfg.validate();
    std::vector<HoiDetection> out;
    for (size_t q = 0; q < preds.size(); ++q) {
        const Prediction& p = preds[q];
        if (p.object_probs.size() < 2) {
            throw std::invalid_argument("decode: prediction needs >= 1 real class plus no-pair");
        }
        // The emitted class is the best real class in every case: it is
        // the overall argmax when no-pair does not win, and the second
        // highest entry overall (= best real) when it does.
        const int no_pair = static_cast<int>(p.object_probs.size()) - 1;
        int best_real = 0;
        for (int k = 1; k < no_pair; ++k) {
            if (p.object_probs[static_cast<size_t>(k)] >
                p.object_probs[static_cast<size_t>(best_real)]) {
                best_real = k;
            }
        }
        const double confidence = p.object_probs[static_cast<size_t>(best_real)];
        for (size_t j = 0; j < p.action_probs.size(); ++j) {
            HoiDetection det;
            det.human_box = p.human_box;
            det.object_box = p.object_box;
            det.object_class = best_real;
            det.action_class = static_cast<int>(j);
            det.score = confidence * p.action_probs[j];
            det.query_index = static_cast<int>(q);
            if (det.score > cfg.score_threshold) out.push_back(det);
        }
    }
    return out;
}

std::vector<HoiDetection> top_k_select(std::vector<HoiDetection> detections, int k) {
    if (k < 1) throw std::invalid_argument("top_k_select: k must be >= 1");
    std::sort(detections.begin(), detections.end(),
              [](const HoiDetection& a, const HoiDetection& b) {
                  if (a.score != b.score) return a.score > b.score;
                  if (a.query_index != b.query_index) return a.query_index < b.query_index;
                  return a.action_class < b.action_class;
              });
    if (detections.size() > static_cast<size_t>(k)) detections.resize(static_cast<size_t>(k));
    return detections;
}

}  // namespace hoidet
