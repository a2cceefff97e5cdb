#pragma once

#include <string>
#include <vector>

#include "hoidet/inference.hpp"

namespace hoidet {

/// hico checks the object class and requires both box IoUs; the V-COCO
/// protocols ignore the object class, and differ on object-less ground
/// truths: scenario 1 demands the all-zero sentinel object box, scenario 2
/// skips the object box test entirely.
enum class MatchProtocol { hico, vcoco_scenario1, vcoco_scenario2 };

/// Greedy matching in descending score order against one image's ground
/// truths. Each ground truth is consumed by at most one detection; a
/// detection picks the unconsumed ground truth with the best match
/// quality (the smaller of the two box IoUs), ties broken by ground-truth
/// index. Returns the matched ground-truth index per detection (aligned
/// with the input order), -1 for false positives.
std::vector<int> match_detection_indices(const std::vector<HoiDetection>& detections,
                                         const std::vector<GtInstance>& gts,
                                         const EvalConfig& cfg, MatchProtocol protocol);

/// True/false positive labels from match_detection_indices.
std::vector<bool> match_detections(const std::vector<HoiDetection>& detections,
                                   const std::vector<GtInstance>& gts, const EvalConfig& cfg,
                                   MatchProtocol protocol);

struct ScoredLabel {
    double score = 0.0;
    bool tp = false;
};

/// Area under the precision-recall curve with the all-points precision
/// envelope. Equal scores rank false positives first so the result does
/// not depend on input order. 0 when n_positives is 0.
double average_precision(std::vector<ScoredLabel> labeled, int n_positives);

struct ApEntry {
    int object_class = 0;  // -1 in V-COCO reports
    int action_class = 0;
    int n_gt = 0;
    int train_count = 0;
    double ap = 0.0;
};

struct HicoReport {
    std::vector<ApEntry> default_aps;       // classes with ground truths, by (object, action)
    std::vector<ApEntry> known_object_aps;  // same classes, restricted to images with the object
    double default_full = 0.0;
    double default_rare = 0.0;
    double default_non_rare = 0.0;
    double known_object_full = 0.0;
    double known_object_rare = 0.0;
    double known_object_non_rare = 0.0;
};

/// Per-(object, action) APs under the default and known-object settings,
/// with full/rare/non-rare means. Classes without ground truths are not
/// averaged; an empty split reports 0. The rare split holds classes whose
/// training count is strictly below cfg.rare_threshold. Throws
/// std::invalid_argument on out-of-range class indices, object-less
/// ground truths, or mismatched image counts.
HicoReport eval_hico(const std::vector<std::vector<HoiDetection>>& detections,
                     const std::vector<std::vector<GtInstance>>& gts,
                     const std::vector<int>& train_counts, int n_obj, int n_act,
                     const EvalConfig& cfg);

struct VcocoReport {
    std::vector<ApEntry> scenario1_aps;  // per action class with ground truths
    std::vector<ApEntry> scenario2_aps;
    double scenario1_map = 0.0;
    double scenario2_map = 0.0;
};

/// Per-action APs under both V-COCO scenarios. Object classes are
/// ignored; actions listed in cfg.excluded_actions are dropped from the
/// report and the means.
VcocoReport eval_vcoco(const std::vector<std::vector<HoiDetection>>& detections,
                       const std::vector<std::vector<GtInstance>>& gts, int n_act,
                       const EvalConfig& cfg);

enum class BinMode { distance, area };

struct BinEntry {
    int bin_index = 0;
    double lo = 0.0;
    double hi = 0.0;
    int n_gt = 0;
    double ap = 0.0;
};

/// Ground truths are binned by human-object center distance or by the
/// larger of the two box areas (bins of the given width). Matching runs
/// per class under the hico protocol; each bin's AP averages the
/// per-class APs over that bin's ground truths, with unmatched detections
/// counting as false positives in every bin. Bins holding fewer than
/// cfg.min_bin_instances ground truths are omitted. Rows come out in
/// ascending bin order.
std::vector<BinEntry> binned_ap_analysis(const std::vector<std::vector<HoiDetection>>& detections,
                                         const std::vector<std::vector<GtInstance>>& gts,
                                         BinMode mode, double bin_width, int n_obj, int n_act,
                                         const EvalConfig& cfg);

/// Plain-text reports: one line per AP (setting, split, class ids, AP)
/// plus the summary means.
std::string format_hico_report(const HicoReport& report);
std::string format_vcoco_report(const VcocoReport& report);
std::string format_bin_csv(const std::vector<BinEntry>& bins);

/// Machine-readable JSON forms of the same reports.
std::string hico_report_json(const HicoReport& report);
std::string vcoco_report_json(const VcocoReport& report);

}  // namespace hoidet
