#include "hoidet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "hoidet/geometry.hpp"

namespace hoidet {

namespace {

bool is_sentinel(const NormBox& b) {
    return b.cx == 0.0 && b.cy == 0.0 && b.w == 0.0 && b.h == 0.0;
}

void check_detection(const HoiDetection& d, int n_obj, int n_act, const char* where) {
    if (d.object_class < 0 || d.object_class >= n_obj) {
        throw std::invalid_argument(std::string(where) + ": detection object class out of range");
    }
    if (d.action_class < 0 || d.action_class >= n_act) {
        throw std::invalid_argument(std::string(where) + ": detection action class out of range");
    }
}

void check_gt(const GtInstance& g, int n_obj, int n_act, bool require_object, const char* where) {
    if (g.object_class < 0 || g.object_class >= n_obj) {
        throw std::invalid_argument(std::string(where) + ": ground-truth object class out of range");
    }
    if (g.actions.size() != static_cast<size_t>(n_act)) {
        throw std::invalid_argument(std::string(where) + ": ground-truth action vector length");
    }
    if (require_object && !g.has_object()) {
        throw std::invalid_argument(std::string(where) + ": object-less ground truth");
    }
}

double mean_ap(const std::vector<ApEntry>& entries, const std::vector<bool>& mask) {
    double sum = 0.0;
    int n = 0;
    for (size_t i = 0; i < entries.size(); ++i) {
        if (mask[i]) {
            sum += entries[i].ap;
            ++n;
        }
    }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

std::vector<int> match_detection_indices(const std::vector<HoiDetection>& detections,
                                         const std::vector<GtInstance>& gts,
                                         const EvalConfig& cfg, MatchProtocol protocol) {
    cfg.validate();
    std::vector<size_t> order(detections.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        const HoiDetection& da = detections[a];
        const HoiDetection& db = detections[b];
        if (da.score != db.score) return da.score > db.score;
        if (da.query_index != db.query_index) return da.query_index < db.query_index;
        if (da.action_class != db.action_class) return da.action_class < db.action_class;
        return a < b;
    });

    std::vector<bool> consumed(gts.size(), false);
    std::vector<int> matched(detections.size(), -1);
    for (const size_t di : order) {
        const HoiDetection& det = detections[di];
        int best_gt = -1;
        double best_quality = -1.0;
        for (size_t gi = 0; gi < gts.size(); ++gi) {
            if (consumed[gi]) continue;
            const GtInstance& gt = gts[gi];
            if (det.action_class < 0 ||
                det.action_class >= static_cast<int>(gt.actions.size())) {
                throw std::invalid_argument("match_detections: action class out of range");
            }
            if (gt.actions[static_cast<size_t>(det.action_class)] != 1.0) continue;
            if (protocol == MatchProtocol::hico && det.object_class != gt.object_class) continue;

            double quality;
            if (!gt.has_object()) {
                if (protocol == MatchProtocol::hico) continue;  // hico pairs always carry objects
                if (protocol == MatchProtocol::vcoco_scenario1 && !is_sentinel(det.object_box)) {
                    continue;  // scenario 1 demands the explicit empty-box sentinel
                }
                quality = iou(det.human_box, gt.human_box);
            } else {
                const double iou_h = iou(det.human_box, gt.human_box);
                const double iou_o = iou(det.object_box, gt.object_box);
                quality = std::min(iou_h, iou_o);
            }
            if (quality > best_quality) {
                best_quality = quality;
                best_gt = static_cast<int>(gi);
            }
        }
        if (best_gt >= 0 && best_quality > cfg.iou_threshold) {
            matched[di] = best_gt;
            consumed[static_cast<size_t>(best_gt)] = true;
        }
    }
    return matched;
}

std::vector<bool> match_detections(const std::vector<HoiDetection>& detections,
                                   const std::vector<GtInstance>& gts, const EvalConfig& cfg,
                                   MatchProtocol protocol) {
    const std::vector<int> matched = match_detection_indices(detections, gts, cfg, protocol);
    std::vector<bool> labels(matched.size());
    for (size_t i = 0; i < matched.size(); ++i) labels[i] = matched[i] >= 0;
    return labels;
}

double average_precision(std::vector<ScoredLabel> labeled, int n_positives) {
    if (n_positives < 0) throw std::invalid_argument("average_precision: negative positive count");
    if (n_positives == 0 || labeled.empty()) return 0.0;
    // False positives first at equal scores: the result is then
    // independent of the order detections were collected in, and never
    // optimistic.
    std::sort(labeled.begin(), labeled.end(), [](const ScoredLabel& a, const ScoredLabel& b) {
        if (a.score != b.score) return a.score > b.score;
        return !a.tp && b.tp;
    });
    const size_t n = labeled.size();
    std::vector<double> precision(n), recall(n);
    int tp = 0;
    for (size_t i = 0; i < n; ++i) {
        if (labeled[i].tp) ++tp;
        precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
        recall[i] = static_cast<double>(tp) / static_cast<double>(n_positives);
    }
    for (size_t i = n - 1; i > 0; --i) {
        precision[i - 1] = std::max(precision[i - 1], precision[i]);
    }
    double ap = 0.0;
    double prev_recall = 0.0;
    for (size_t i = 0; i < n; ++i) {
        if (labeled[i].tp) {
            ap += (recall[i] - prev_recall) * precision[i];
            prev_recall = recall[i];
        }
    }
    return ap;
}

HicoReport eval_hico(const std::vector<std::vector<HoiDetection>>& detections,
                     const std::vector<std::vector<GtInstance>>& gts,
                     const std::vector<int>& train_counts, int n_obj, int n_act,
                     const EvalConfig& cfg) {
    cfg.validate();
    if (n_obj < 1 || n_act < 1) throw std::invalid_argument("eval_hico: class counts must be >= 1");
    if (detections.size() != gts.size()) {
        throw std::invalid_argument("eval_hico: detection/ground-truth image count mismatch");
    }
    if (train_counts.size() != static_cast<size_t>(n_obj * n_act)) {
        throw std::invalid_argument("eval_hico: training-count table size mismatch");
    }
    for (const auto& image : detections) {
        for (const HoiDetection& d : image) check_detection(d, n_obj, n_act, "eval_hico");
    }
    for (const auto& image : gts) {
        for (const GtInstance& g : image) check_gt(g, n_obj, n_act, true, "eval_hico");
    }

    const size_t n_images = gts.size();
    std::vector<bool> image_has_object(n_images * static_cast<size_t>(n_obj), false);
    for (size_t i = 0; i < n_images; ++i) {
        for (const GtInstance& g : gts[i]) {
            image_has_object[i * static_cast<size_t>(n_obj) + static_cast<size_t>(g.object_class)] =
                true;
        }
    }

    HicoReport report;
    std::vector<bool> rare_mask, non_rare_mask;
    for (int o = 0; o < n_obj; ++o) {
        for (int a = 0; a < n_act; ++a) {
            int n_gt = 0;
            for (const auto& image : gts) {
                for (const GtInstance& g : image) {
                    if (g.object_class == o && g.actions[static_cast<size_t>(a)] == 1.0) ++n_gt;
                }
            }
            if (n_gt == 0) continue;  // classes absent from the evaluation set are not averaged

            std::vector<ScoredLabel> all_labeled, ko_labeled;
            for (size_t i = 0; i < n_images; ++i) {
                std::vector<HoiDetection> dets_c;
                for (const HoiDetection& d : detections[i]) {
                    if (d.object_class == o && d.action_class == a) dets_c.push_back(d);
                }
                std::vector<GtInstance> gts_c;
                for (const GtInstance& g : gts[i]) {
                    if (g.object_class == o && g.actions[static_cast<size_t>(a)] == 1.0) {
                        gts_c.push_back(g);
                    }
                }
                const std::vector<bool> labels =
                    match_detections(dets_c, gts_c, cfg, MatchProtocol::hico);
                const bool in_ko =
                    image_has_object[i * static_cast<size_t>(n_obj) + static_cast<size_t>(o)];
                for (size_t d = 0; d < dets_c.size(); ++d) {
                    const ScoredLabel sl{dets_c[d].score, labels[d]};
                    all_labeled.push_back(sl);
                    if (in_ko) ko_labeled.push_back(sl);
                }
            }

            ApEntry entry;
            entry.object_class = o;
            entry.action_class = a;
            entry.n_gt = n_gt;
            entry.train_count = train_counts[static_cast<size_t>(o * n_act + a)];
            entry.ap = average_precision(std::move(all_labeled), n_gt);
            ApEntry ko = entry;
            ko.ap = average_precision(std::move(ko_labeled), n_gt);
            report.default_aps.push_back(entry);
            report.known_object_aps.push_back(ko);
            rare_mask.push_back(entry.train_count < cfg.rare_threshold);
            non_rare_mask.push_back(entry.train_count >= cfg.rare_threshold);
        }
    }

    const std::vector<bool> all_mask(report.default_aps.size(), true);
    report.default_full = mean_ap(report.default_aps, all_mask);
    report.default_rare = mean_ap(report.default_aps, rare_mask);
    report.default_non_rare = mean_ap(report.default_aps, non_rare_mask);
    report.known_object_full = mean_ap(report.known_object_aps, all_mask);
    report.known_object_rare = mean_ap(report.known_object_aps, rare_mask);
    report.known_object_non_rare = mean_ap(report.known_object_aps, non_rare_mask);
    return report;
}

VcocoReport eval_vcoco(const std::vector<std::vector<HoiDetection>>& detections,
                       const std::vector<std::vector<GtInstance>>& gts, int n_act,
                       const EvalConfig& cfg) {
    cfg.validate();
    if (n_act < 1) throw std::invalid_argument("eval_vcoco: action count must be >= 1");
    if (detections.size() != gts.size()) {
        throw std::invalid_argument("eval_vcoco: detection/ground-truth image count mismatch");
    }
    for (const auto& image : detections) {
        for (const HoiDetection& d : image) {
            if (d.action_class < 0 || d.action_class >= n_act) {
                throw std::invalid_argument("eval_vcoco: detection action class out of range");
            }
        }
    }
    for (const auto& image : gts) {
        for (const GtInstance& g : image) {
            if (g.actions.size() != static_cast<size_t>(n_act)) {
                throw std::invalid_argument("eval_vcoco: ground-truth action vector length");
            }
        }
    }

    VcocoReport report;
    for (int a = 0; a < n_act; ++a) {
        if (std::find(cfg.excluded_actions.begin(), cfg.excluded_actions.end(), a) !=
            cfg.excluded_actions.end()) {
            continue;
        }
        int n_gt = 0;
        for (const auto& image : gts) {
            for (const GtInstance& g : image) {
                if (g.actions[static_cast<size_t>(a)] == 1.0) ++n_gt;
            }
        }
        if (n_gt == 0) continue;

        std::vector<ScoredLabel> s1, s2;
        for (size_t i = 0; i < gts.size(); ++i) {
            std::vector<HoiDetection> dets_a;
            for (const HoiDetection& d : detections[i]) {
                if (d.action_class == a) dets_a.push_back(d);
            }
            std::vector<GtInstance> gts_a;
            for (const GtInstance& g : gts[i]) {
                if (g.actions[static_cast<size_t>(a)] == 1.0) gts_a.push_back(g);
            }
            const std::vector<bool> l1 =
                match_detections(dets_a, gts_a, cfg, MatchProtocol::vcoco_scenario1);
            const std::vector<bool> l2 =
                match_detections(dets_a, gts_a, cfg, MatchProtocol::vcoco_scenario2);
            for (size_t d = 0; d < dets_a.size(); ++d) {
                s1.push_back({dets_a[d].score, l1[d]});
                s2.push_back({dets_a[d].score, l2[d]});
            }
        }
        ApEntry e1;
        e1.object_class = -1;
        e1.action_class = a;
        e1.n_gt = n_gt;
        e1.ap = average_precision(std::move(s1), n_gt);
        ApEntry e2 = e1;
        e2.ap = average_precision(std::move(s2), n_gt);
        report.scenario1_aps.push_back(e1);
        report.scenario2_aps.push_back(e2);
    }
    const std::vector<bool> all_mask(report.scenario1_aps.size(), true);
    report.scenario1_map = mean_ap(report.scenario1_aps, all_mask);
    report.scenario2_map = mean_ap(report.scenario2_aps, all_mask);
    return report;
}

std::vector<BinEntry> binned_ap_analysis(const std::vector<std::vector<HoiDetection>>& detections,
                                         const std::vector<std::vector<GtInstance>>& gts,
                                         BinMode mode, double bin_width, int n_obj, int n_act,
                                         const EvalConfig& cfg) {
    cfg.validate();
    if (!(bin_width > 0.0)) throw std::invalid_argument("binned_ap_analysis: bin width must be > 0");
    if (detections.size() != gts.size()) {
        throw std::invalid_argument("binned_ap_analysis: image count mismatch");
    }
    for (const auto& image : detections) {
        for (const HoiDetection& d : image) check_detection(d, n_obj, n_act, "binned_ap_analysis");
    }
    for (const auto& image : gts) {
        for (const GtInstance& g : image) check_gt(g, n_obj, n_act, true, "binned_ap_analysis");
    }

    auto bin_of = [&](const GtInstance& g) {
        double value;
        if (mode == BinMode::distance) {
            const double dx = g.human_box.cx - g.object_box.cx;
            const double dy = g.human_box.cy - g.object_box.cy;
            value = std::sqrt(dx * dx + dy * dy);
        } else {
            value = std::max(g.human_box.w * g.human_box.h, g.object_box.w * g.object_box.h);
        }
        return static_cast<int>(std::floor(value / bin_width));
    };

    // One hico-protocol matching pass per (image, class); every detection
    // either claims one ground truth or stays a global false positive.
    const int n_classes = n_obj * n_act;
    // matched[class] -> list of (score, gt bin); unmatched[class] -> scores.
    std::vector<std::vector<std::pair<double, int>>> matched(static_cast<size_t>(n_classes));
    std::vector<std::vector<double>> unmatched(static_cast<size_t>(n_classes));
    // gt counts per (class, bin)
    std::vector<std::vector<std::pair<int, int>>> gt_bins(static_cast<size_t>(n_classes));

    for (size_t i = 0; i < gts.size(); ++i) {
        for (int o = 0; o < n_obj; ++o) {
            for (int a = 0; a < n_act; ++a) {
                const size_t c = static_cast<size_t>(o * n_act + a);
                std::vector<HoiDetection> dets_c;
                for (const HoiDetection& d : detections[i]) {
                    if (d.object_class == o && d.action_class == a) dets_c.push_back(d);
                }
                std::vector<GtInstance> gts_c;
                for (const GtInstance& g : gts[i]) {
                    if (g.object_class == o && g.actions[static_cast<size_t>(a)] == 1.0) {
                        gts_c.push_back(g);
                    }
                }
                if (dets_c.empty() && gts_c.empty()) continue;
                for (const GtInstance& g : gts_c) {
                    gt_bins[c].push_back({bin_of(g), 1});
                }
                const std::vector<int> idx =
                    match_detection_indices(dets_c, gts_c, cfg, MatchProtocol::hico);
                for (size_t d = 0; d < dets_c.size(); ++d) {
                    if (idx[d] >= 0) {
                        matched[c].push_back(
                            {dets_c[d].score, bin_of(gts_c[static_cast<size_t>(idx[d])])});
                    } else {
                        unmatched[c].push_back(dets_c[d].score);
                    }
                }
            }
        }
    }

    int max_bin = -1;
    for (const auto& per_class : gt_bins) {
        for (const auto& [bin, count] : per_class) max_bin = std::max(max_bin, bin);
    }

    std::vector<BinEntry> rows;
    for (int bin = 0; bin <= max_bin; ++bin) {
        int total_gt = 0;
        double ap_sum = 0.0;
        int ap_classes = 0;
        for (int c = 0; c < n_classes; ++c) {
            int n_gt = 0;
            for (const auto& [b, count] : gt_bins[static_cast<size_t>(c)]) {
                if (b == bin) n_gt += count;
            }
            if (n_gt == 0) continue;
            total_gt += n_gt;
            std::vector<ScoredLabel> labeled;
            for (const auto& [score, b] : matched[static_cast<size_t>(c)]) {
                if (b == bin) labeled.push_back({score, true});
                // detections matched to other bins are ignored here
            }
            for (const double score : unmatched[static_cast<size_t>(c)]) {
                labeled.push_back({score, false});
            }
            ap_sum += average_precision(std::move(labeled), n_gt);
            ++ap_classes;
        }
        if (total_gt < cfg.min_bin_instances) continue;
        BinEntry row;
        row.bin_index = bin;
        row.lo = bin * bin_width;
        row.hi = (bin + 1) * bin_width;
        row.n_gt = total_gt;
        row.ap = ap_classes == 0 ? 0.0 : ap_sum / static_cast<double>(ap_classes);
        rows.push_back(row);
    }
    return rows;
}

std::string format_hico_report(const HicoReport& report) {
    std::string out;
    for (const ApEntry& e : report.default_aps) {
        out += "ap default object=" + std::to_string(e.object_class) +
               " action=" + std::to_string(e.action_class) + " n_gt=" + std::to_string(e.n_gt) +
               " train_count=" + std::to_string(e.train_count) + " ap=" + format_double(e.ap) +
               "\n";
    }
    for (const ApEntry& e : report.known_object_aps) {
        out += "ap known-object object=" + std::to_string(e.object_class) +
               " action=" + std::to_string(e.action_class) + " n_gt=" + std::to_string(e.n_gt) +
               " train_count=" + std::to_string(e.train_count) + " ap=" + format_double(e.ap) +
               "\n";
    }
    out += "map default full " + format_double(report.default_full) + "\n";
    out += "map default rare " + format_double(report.default_rare) + "\n";
    out += "map default non-rare " + format_double(report.default_non_rare) + "\n";
    out += "map known-object full " + format_double(report.known_object_full) + "\n";
    out += "map known-object rare " + format_double(report.known_object_rare) + "\n";
    out += "map known-object non-rare " + format_double(report.known_object_non_rare) + "\n";
    return out;
}

std::string format_vcoco_report(const VcocoReport& report) {
    std::string out;
    for (const ApEntry& e : report.scenario1_aps) {
        out += "ap scenario1 action=" + std::to_string(e.action_class) +
               " n_gt=" + std::to_string(e.n_gt) + " ap=" + format_double(e.ap) + "\n";
    }
    for (const ApEntry& e : report.scenario2_aps) {
        out += "ap scenario2 action=" + std::to_string(e.action_class) +
               " n_gt=" + std::to_string(e.n_gt) + " ap=" + format_double(e.ap) + "\n";
    }
    out += "map scenario1 " + format_double(report.scenario1_map) + "\n";
    out += "map scenario2 " + format_double(report.scenario2_map) + "\n";
    return out;
}

std::string format_bin_csv(const std::vector<BinEntry>& bins) {
    std::string out = "bin_lo,bin_hi,n_gt,ap\n";
    for (const BinEntry& b : bins) {
        out += format_double(b.lo) + "," + format_double(b.hi) + "," + std::to_string(b.n_gt) +
               "," + format_double(b.ap) + "\n";
    }
    return out;
}

namespace {

nlohmann::json ap_entries_json(const std::vector<ApEntry>& entries) {
    nlohmann::json arr = nlohmann::json::array();
    for (const ApEntry& e : entries) {
        arr.push_back({{"object", e.object_class},
                       {"action", e.action_class},
                       {"n_gt", e.n_gt},
                       {"train_count", e.train_count},
                       {"ap", e.ap}});
    }
    return arr;
}

}  // namespace

std::string hico_report_json(const HicoReport& report) {
    nlohmann::json j;
    j["default"] = {{"full", report.default_full},
                    {"rare", report.default_rare},
                    {"non_rare", report.default_non_rare},
                    {"aps", ap_entries_json(report.default_aps)}};
    j["known_object"] = {{"full", report.known_object_full},
                         {"rare", report.known_object_rare},
                         {"non_rare", report.known_object_non_rare},
                         {"aps", ap_entries_json(report.known_object_aps)}};
    return j.dump(2) + "\n";
}

std::string vcoco_report_json(const VcocoReport& report) {
    nlohmann::json j;
    j["scenario1"] = {{"map", report.scenario1_map}, {"aps", ap_entries_json(report.scenario1_aps)}};
    j["scenario2"] = {{"map", report.scenario2_map}, {"aps", ap_entries_json(report.scenario2_aps)}};
    return j.dump(2) + "\n";
}

}  // namespace hoidet
