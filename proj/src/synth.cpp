#include "hoidet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "hoidet/geometry.hpp"
#include "hoidet/rng.hpp"

namespace hoidet {

namespace {

constexpr double kNearDistance = 0.3;
constexpr double kAlignTolerance = 0.05;

const char* kActionNames[3] = {"overlap", "near", "aligned"};

double center_distance(const NormBox& a, const NormBox& b) {
    const double dx = a.cx - b.cx;
    const double dy = a.cy - b.cy;
    return std::sqrt(dx * dx + dy * dy);
}

bool boxes_overlap(const NormBox& a, const NormBox& b) {
    return std::abs(a.cx - b.cx) < (a.w + b.w) / 2.0 && std::abs(a.cy - b.cy) < (a.h + b.h) / 2.0;
}

double clamp_center(double c, double half, double margin = 0.01) {
    return std::clamp(c, half + margin, 1.0 - half - margin);
}

NormBox random_box(Rng& rng, double min_size, double max_size) {
    NormBox b;
    b.w = rng.uniform(min_size, max_size);
    b.h = rng.uniform(min_size, max_size);
    b.cx = clamp_center(rng.uniform(0.2, 0.8), b.w / 2.0);
    b.cy = clamp_center(rng.uniform(0.2, 0.8), b.h / 2.0);
    return b;
}

/// Places the object box so the pair satisfies exactly the given relation.
NormBox place_object(Rng& rng, const NormBox& human, int relation) {
    for (int attempt = 0; attempt < 64; ++attempt) {
        NormBox obj;
        obj.w = rng.uniform(0.1, 0.22);
        obj.h = rng.uniform(0.1, 0.22);
        if (relation == 0) {
            obj.cx = clamp_center(human.cx + rng.uniform(-0.04, 0.04), obj.w / 2.0);
            obj.cy = clamp_center(human.cy + rng.uniform(-0.04, 0.04), obj.h / 2.0);
        } else if (relation == 1) {
            const double dist = rng.uniform(0.16, 0.28);
            const double angle = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
            obj.cx = clamp_center(human.cx + dist * std::cos(angle), obj.w / 2.0);
            obj.cy = clamp_center(human.cy + dist * std::sin(angle), obj.h / 2.0);
        } else {
            // Distant but aligned on one axis.
            const bool align_x = rng.uniform() < 0.5;
            const double off = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.35, 0.55);
            if (align_x) {
                obj.cx = clamp_center(human.cx + rng.uniform(-0.04, 0.04), obj.w / 2.0);
                obj.cy = clamp_center(human.cy + off, obj.h / 2.0);
            } else {
                obj.cx = clamp_center(human.cx + off, obj.w / 2.0);
                obj.cy = clamp_center(human.cy + rng.uniform(-0.04, 0.04), obj.h / 2.0);
            }
        }
        const std::vector<double> labels = relation_labels(human, obj, 3);
        if (labels[static_cast<size_t>(relation)] == 1.0) return obj;
    }
    throw std::runtime_error("generate_synthetic: could not place object for relation " +
                             std::to_string(relation));
}

void fill_rect(Tensor& raster, const NormBox& box, int channel, double value) {
    const int h = raster.shape[1], w = raster.shape[2];
    const Corners c = to_corners(box);
    const int x0 = std::clamp(static_cast<int>(std::floor(c[0] * w)), 0, w);
    const int y0 = std::clamp(static_cast<int>(std::floor(c[1] * h)), 0, h);
    const int x1 = std::clamp(static_cast<int>(std::ceil(c[2] * w)), 0, w);
    const int y1 = std::clamp(static_cast<int>(std::ceil(c[3] * h)), 0, h);
    double* plane = raster.data.data() + static_cast<size_t>(channel) * h * w;
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            double& px = plane[static_cast<size_t>(y) * w + x];
            px = std::max(px, value);
        }
    }
}

}  // namespace

void SynthConfig::validate() const {
    if (n_images < 1) throw std::invalid_argument("SynthConfig: n_images must be >= 1");
    if (image_h < 8 || image_w < 8) {
        throw std::invalid_argument("SynthConfig: image size must be >= 8");
    }
    if (n_obj_classes < 1) throw std::invalid_argument("SynthConfig: need >= 1 object class");
    if (n_act_classes < 1 || n_act_classes > 3) {
        throw std::invalid_argument("SynthConfig: action classes must be in [1, 3]");
    }
    if (min_instances < 1 || max_instances < min_instances) {
        throw std::invalid_argument("SynthConfig: bad instance count range");
    }
    if (objectless_fraction < 0.0 || objectless_fraction > 1.0) {
        throw std::invalid_argument("SynthConfig: objectless_fraction must be in [0, 1]");
    }
}

std::vector<double> relation_labels(const NormBox& human, const NormBox& object, int n_act) {
    std::vector<double> labels(static_cast<size_t>(n_act), 0.0);
    const bool overlap = boxes_overlap(human, object);
    const double dist = center_distance(human, object);
    if (overlap) {
        labels[0] = 1.0;
    } else if (dist < kNearDistance) {
        if (n_act > 1) labels[1] = 1.0;
    } else if (std::abs(human.cx - object.cx) < kAlignTolerance ||
               std::abs(human.cy - object.cy) < kAlignTolerance) {
        if (n_act > 2) labels[2] = 1.0;
    }
    return labels;
}

void render_scene(Tensor& raster, const std::vector<GtInstance>& gts, int n_obj_classes) {
    for (const GtInstance& gt : gts) {
        fill_rect(raster, gt.human_box, 0, 1.0);
        if (gt.has_object()) {
            const double shade =
                static_cast<double>(gt.object_class + 1) / static_cast<double>(n_obj_classes);
            fill_rect(raster, gt.object_box, 1, shade);
            fill_rect(raster, gt.object_box, 2, 1.0);
        }
    }
}

SynthDataset generate_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);

    SynthDataset ds;
    ds.n_obj_classes = cfg.n_obj_classes;
    ds.n_act_classes = cfg.n_act_classes;
    for (int i = 0; i < cfg.n_obj_classes; ++i) ds.object_names.push_back("object" + std::to_string(i));
    for (int i = 0; i < cfg.n_act_classes; ++i) ds.action_names.push_back(kActionNames[i]);
    ds.hoi_counts.assign(static_cast<size_t>(cfg.n_obj_classes * cfg.n_act_classes), 0);

    for (int k = 0; k < cfg.n_images; ++k) {
        SynthImage img;
        img.id = "img" + std::to_string(k);
        img.raster = Tensor({3, cfg.image_h, cfg.image_w});
        const int n =
            cfg.min_instances + rng.uniform_int(cfg.max_instances - cfg.min_instances + 1);
        for (int i = 0; i < n; ++i) {
            GtInstance gt;
            gt.human_box = random_box(rng, 0.14, 0.3);
            gt.object_class = rng.uniform_int(cfg.n_obj_classes);
            if (rng.uniform() < cfg.objectless_fraction) {
                gt.object_box = NormBox{0.0, 0.0, 0.0, 0.0};
                gt.actions.assign(static_cast<size_t>(cfg.n_act_classes), 0.0);
                gt.actions[0] = 1.0;  // the object-free action
            } else {
                const int relation = rng.uniform_int(cfg.n_act_classes);
                gt.object_box = place_object(rng, gt.human_box, relation);
                gt.actions = relation_labels(gt.human_box, gt.object_box, cfg.n_act_classes);
            }
            for (int a = 0; a < cfg.n_act_classes; ++a) {
                if (gt.actions[static_cast<size_t>(a)] == 1.0) {
                    ++ds.hoi_counts[static_cast<size_t>(gt.object_class * cfg.n_act_classes + a)];
                }
            }
            img.gts.push_back(std::move(gt));
        }
        render_scene(img.raster, img.gts, cfg.n_obj_classes);
        ds.images.push_back(std::move(img));
    }
    return ds;
}

}  // namespace hoidet
