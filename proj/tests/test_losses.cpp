#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "hoidet/losses.hpp"
#include "hoidet/rng.hpp"

using namespace hoidet;

namespace {

NormBox random_box(Rng& rng) {
    const double w = rng.uniform(0.05, 0.5);
    const double h = rng.uniform(0.05, 0.5);
    return {rng.uniform(w / 2, 1.0 - w / 2), rng.uniform(h / 2, 1.0 - h / 2), w, h};
}

GtInstance random_gt(Rng& rng, int n_obj, int n_act) {
    GtInstance gt;
    gt.human_box = random_box(rng);
    gt.object_box = random_box(rng);
    gt.object_class = rng.uniform_int(n_obj);
    gt.actions.assign(static_cast<size_t>(n_act), 0.0);
    gt.actions[static_cast<size_t>(rng.uniform_int(n_act))] = 1.0;
    return gt;
}

Prediction random_pred(Rng& rng, int n_obj, int n_act) {
    Prediction p;
    p.human_box = random_box(rng);
    p.object_box = random_box(rng);
    p.object_probs.resize(static_cast<size_t>(n_obj) + 1);
    double sum = 0.0;
    for (double& v : p.object_probs) {
        v = rng.uniform(0.01, 1.0);
        sum += v;
    }
    for (double& v : p.object_probs) v /= sum;
    p.action_probs.resize(static_cast<size_t>(n_act));
    for (double& v : p.action_probs) v = rng.uniform(0.05, 0.95);
    return p;
}

Prediction pred_matching(const GtInstance& gt, int n_obj) {
    Prediction p;
    p.human_box = gt.human_box;
    p.object_box = gt.object_box;
    p.object_probs.assign(static_cast<size_t>(n_obj) + 1, 0.0);
    p.object_probs[static_cast<size_t>(gt.object_class)] = 1.0;
    p.action_probs = gt.actions;
    return p;
}

Prediction no_pair_pred(int n_obj, int n_act) {
    Prediction p;
    p.human_box = {0.5, 0.5, 0.1, 0.1};
    p.object_box = {0.5, 0.5, 0.1, 0.1};
    p.object_probs.assign(static_cast<size_t>(n_obj) + 1, 0.0);
    p.object_probs.back() = 1.0;
    p.action_probs.assign(static_cast<size_t>(n_act), 0.0);
    return p;
}

Assignment identity_assignment(int n_q, int n_real) {
    Assignment a;
    a.n_real = n_real;
    a.gt_to_pred.resize(static_cast<size_t>(n_q));
    for (int i = 0; i < n_q; ++i) a.gt_to_pred[static_cast<size_t>(i)] = i;
    return a;
}

}  // namespace

TEST_CASE("box loss") {
    GtInstance gt;
    gt.human_box = {0.5, 0.5, 0.2, 0.2};
    gt.object_box = {0.3, 0.3, 0.2, 0.2};
    gt.object_class = 0;
    gt.actions = {1.0};

    SUBCASE("perfect match is zero") {
        const Prediction p = pred_matching(gt, 1);
        CHECK(box_loss({gt}, {p}, identity_assignment(1, 1)) == 0.0);
    }
    SUBCASE("single gt sums human and object L1") {
        Prediction p = pred_matching(gt, 1);
        p.human_box.cx += 0.1;                      // human L1 0.1
        p.object_box = {0.3, 0.3, 0.2, 0.5};        // object L1 0.3
        CHECK(box_loss({gt}, {p}, identity_assignment(1, 1)) ==
              doctest::Approx(0.4).epsilon(1e-12));
    }
    SUBCASE("two gts average their pair sums") {
        GtInstance gt2 = gt;
        gt2.object_box = {0.7, 0.7, 0.2, 0.2};
        Prediction p0 = pred_matching(gt, 1);
        p0.human_box.cx += 0.4;  // pair sum 0.4
        Prediction p1 = pred_matching(gt2, 1);
        p1.object_box.cy += 0.2;  // pair sum 0.2
        CHECK(box_loss({gt, gt2}, {p0, p1}, identity_assignment(2, 2)) ==
              doctest::Approx(0.3).epsilon(1e-12));
    }
    SUBCASE("no ground truths give zero") {
        const Prediction p = no_pair_pred(1, 1);
        CHECK(box_loss({}, {p}, identity_assignment(1, 0)) == 0.0);
    }
}

TEST_CASE("giou loss") {
    GtInstance gt;
    gt.human_box = from_corners({0.0, 0.0, 0.5, 0.5});
    gt.object_box = from_corners({0.0, 0.0, 0.5, 0.5});
    gt.object_class = 0;
    gt.actions = {1.0};

    SUBCASE("perfect match is zero") {
        const Prediction p = pred_matching(gt, 1);
        CHECK(giou_loss({gt}, {p}, identity_assignment(1, 1)) ==
              doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("giou pair (1, 1/3)") {
        Prediction p = pred_matching(gt, 1);
        p.object_box = from_corners({0.25, 0.0, 0.75, 0.5});
        CHECK(giou_loss({gt}, {p}, identity_assignment(1, 1)) ==
              doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    }
    SUBCASE("fully disjoint pairs with giou -0.92 each") {
        GtInstance far;
        far.human_box = from_corners({0.0, 0.0, 0.2, 0.2});
        far.object_box = from_corners({0.0, 0.0, 0.2, 0.2});
        far.object_class = 0;
        far.actions = {1.0};
        Prediction p;
        p.human_box = from_corners({0.8, 0.8, 1.0, 1.0});
        p.object_box = from_corners({0.8, 0.8, 1.0, 1.0});
        p.object_probs = {1.0, 0.0};
        p.action_probs = {1.0};
        CHECK(giou_loss({far}, {p}, identity_assignment(1, 1)) ==
              doctest::Approx(3.84).epsilon(1e-12));
    }
}

TEST_CASE("class loss") {
    SUBCASE("probability 1 on every target is ~zero") {
        GtInstance gt;
        gt.object_class = 1;
        gt.actions = {1.0};
        std::vector<Prediction> preds = {pred_matching(gt, 2), no_pair_pred(2, 1)};
        CHECK(class_loss({gt}, preds, identity_assignment(2, 1)) ==
              doctest::Approx(0.0).epsilon(1e-6));
    }
    SUBCASE("matched 0.5, padded 1.0") {
        GtInstance gt;
        gt.object_class = 0;
        gt.actions = {1.0};
        Prediction p0 = pred_matching(gt, 1);
        p0.object_probs = {0.5, 0.5};
        std::vector<Prediction> preds = {p0, no_pair_pred(1, 1)};
        CHECK(class_loss({gt}, preds, identity_assignment(2, 1)) ==
              doctest::Approx(std::log(2.0) / 2.0).epsilon(1e-6));
    }
    SUBCASE("uniform distribution over 4 classes") {
        GtInstance gt;
        gt.object_class = 2;
        gt.actions = {1.0};
        Prediction p;
        p.human_box = p.object_box = {0.5, 0.5, 0.1, 0.1};
        p.object_probs = {0.25, 0.25, 0.25, 0.25};
        p.action_probs = {1.0};
        CHECK(class_loss({gt}, {p}, identity_assignment(1, 1)) ==
              doctest::Approx(std::log(4.0)).epsilon(1e-12));
    }
}

TEST_CASE("element-wise focal loss") {
    CHECK(focal_elementwise(1.0, 1.0) == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(focal_elementwise(1.0, 0.5) == doctest::Approx(0.25 * std::log(2.0)).epsilon(1e-12));
    CHECK(focal_elementwise(0.0, 0.5) == doctest::Approx(0.25 * std::log(2.0)).epsilon(1e-12));
    CHECK(focal_elementwise(0.0, 0.0) == doctest::Approx(0.0).epsilon(1e-6));
    // gamma = 0 reduces to plain cross-entropy
    CHECK(focal_elementwise(1.0, 0.5, {0.0}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("action loss") {
    SUBCASE("on-target probabilities are ~zero") {
        GtInstance gt;
        gt.object_class = 0;
        gt.actions = {1.0, 0.0};
        const Prediction p = pred_matching(gt, 1);
        CHECK(action_loss({gt}, {p}, identity_assignment(1, 1)) ==
              doctest::Approx(0.0).epsilon(1e-5));
    }
    SUBCASE("one gt, two focal terms over denominator 1") {
        GtInstance gt;
        gt.object_class = 0;
        gt.actions = {1.0, 0.0};
        Prediction p = pred_matching(gt, 1);
        p.action_probs = {0.5, 0.5};
        CHECK(action_loss({gt}, {p}, identity_assignment(1, 1)) ==
              doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-9));
    }
    SUBCASE("zero ground truths clamp the denominator to 1") {
        Prediction p = no_pair_pred(1, 1);
        p.action_probs = {0.5};
        CHECK(action_loss({}, {p}, identity_assignment(1, 0)) ==
              doctest::Approx(0.25 * std::log(2.0)).epsilon(1e-9));
    }
}

TEST_CASE("total loss combines with weights") {
    CHECK(combine_losses(0.4, 2.0 / 3.0, 0.34657, 0.34658, LossWeights{}) ==
          doctest::Approx(2.35982).epsilon(1e-5));

    Rng rng(31);
    const std::vector<GtInstance> gts = {random_gt(rng, 3, 3)};
    std::vector<Prediction> preds = {random_pred(rng, 3, 3), random_pred(rng, 3, 3)};
    const Assignment a = match(gts, preds, CostWeights{});
    const LossWeights w;
    const LossBreakdown b = total_loss(gts, preds, a, w);
    CHECK(b.total == doctest::Approx(w.lambda_b * b.box + w.lambda_u * b.giou +
                                     w.lambda_c * b.obj_class + w.lambda_a * b.action)
                         .epsilon(1e-12));

    LossWeights doubled{5.0, 2.0, 2.0, 2.0};
    const LossBreakdown d = total_loss(gts, preds, a, doubled);
    CHECK(d.total == doctest::Approx(2.0 * b.total).epsilon(1e-12));
}

TEST_CASE("auxiliary loss sums per-layer totals") {
    Rng rng(32);
    const std::vector<GtInstance> gts = {random_gt(rng, 3, 3)};
    std::vector<Prediction> layer;
    for (int j = 0; j < 3; ++j) layer.push_back(random_pred(rng, 3, 3));
    const Assignment a = match(gts, layer, CostWeights{});
    const double single = total_loss(gts, layer, a, LossWeights{}).total;

    CHECK(aux_total_loss(gts, {layer}, CostWeights{}, LossWeights{}) ==
          doctest::Approx(single).epsilon(1e-12));
    CHECK(aux_total_loss(gts, {layer, layer, layer}, CostWeights{}, LossWeights{}) ==
          doctest::Approx(3.0 * single).epsilon(1e-12));

    std::vector<Prediction> layer2;
    for (int j = 0; j < 3; ++j) layer2.push_back(random_pred(rng, 3, 3));
    const Assignment a2 = match(gts, layer2, CostWeights{});
    const double second = total_loss(gts, layer2, a2, LossWeights{}).total;
    CHECK(aux_total_loss(gts, {layer, layer2}, CostWeights{}, LossWeights{}) ==
          doctest::Approx(single + second).epsilon(1e-12));
}

TEST_CASE("loss is a set function of predictions and ground truths") {
    Rng rng(33);
    for (int trial = 0; trial < 200; ++trial) {
        const int n_q = 3 + rng.uniform_int(4);
        const int n_gt = 1 + rng.uniform_int(n_q);
        std::vector<GtInstance> gts;
        for (int i = 0; i < n_gt; ++i) gts.push_back(random_gt(rng, 3, 3));
        std::vector<Prediction> preds;
        for (int j = 0; j < n_q; ++j) preds.push_back(random_pred(rng, 3, 3));

        const LossBreakdown base =
            total_loss(gts, preds, match(gts, preds, CostWeights{}), LossWeights{});

        std::vector<Prediction> shuffled = preds;
        for (size_t j = shuffled.size(); j > 1; --j) {
            std::swap(shuffled[j - 1], shuffled[static_cast<size_t>(rng.uniform_int(static_cast<int>(j)))]);
        }
        const LossBreakdown permuted =
            total_loss(gts, shuffled, match(gts, shuffled, CostWeights{}), LossWeights{});
        CHECK(permuted.box == doctest::Approx(base.box).epsilon(1e-9));
        CHECK(permuted.giou == doctest::Approx(base.giou).epsilon(1e-9));
        CHECK(permuted.obj_class == doctest::Approx(base.obj_class).epsilon(1e-9));
        CHECK(permuted.action == doctest::Approx(base.action).epsilon(1e-9));
        CHECK(permuted.total == doctest::Approx(base.total).epsilon(1e-9));

        std::vector<GtInstance> gshuf = gts;
        for (size_t j = gshuf.size(); j > 1; --j) {
            std::swap(gshuf[j - 1], gshuf[static_cast<size_t>(rng.uniform_int(static_cast<int>(j)))]);
        }
        const LossBreakdown gperm =
            total_loss(gshuf, preds, match(gshuf, preds, CostWeights{}), LossWeights{});
        CHECK(gperm.total == doctest::Approx(base.total).epsilon(1e-9));
    }
}

TEST_CASE("loss components are non-negative") {
    Rng rng(34);
    for (int trial = 0; trial < 500; ++trial) {
        const int n_q = 2 + rng.uniform_int(5);
        const int n_gt = rng.uniform_int(n_q + 1);
        std::vector<GtInstance> gts;
        for (int i = 0; i < n_gt; ++i) gts.push_back(random_gt(rng, 3, 3));
        std::vector<Prediction> preds;
        for (int j = 0; j < n_q; ++j) preds.push_back(random_pred(rng, 3, 3));
        const LossBreakdown b =
            total_loss(gts, preds, match(gts, preds, CostWeights{}), LossWeights{});
        CHECK(b.box >= 0.0);
        CHECK(b.giou >= 0.0);
        CHECK(b.obj_class >= 0.0);
        CHECK(b.action >= 0.0);
        CHECK(b.total >= 0.0);
    }
}

TEST_CASE("empty image reduces to no-pair likelihood") {
    Rng rng(35);
    std::vector<Prediction> preds;
    for (int j = 0; j < 4; ++j) preds.push_back(random_pred(rng, 3, 3));
    const Assignment a = match({}, preds, CostWeights{});
    CHECK(box_loss({}, preds, a) == 0.0);
    CHECK(giou_loss({}, preds, a) == 0.0);
    double expected = 0.0;
    for (const Prediction& p : preds) {
        expected += -std::log(std::clamp(p.object_probs.back(), kProbClamp, 1.0 - kProbClamp));
    }
    expected /= static_cast<double>(preds.size());
    CHECK(class_loss({}, preds, a) == doctest::Approx(expected).epsilon(1e-12));
}
