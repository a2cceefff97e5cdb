#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "hoidet/assignment.hpp"
#include "hoidet/rng.hpp"
#include "oracles.hpp"

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
    for (double& a : gt.actions) {
        if (a == 0.0 && rng.uniform() < 0.3) a = 1.0;
    }
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
    for (double& v : p.action_probs) v = rng.uniform();
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

}  // namespace

TEST_CASE("pair box cost takes the larger L1") {
    GtInstance gt;
    gt.human_box = {0.5, 0.5, 0.2, 0.2};
    gt.object_box = {0.3, 0.3, 0.1, 0.1};
    Prediction p;
    p.human_box = gt.human_box;
    p.object_box = gt.object_box;
    CHECK(pair_box_cost(gt, p) == 0.0);

    p.object_box = {0.35, 0.3, 0.1, 0.1};  // object L1 = 0.05
    CHECK(pair_box_cost(gt, p) == doctest::Approx(0.05).epsilon(1e-12));

    p.human_box = {0.5, 0.5, 0.2, 0.5};   // human L1 = 0.3
    p.object_box = {0.3, 0.4, 0.1, 0.1};  // object L1 = 0.1
    CHECK(pair_box_cost(gt, p) == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("pair giou cost takes the larger negated giou") {
    GtInstance gt;
    gt.human_box = from_corners({0.0, 0.0, 0.5, 0.5});
    gt.object_box = from_corners({0.0, 0.0, 0.2, 0.2});
    Prediction p;
    p.human_box = gt.human_box;
    p.object_box = gt.object_box;
    CHECK(pair_giou_cost(gt, p) == doctest::Approx(-1.0).epsilon(1e-12));

    p.object_box = from_corners({0.25, 0.0, 0.75, 0.5});
    GtInstance gt2 = gt;
    gt2.object_box = from_corners({0.0, 0.0, 0.5, 0.5});  // giou(object pair) = 1/3
    CHECK(pair_giou_cost(gt2, p) == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));

    GtInstance gt3;
    gt3.human_box = from_corners({0.0, 0.0, 0.2, 0.2});
    gt3.object_box = from_corners({0.0, 0.0, 0.2, 0.2});
    Prediction p3;
    p3.human_box = from_corners({0.8, 0.8, 1.0, 1.0});
    p3.object_box = from_corners({0.8, 0.8, 1.0, 1.0});
    CHECK(pair_giou_cost(gt3, p3) == doctest::Approx(0.92).epsilon(1e-12));
}

TEST_CASE("object class cost reads the gt class probability") {
    GtInstance gt;
    gt.object_class = 1;
    Prediction p;
    p.object_probs = {0.2, 0.7, 0.1};
    CHECK(object_class_cost(gt, p) == doctest::Approx(-0.7).epsilon(1e-12));
    p.object_probs = {0.0, 1.0, 0.0};
    CHECK(object_class_cost(gt, p) == -1.0);
    p.object_probs = {0.5, 0.0, 0.5};
    CHECK(object_class_cost(gt, p) == 0.0);
}

TEST_CASE("action class cost hand values") {
    GtInstance gt;
    Prediction p;

    gt.actions = {1, 0, 0};
    p.action_probs = {1, 0, 0};
    // -(1/1.0001 + 2/2.0001)/2
    CHECK(action_class_cost(gt, p, 1e-4) ==
          doctest::Approx(-0.99992500624943755).epsilon(1e-12));

    gt.actions = {1, 1, 0};
    p.action_probs = {0.5, 0.5, 0.5};
    // -(1/2.0001 + 0.5/1.0001)/2
    CHECK(action_class_cost(gt, p, 1e-4) ==
          doctest::Approx(-0.49996250312471878).epsilon(1e-12));

    gt.actions = {1, 0};
    p.action_probs = {0, 1};
    CHECK(action_class_cost(gt, p, 1e-4) == doctest::Approx(0.0));
}

TEST_CASE("action class cost stays in [-1, 0]") {
    Rng rng(21);
    for (int i = 0; i < 10000; ++i) {
        const int n_act = 1 + rng.uniform_int(6);
        GtInstance gt;
        gt.actions.resize(static_cast<size_t>(n_act));
        for (double& a : gt.actions) a = rng.uniform() < 0.5 ? 1.0 : 0.0;
        Prediction p;
        p.action_probs.resize(static_cast<size_t>(n_act));
        for (double& v : p.action_probs) v = rng.uniform();
        const double c = action_class_cost(gt, p, 1e-4);
        CHECK(c <= 0.0);
        CHECK(c >= -1.0);
    }
}

TEST_CASE("combine costs with full-scale weights") {
    CHECK(combine_costs(0.0, -1.0, -1.0, -1.0, CostWeights{}) == doctest::Approx(-3.0));
    CHECK(combine_costs(1.0, 0.0, 0.0, 0.0, CostWeights{}) == doctest::Approx(2.5));
}

TEST_CASE("cost matrix structure") {
    Rng rng(22);
    const int n_q = 4;
    std::vector<Prediction> preds;
    for (int j = 0; j < n_q; ++j) preds.push_back(random_pred(rng, 3, 3));

    SUBCASE("zero ground truths give an all-zero matrix") {
        const auto cost = build_cost_matrix({}, preds, CostWeights{});
        for (const auto& row : cost) {
            for (double c : row) CHECK(c == 0.0);
        }
    }

    SUBCASE("padded rows are exactly zero, real rows are combined costs") {
        const std::vector<GtInstance> gts = {random_gt(rng, 3, 3)};
        const CostWeights w;
        const auto cost = build_cost_matrix(gts, preds, w);
        REQUIRE(cost.size() == static_cast<size_t>(n_q));
        for (int j = 0; j < n_q; ++j) {
            const double expected = combine_costs(
                pair_box_cost(gts[0], preds[static_cast<size_t>(j)]),
                pair_giou_cost(gts[0], preds[static_cast<size_t>(j)]),
                object_class_cost(gts[0], preds[static_cast<size_t>(j)]),
                action_class_cost(gts[0], preds[static_cast<size_t>(j)], w.epsilon), w);
            CHECK(cost[0][static_cast<size_t>(j)] == expected);
        }
        for (size_t i = 1; i < cost.size(); ++i) {
            for (double c : cost[i]) CHECK(c == 0.0);
        }
    }

    SUBCASE("duplicate predictions give identical columns") {
        std::vector<Prediction> dup = preds;
        dup[2] = dup[0];
        const std::vector<GtInstance> gts = {random_gt(rng, 3, 3), random_gt(rng, 3, 3)};
        const auto cost = build_cost_matrix(gts, dup, CostWeights{});
        for (size_t i = 0; i < cost.size(); ++i) CHECK(cost[i][0] == cost[i][2]);
    }

    SUBCASE("more ground truths than queries is rejected") {
        std::vector<GtInstance> gts;
        for (int i = 0; i < n_q + 1; ++i) gts.push_back(random_gt(rng, 3, 3));
        CHECK_THROWS_AS(build_cost_matrix(gts, preds, CostWeights{}), std::invalid_argument);
    }

    SUBCASE("identical inputs give bit-identical matrices") {
        const std::vector<GtInstance> gts = {random_gt(rng, 3, 3)};
        const auto a = build_cost_matrix(gts, preds, CostWeights{});
        const auto b = build_cost_matrix(gts, preds, CostWeights{});
        CHECK(a == b);
    }
}

TEST_CASE("hungarian hand cases") {
    CHECK(hungarian({{0, 1}, {1, 0}}) == std::vector<int>{0, 1});
    CHECK(hungarian({{1, 2}, {2, 1}}) == std::vector<int>{0, 1});
    CHECK(hungarian({{2, 1}, {1, 2}}) == std::vector<int>{1, 0});
    CHECK(hungarian({}) == std::vector<int>{});
}

TEST_CASE("hungarian rejects bad input") {
    CHECK_THROWS_AS(hungarian({{0.0, 1.0}, {1.0}}), std::invalid_argument);
    const double nan = std::nan("");
    CHECK_THROWS_AS(hungarian({{0.0, nan}, {1.0, 0.0}}), std::invalid_argument);
    const double inf = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(hungarian({{0.0, inf}, {1.0, 0.0}}), std::invalid_argument);
}

TEST_CASE("hungarian matches brute force on random matrices") {
    Rng rng(23);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 2 + rng.uniform_int(7);  // 2..8
        std::vector<std::vector<double>> cost(static_cast<size_t>(n),
                                              std::vector<double>(static_cast<size_t>(n)));
        for (auto& row : cost) {
            for (double& c : row) c = rng.uniform(-1.0, 1.0);
        }
        double best = 0.0;
        const auto oracle = oracles::brute_force_assignment(cost, &best);
        const auto got = hungarian(cost);
        CHECK(oracles::permutation_total(cost, got) == best);
        CHECK(got == oracle);  // unique optimum almost surely at random inputs
    }
}

TEST_CASE("hungarian picks the lexicographically smallest optimum on ties") {
    SUBCASE("all-zero matrix") {
        CHECK(hungarian({{0, 0, 0}, {0, 0, 0}, {0, 0, 0}}) == std::vector<int>{0, 1, 2});
    }
    SUBCASE("duplicate columns") {
        // columns 0 and 2 identical
        const std::vector<std::vector<double>> cost = {{1, 5, 1}, {2, 1, 2}, {1, 9, 1}};
        double best = 0.0;
        const auto oracle = oracles::brute_force_assignment(cost, &best);
        const auto got = hungarian(cost);
        CHECK(got == oracle);
        CHECK(oracles::permutation_total(cost, got) == best);
    }
    SUBCASE("random tied matrices from a small value alphabet") {
        Rng rng(24);
        for (int trial = 0; trial < 300; ++trial) {
            const int n = 2 + rng.uniform_int(5);  // 2..6
            std::vector<std::vector<double>> cost(static_cast<size_t>(n),
                                                  std::vector<double>(static_cast<size_t>(n)));
            for (auto& row : cost) {
                for (double& c : row) c = static_cast<double>(rng.uniform_int(3));
            }
            const auto oracle = oracles::brute_force_assignment(cost);
            const auto got = hungarian(cost);
            CHECK(got == oracle);
        }
    }
}

TEST_CASE("match composes cost matrix and solver") {
    Rng rng(25);

    SUBCASE("empty ground truths pad every slot") {
        std::vector<Prediction> preds;
        for (int j = 0; j < 5; ++j) preds.push_back(random_pred(rng, 3, 3));
        const Assignment a = match({}, preds, CostWeights{});
        CHECK(a.n_real == 0);
        CHECK(a.padded_size() == 5);
        CHECK(a.gt_to_pred == std::vector<int>{0, 1, 2, 3, 4});
    }

    SUBCASE("an exactly matching prediction wins its gt") {
        const GtInstance gt = random_gt(rng, 3, 3);
        std::vector<Prediction> preds;
        for (int j = 0; j < 5; ++j) preds.push_back(random_pred(rng, 3, 3));
        preds[3] = pred_matching(gt, 3);
        const Assignment a = match({gt}, preds, CostWeights{});
        CHECK(a.gt_to_pred[0] == 3);
        CHECK(a.n_real == 1);
        CHECK(a.padded_size() == 4);
    }

    SUBCASE("two gts each claim their duplicate") {
        const GtInstance g0 = random_gt(rng, 3, 3);
        const GtInstance g1 = random_gt(rng, 3, 3);
        std::vector<Prediction> preds = {random_pred(rng, 3, 3), pred_matching(g1, 3),
                                         pred_matching(g0, 3), random_pred(rng, 3, 3)};
        const Assignment a = match({g0, g1}, preds, CostWeights{});
        CHECK(a.gt_to_pred[0] == 2);
        CHECK(a.gt_to_pred[1] == 1);
    }
}

TEST_CASE("matched total equals brute force on built cost matrices") {
    Rng rng(26);
    for (int trial = 0; trial < 50; ++trial) {
        const int n_q = 3 + rng.uniform_int(4);  // 3..6
        const int n_gt = rng.uniform_int(n_q + 1);
        std::vector<GtInstance> gts;
        for (int i = 0; i < n_gt; ++i) gts.push_back(random_gt(rng, 3, 3));
        std::vector<Prediction> preds;
        for (int j = 0; j < n_q; ++j) preds.push_back(random_pred(rng, 3, 3));
        const auto cost = build_cost_matrix(gts, preds, CostWeights{});
        double best = 0.0;
        oracles::brute_force_assignment(cost, &best);
        const Assignment a = match(gts, preds, CostWeights{});
        CHECK(oracles::permutation_total(cost, a.gt_to_pred) == doctest::Approx(best).epsilon(1e-12));
    }
}
