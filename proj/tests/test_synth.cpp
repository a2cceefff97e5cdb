#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "hoidet/rng.hpp"
#include "hoidet/synth.hpp"

using namespace hoidet;

TEST_CASE("relation labels fire on hand-built geometry") {
    const NormBox human{0.5, 0.5, 0.2, 0.2};

    // Centers 0.05 apart with half-width sum 0.2: intersecting boxes.
    CHECK(relation_labels(human, {0.55, 0.5, 0.2, 0.2}, 3) == std::vector<double>{1.0, 0.0, 0.0});
    // Disjoint (gap along x) but centers 0.25 < 0.3 apart.
    CHECK(relation_labels(human, {0.75, 0.5, 0.2, 0.2}, 3) == std::vector<double>{0.0, 1.0, 0.0});
    // Centers 0.45 apart, x-aligned exactly.
    CHECK(relation_labels(human, {0.5, 0.95, 0.1, 0.1}, 3) == std::vector<double>{0.0, 0.0, 1.0});
    // Far and unaligned: no relation holds.
    CHECK(relation_labels(human, {0.9, 0.9, 0.1, 0.1}, 3) == std::vector<double>{0.0, 0.0, 0.0});
}

TEST_CASE("relation labels truncate to the requested action count") {
    const NormBox human{0.5, 0.5, 0.2, 0.2};
    const NormBox near_box{0.75, 0.5, 0.2, 0.2};
    const NormBox aligned_box{0.5, 0.95, 0.1, 0.1};

    CHECK(relation_labels(human, near_box, 2) == std::vector<double>{0.0, 1.0});
    // With only 2 actions the aligned relation has no slot to land in.
    CHECK(relation_labels(human, aligned_box, 2) == std::vector<double>{0.0, 0.0});
    CHECK(relation_labels(human, near_box, 1) == std::vector<double>{0.0});
}

TEST_CASE("relation labels are mutually exclusive on random boxes") {
    Rng rng(31);
    for (int i = 0; i < 500; ++i) {
        NormBox a{rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.05, 0.4),
                  rng.uniform(0.05, 0.4)};
        NormBox b{rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.05, 0.4),
                  rng.uniform(0.05, 0.4)};
        const std::vector<double> labels = relation_labels(a, b, 3);
        double sum = 0.0;
        for (const double v : labels) {
            CHECK((v == 0.0 || v == 1.0));
            sum += v;
        }
        CHECK(sum <= 1.0);
    }
}

TEST_CASE("config validation rejects bad ranges") {
    SynthConfig cfg;
    CHECK_NOTHROW(cfg.validate());

    SynthConfig bad = cfg;
    bad.n_images = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.image_h = 4;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.n_obj_classes = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.n_act_classes = 4;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.n_act_classes = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.min_instances = 3;
    bad.max_instances = 2;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.objectless_fraction = 1.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("generation is deterministic and seed-sensitive") {
    SynthConfig cfg;
    cfg.seed = 13;
    cfg.n_images = 4;
    cfg.image_h = 32;
    cfg.image_w = 32;

    const SynthDataset a = generate_synthetic(cfg);
    const SynthDataset b = generate_synthetic(cfg);
    REQUIRE(a.images.size() == b.images.size());
    for (size_t i = 0; i < a.images.size(); ++i) {
        CHECK(a.images[i].id == b.images[i].id);
        CHECK(a.images[i].raster.data == b.images[i].raster.data);
        REQUIRE(a.images[i].gts.size() == b.images[i].gts.size());
        for (size_t g = 0; g < a.images[i].gts.size(); ++g) {
            CHECK(a.images[i].gts[g].human_box.cx == b.images[i].gts[g].human_box.cx);
            CHECK(a.images[i].gts[g].object_box.cy == b.images[i].gts[g].object_box.cy);
            CHECK(a.images[i].gts[g].actions == b.images[i].gts[g].actions);
        }
    }
    CHECK(a.hoi_counts == b.hoi_counts);

    cfg.seed = 14;
    const SynthDataset c = generate_synthetic(cfg);
    bool any_diff = false;
    for (size_t i = 0; i < a.images.size() && !any_diff; ++i) {
        any_diff = a.images[i].raster.data != c.images[i].raster.data;
    }
    CHECK(any_diff);
}

TEST_CASE("generated scenes satisfy the documented invariants") {
    SynthConfig cfg;
    cfg.seed = 21;
    cfg.n_images = 8;
    cfg.min_instances = 1;
    cfg.max_instances = 3;
    const SynthDataset ds = generate_synthetic(cfg);

    REQUIRE(static_cast<int>(ds.images.size()) == cfg.n_images);
    CHECK(ds.object_names.size() == 3);
    CHECK(ds.action_names == std::vector<std::string>{"overlap", "near", "aligned"});

    std::vector<int> recount(static_cast<size_t>(ds.n_obj_classes * ds.n_act_classes), 0);
    for (size_t i = 0; i < ds.images.size(); ++i) {
        const SynthImage& img = ds.images[i];
        CHECK(img.id == "img" + std::to_string(i));
        CHECK(img.raster.shape == std::vector<int>{3, cfg.image_h, cfg.image_w});
        const size_t n = img.gts.size();
        CHECK(n >= static_cast<size_t>(cfg.min_instances));
        CHECK(n <= static_cast<size_t>(cfg.max_instances));
        for (const double v : img.raster.data) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        for (const GtInstance& gt : img.gts) {
            // Every stored label is re-derivable from the stored boxes.
            CHECK(gt.actions == relation_labels(gt.human_box, gt.object_box, ds.n_act_classes));
            CHECK(std::accumulate(gt.actions.begin(), gt.actions.end(), 0.0) == 1.0);
            CHECK(gt.object_class >= 0);
            CHECK(gt.object_class < ds.n_obj_classes);
            for (const NormBox& box : {gt.human_box, gt.object_box}) {
                CHECK(box.cx - box.w / 2.0 >= 0.0);
                CHECK(box.cx + box.w / 2.0 <= 1.0);
                CHECK(box.cy - box.h / 2.0 >= 0.0);
                CHECK(box.cy + box.h / 2.0 <= 1.0);
            }
            for (int a = 0; a < ds.n_act_classes; ++a) {
                if (gt.actions[static_cast<size_t>(a)] == 1.0) {
                    ++recount[static_cast<size_t>(gt.object_class * ds.n_act_classes + a)];
                }
            }
        }
    }
    CHECK(recount == ds.hoi_counts);
}

TEST_CASE("objectless instances carry the sentinel box and the first action") {
    SynthConfig cfg;
    cfg.seed = 3;
    cfg.n_images = 6;
    cfg.objectless_fraction = 1.0;
    const SynthDataset ds = generate_synthetic(cfg);

    int seen = 0;
    for (const SynthImage& img : ds.images) {
        for (const GtInstance& gt : img.gts) {
            ++seen;
            CHECK(!gt.has_object());
            CHECK(gt.object_box.cx == 0.0);
            CHECK(gt.object_box.w == 0.0);
            std::vector<double> expected(static_cast<size_t>(ds.n_act_classes), 0.0);
            expected[0] = 1.0;
            CHECK(gt.actions == expected);
        }
    }
    CHECK(seen > 0);
}

TEST_CASE("rendering paints humans and objects into their channels") {
    Tensor raster({3, 16, 16});
    GtInstance gt;
    gt.human_box = {0.25, 0.25, 0.5, 0.5};  // corners (0, 0, 0.5, 0.5) -> pixels [0, 8)
    gt.object_box = {0.75, 0.75, 0.25, 0.25};
    gt.object_class = 1;
    gt.actions = {0.0, 1.0, 0.0};
    render_scene(raster, {gt}, 3);

    const int hw = 16 * 16;
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) CHECK(raster.data[static_cast<size_t>(y) * 16 + x] == 1.0);
    }
    CHECK(raster.data[8 * 16 + 8] == 0.0);  // outside the human box
    // Object shade encodes the class: (1 + 1) / 3 on channel 1, presence on channel 2.
    const int oy = 11, ox = 11;
    CHECK(raster.data[hw + oy * 16 + ox] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(raster.data[2 * hw + oy * 16 + ox] == 1.0);

    // An object-less instance paints only the human channel.
    Tensor empty({3, 16, 16});
    GtInstance lone;
    lone.human_box = {0.5, 0.5, 0.4, 0.4};
    lone.object_box = {0.0, 0.0, 0.0, 0.0};
    lone.actions = {1.0};
    render_scene(empty, {lone}, 3);
    double ch1 = 0.0, ch2 = 0.0;
    for (int p = 0; p < hw; ++p) {
        ch1 += empty.data[hw + p];
        ch2 += empty.data[2 * hw + p];
    }
    CHECK(ch1 == 0.0);
    CHECK(ch2 == 0.0);
}

TEST_CASE("overlapping paint keeps the brighter value") {
    Tensor raster({3, 16, 16});
    GtInstance a;
    a.human_box = {0.5, 0.5, 0.5, 0.5};
    a.object_box = {0.5, 0.5, 0.4, 0.4};
    a.object_class = 0;  // shade 1/3
    a.actions = {1.0};
    GtInstance b = a;
    b.object_class = 2;  // shade 1, same region
    render_scene(raster, {a, b}, 3);

    const int hw = 16 * 16;
    CHECK(raster.data[hw + 8 * 16 + 8] == 1.0);  // max of 1/3 and 1
}
