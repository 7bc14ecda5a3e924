#include "vpl/error.hpp"
#include "vpl/pipeline.hpp"
#include "vpl/synth.hpp"

#include "ap_oracle.hpp"

#include <doctest.h>

using namespace vpl;

namespace {

SynthWorldConfig noiseless(std::uint64_t seed) {
    SynthWorldConfig cfg;
    cfg.seed = seed;
    cfg.detector.recallDecay = 0.0;
    cfg.detector.hallucinationRate = 0.0;
    cfg.detector.boxJitter = 0.0;
    cfg.detector.scoreNoise = 0.0;
    cfg.detector.stalenessPenalty = 0.0;
    return cfg;
}

bool same_box(const BBox& a, const BBox& b) {
    for (int k = 0; k < 4; ++k) {
        if (std::abs(a.v[k] - b.v[k]) > 1e-9) return false;
    }
    return true;
}

/// Multiset equality of (image, class, box) with 1e-9 box tolerance.
bool same_annotations(std::vector<Annotation> a, std::vector<Annotation> b) {
    if (a.size() != b.size()) return false;
    for (const auto& x : a) {
        auto it = std::find_if(b.begin(), b.end(), [&](const Annotation& y) {
            return y.categoryId == x.categoryId && y.sourceImageId == x.sourceImageId && same_box(x.box, y.box);
        });
        if (it == b.end()) return false;
        b.erase(it);
    }
    return true;
}

}  // namespace

TEST_CASE("generate_world is reproducible from the seed") {
    SynthWorldConfig cfg;
    cfg.seed = 7;
    const Dataset a = generate_world(cfg);
    const Dataset b = generate_world(cfg);
    CHECK(a.images == b.images);
    CHECK(a.categories == b.categories);
    cfg.seed = 8;
    CHECK_FALSE(generate_world(cfg).images == a.images);
}

TEST_CASE("generate_world: shape, names and spacing") {
    SynthWorldConfig cfg;
    cfg.seed = 3;
    const Dataset ds = generate_world(cfg);
    CHECK(ds.images.size() == 80);
    CHECK(ds.categories.size() == 20);
    CHECK(ds.categories.find(7)->name == "class_07");
    CHECK(ds.provenance == Provenance::Synthetic);
    CHECK_NOTHROW(validate_dataset(ds));
    for (const auto& img : ds.images) {
        REQUIRE(img.annotations.size() == 4);
        for (std::size_t i = 0; i < img.annotations.size(); ++i) {
            for (int k = 0; k < 4; ++k) CHECK(img.annotations[i].box.v[k] == std::round(img.annotations[i].box.v[k]));
            for (std::size_t j = i + 1; j < img.annotations.size(); ++j) {
                CHECK(oracle::box_iou(img.annotations[i].box, img.annotations[j].box) < 0.3);
            }
        }
    }
}

TEST_CASE("generate_world: every task view of the scenario is non-empty") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SynthWorldConfig cfg;
        cfg.seed = seed;
        cfg.imagesPerTask = 3;
        cfg.objectsPerImage = 1;
        const Dataset ds = generate_world(cfg);
        const TaskScenario sc = parse_scenario(cfg.scenario, category_universe(ds.categories, CategoryOrder::AscendingId));
        for (int d = 1; d <= 4; ++d) CHECK_NOTHROW(build_task_view(ds, sc, d));
    }
}

TEST_CASE("generate_world rejects bad configurations") {
    SynthWorldConfig cfg;
    cfg.objectsPerImage = 0;
    CHECK_THROWS_AS(generate_world(cfg), ValidationError);
    cfg = {};
    cfg.detector.recallDecay = 1.5;
    CHECK_THROWS_AS(generate_world(cfg), ValidationError);
    cfg = {};
    cfg.scenario = "10+5";
    CHECK_THROWS_AS(generate_world(cfg), ValidationError);
    cfg = {};
    cfg.objectsPerImage = 200;
    CHECK_THROWS_AS(generate_world(cfg), ValidationError);
}

TEST_CASE("synthetic_detect: noiseless detector reproduces known objects") {
    const SynthWorldConfig cfg = noiseless(5);
    const Dataset world = generate_world(cfg);
    const SyntheticDetector det{{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 2, cfg};
    for (const auto& img : world.images) {
        const DetectionOutput out = synthetic_detect(det, img, 3);
        CHECK_NOTHROW(validate_detection_output(out));
        CHECK(out.num_queries() == 100);
        CHECK(out.categoryIds.size() == 10);
        std::vector<Annotation> expected;
        for (const auto& a : img.annotations) {
            if (det.knownCategories.contains(a.categoryId)) expected.push_back(a);
        }
        std::vector<Annotation> got;
        for (const auto& pg : extract_pseudo_gts(out, 0.3, img.size())) got.push_back(pg.annotation);
        CHECK(same_annotations(got, expected));
    }
}

TEST_CASE("synthetic_detect: deterministic per image, task and staleness") {
    SynthWorldConfig cfg;
    cfg.seed = 11;
    const Dataset world = generate_world(cfg);
    const SyntheticDetector det{{1, 2, 3, 4, 5}, 1, cfg};
    const auto a = synthetic_detect(det, world.images[3], 2);
    const auto b = synthetic_detect(det, world.images[3], 2);
    CHECK(a.scores == b.scores);
    CHECK(a.boxes == b.boxes);
    CHECK_FALSE(synthetic_detect(det, world.images[3], 1).scores == a.scores);
    CHECK_THROWS_AS(synthetic_detect(det, world.images[3], -1), ValidationError);
    CHECK_THROWS_AS(synthetic_detect(SyntheticDetector{{}, 1, cfg}, world.images[3], 1), ValidationError);
}

TEST_CASE("synthetic_detect: object emission rate is (1 - decay)^staleness") {
    SynthWorldConfig cfg = noiseless(1);
    cfg.detector.recallDecay = 0.3;
    cfg.numClasses = 1;
    cfg.scenario = "";
    cfg.imagesPerTask = 4000;
    cfg.objectsPerImage = 1;
    const Dataset world = generate_world(cfg);
    const SyntheticDetector det{{1}, 1, cfg};
    std::size_t emitted = 0;
    for (const auto& img : world.images) emitted += extract_pseudo_gts(synthetic_detect(det, img, 2), 0.3, img.size()).size();
    const double rate = static_cast<double>(emitted) / static_cast<double>(world.images.size());
    CHECK(std::abs(rate - 0.49) <= 0.02);
}

TEST_CASE("synthetic_detect: hallucinations grow with staleness") {
    SynthWorldConfig cfg;
    cfg.seed = 2;
    cfg.detector.recallDecay = 0.0;
    const Dataset world = generate_world(cfg);
    const SyntheticDetector det{{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 1, cfg};
    std::vector<std::size_t> wrong(4, 0);
    for (int staleness = 0; staleness < 4; ++staleness) {
        for (const auto& img : world.images) {
            for (const auto& pg : extract_pseudo_gts(synthetic_detect(det, img, staleness), 0.3, img.size())) {
                bool matches = false;
                for (const auto& a : img.annotations) {
                    matches |= a.categoryId == pg.annotation.categoryId && iou(a.box, pg.annotation.box) >= 0.5;
                }
                wrong[static_cast<std::size_t>(staleness)] += matches ? 0 : 1;
            }
        }
    }
    CHECK(wrong[0] < wrong[1]);
    CHECK(wrong[1] < wrong[2]);
    CHECK(wrong[2] < wrong[3]);
}

TEST_CASE("full recovery: noiseless detector + oracle + merge rebuild the stripped labels") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const SynthWorldConfig cfg = noiseless(seed);
        const Dataset world = generate_world(cfg);
        const TaskScenario sc = parse_scenario("5+5+5+5", category_universe(world.categories, CategoryOrder::AscendingId));
        const OracleBackend oracle(world, {0.5, 0.0, 0});
        for (int d = 2; d <= 4; ++d) {
            const TaskView view = build_task_view(world, sc, d);
            const auto old_classes = cumulative_categories(sc, d - 1);
            const SyntheticDetector det{old_classes, d - 1, cfg};
            const auto pseudo = pseudo_label_images(
                view.dataset, [&](const ImageRecord& img) { return synthetic_detect(det, *world.find_image(img.id), d - 1); },
                0.3);
            const VerifyResult verified = verify_batch(pseudo, view.dataset, oracle);
            CHECK(verified.accepted_count() == pseudo.size());
            const Dataset merged = merge_labels(view, group_by_image(verified.items));
            const Dataset truth = restrict_truth(world, view, cumulative_categories(sc, d));
            REQUIRE(merged.images.size() == truth.images.size());
            for (std::size_t i = 0; i < merged.images.size(); ++i) {
                CAPTURE(merged.images[i].id);
                CHECK(same_annotations(merged.images[i].annotations, truth.images[i].annotations));
            }
        }
    }
}
