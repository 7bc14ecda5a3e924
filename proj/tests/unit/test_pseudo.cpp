#include "vpl/error.hpp"
#include "vpl/pseudo.hpp"

#include "pseudo_oracle.hpp"
#include "random_scenes.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace vpl;

namespace {

DetectionOutput example_output() {
    DetectionOutput out;
    out.imageId = "img";
    out.categoryIds = {1, 2};
    out.scoresAreLogits = false;
    out.scores = ScoreMatrix(2, 3, {0.7, 0.2, 0.1, 0.25, 0.28, 0.9});
    out.boxes = {{0.5, 0.5, 0.5, 0.5}, {0.25, 0.25, 0.1, 0.1}};
    return out;
}

std::set<int> query_set(const std::vector<PseudoGT>& pgs) {
    std::set<int> s;
    for (const auto& p : pgs) s.insert(p.queryIndex);
    return s;
}

}  // namespace

TEST_CASE("apply_sigmoid: 0, symmetry and the value at 2") {
    const ScoreMatrix m(1, 3, {0.0, 3.5, -3.5});
    const ScoreMatrix s = apply_sigmoid(m);
    CHECK(s(0, 0) == 0.5);
    CHECK(s(0, 1) + s(0, 2) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(apply_sigmoid(ScoreMatrix(1, 1, 2.0))(0, 0) == doctest::Approx(0.8807970779778823).epsilon(1e-15));
    const ScoreMatrix extreme = apply_sigmoid(ScoreMatrix(1, 2, {800.0, -800.0}));
    CHECK(extreme(0, 0) == 1.0);
    CHECK(extreme(0, 1) == 0.0);
}

TEST_CASE("apply_sigmoid rejects non-finite input") {
    CHECK_THROWS_AS(apply_sigmoid(ScoreMatrix(1, 1, std::numeric_limits<double>::quiet_NaN())), ValidationError);
    CHECK_THROWS_AS(apply_sigmoid(ScoreMatrix(1, 1, std::numeric_limits<double>::infinity())), ValidationError);
}

TEST_CASE("extract_pseudo_gts: per-query argmax with threshold") {
    const auto pgs = extract_pseudo_gts(example_output(), 0.3, {640, 480});
    REQUIRE(pgs.size() == 1);
    CHECK(pgs[0].annotation.categoryId == 1);
    CHECK(pgs[0].confidence == 0.7);
    CHECK(pgs[0].queryIndex == 0);
    CHECK(pgs[0].verification == Verification::Unverified);
    CHECK(pgs[0].annotation.box == BBox::abs_corner(160, 120, 480, 360));
    CHECK(pgs[0].annotation.sourceImageId == "img");
}

TEST_CASE("extract_pseudo_gts: default threshold is 0.3") { CHECK(kDefaultTau == 0.3); }

TEST_CASE("extract_pseudo_gts: names come from the category table") {
    CategoryTable t;
    t.entries = {{1, "cat"}, {2, "dog"}};
    const auto pgs = extract_pseudo_gts(example_output(), 0.3, {640, 480}, t);
    CHECK(pgs[0].annotation.categoryName == "cat");
    CategoryTable missing;
    missing.entries = {{2, "dog"}};
    CHECK_THROWS_AS(extract_pseudo_gts(example_output(), 0.3, {640, 480}, missing), ValidationError);
}

TEST_CASE("extract_pseudo_gts: everything below tau gives nothing") {
    DetectionOutput out = example_output();
    CHECK(extract_pseudo_gts(out, 0.71, {640, 480}).empty());
}

TEST_CASE("extract_pseudo_gts: raising tau never adds pseudo GTs") {
    const auto low = extract_pseudo_gts(example_output(), 0.3, {640, 480});
    const auto high = extract_pseudo_gts(example_output(), 0.5, {640, 480});
    CHECK(high.size() <= low.size());
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const auto out = oracle::random_output(seed, 50, 6, seed % 2 == 0);
        std::set<int> prev = query_set(extract_pseudo_gts(out, 0.05, {100, 100}));
        for (double tau : {0.1, 0.2, 0.3, 0.45, 0.6, 0.8, 0.95}) {
            const std::set<int> cur = query_set(extract_pseudo_gts(out, tau, {100, 100}));
            CHECK(std::includes(prev.begin(), prev.end(), cur.begin(), cur.end()));
            prev = cur;
        }
    }
}

TEST_CASE("extract_pseudo_gts: background never yields a pseudo GT") {
    DetectionOutput out;
    out.imageId = "bg";
    out.categoryIds = {4, 9};
    out.scoresAreLogits = false;
    out.scores = ScoreMatrix(3, 3, {0.31, 0.2, 0.99, 0.1, 0.1, 1.0, 0.2, 0.29, 0.95});
    out.boxes = {{0.5, 0.5, 0.2, 0.2}, {0.5, 0.5, 0.2, 0.2}, {0.5, 0.5, 0.2, 0.2}};
    const auto pgs = extract_pseudo_gts(out, 0.3, {10, 10});
    REQUIRE(pgs.size() == 1);
    CHECK(pgs[0].queryIndex == 0);
    CHECK(pgs[0].annotation.categoryId == 4);
}

TEST_CASE("extract_pseudo_gts: logits are passed through the sigmoid") {
    DetectionOutput out = example_output();
    out.scoresAreLogits = true;
    out.scores = ScoreMatrix(2, 3, {0.0, -1.0, 2.0, -2.0, -0.5, 0.0});
    const auto pgs = extract_pseudo_gts(out, 0.3, {640, 480});
    REQUIRE(pgs.size() == 2);
    CHECK(pgs[0].confidence == 0.5);
    CHECK(pgs[1].confidence == doctest::Approx(1.0 / (1.0 + std::exp(0.5))));
}

TEST_CASE("extract_pseudo_gts: order is confidence desc then query asc") {
    DetectionOutput out;
    out.imageId = "o";
    out.categoryIds = {1};
    out.scoresAreLogits = false;
    out.scores = ScoreMatrix(4, 2, {0.5, 0.0, 0.9, 0.0, 0.5, 0.0, 0.9, 0.0});
    out.boxes.assign(4, {0.5, 0.5, 0.5, 0.5});
    const auto pgs = extract_pseudo_gts(out, 0.3, {10, 10});
    REQUIRE(pgs.size() == 4);
    CHECK(pgs[0].queryIndex == 1);
    CHECK(pgs[1].queryIndex == 3);
    CHECK(pgs[2].queryIndex == 0);
    CHECK(pgs[3].queryIndex == 2);
}

TEST_CASE("extract_pseudo_gts rejects bad tau and shape mismatches") {
    CHECK_THROWS_AS(extract_pseudo_gts(example_output(), 0.0, {10, 10}), ValidationError);
    CHECK_THROWS_AS(extract_pseudo_gts(example_output(), 1.0, {10, 10}), ValidationError);
    DetectionOutput cols = example_output();
    cols.categoryIds = {1};
    CHECK_THROWS_AS(extract_pseudo_gts(cols, 0.3, {10, 10}), ValidationError);
    DetectionOutput rows = example_output();
    rows.boxes.pop_back();
    CHECK_THROWS_AS(extract_pseudo_gts(rows, 0.3, {10, 10}), ValidationError);
    DetectionOutput range = example_output();
    range.scores(0, 0) = 1.5;
    CHECK_THROWS_AS(extract_pseudo_gts(range, 0.3, {10, 10}), ValidationError);
    DetectionOutput empty = example_output();
    empty.scores = ScoreMatrix(0, 3);
    empty.boxes.clear();
    CHECK_THROWS_AS(extract_pseudo_gts(empty, 0.3, {10, 10}), ValidationError);
}

TEST_CASE("extract_pseudo_gts matches the exhaustive oracle on random outputs") {
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        oracle::Draw r(seed * 7 + 1);
        const std::size_t Q = static_cast<std::size_t>(r.integer(1, 120));
        const std::size_t C = static_cast<std::size_t>(r.integer(1, 30));
        const auto out = oracle::random_output(seed, Q, C, seed % 3 == 0);
        const double tau = r.range(0.05, 0.95);
        const int W = r.integer(1, 2000), H = r.integer(1, 2000);
        const auto got = extract_pseudo_gts(out, tau, {W, H});
        CHECK(got.size() <= Q);
        CHECK(oracle::rows_of(got) == oracle::extract(out, tau, W, H));
    }
}

TEST_CASE("verification marks round-trip through their names") {
    for (auto v : {Verification::Unverified, Verification::Accepted, Verification::Rejected}) {
        CHECK(verification_from_string(to_string(v)) == v);
    }
    CHECK_THROWS(verification_from_string("maybe"));
}
