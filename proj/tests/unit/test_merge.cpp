#include "vpl/error.hpp"
#include "vpl/merge.hpp"

#include "ap_oracle.hpp"
#include "random_scenes.hpp"

#include <doctest.h>

using namespace vpl;

namespace {

PseudoGT pseudo(const std::string& image, int query, CategoryId c, BBox box, double conf,
                Verification mark = Verification::Unverified) {
    return {{c, "c" + std::to_string(c), box, image, false}, conf, query, mark};
}

/// Task 2 of "2+2" over classes 1..4: real labels are classes 3 and 4.
TaskView task_two_view() {
    TaskView v;
    v.taskIndex = 2;
    v.visibleCategories = {3, 4};
    for (int c = 1; c <= 4; ++c) v.dataset.categories.entries.push_back({c, "c" + std::to_string(c)});
    ImageRecord a{"a", "", 100, 100, {}};
    a.annotations = {{3, "c3", BBox::abs_corner(0, 0, 20, 20), "a", false},
                     {4, "c4", BBox::abs_corner(50, 50, 70, 70), "a", true}};
    ImageRecord b{"b", "", 100, 100, {}};
    b.annotations = {{3, "c3", BBox::abs_corner(10, 10, 30, 30), "b", false}};
    v.dataset.images = {a, b};
    return v;
}

}  // namespace

TEST_CASE("merge_labels: 2 real + 3 pseudo gives 5 annotations") {
    TaskView view = task_two_view();
    view.dataset.images.pop_back();
    PseudoByImage pseudo_gts;
    pseudo_gts["a"] = {pseudo("a", 0, 1, BBox::abs_corner(30, 30, 40, 40), 0.9),
                       pseudo("a", 1, 2, BBox::abs_corner(60, 0, 90, 20), 0.7),
                       pseudo("a", 2, 1, BBox::abs_corner(0, 60, 30, 95), 0.4)};
    const Dataset merged = merge_labels(view, pseudo_gts);
    REQUIRE(merged.images.size() == 1);
    const auto& anns = merged.images[0].annotations;
    REQUIRE(anns.size() == 5);
    CHECK(anns[0] == view.dataset.images[0].annotations[0]);
    CHECK(anns[1] == view.dataset.images[0].annotations[1]);
    CHECK(anns[2].categoryId == 1);
    CHECK(anns[3].categoryId == 2);
    CHECK(anns[4].box == BBox::abs_corner(0, 60, 30, 95));
    CHECK(merged.provenance == Provenance::Derived);
}

TEST_CASE("merge_labels: optional NMS suppresses the weaker duplicate") {
    const TaskView view = task_two_view();
    PseudoByImage pseudo_gts;
    pseudo_gts["b"] = {pseudo("b", 0, 1, BBox::abs_corner(0, 0, 10, 10), 0.9),
                       pseudo("b", 1, 1, BBox::abs_corner(0, 0, 10, 6), 0.8)};
    CHECK(oracle::box_iou(BBox::abs_corner(0, 0, 10, 10), BBox::abs_corner(0, 0, 10, 6)) ==
          doctest::Approx(0.6));
    const Dataset with_nms = merge_labels(view, pseudo_gts, 0.5);
    const auto& b = with_nms.images[1].annotations;
    REQUIRE(b.size() == 2);
    CHECK(b[1].box == BBox::abs_corner(0, 0, 10, 10));
    CHECK(merge_labels(view, pseudo_gts).images[1].annotations.size() == 3);
    CHECK(merge_labels(view, pseudo_gts, 0.7).images[1].annotations.size() == 3);
}

TEST_CASE("merge_labels: NMS never crosses classes") {
    const TaskView view = task_two_view();
    PseudoByImage pseudo_gts;
    pseudo_gts["b"] = {pseudo("b", 0, 1, BBox::abs_corner(0, 0, 10, 10), 0.9),
                       pseudo("b", 1, 2, BBox::abs_corner(0, 0, 10, 10), 0.8)};
    CHECK(merge_labels(view, pseudo_gts, 0.5).images[1].annotations.size() == 3);
}

TEST_CASE("merge_labels: pseudo GTs of a current-task class are rejected") {
    const TaskView view = task_two_view();
    PseudoByImage pseudo_gts;
    pseudo_gts["a"] = {pseudo("a", 0, 3, BBox::abs_corner(30, 30, 40, 40), 0.9)};
    CHECK_THROWS_AS(merge_labels(view, pseudo_gts), ValidationError);
    PseudoByImage stray;
    stray["zzz"] = {pseudo("zzz", 0, 1, BBox::abs_corner(30, 30, 40, 40), 0.9)};
    CHECK_THROWS_AS(merge_labels(view, stray), ValidationError);
    PseudoByImage unknown;
    unknown["a"] = {pseudo("a", 0, 9, BBox::abs_corner(30, 30, 40, 40), 0.9)};
    CHECK_THROWS_AS(merge_labels(view, unknown), ValidationError);
    CHECK_THROWS_AS(merge_labels(view, {}, 0.0), ValidationError);
    CHECK_THROWS_AS(merge_labels(view, {}, 1.5), ValidationError);
}

TEST_CASE("merge_labels: rejected items are skipped, unverified and accepted kept") {
    const TaskView view = task_two_view();
    PseudoByImage pseudo_gts;
    pseudo_gts["a"] = {pseudo("a", 0, 1, BBox::abs_corner(30, 30, 40, 40), 0.9, Verification::Rejected),
                       pseudo("a", 1, 1, BBox::abs_corner(30, 60, 40, 80), 0.8, Verification::Accepted),
                       pseudo("a", 2, 2, BBox::abs_corner(80, 80, 99, 99), 0.6, Verification::Unverified)};
    const Dataset merged = merge_labels(view, pseudo_gts);
    const auto& anns = merged.images[0].annotations;
    REQUIRE(anns.size() == 4);
    CHECK(anns[2].box == BBox::abs_corner(30, 60, 40, 80));
    CHECK(anns[3].categoryId == 2);
}

TEST_CASE("merge_labels: real GTs survive untouched and counts add up (random)") {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        oracle::Draw r(seed + 1000);
        TaskView view = task_two_view();
        PseudoByImage pseudo_gts;
        std::size_t expected_pseudo = 0;
        for (const auto& img : view.dataset.images) {
            auto& list = pseudo_gts[img.id];
            const int n = r.integer(0, 12);
            for (int k = 0; k < n; ++k) {
                const double x = r.range(0, 80), y = r.range(0, 80);
                const auto mark = static_cast<Verification>(r.integer(0, 2));
                list.push_back(pseudo(img.id, k, r.integer(1, 2), BBox::abs_corner(x, y, x + r.range(2, 20),
                                                                                  y + r.range(2, 20)),
                                      std::round(r.unit() * 4) / 4, mark));
                expected_pseudo += mark != Verification::Rejected ? 1 : 0;
            }
        }
        const Dataset merged = merge_labels(view, pseudo_gts);
        CHECK(merged.annotation_count() == view.dataset.annotation_count() + expected_pseudo);
        const Dataset nms = merge_labels(view, pseudo_gts, 0.3);
        CHECK(nms.annotation_count() <= merged.annotation_count());
        for (std::size_t i = 0; i < view.dataset.images.size(); ++i) {
            const auto& real = view.dataset.images[i].annotations;
            for (const Dataset* ds : {&merged, &nms}) {
                REQUIRE(ds->images[i].annotations.size() >= real.size());
                CHECK(std::equal(real.begin(), real.end(), ds->images[i].annotations.begin()));
                // no two surviving same-class pseudo boxes overlap above the NMS threshold
                if (ds == &nms) {
                    const auto& anns = ds->images[i].annotations;
                    for (std::size_t p = real.size(); p < anns.size(); ++p) {
                        for (std::size_t q = p + 1; q < anns.size(); ++q) {
                            if (anns[p].categoryId == anns[q].categoryId) {
                                CHECK(oracle::box_iou(anns[p].box, anns[q].box) < 0.3);
                            }
                        }
                    }
                }
            }
        }
    }
}

TEST_CASE("suppress_duplicates: equal confidence keeps the lower query index") {
    const std::vector<PseudoGT> pgs{pseudo("a", 7, 1, BBox::abs_corner(0, 0, 10, 10), 0.5),
                                    pseudo("a", 3, 1, BBox::abs_corner(0, 0, 10, 10), 0.5)};
    const auto kept = suppress_duplicates(pgs, 0.5);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].queryIndex == 3);
}
