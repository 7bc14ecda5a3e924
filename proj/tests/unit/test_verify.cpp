#include "vpl/error.hpp"
#include "vpl/ingest.hpp"
#include "vpl/verify.hpp"

#include "ap_oracle.hpp"
#include "random_scenes.hpp"

#include <doctest.h>
#include <json.hpp>

#include <atomic>
#include <mutex>

using namespace vpl;

namespace {

const std::string kFixtures = VPL_TEST_FIXTURES;

PseudoGT pseudo(const std::string& image, int query, CategoryId c, const std::string& name, BBox box,
                double conf = 0.8) {
    return {{c, name, box, image, false}, conf, query, Verification::Unverified};
}

ImageRecord image(const std::string& id, int w, int h) { return {id, id + ".jpg", w, h, {}}; }

Dataset truth_world() {
    Dataset ds;
    ds.categories.entries = {{1, "cat"}, {2, "dog"}};
    ImageRecord a = image("a", 100, 100);
    a.annotations = {{1, "cat", BBox::abs_corner(10, 10, 50, 50), "a", false},
                     {2, "dog", BBox::abs_corner(60, 60, 90, 90), "a", false}};
    ImageRecord b = image("b", 100, 100);
    b.annotations = {{2, "dog", BBox::abs_corner(0, 0, 40, 40), "b", false}};
    ds.images = {a, b};
    return ds;
}

std::vector<PseudoGT> candidate_set() {
    return {pseudo("a", 0, 1, "cat", BBox::abs_corner(10, 10, 50, 50)),   // exact cat
            pseudo("a", 1, 2, "dog", BBox::abs_corner(10, 10, 50, 50)),   // wrong class
            pseudo("a", 2, 2, "dog", BBox::abs_corner(62, 62, 90, 90)),   // good dog
            pseudo("b", 0, 2, "dog", BBox::abs_corner(50, 50, 90, 90)),   // no overlap
            pseudo("b", 1, 1, "cat", BBox::abs_corner(0, 0, 40, 40))};    // wrong class
}

/// Answers every request with the same text.
class FixedBackend final : public VerificationBackend {
public:
    explicit FixedBackend(std::string text) : text_(std::move(text)) {}
    std::string id() const override { return "fixed"; }
    std::string ask(const VerificationRequest&) const override { return text_; }

private:
    std::string text_;
};

/// Fails the first `failures` calls per key with BackendError, then says yes.
class FlakyBackend final : public VerificationBackend {
public:
    explicit FlakyBackend(int failures) : failures_(failures) {}
    std::string id() const override { return "flaky"; }
    std::string ask(const VerificationRequest& r) const override {
        std::lock_guard lock(mu_);
        ++calls_;
        if (seen_[r.idempotencyKey]++ < failures_) throw BackendError("transient");
        return "yes";
    }
    int calls() const { return calls_; }

private:
    int failures_;
    mutable std::mutex mu_;
    mutable std::map<std::string, int> seen_;
    mutable int calls_ = 0;
};

class ThrowingBackend final : public VerificationBackend {
public:
    std::string id() const override { return "throwing"; }
    std::string ask(const VerificationRequest&) const override {
        ++calls;
        throw std::runtime_error("bug");
    }
    mutable std::atomic<int> calls{0};
};

}  // namespace

TEST_CASE("make_binary_mask: full-image box marks every cell") {
    const BinaryMask m = make_binary_mask(BBox::abs_corner(0, 0, 640, 480), {640, 480}, 24, 24);
    CHECK(m.width == 24);
    CHECK(m.height == 24);
    CHECK(m.count() == 576);
}

TEST_CASE("make_binary_mask: left half on a 4x4 grid") {
    const BinaryMask m = make_binary_mask(BBox::abs_corner(0, 0, 320, 480), {640, 480}, 4, 4);
    const std::vector<std::uint8_t> expected{1, 1, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0};
    CHECK(m.cells == expected);
}

TEST_CASE("make_binary_mask: a box between cell centers marks its own cell") {
    const BinaryMask m = make_binary_mask(BBox::abs_corner(1, 1, 5, 5), {640, 480}, 24, 24);
    CHECK(m.count() == 1);
    CHECK(m.at(0, 0) == 1);
    const BinaryMask far = make_binary_mask(BBox::abs_corner(630, 470, 635, 475), {640, 480}, 24, 24);
    CHECK(far.count() == 1);
    CHECK(far.at(23, 23) == 1);
}

TEST_CASE("make_binary_mask: 1x1 grid and bad inputs") {
    CHECK(make_binary_mask(BBox::abs_corner(5, 5, 6, 6), {100, 100}, 1, 1).cells == std::vector<std::uint8_t>{1});
    CHECK_THROWS_AS(make_binary_mask(BBox::abs_corner(5, 5, 5, 9), {100, 100}, 4, 4), ValidationError);
    CHECK_THROWS_AS(make_binary_mask(BBox::abs_corner(5, 5, 9, 9), {100, 100}, 0, 4), ValidationError);
    CHECK_THROWS_AS(make_binary_mask(BBox::abs_corner(5, 5, 9, 9), {0, 100}, 4, 4), ValidationError);
}

TEST_CASE("make_binary_mask: marked cells are exactly the centers inside the box") {
    oracle::Draw r(11);
    for (int t = 0; t < 300; ++t) {
        const int W = r.integer(20, 800), H = r.integer(20, 800);
        const int gw = r.integer(1, 30), gh = r.integer(1, 30);
        const double x1 = r.range(0, W - 2), y1 = r.range(0, H - 2);
        const BBox box = BBox::abs_corner(x1, y1, r.range(x1 + 1, W), r.range(y1 + 1, H));
        const BinaryMask m = make_binary_mask(box, {W, H}, gw, gh);
        REQUIRE(m.cells.size() == static_cast<std::size_t>(gw * gh));
        std::size_t inside = 0;
        for (int i = 0; i < gh; ++i) {
            for (int j = 0; j < gw; ++j) {
                const double cx = (j + 0.5) * W / gw, cy = (i + 0.5) * H / gh;
                const bool in = cx >= box.x1() && cx <= box.x2() && cy >= box.y1() && cy <= box.y2();
                inside += in ? 1 : 0;
                if (in) CHECK(m.at(i, j) == 1);
            }
        }
        CHECK(m.count() == std::max<std::size_t>(inside, 1));
    }
}

TEST_CASE("format_prompt: single example") {
    const PseudoGT pg = pseudo("p1", 0, 1, "cat", BBox::abs_corner(10.4, 20.5, 110.0, 220.0));
    const VerificationPrompt p = format_prompt(pg, image("p1", 640, 480));
    CHECK(p.promptText ==
          "<image feature> Considering the region [10, 21, 110, 220] <region feature> of the image, would you "
          "classify it as a cat category without any doubt? Respond with only 'yes' or 'no'.");
    CHECK(p.imageRef == "p1");
    CHECK(p.imagePath == "p1.jpg");
    CHECK(p.categoryName == "cat");
    CHECK(p.maskGrid.width == kDefaultGridSide);
    CHECK(p.boxAbs == pg.annotation.box);
    CHECK(category_from_prompt(p.promptText) == "cat");
}

TEST_CASE("format_prompt: byte-exact on the prompt table") {
    const auto doc = nlohmann::json::parse(read_file(kFixtures + "/prompt_cases.json"));
    const ImageRecord img = image(doc["image"]["id"], doc["image"]["width"], doc["image"]["height"]);
    int q = 0;
    for (const auto& c : doc["cases"]) {
        const auto b = c["box"];
        const PseudoGT pg = pseudo(img.id, q++, 1, c["name"], BBox::abs_corner(b[0], b[1], b[2], b[3]));
        CAPTURE(c["name"].get<std::string>());
        CHECK(format_prompt(pg, img).promptText == c["prompt"].get<std::string>());
        CHECK(category_from_prompt(format_prompt(pg, img).promptText) == c["name"].get<std::string>());
    }
}

TEST_CASE("format_prompt: distinct (box, name) give distinct prompts") {
    const ImageRecord img = image("i", 640, 480);
    std::set<std::string> prompts;
    const std::vector<std::string> names{"cat", "dog", "cats", "traffic light"};
    int n = 0;
    for (const auto& name : names) {
        for (int x = 0; x < 5; ++x) {
            for (int w = 1; w < 4; ++w) {
                prompts.insert(format_prompt(pseudo("i", n, 1, name, BBox::abs_corner(x, 0, x + w, 10)), img).promptText);
                ++n;
            }
        }
    }
    CHECK(prompts.size() == static_cast<std::size_t>(n));
}

TEST_CASE("format_prompt rejects missing names, marker characters and non-AbsCorner boxes") {
    const ImageRecord img = image("i", 100, 100);
    CHECK_THROWS_AS(format_prompt(pseudo("i", 0, 1, "", BBox::abs_corner(1, 1, 5, 5)), img), ValidationError);
    CHECK_THROWS_AS(format_prompt(pseudo("i", 0, 1, "<x>", BBox::abs_corner(1, 1, 5, 5)), img), ValidationError);
    CHECK_THROWS_AS(format_prompt(pseudo("i", 0, 1, "cat", BBox::norm_center(0.5, 0.5, 0.1, 0.1)), img),
                    ValidationError);
    CHECK(category_from_prompt("is this a cat?").empty());
}

TEST_CASE("parse_verdict: leading yes/no token, any casing and punctuation") {
    const std::vector<std::string> yes{"yes",  "Yes",   "YES",         " yes ", "Yes.", "yes!", "\"Yes\"",
                                       "yEs,", "Yes, it is a cat.", "\n\tyes\n", "yes\r\n", "**Yes**", "yes-no"};
    const std::vector<std::string> no{"no", "No", "NO", " no.", "No, it is a dog.", "'no'", "no!!", "nO"};
    const std::vector<std::string> other{"",     "maybe", "yesterday", "nope", "not sure", "y", "n",
                                         "I think yes", "...", "none", "1", "-"};
    for (const auto& s : yes) {
        CAPTURE(s);
        CHECK(parse_verdict(s).answer == Answer::Yes);
    }
    for (const auto& s : no) {
        CAPTURE(s);
        CHECK(parse_verdict(s).answer == Answer::No);
    }
    for (const auto& s : other) {
        CAPTURE(s);
        CHECK(parse_verdict(s).answer == Answer::Unparseable);
    }
    CHECK(parse_verdict(" Yes.").rawText == " Yes.");
}

TEST_CASE("parse_verdict: yes/no followed by a non-letter always parses") {
    oracle::Draw r(5);
    const std::string tails = " .,!?;:\n\t\"')-";
    for (int t = 0; t < 200; ++t) {
        std::string word = r.coin(0.5) ? "yes" : "no";
        for (auto& ch : word) {
            if (r.coin(0.5)) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
        }
        std::string s = word;
        const int extra = r.integer(0, 4);
        for (int k = 0; k < extra; ++k) s.push_back(tails[static_cast<std::size_t>(r.integer(0, 12))]);
        const Answer expected = (word.size() == 3) ? Answer::Yes : Answer::No;
        CAPTURE(s);
        CHECK(parse_verdict(s).answer == expected);
    }
}

TEST_CASE("oracle_verdict: class and IoU decide without flips") {
    const Dataset truth = truth_world();
    const auto& gts = truth.images[0].annotations;
    CHECK(oracle_verdict(pseudo("a", 0, 1, "cat", BBox::abs_corner(10, 10, 50, 50)), gts, 0.5, 0, 1).answer ==
          Answer::Yes);
    CHECK(oracle_verdict(pseudo("a", 0, 2, "dog", BBox::abs_corner(10, 10, 50, 50)), gts, 0.5, 0, 1).answer ==
          Answer::No);
    // IoU of (10,10,50,50) and (10,10,50,30) is 0.5: inclusive threshold
    CHECK(oracle_verdict(pseudo("a", 0, 1, "cat", BBox::abs_corner(10, 10, 50, 30)), gts, 0.5, 0, 1).answer ==
          Answer::Yes);
    CHECK(oracle_verdict(pseudo("a", 0, 1, "cat", BBox::abs_corner(10, 10, 50, 29)), gts, 0.5, 0, 1).answer ==
          Answer::No);
    CHECK_THROWS_AS(oracle_verdict(pseudo("a", 0, 1, "cat", BBox::abs_corner(1, 1, 2, 2)), gts, 0.5, 0.5, 1),
                    ValidationError);
}

TEST_CASE("oracle_verdict: flips happen at the configured rate and are reproducible") {
    const std::vector<Annotation> none;
    int flips = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const auto pg = pseudo("img" + std::to_string(i % 97), i, 1, "cat", BBox::abs_corner(1, 1, 5, 5));
        const Verdict v = oracle_verdict(pg, none, 0.5, 0.2, 99);
        flips += v.answer == Answer::Yes ? 1 : 0;
        CHECK(oracle_verdict(pg, none, 0.5, 0.2, 99).answer == v.answer);
    }
    CHECK(static_cast<double>(flips) / n == doctest::Approx(0.2).epsilon(0.1));
}

TEST_CASE("verify_batch: oracle accepts exactly the true boxes") {
    const Dataset truth = truth_world();
    const OracleBackend backend(truth, {0.5, 0.0, 0});
    const auto pgs = candidate_set();
    const VerifyResult r = verify_batch(pgs, truth, backend);
    REQUIRE(r.items.size() == 5);
    const std::vector<Verification> expected{Verification::Accepted, Verification::Rejected, Verification::Accepted,
                                             Verification::Rejected, Verification::Rejected};
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(r.items[i].verification == expected[i]);
        PseudoGT unmarked = r.items[i];
        unmarked.verification = Verification::Unverified;
        CHECK(unmarked == pgs[i]);
        CHECK(r.log[i].outcome == expected[i]);
        CHECK(r.log[i].attempts == 1);
        CHECK(r.log[i].queryIndex == pgs[i].queryIndex);
    }
    CHECK(r.accepted_count() == 2);
    CHECK(r.unparseableCount == 0);
    CHECK(r.warnings.empty());
}

TEST_CASE("verify_batch: oracle acceptance equals brute-force class+IoU matching") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const oracle::Scene scene = oracle::random_scene(seed);
        std::vector<PseudoGT> pgs;
        int q = 0;
        for (const auto& [img, dets] : scene.dets) {
            for (const auto& d : dets) {
                pgs.push_back(pseudo(img, q++, d.categoryId, scene.gt.categories.find(d.categoryId)->name, d.box,
                                     d.score));
            }
        }
        const OracleBackend backend(scene.gt, {0.5, 0.0, 0});
        VerifyOptions opts;
        opts.jobs = 3;
        const VerifyResult r = verify_batch(pgs, scene.gt, backend, opts);
        for (std::size_t i = 0; i < pgs.size(); ++i) {
            bool expected = false;
            for (const auto& g : scene.gt.find_image(pgs[i].annotation.sourceImageId)->annotations) {
                expected |= g.categoryId == pgs[i].annotation.categoryId &&
                            oracle::box_iou(g.box, pgs[i].annotation.box) >= 0.5;
            }
            CHECK((r.items[i].verification == Verification::Accepted) == expected);
        }
    }
}

TEST_CASE("verify_batch: unparseable answers follow the policy and are reported") {
    const Dataset truth = truth_world();
    const FixedBackend maybe("maybe");
    const auto pgs = candidate_set();
    const VerifyResult rejected = verify_batch(pgs, truth, maybe);
    CHECK(rejected.accepted_count() == 0);
    CHECK(rejected.unparseableCount == 5);
    REQUIRE(rejected.warnings.size() == 5);
    CHECK(rejected.warnings[0].find("a#0") != std::string::npos);
    CHECK(rejected.warnings[0].find("maybe") != std::string::npos);

    VerifyOptions accept;
    accept.policy = UnparseablePolicy::Accept;
    const VerifyResult accepted = verify_batch(pgs, truth, maybe, accept);
    CHECK(accepted.accepted_count() == 5);
    CHECK(accepted.unparseableCount == 5);
}

TEST_CASE("verify_batch: results do not depend on jobs") {
    const Dataset truth = truth_world();
    const OracleBackend backend(truth, {0.5, 0.3, 17});
    std::vector<PseudoGT> pgs;
    for (int i = 0; i < 60; ++i) {
        pgs.push_back(pseudo(i % 2 == 0 ? "a" : "b", i, 1 + i % 2, i % 2 == 0 ? "cat" : "dog",
                             BBox::abs_corner(i % 30, i % 20, 40 + i % 30, 50 + i % 20)));
    }
    const VerifyResult one = verify_batch(pgs, truth, backend);
    for (int jobs : {2, 4, 8}) {
        VerifyOptions o;
        o.jobs = jobs;
        const VerifyResult many = verify_batch(pgs, truth, backend, o);
        CHECK(many.items == one.items);
        CHECK(many.warnings == one.warnings);
    }
}

TEST_CASE("verify_batch: transport failures are retried, then surface") {
    const Dataset truth = truth_world();
    const auto pgs = candidate_set();
    const FlakyBackend flaky(2);
    VerifyOptions o;
    o.retries = 2;
    const VerifyResult r = verify_batch(pgs, truth, flaky, o);
    CHECK(r.accepted_count() == 5);
    CHECK(r.log[0].attempts == 3);
    CHECK(flaky.calls() == 15);

    const FlakyBackend worse(3);
    CHECK_THROWS_AS(verify_batch(pgs, truth, worse, o), BackendError);
}

TEST_CASE("verify_batch: non-transport errors are not retried") {
    const Dataset truth = truth_world();
    const auto pgs = candidate_set();
    const ThrowingBackend backend;
    CHECK_THROWS_AS(verify_batch(pgs, truth, backend), std::runtime_error);
    CHECK(backend.calls == 5);
}

TEST_CASE("verify_batch: unknown images and bad retry counts are rejected") {
    const Dataset truth = truth_world();
    const FixedBackend yes("yes");
    const std::vector<PseudoGT> stray{pseudo("zzz", 0, 1, "cat", BBox::abs_corner(1, 1, 5, 5))};
    CHECK_THROWS_AS(verify_batch(stray, truth, yes), ValidationError);
    VerifyOptions o;
    o.retries = -1;
    CHECK_THROWS_AS(verify_batch(candidate_set(), truth, yes, o), ValidationError);
    CHECK(verify_batch(std::vector<PseudoGT>{}, truth, yes).items.empty());
}

TEST_CASE("idempotency keys are image#query") {
    CHECK(idempotency_key(pseudo("img_3", 42, 1, "cat", BBox::abs_corner(1, 1, 2, 2))) == "img_3#42");
}
