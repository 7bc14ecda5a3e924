#pragma once

// Seeded random inputs shared by the oracle tests and the acceptance run.

#include "vpl/dataset.hpp"
#include "vpl/metrics.hpp"
#include "vpl/pseudo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>

namespace oracle {

class Draw {
public:
    explicit Draw(std::uint64_t seed) : gen_(seed) {}
    double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
    double range(double lo, double hi) { return lo + (hi - lo) * unit(); }
    int integer(int lo, int hi) { return lo + static_cast<int>(gen_() % static_cast<std::uint64_t>(hi - lo + 1)); }
    bool coin(double p) { return unit() < p; }

private:
    std::mt19937_64 gen_;
};

struct Scene {
    vpl::Dataset gt;
    vpl::DetectionsByImage dets;
};

/// Up to 10 images of 200x160 with up to 20 GT boxes and 20 detections
/// each over `numClasses` classes. Detections are jittered copies of GTs,
/// sometimes relabelled, plus free boxes. Scores are sometimes quantized
/// so that ties occur within and across images.
inline Scene random_scene(std::uint64_t seed, int numClasses = 3) {
    Draw r(seed);
    Scene s;
    for (int c = 1; c <= numClasses; ++c) s.gt.categories.entries.push_back({c, "c" + std::to_string(c)});
    const int W = 200, H = 160;
    const int images = r.integer(1, 10);
    const bool quantize = r.coin(0.5);
    auto random_box = [&](double minSide, double maxSide) {
        const double w = r.range(minSide, maxSide), h = r.range(minSide, std::min(maxSide, 150.0));
        const double x = r.range(0, W - w), y = r.range(0, H - h);
        return vpl::BBox::abs_corner(x, y, x + w, y + h);
    };
    for (int i = 0; i < images; ++i) {
        vpl::ImageRecord img;
        img.id = "im" + std::to_string(r.integer(0, 999)) + "_" + std::to_string(i);
        img.width = W;
        img.height = H;
        const int nGt = r.integer(0, 20);
        for (int g = 0; g < nGt; ++g) {
            vpl::Annotation a;
            a.categoryId = r.integer(1, numClasses);
            a.categoryName = "c" + std::to_string(a.categoryId);
            a.box = random_box(5, 140);
            a.sourceImageId = img.id;
            img.annotations.push_back(a);
        }
        auto& list = s.dets[img.id];
        const int nDet = r.integer(0, 20);
        for (int k = 0; k < nDet; ++k) {
            vpl::ScoredDetection d;
            if (!img.annotations.empty() && r.coin(0.7)) {
                const auto& a = img.annotations[static_cast<std::size_t>(r.integer(0, nGt - 1))];
                const double j = r.range(0, 12);
                auto clamp = [](double v, double hi) { return std::min(std::max(v, 0.0), hi); };
                double x1 = clamp(a.box.x1() + r.range(-j, j), W), y1 = clamp(a.box.y1() + r.range(-j, j), H);
                double x2 = clamp(a.box.x2() + r.range(-j, j), W), y2 = clamp(a.box.y2() + r.range(-j, j), H);
                if (x2 <= x1 + 1) x2 = std::min<double>(W, x1 + 2);
                if (y2 <= y1 + 1) y2 = std::min<double>(H, y1 + 2);
                if (x2 <= x1) x1 = x2 - 2;
                if (y2 <= y1) y1 = y2 - 2;
                d.box = vpl::BBox::abs_corner(x1, y1, x2, y2);
                d.categoryId = r.coin(0.85) ? a.categoryId : r.integer(1, numClasses);
            } else {
                d.box = random_box(5, 140);
                d.categoryId = r.integer(1, numClasses);
            }
            d.score = quantize ? std::round(r.unit() * 8.0) / 8.0 : r.unit();
            list.push_back(d);
        }
        s.gt.images.push_back(std::move(img));
    }
    return s;
}

/// Random detector output with Q queries and C classes. Several regimes:
/// spread scores, scores clustered around tau, background-dominant rows
/// (background the global max) and exact ties between classes.
inline vpl::DetectionOutput random_output(std::uint64_t seed, std::size_t Q, std::size_t C, bool logits) {
    Draw r(seed);
    vpl::DetectionOutput out;
    out.imageId = "img" + std::to_string(seed);
    for (std::size_t c = 0; c < C; ++c) out.categoryIds.push_back(static_cast<int>(100 + 3 * c));
    out.scoresAreLogits = logits;
    out.scores = vpl::ScoreMatrix(Q, C + 1);
    const int regime = r.integer(0, 3);
    for (std::size_t q = 0; q < Q; ++q) {
        for (std::size_t c = 0; c <= C; ++c) {
            double p = r.unit();
            if (regime == 1) p = std::clamp(0.3 + r.range(-0.05, 0.05), 0.0, 1.0);
            if (regime == 2) p = (c == C) ? r.range(0.9, 1.0) : r.range(0.0, 0.6);
            if (regime == 3) p = std::round(r.unit() * 4.0) / 4.0;
            out.scores(q, c) = logits ? std::log(std::max(p, 1e-9) / std::max(1.0 - p, 1e-9)) : p;
        }
        const double w = r.range(0.01, 1.0), h = r.range(0.01, 1.0);
        out.boxes.push_back({r.range(0, 1), r.range(0, 1), w, h});
    }
    return out;
}

}  // namespace oracle
