#include "vpl/pseudo.hpp"

#include "vpl/error.hpp"

#include <algorithm>
#include <cmath>

namespace vpl {

ScoreMatrix::ScoreMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        throw ValidationError("score matrix data has " + std::to_string(data_.size()) +
                              " entries, expected " + std::to_string(rows * cols));
    }
}

std::string_view to_string(Verification v) {
    switch (v) {
        case Verification::Unverified: return "unverified";
        case Verification::Accepted: return "accepted";
        case Verification::Rejected: return "rejected";
    }
    return "unverified";
}

Verification verification_from_string(std::string_view s) {
    if (s == "unverified") return Verification::Unverified;
    if (s == "accepted") return Verification::Accepted;
    if (s == "rejected") return Verification::Rejected;
    throw ParseError("unknown verification status '" + std::string(s) + "'");
}

ScoreMatrix apply_sigmoid(const ScoreMatrix& logits) {
    std::vector<double> out(logits.data().begin(), logits.data().end());
    for (double& x : out) {
        if (!std::isfinite(x)) throw ValidationError("non-finite logit");
        // exp(-x) may overflow to inf for very negative x, which still yields 0
        x = 1.0 / (1.0 + std::exp(-x));
    }
    return ScoreMatrix(logits.rows(), logits.cols(), std::move(out));
}

void validate_detection_output(const DetectionOutput& out) {
    const std::string where = "detection output for image " + out.imageId;
    if (out.scores.rows() == 0) throw ValidationError(where + ": no queries");
    if (out.categoryIds.empty()) throw ValidationError(where + ": no categories");
    if (out.scores.cols() != out.categoryIds.size() + 1) {
        throw ValidationError(where + ": score matrix has " + std::to_string(out.scores.cols()) +
                              " columns, expected " + std::to_string(out.categoryIds.size() + 1) +
                              " (categories + background)");
    }
    if (out.boxes.size() != out.scores.rows()) {
        throw ValidationError(where + ": " + std::to_string(out.boxes.size()) + " boxes for " +
                              std::to_string(out.scores.rows()) + " queries");
    }
    for (double s : out.scores.data()) {
        if (!std::isfinite(s)) throw ValidationError(where + ": non-finite score");
        if (!out.scoresAreLogits && (s < 0.0 || s > 1.0)) {
            throw ValidationError(where + ": probability outside [0,1]");
        }
    }
}

std::vector<PseudoGT> extract_pseudo_gts(const DetectionOutput& out, double tau, ImageSize image,
                                         const CategoryTable& names) {
    if (!(tau > 0.0 && tau < 1.0)) {
        throw ValidationError("tau must lie in (0,1), got " + std::to_string(tau));
    }
    validate_detection_output(out);
    const ScoreMatrix probs = out.scoresAreLogits ? apply_sigmoid(out.scores) : out.scores;
    const std::size_t num_fg = out.categoryIds.size();

    std::vector<PseudoGT> result;
    for (std::size_t q = 0; q < probs.rows(); ++q) {
        const auto row = probs.row(q).first(num_fg);
        const auto best = std::max_element(row.begin(), row.end());
        if (*best < tau) continue;
        const auto cls = static_cast<std::size_t>(best - row.begin());

        PseudoGT pg;
        pg.confidence = *best;
        pg.queryIndex = static_cast<int>(q);
        pg.annotation.categoryId = out.categoryIds[cls];
        if (!names.empty()) {
            const Category* c = names.find(pg.annotation.categoryId);
            if (c == nullptr) {
                throw ValidationError("detector category " + std::to_string(pg.annotation.categoryId) +
                                      " not in category table");
            }
            pg.annotation.categoryName = c->name;
        }
        const auto& b = out.boxes[q];
        pg.annotation.box = convert_box(BBox::norm_center(b[0], b[1], b[2], b[3]), BoxFormat::AbsCorner,
                                        image, ClampPolicy::Clip);
        pg.annotation.sourceImageId = out.imageId;
        result.push_back(std::move(pg));
    }
    std::stable_sort(result.begin(), result.end(), [](const PseudoGT& a, const PseudoGT& b) {
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        return a.queryIndex < b.queryIndex;
    });
    return result;
}

}  // namespace vpl
