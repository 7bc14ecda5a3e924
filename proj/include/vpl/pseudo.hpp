#pragma once

#include "vpl/dataset.hpp"

#include <array>
#include <span>
#include <string_view>
#include <vector>

namespace vpl {

/// Dense row-major Q x (C+1) matrix of class scores.
class ScoreMatrix {
public:
    ScoreMatrix() = default;
    ScoreMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    ScoreMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> data() const { return data_; }

    friend bool operator==(const ScoreMatrix&, const ScoreMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Raw per-image output of a query-based detector. The background column
/// is always the last one.
struct DetectionOutput {
    ImageId imageId;
    std::vector<CategoryId> categoryIds;  // aligned to the first C columns
    bool scoresAreLogits = false;
    ScoreMatrix scores;                          // Q x (C+1)
    std::vector<std::array<double, 4>> boxes;    // Q x 4, NormCenter

    std::size_t num_queries() const { return scores.rows(); }
};

enum class Verification { Unverified, Accepted, Rejected };

std::string_view to_string(Verification v);
Verification verification_from_string(std::string_view s);

struct PseudoGT {
    Annotation annotation;  // box in AbsCorner
    double confidence = 0.0;
    int queryIndex = 0;
    Verification verification = Verification::Unverified;

    friend bool operator==(const PseudoGT&, const PseudoGT&) = default;
};

/// Default pseudo-label confidence threshold.
inline constexpr double kDefaultTau = 0.3;

/// Elementwise logistic function. Throws ValidationError on non-finite input.
ScoreMatrix apply_sigmoid(const ScoreMatrix& logits);

/// Shape and range checks: Q >= 1, C+1 columns, Q boxes, probabilities in
/// [0,1] (or finite logits when flagged).
void validate_detection_output(const DetectionOutput& out);

/// Per query, the best foreground class (background column excluded) is
/// promoted to a pseudo GT when its score reaches `tau`. Logit outputs are
/// passed through the sigmoid first. Boxes are converted to AbsCorner and
/// clipped to the image. Names are filled from `names` when it is non-empty.
/// Result is sorted by descending confidence, ties by ascending query index.
std::vector<PseudoGT> extract_pseudo_gts(const DetectionOutput& out, double tau, ImageSize image,
                                         const CategoryTable& names = {});

}  // namespace vpl
