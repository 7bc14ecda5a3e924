#pragma once

#include "vpl/dataset.hpp"

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace vpl {

struct ScoredDetection {
    BBox box;  // AbsCorner
    CategoryId categoryId = 0;
    double score = 0.0;
};

using DetectionsByImage = std::map<ImageId, std::vector<ScoredDetection>>;

/// Result of greedy matching on one image. `order` lists detection indices
/// by descending score (ties by insertion index); `truePositive[k]` and
/// `matchedGt[k]` describe detection order[k].
struct MatchResult {
    std::vector<std::size_t> order;
    std::vector<bool> truePositive;
    std::vector<int> matchedGt;  // -1 when unmatched
};

/// Each detection, in rank order, takes the unmatched same-class GT with the
/// highest IoU >= iouThresh (lowest GT index on equal IoU).
MatchResult match_detections(std::span<const ScoredDetection> dets, std::span<const Annotation> gts,
                             double iouThresh);

enum class Interpolation {
    AllPoint,  ///< area under the precision envelope
    Coco101,   ///< mean envelope precision at recall 0, 0.01, ..., 1
    Voc11,     ///< mean envelope precision at recall 0, 0.1, ..., 1
};

/// AP from TP flags in rank order. nullopt when there is nothing to score
/// (no GT and no detections); 0 when there are detections but no GT.
std::optional<double> average_precision(std::span<const bool> truePositive, std::size_t numGT,
                                        Interpolation interpolation);

enum class EvalMode { Voc, Coco };

struct EvalConfig {
    EvalMode mode = EvalMode::Voc;
    bool voc11pt = false;
    std::size_t maxDetsPerImage = 100;  // COCO mode only
    /// Restricts the evaluated classes; all table classes when unset.
    std::optional<std::set<CategoryId>> categories;
};

struct PrPoint {
    double recall = 0.0;
    double precision = 0.0;
};

struct EvalReport {
    EvalMode mode = EvalMode::Voc;
    std::map<CategoryId, double> perClassAP;    // VOC: AP50; COCO: AP over 0.50:0.95
    std::map<CategoryId, double> perClassAP50;
    std::map<CategoryId, std::size_t> numGT;
    std::map<double, double> apByIoU;           // threshold -> class-mean AP
    std::optional<double> apSmall, apMedium, apLarge;  // COCO mode
    double meanAP50 = 0.0;
    std::optional<double> meanAP5095;           // COCO mode
    std::map<CategoryId, std::vector<PrPoint>> detail;  // PR curve at IoU 0.5
};

/// Per-class AP against `gt`. Means are unweighted over classes with at
/// least one GT box. Results do not depend on image order.
EvalReport evaluate(const DetectionsByImage& dets, const Dataset& gt, const EvalConfig& config = {});

/// Class-mean of perClassAP over `group`, restricted to classes with GT.
std::optional<double> group_mean(const EvalReport& report, const std::set<CategoryId>& group);

/// Uses a dataset's annotations as detections with the given score.
DetectionsByImage detections_from_dataset(const Dataset& ds, double score = 1.0);

std::string report_to_json(const EvalReport& report, const CategoryTable& categories);
std::string report_table(const EvalReport& report, const CategoryTable& categories);
std::string report_csv(const EvalReport& report, const CategoryTable& categories);

}  // namespace vpl
