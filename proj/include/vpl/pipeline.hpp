#pragma once

#include "vpl/merge.hpp"
#include "vpl/metrics.hpp"
#include "vpl/scenario.hpp"
#include "vpl/synth.hpp"
#include "vpl/verify.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace vpl {

using DetectionSource = std::function<DetectionOutput(const ImageRecord&)>;

/// Runs `source` on every image of `images` (up to `jobs` at a time) and
/// extracts pseudo GTs. Output is grouped by image in dataset order, each
/// group in extract_pseudo_gts order, independent of `jobs`.
std::vector<PseudoGT> pseudo_label_images(const Dataset& images, const DetectionSource& source, double tau,
                                          int jobs = 1);

PseudoByImage group_by_image(std::span<const PseudoGT> pgs);

/// Scores the training labels of a merged task as detections: real GTs at
/// score 1, surviving pseudo GTs at their confidence. Mirrors merge_labels'
/// filtering and optional NMS.
DetectionsByImage label_detections(const TaskView& view, const PseudoByImage& pseudo,
                                   std::optional<double> nmsIoU);

/// Ground truth of the view's images restricted to `categories`.
Dataset restrict_truth(const Dataset& world, const TaskView& view, const std::set<CategoryId>& categories);

struct SimulationConfig {
    SynthWorldConfig world;
    double tau = kDefaultTau;
    OracleOptions oracle{0.5, 0.05, 0};
    std::optional<double> nmsIoU;
    UnparseablePolicy policy = UnparseablePolicy::Reject;
    int jobs = 1;
    int gridSide = kDefaultGridSide;
};

struct ArmSummary {
    std::string label;
    std::vector<double> meanAP50;     // per task, over cumulative classes
    std::vector<double> oldClassAP50; // per task, over previously learned classes (0 for task 1)
    std::vector<std::size_t> pseudoCount;
    std::vector<std::size_t> keptCount;
};

struct SimulationResult {
    TaskScenario scenario;
    std::size_t imageCount = 0;
    ArmSummary unfiltered;
    ArmSummary filtered;

    double final_unfiltered() const { return unfiltered.meanAP50.back(); }
    double final_filtered() const { return filtered.meanAP50.back(); }
};

/// generate_world, then for each task: synthetic detection with the previous
/// task's detector, pseudo labeling, optional oracle verification, merge and
/// label-quality evaluation (VOC AP50 against the full ground truth of the
/// task's images over all classes learned so far).
SimulationResult run_simulation(const SimulationConfig& cfg);

std::string format_comparison_table(const SimulationResult& result);
std::string simulation_to_json(const SimulationResult& result);

}  // namespace vpl
