#pragma once

#include "vpl/pseudo.hpp"
#include "vpl/scenario.hpp"

#include <map>
#include <optional>
#include <vector>

namespace vpl {

using PseudoByImage = std::map<ImageId, std::vector<PseudoGT>>;

/// Greedy per-class suppression: within each class, keep the highest
/// confidence box (lower queryIndex on ties) and drop same-class boxes with
/// IoU >= iouThresh against a kept one. Survivors keep their input order.
std::vector<PseudoGT> suppress_duplicates(std::span<const PseudoGT> pgs, double iouThresh);

/// Training labels for one task: the view's real GTs followed by the
/// pseudo GTs of each image. Pseudo GTs marked Rejected are skipped;
/// Unverified ones pass (the unfiltered arm). Real GTs are never suppressed
/// or modified. A pseudo GT whose class is visible in the view, or whose
/// image is not in the view, is a ValidationError.
Dataset merge_labels(const TaskView& realView, const PseudoByImage& pseudo,
                     std::optional<double> nmsIoU = std::nullopt);

}  // namespace vpl
