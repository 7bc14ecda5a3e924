#include "vpl/merge.hpp"

#include "vpl/error.hpp"

#include <algorithm>
#include <numeric>

namespace vpl {

std::vector<PseudoGT> suppress_duplicates(std::span<const PseudoGT> pgs, double iouThresh) {
    std::vector<std::size_t> order(pgs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (pgs[a].confidence != pgs[b].confidence) return pgs[a].confidence > pgs[b].confidence;
        return pgs[a].queryIndex < pgs[b].queryIndex;
    });
    std::vector<bool> keep(pgs.size(), false);
    std::vector<std::size_t> kept;
    for (std::size_t idx : order) {
        bool suppressed = false;
        for (std::size_t k : kept) {
            if (pgs[k].annotation.categoryId == pgs[idx].annotation.categoryId &&
                iou(pgs[k].annotation.box, pgs[idx].annotation.box) >= iouThresh) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) {
            kept.push_back(idx);
            keep[idx] = true;
        }
    }
    std::vector<PseudoGT> out;
    for (std::size_t i = 0; i < pgs.size(); ++i) {
        if (keep[i]) out.push_back(pgs[i]);
    }
    return out;
}

Dataset merge_labels(const TaskView& realView, const PseudoByImage& pseudo, std::optional<double> nmsIoU) {
    if (nmsIoU && !(*nmsIoU > 0.0 && *nmsIoU <= 1.0)) {
        throw ValidationError("NMS IoU threshold must lie in (0,1]");
    }
    const Dataset& real = realView.dataset;
    for (const auto& [image_id, list] : pseudo) {
        if (real.find_image(image_id) == nullptr) {
            throw ValidationError("pseudo GTs given for image " + image_id + " outside the task view");
        }
        for (const auto& pg : list) {
            if (realView.visibleCategories.contains(pg.annotation.categoryId)) {
                throw ValidationError("pseudo GT on image " + image_id + " carries current-task category " +
                                      std::to_string(pg.annotation.categoryId) +
                                      " (old and new classes must be disjoint)");
            }
            if (!real.categories.contains(pg.annotation.categoryId)) {
                throw ValidationError("pseudo GT on image " + image_id + " has unknown category " +
                                      std::to_string(pg.annotation.categoryId));
            }
        }
    }

    Dataset out;
    out.categories = real.categories;
    out.provenance = Provenance::Derived;
    out.images.reserve(real.images.size());
    for (const auto& img : real.images) {
        ImageRecord merged = img;
        auto it = pseudo.find(img.id);
        if (it != pseudo.end()) {
            std::vector<PseudoGT> usable;
            for (const auto& pg : it->second) {
                if (pg.verification != Verification::Rejected) usable.push_back(pg);
            }
            if (nmsIoU) usable = suppress_duplicates(usable, *nmsIoU);
            for (auto& pg : usable) {
                Annotation ann = pg.annotation;
                ann.sourceImageId = img.id;
                ann.categoryName = real.categories.find(ann.categoryId)->name;
                ann.box = clamp_to_image(ann.box, img.size(), ClampPolicy::Clip);
                merged.annotations.push_back(std::move(ann));
            }
        }
        out.images.push_back(std::move(merged));
    }
    return out;
}

}  // namespace vpl
