#pragma once

#include "vpl/dataset.hpp"

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace vpl {

/// Ordered partition of the category universe into incremental tasks,
/// e.g. "5+5+5+5" over VOC's 20 classes.
struct TaskScenario {
    std::string name;
    std::vector<std::vector<CategoryId>> taskCategorySets;

    std::size_t num_tasks() const { return taskCategorySets.size(); }
    /// Task index (1-based) that owns `id`, or 0 when absent.
    int task_of(CategoryId id) const;
};

/// Training view for one task: only images with a current-task object,
/// carrying only current-task annotations.
struct TaskView {
    int taskIndex = 0;  // 1-based
    Dataset dataset;
    std::set<CategoryId> visibleCategories;
};

enum class CategoryOrder {
    FileOrder,     ///< order of the dataset's category table
    Alphabetical,  ///< by class name (VOC convention)
    AscendingId,   ///< by numeric id (COCO convention)
};

/// Default ordering convention for a dataset's provenance.
CategoryOrder default_category_order(Provenance p);

/// Orders the dataset's categories for splitting. A non-empty `overrideNames`
/// (one class name per entry) replaces the convention and must name every
/// category exactly once.
std::vector<CategoryId> category_universe(const CategoryTable& table, CategoryOrder order,
                                          const std::vector<std::string>& overrideNames = {});

/// Parses `n1+n2+...` and assigns the first n1 ids of `universe` to task 1,
/// the next n2 to task 2, and so on.
TaskScenario parse_scenario(std::string_view spec, const std::vector<CategoryId>& universe);

/// Images with at least one task-`taskIndex` object, stripped of every
/// other annotation. Throws ValidationError when the view is empty.
TaskView build_task_view(const Dataset& ds, const TaskScenario& sc, int taskIndex);

/// Union of the category sets of tasks 1..taskIndex (empty for 0).
std::set<CategoryId> cumulative_categories(const TaskScenario& sc, int taskIndex);

}  // namespace vpl
