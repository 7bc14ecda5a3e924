#include "vpl/scenario.hpp"

#include "vpl/error.hpp"

#include <algorithm>
#include <map>

namespace vpl {

int TaskScenario::task_of(CategoryId id) const {
    for (std::size_t t = 0; t < taskCategorySets.size(); ++t) {
        const auto& set = taskCategorySets[t];
        if (std::find(set.begin(), set.end(), id) != set.end()) return static_cast<int>(t) + 1;
    }
    return 0;
}

CategoryOrder default_category_order(Provenance p) {
    return p == Provenance::Voc ? CategoryOrder::Alphabetical : CategoryOrder::AscendingId;
}

std::vector<CategoryId> category_universe(const CategoryTable& table, CategoryOrder order,
                                          const std::vector<std::string>& overrideNames) {
    std::vector<CategoryId> ids;
    if (!overrideNames.empty()) {
        std::set<CategoryId> used;
        for (const auto& name : overrideNames) {
            const Category* c = table.find_by_name(name);
            if (c == nullptr) throw ValidationError("category order override names unknown class '" + name + "'");
            if (!used.insert(c->id).second) {
                throw ValidationError("category order override repeats '" + name + "'");
            }
            ids.push_back(c->id);
        }
        if (ids.size() != table.size()) {
            throw ValidationError("category order override lists " + std::to_string(ids.size()) +
                                  " of " + std::to_string(table.size()) + " classes");
        }
        return ids;
    }
    std::vector<Category> cats = table.entries;
    if (order == CategoryOrder::Alphabetical) {
        std::stable_sort(cats.begin(), cats.end(),
                         [](const Category& a, const Category& b) { return a.name < b.name; });
    } else if (order == CategoryOrder::AscendingId) {
        std::stable_sort(cats.begin(), cats.end(),
                         [](const Category& a, const Category& b) { return a.id < b.id; });
    }
    for (const auto& c : cats) ids.push_back(c.id);
    return ids;
}

TaskScenario parse_scenario(std::string_view spec, const std::vector<CategoryId>& universe) {
    std::vector<std::size_t> sizes;
    std::size_t pos = 0;
    while (true) {
        std::size_t start = pos;
        std::size_t value = 0;
        while (pos < spec.size() && spec[pos] >= '0' && spec[pos] <= '9') {
            value = value * 10 + static_cast<std::size_t>(spec[pos] - '0');
            if (value > 1'000'000) throw ParseError("scenario '" + std::string(spec) + "': task size too large");
            ++pos;
        }
        if (pos == start) {
            throw ParseError("scenario '" + std::string(spec) + "' does not match <int>(+<int>)*");
        }
        if (value == 0) throw ParseError("scenario '" + std::string(spec) + "' has a zero-size task");
        sizes.push_back(value);
        if (pos == spec.size()) break;
        if (spec[pos] != '+') {
            throw ParseError("scenario '" + std::string(spec) + "' does not match <int>(+<int>)*");
        }
        ++pos;
    }

    std::size_t total = 0;
    for (auto n : sizes) total += n;
    if (total != universe.size()) {
        throw ValidationError("scenario '" + std::string(spec) + "' covers " + std::to_string(total) +
                              " classes but the universe has " + std::to_string(universe.size()));
    }
    std::set<CategoryId> distinct(universe.begin(), universe.end());
    if (distinct.size() != universe.size()) throw ValidationError("category universe has duplicate ids");

    TaskScenario sc;
    sc.name = std::string(spec);
    auto it = universe.begin();
    for (auto n : sizes) {
        sc.taskCategorySets.emplace_back(it, it + static_cast<std::ptrdiff_t>(n));
        it += static_cast<std::ptrdiff_t>(n);
    }
    return sc;
}

TaskView build_task_view(const Dataset& ds, const TaskScenario& sc, int taskIndex) {
    if (taskIndex < 1 || static_cast<std::size_t>(taskIndex) > sc.num_tasks()) {
        throw ValidationError("task index " + std::to_string(taskIndex) + " outside 1.." +
                              std::to_string(sc.num_tasks()));
    }
    const auto& current = sc.taskCategorySets[static_cast<std::size_t>(taskIndex) - 1];
    TaskView view;
    view.taskIndex = taskIndex;
    view.visibleCategories = std::set<CategoryId>(current.begin(), current.end());
    view.dataset.categories = ds.categories;
    view.dataset.provenance = ds.provenance;
    for (const auto& img : ds.images) {
        ImageRecord kept = img;
        kept.annotations.clear();
        for (const auto& ann : img.annotations) {
            if (view.visibleCategories.contains(ann.categoryId)) kept.annotations.push_back(ann);
        }
        if (!kept.annotations.empty()) view.dataset.images.push_back(std::move(kept));
    }
    if (view.dataset.images.empty()) {
        throw ValidationError("scenario '" + sc.name + "' task " + std::to_string(taskIndex) +
                              " has no images on this dataset");
    }
    return view;
}

std::set<CategoryId> cumulative_categories(const TaskScenario& sc, int taskIndex) {
    if (taskIndex < 0 || static_cast<std::size_t>(taskIndex) > sc.num_tasks()) {
        throw ValidationError("task index " + std::to_string(taskIndex) + " outside 0.." +
                              std::to_string(sc.num_tasks()));
    }
    std::set<CategoryId> out;
    for (int t = 0; t < taskIndex; ++t) {
        const auto& set = sc.taskCategorySets[static_cast<std::size_t>(t)];
        out.insert(set.begin(), set.end());
    }
    return out;
}

}  // namespace vpl
