#pragma once

#include "vpl/box.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vpl {

using ImageId = std::string;
using CategoryId = int;

struct Category {
    CategoryId id = 0;
    std::string name;

    friend bool operator==(const Category&, const Category&) = default;
};

/// Ordered (id, name) table. Order is the order of the source file.
struct CategoryTable {
    std::vector<Category> entries;

    const Category* find(CategoryId id) const;
    const Category* find_by_name(std::string_view name) const;
    bool contains(CategoryId id) const { return find(id) != nullptr; }
    std::size_t size() const { return entries.size(); }
    bool empty() const { return entries.empty(); }

    friend bool operator==(const CategoryTable&, const CategoryTable&) = default;
};

/// The 20 PASCAL VOC classes in their conventional (alphabetical) order,
/// with ids 1..20.
CategoryTable voc_category_table();

struct Annotation {
    CategoryId categoryId = 0;
    std::string categoryName;
    BBox box;  // AbsCorner once inside a Dataset
    ImageId sourceImageId;
    bool crowd = false;  // COCO iscrowd / VOC difficult, passed through untouched

    friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct ImageRecord {
    ImageId id;
    std::string filePathOrUri;
    int width = 0;
    int height = 0;
    std::vector<Annotation> annotations;

    ImageSize size() const { return {width, height}; }

    friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

enum class Provenance { Coco, Voc, Synthetic, Derived };

std::string_view to_string(Provenance p);
Provenance provenance_from_string(std::string_view s);

struct Dataset {
    std::vector<ImageRecord> images;
    CategoryTable categories;
    Provenance provenance = Provenance::Coco;

    const ImageRecord* find_image(std::string_view id) const;
    std::size_t annotation_count() const;
};

/// Throws ValidationError on the first violated invariant: unique ids,
/// positive image sizes, resolvable categories with matching names, and
/// AbsCorner boxes that fit inside their image.
void validate_dataset(const Dataset& ds);

/// Structural equality with per-coordinate tolerance on boxes.
bool approx_equal(const Annotation& a, const Annotation& b, double tol = 1e-9);
bool approx_equal(const Dataset& a, const Dataset& b, double tol = 1e-9);

}  // namespace vpl
