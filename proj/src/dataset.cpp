#include "vpl/dataset.hpp"

#include "vpl/error.hpp"

#include <cmath>
#include <set>

namespace vpl {

const Category* CategoryTable::find(CategoryId id) const {
    for (const auto& c : entries) {
        if (c.id == id) return &c;
    }
    return nullptr;
}

const Category* CategoryTable::find_by_name(std::string_view name) const {
    for (const auto& c : entries) {
        if (c.name == name) return &c;
    }
    return nullptr;
}

CategoryTable voc_category_table() {
    static const char* const kNames[] = {
        "aeroplane", "bicycle", "bird",  "boat",        "bottle", "bus",   "car",
        "cat",       "chair",   "cow",   "diningtable", "dog",    "horse", "motorbike",
        "person",    "pottedplant", "sheep", "sofa",    "train",  "tvmonitor"};
    CategoryTable table;
    int id = 1;
    for (const char* name : kNames) table.entries.push_back({id++, name});
    return table;
}

std::string_view to_string(Provenance p) {
    switch (p) {
        case Provenance::Coco: return "coco";
        case Provenance::Voc: return "voc";
        case Provenance::Synthetic: return "synthetic";
        case Provenance::Derived: return "derived";
    }
    return "coco";
}

Provenance provenance_from_string(std::string_view s) {
    if (s == "coco") return Provenance::Coco;
    if (s == "voc") return Provenance::Voc;
    if (s == "synthetic") return Provenance::Synthetic;
    if (s == "derived") return Provenance::Derived;
    throw ParseError("unknown provenance tag '" + std::string(s) + "'");
}

const ImageRecord* Dataset::find_image(std::string_view id) const {
    for (const auto& img : images) {
        if (img.id == id) return &img;
    }
    return nullptr;
}

std::size_t Dataset::annotation_count() const {
    std::size_t n = 0;
    for (const auto& img : images) n += img.annotations.size();
    return n;
}

void validate_dataset(const Dataset& ds) {
    std::set<CategoryId> cat_ids;
    for (const auto& c : ds.categories.entries) {
        if (!cat_ids.insert(c.id).second) {
            throw ValidationError("duplicate category id " + std::to_string(c.id));
        }
    }
    std::set<ImageId> image_ids;
    for (const auto& img : ds.images) {
        if (!image_ids.insert(img.id).second) throw ValidationError("duplicate image id " + img.id);
        if (img.width <= 0 || img.height <= 0) {
            throw ValidationError("image " + img.id + " has non-positive dimensions");
        }
        for (std::size_t i = 0; i < img.annotations.size(); ++i) {
            const auto& ann = img.annotations[i];
            const auto where = "image " + img.id + " annotation " + std::to_string(i);
            const Category* cat = ds.categories.find(ann.categoryId);
            if (cat == nullptr) {
                throw ValidationError(where + ": unknown category " + std::to_string(ann.categoryId));
            }
            if (cat->name != ann.categoryName) {
                throw ValidationError(where + ": category name '" + ann.categoryName +
                                      "' does not match table entry '" + cat->name + "'");
            }
            if (ann.box.format != BoxFormat::AbsCorner) {
                throw ValidationError(where + ": box is not AbsCorner");
            }
            try {
                validate_box(ann.box, img.size());
            } catch (const ValidationError& e) {
                throw ValidationError(where + ": " + e.what());
            }
        }
    }
}

bool approx_equal(const Annotation& a, const Annotation& b, double tol) {
    if (a.categoryId != b.categoryId || a.categoryName != b.categoryName ||
        a.sourceImageId != b.sourceImageId || a.crowd != b.crowd || a.box.format != b.box.format) {
        return false;
    }
    for (std::size_t k = 0; k < 4; ++k) {
        if (std::abs(a.box.v[k] - b.box.v[k]) > tol) return false;
    }
    return true;
}

bool approx_equal(const Dataset& a, const Dataset& b, double tol) {
    if (a.provenance != b.provenance || !(a.categories == b.categories) ||
        a.images.size() != b.images.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.images.size(); ++i) {
        const auto& x = a.images[i];
        const auto& y = b.images[i];
        if (x.id != y.id || x.filePathOrUri != y.filePathOrUri || x.width != y.width ||
            x.height != y.height || x.annotations.size() != y.annotations.size()) {
            return false;
        }
        for (std::size_t k = 0; k < x.annotations.size(); ++k) {
            if (!approx_equal(x.annotations[k], y.annotations[k], tol)) return false;
        }
    }
    return true;
}

}  // namespace vpl
