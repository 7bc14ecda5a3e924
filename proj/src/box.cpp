#include "vpl/box.hpp"

#include "vpl/error.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

namespace vpl {

namespace {

std::string describe(const BBox& box) {
    std::ostringstream os;
    os << box;
    return os.str();
}

void require_image(ImageSize image) {
    if (image.width <= 0 || image.height <= 0) {
        throw ValidationError("image dimensions must be positive, got " +
                              std::to_string(image.width) + "x" + std::to_string(image.height));
    }
}

double clamp_coord(double value, double limit, ClampPolicy policy, const BBox& src) {
    if (value >= 0.0 && value <= limit) return value;
    const double overshoot = value < 0.0 ? -value : value - limit;
    if (policy == ClampPolicy::Strict && !(overshoot < kClampTolerancePx)) {
        throw ValidationError("box " + describe(src) + " exceeds image bounds by " +
                              std::to_string(overshoot) + " px");
    }
    return std::clamp(value, 0.0, limit);
}

}  // namespace

double BBox::area() const {
    if (format == BoxFormat::NormCenter) return v[2] * v[3];
    return std::max(0.0, v[2] - v[0]) * std::max(0.0, v[3] - v[1]);
}

std::ostream& operator<<(std::ostream& os, const BBox& box) {
    os << (box.format == BoxFormat::NormCenter ? "NormCenter(" : "AbsCorner(") << box.v[0] << ", "
       << box.v[1] << ", " << box.v[2] << ", " << box.v[3] << ")";
    return os;
}

void validate_box(const BBox& box, ImageSize image) {
    for (double x : box.v) {
        if (!std::isfinite(x)) throw ValidationError("non-finite coordinate in " + describe(box));
    }
    if (box.format == BoxFormat::NormCenter) {
        for (double x : box.v) {
            if (x < 0.0 || x > 1.0) {
                throw ValidationError("normalized coordinate outside [0,1] in " + describe(box));
            }
        }
        if (box.v[2] <= 0.0 || box.v[3] <= 0.0) {
            throw ValidationError("non-positive width/height in " + describe(box));
        }
        return;
    }
    if (!(box.x1() < box.x2()) || !(box.y1() < box.y2())) {
        throw ValidationError("degenerate corner box " + describe(box));
    }
    if (box.x1() < 0.0 || box.y1() < 0.0) {
        throw ValidationError("negative corner in " + describe(box));
    }
    if (image.width > 0 && image.height > 0 &&
        (box.x2() > image.width || box.y2() > image.height)) {
        throw ValidationError("box " + describe(box) + " exceeds image " +
                              std::to_string(image.width) + "x" + std::to_string(image.height));
    }
}

BBox convert_box(const BBox& box, BoxFormat target, ImageSize image, ClampPolicy policy) {
    require_image(image);
    if (box.format == target) return box;
    const double W = image.width;
    const double H = image.height;

    if (box.format == BoxFormat::NormCenter) {
        validate_box(box);
        const auto [cx, cy, w, h] = box.v;
        return BBox::abs_corner(clamp_coord((cx - w / 2.0) * W, W, policy, box),
                                clamp_coord((cy - h / 2.0) * H, H, policy, box),
                                clamp_coord((cx + w / 2.0) * W, W, policy, box),
                                clamp_coord((cy + h / 2.0) * H, H, policy, box));
    }

    const double x1 = clamp_coord(box.x1(), W, policy, box);
    const double y1 = clamp_coord(box.y1(), H, policy, box);
    const double x2 = clamp_coord(box.x2(), W, policy, box);
    const double y2 = clamp_coord(box.y2(), H, policy, box);
    if (!(x1 < x2) || !(y1 < y2)) throw ValidationError("degenerate corner box " + describe(box));
    return BBox::norm_center((x1 + x2) / (2.0 * W), (y1 + y2) / (2.0 * H), (x2 - x1) / W,
                             (y2 - y1) / H);
}

BBox clamp_to_image(const BBox& box, ImageSize image, ClampPolicy policy) {
    require_image(image);
    if (box.format != BoxFormat::AbsCorner) throw ValidationError("clamp_to_image requires AbsCorner");
    BBox out = BBox::abs_corner(clamp_coord(box.x1(), image.width, policy, box),
                                clamp_coord(box.y1(), image.height, policy, box),
                                clamp_coord(box.x2(), image.width, policy, box),
                                clamp_coord(box.y2(), image.height, policy, box));
    if (!(out.x1() < out.x2()) || !(out.y1() < out.y2())) {
        throw ValidationError("degenerate corner box " + describe(box));
    }
    return out;
}

double iou(const BBox& a, const BBox& b) {
    if (a.format != BoxFormat::AbsCorner || b.format != BoxFormat::AbsCorner) {
        throw ValidationError("iou requires AbsCorner boxes");
    }
    const double iw = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
    const double ih = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
    const double inter = (iw > 0.0 && ih > 0.0) ? iw * ih : 0.0;
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

}  // namespace vpl
