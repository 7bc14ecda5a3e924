#pragma once

#include <array>
#include <iosfwd>

namespace vpl {

enum class BoxFormat {
    NormCenter,  ///< (cx, cy, w, h), all in [0, 1] relative to the image
    AbsCorner,   ///< (x1, y1, x2, y2) in pixels
};

struct ImageSize {
    int width = 0;
    int height = 0;
};

/// What convert_box does when a converted corner falls outside the image.
enum class ClampPolicy {
    Strict,  ///< clamp overshoot below half a pixel, reject anything larger
    Clip,    ///< always clamp to the image rectangle
};

/// Axis-aligned rectangle tagged with its coordinate convention.
struct BBox {
    BoxFormat format = BoxFormat::AbsCorner;
    std::array<double, 4> v{};

    static BBox abs_corner(double x1, double y1, double x2, double y2) {
        return {BoxFormat::AbsCorner, {x1, y1, x2, y2}};
    }
    static BBox norm_center(double cx, double cy, double w, double h) {
        return {BoxFormat::NormCenter, {cx, cy, w, h}};
    }

    double x1() const { return v[0]; }
    double y1() const { return v[1]; }
    double x2() const { return v[2]; }
    double y2() const { return v[3]; }

    /// Area in the box's own units (pixels² for AbsCorner).
    double area() const;

    friend bool operator==(const BBox&, const BBox&) = default;
};

std::ostream& operator<<(std::ostream& os, const BBox& box);

/// Largest overshoot (pixels) that convert_box silently clamps under
/// ClampPolicy::Strict.
inline constexpr double kClampTolerancePx = 0.5;

/// Throws ValidationError unless `box` satisfies its format's invariants.
/// AbsCorner boxes are additionally checked against `image` when both
/// dimensions are positive.
void validate_box(const BBox& box, ImageSize image = {});

/// Converts between NormCenter and AbsCorner for an image of the given size.
/// NormCenter (cx,cy,w,h) maps to ((cx-w/2)W, (cy-h/2)H, (cx+w/2)W, (cy+h/2)H),
/// clamped to [0,W]x[0,H]. Converting to the box's own format is the identity.
BBox convert_box(const BBox& box, BoxFormat target, ImageSize image,
                 ClampPolicy policy = ClampPolicy::Strict);

/// Clamps an AbsCorner box into the image under `policy`; rejects boxes
/// that become degenerate.
BBox clamp_to_image(const BBox& box, ImageSize image, ClampPolicy policy = ClampPolicy::Strict);

/// Intersection over union of two AbsCorner boxes; 0 when the union is empty.
double iou(const BBox& a, const BBox& b);

}  // namespace vpl
