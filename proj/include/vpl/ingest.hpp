#pragma once

#include "vpl/dataset.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vpl {

/// An annotation the parser refused, with enough context to locate it.
struct Rejection {
    ImageId imageId;
    std::size_t annotationIndex = 0;  // index in the source annotation list
    std::string reason;
};

/// Parses COCO-style annotation JSON ([x,y,w,h] top-left boxes) into a
/// Dataset with AbsCorner boxes. The first bad annotation throws ParseError.
Dataset parse_coco(std::string_view bytes);

/// Lenient variant: bad annotations are appended to `rejections` instead
/// of aborting. Structural errors (not JSON, missing arrays, bad images or
/// categories) still throw.
Dataset parse_coco(std::string_view bytes, std::vector<Rejection>& rejections);

/// COCO-style JSON. parse_coco(serialize_coco(ds)) reproduces ds.
std::string serialize_coco(const Dataset& ds);

/// Parses VOC-style per-image XML documents (1-based inclusive corners).
/// Object names must appear in `categories`.
Dataset parse_voc_xml(std::span<const std::string> documents, const CategoryTable& categories);
Dataset parse_voc_xml(std::span<const std::string> documents, const CategoryTable& categories,
                      std::vector<Rejection>& rejections);

/// One VOC-style XML document for a single image.
std::string serialize_voc_xml(const ImageRecord& image);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace vpl
