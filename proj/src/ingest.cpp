#include "vpl/ingest.hpp"

#include "vpl/error.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace vpl {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

bool is_canonical_integer(std::string_view s) {
    if (s.empty()) return false;
    std::size_t i = s[0] == '-' ? 1 : 0;
    if (i == s.size()) return false;
    if (s[i] == '0' && s.size() > i + 1) return false;
    for (; i < s.size(); ++i) {
        if (s[i] < '0' || s[i] > '9') return false;
    }
    return s.size() < 19;
}

ImageId image_id_from_json(const json& v) {
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_string()) return v.get<std::string>();
    throw ParseError("image id must be an integer or string, got " + v.dump());
}

ordered_json image_id_to_json(const ImageId& id) {
    if (is_canonical_integer(id)) return std::stoll(id);
    return id;
}

double number_at(const json& arr, std::size_t k) {
    if (!arr[k].is_number()) throw ParseError("bbox entry is not a number");
    return arr[k].get<double>();
}

const json& required_array(const json& root, const char* key) {
    auto it = root.find(key);
    if (it == root.end() || !it->is_array()) {
        throw ParseError(std::string("COCO document lacks a '") + key + "' array");
    }
    return *it;
}

Dataset parse_coco_impl(std::string_view bytes, std::vector<Rejection>* rejections) {
    json root;
    try {
        root = json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed COCO document: ") + e.what());
    }
    if (!root.is_object()) throw ParseError("malformed COCO document: root is not an object");

    Dataset ds;
    ds.provenance = Provenance::Coco;
    if (auto info = root.find("info"); info != root.end() && info->is_object()) {
        if (auto p = info->find("provenance"); p != info->end() && p->is_string()) {
            ds.provenance = provenance_from_string(p->get<std::string>());
        }
    }

    std::set<CategoryId> seen_cats;
    for (const auto& c : required_array(root, "categories")) {
        if (!c.is_object() || !c.contains("id") || !c["id"].is_number_integer() ||
            !c.contains("name") || !c["name"].is_string()) {
            throw ParseError("malformed category entry " + c.dump());
        }
        Category cat{c["id"].get<int>(), c["name"].get<std::string>()};
        if (!seen_cats.insert(cat.id).second) {
            throw ParseError("duplicate category id " + std::to_string(cat.id));
        }
        ds.categories.entries.push_back(std::move(cat));
    }

    std::map<ImageId, std::size_t> image_index;
    for (const auto& im : required_array(root, "images")) {
        if (!im.is_object() || !im.contains("id")) throw ParseError("image entry without id");
        ImageRecord rec;
        rec.id = image_id_from_json(im["id"]);
        if (auto f = im.find("file_name"); f != im.end() && f->is_string()) rec.filePathOrUri = *f;
        if (!im.contains("width") || !im["width"].is_number_integer() || !im.contains("height") ||
            !im["height"].is_number_integer()) {
            throw ParseError("image " + rec.id + " lacks integer width/height");
        }
        rec.width = im["width"].get<int>();
        rec.height = im["height"].get<int>();
        if (rec.width <= 0 || rec.height <= 0) {
            throw ParseError("image " + rec.id + " has non-positive dimensions");
        }
        if (!image_index.emplace(rec.id, ds.images.size()).second) {
            throw ParseError("duplicate image id " + rec.id);
        }
        ds.images.push_back(std::move(rec));
    }

    const auto& anns = required_array(root, "annotations");
    for (std::size_t idx = 0; idx < anns.size(); ++idx) {
        const json& a = anns[idx];
        ImageId image_id = a.is_object() && a.contains("image_id")
                               ? (a["image_id"].is_number_integer() || a["image_id"].is_string()
                                      ? image_id_from_json(a["image_id"])
                                      : std::string("?"))
                               : std::string("?");
        auto reject = [&](const std::string& reason) {
            const std::string msg =
                "annotation " + std::to_string(idx) + " (image " + image_id + "): " + reason;
            if (rejections == nullptr) throw ParseError(msg);
            rejections->push_back({image_id, idx, reason});
        };

        if (!a.is_object()) {
            reject("not an object");
            continue;
        }
        auto img_it = image_index.find(image_id);
        if (img_it == image_index.end()) {
            reject("references unknown image");
            continue;
        }
        if (!a.contains("category_id") || !a["category_id"].is_number_integer()) {
            reject("missing category_id");
            continue;
        }
        const Category* cat = ds.categories.find(a["category_id"].get<int>());
        if (cat == nullptr) {
            reject("references unknown category " + a["category_id"].dump());
            continue;
        }
        if (!a.contains("bbox") || !a["bbox"].is_array() || a["bbox"].size() != 4) {
            reject("bbox must have four entries");
            continue;
        }
        ImageRecord& img = ds.images[img_it->second];
        const json& b = a["bbox"];
        if (!b[0].is_number() || !b[1].is_number() || !b[2].is_number() || !b[3].is_number()) {
            reject("bbox entries must be numbers");
            continue;
        }
        const double x = number_at(b, 0), y = number_at(b, 1), w = number_at(b, 2),
                     h = number_at(b, 3);
        if (!(w > 0.0) || !(h > 0.0)) {
            reject("degenerate box (w=" + b[2].dump() + ", h=" + b[3].dump() + ")");
            continue;
        }
        std::string failure;
        try {
            Annotation ann;
            ann.categoryId = cat->id;
            ann.categoryName = cat->name;
            ann.box = clamp_to_image(BBox::abs_corner(x, y, x + w, y + h), img.size());
            ann.sourceImageId = img.id;
            if (auto c = a.find("iscrowd"); c != a.end()) {
                ann.crowd = c->is_boolean() ? c->get<bool>() : (c->is_number() && c->get<double>() != 0);
            }
            img.annotations.push_back(std::move(ann));
        } catch (const Error& e) {
            failure = e.what();
        }
        if (!failure.empty()) reject(failure);
    }
    return ds;
}

std::string format_number(double v) {
    if (std::floor(v) == v && std::abs(v) < 1e15) {
        return std::to_string(static_cast<long long>(v));
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

double xml_number(const boost::property_tree::ptree& node, const char* key, const std::string& where) {
    auto child = node.get_optional<std::string>(key);
    if (!child) throw ParseError(where + ": missing <" + key + ">");
    const std::string text = *child;
    try {
        std::size_t pos = 0;
        double v = std::stod(text, &pos);
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
        if (pos != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw ParseError(where + ": <" + key + "> is not a number: '" + text + "'");
    }
}

Dataset parse_voc_impl(std::span<const std::string> documents, const CategoryTable& categories,
                       std::vector<Rejection>* rejections) {
    namespace pt = boost::property_tree;
    Dataset ds;
    ds.provenance = Provenance::Voc;
    ds.categories = categories;
    std::set<ImageId> ids;

    for (std::size_t doc_idx = 0; doc_idx < documents.size(); ++doc_idx) {
        pt::ptree tree;
        try {
            std::istringstream in(documents[doc_idx]);
            pt::read_xml(in, tree, pt::xml_parser::trim_whitespace);
        } catch (const pt::xml_parser_error& e) {
            throw ParseError("VOC document " + std::to_string(doc_idx) + ": " + e.what());
        }
        auto root = tree.get_child_optional("annotation");
        if (!root) throw ParseError("VOC document " + std::to_string(doc_idx) + " lacks <annotation>");

        ImageRecord rec;
        rec.filePathOrUri = root->get<std::string>("filename", "");
        if (rec.filePathOrUri.empty()) {
            rec.id = "voc_" + std::to_string(doc_idx);
        } else {
            rec.id = std::filesystem::path(rec.filePathOrUri).stem().string();
        }
        const std::string where = "VOC image " + rec.id;
        auto size = root->get_child_optional("size");
        if (!size) throw ParseError(where + ": missing <size>");
        rec.width = static_cast<int>(xml_number(*size, "width", where));
        rec.height = static_cast<int>(xml_number(*size, "height", where));
        if (rec.width <= 0 || rec.height <= 0) throw ParseError(where + ": non-positive size");
        if (!ids.insert(rec.id).second) throw ParseError(where + ": duplicate image id");

        std::size_t obj_idx = 0;
        for (const auto& [tag, obj] : *root) {
            if (tag != "object") continue;
            const std::size_t idx = obj_idx++;
            auto reject = [&](const std::string& reason) {
                if (rejections == nullptr) {
                    throw ParseError(where + " object " + std::to_string(idx) + ": " + reason);
                }
                rejections->push_back({rec.id, idx, reason});
            };
            const std::string name = obj.get<std::string>("name", "");
            const Category* cat = categories.find_by_name(name);
            if (cat == nullptr) {
                reject("name '" + name + "' not in category table");
                continue;
            }
            auto bnd = obj.get_child_optional("bndbox");
            if (!bnd) {
                reject("missing <bndbox>");
                continue;
            }
            const double xmin = xml_number(*bnd, "xmin", where);
            const double ymin = xml_number(*bnd, "ymin", where);
            const double xmax = xml_number(*bnd, "xmax", where);
            const double ymax = xml_number(*bnd, "ymax", where);
            if (!(xmax > xmin) || !(ymax > ymin)) {
                reject("degenerate bndbox (x2<=x1 or y2<=y1)");
                continue;
            }
            std::string failure;
            try {
                Annotation ann;
                ann.categoryId = cat->id;
                ann.categoryName = cat->name;
                ann.box = clamp_to_image(BBox::abs_corner(xmin - 1.0, ymin - 1.0, xmax, ymax),
                                         rec.size());
                ann.sourceImageId = rec.id;
                ann.crowd = obj.get<int>("difficult", 0) != 0;
                rec.annotations.push_back(std::move(ann));
            } catch (const Error& e) {
                failure = e.what();
            }
            if (!failure.empty()) reject(failure);
        }
        ds.images.push_back(std::move(rec));
    }
    return ds;
}

}  // namespace

Dataset parse_coco(std::string_view bytes) { return parse_coco_impl(bytes, nullptr); }

Dataset parse_coco(std::string_view bytes, std::vector<Rejection>& rejections) {
    return parse_coco_impl(bytes, &rejections);
}

std::string serialize_coco(const Dataset& ds) {
    ordered_json root;
    root["info"] = {{"provenance", std::string(to_string(ds.provenance))}};
    root["images"] = ordered_json::array();
    root["annotations"] = ordered_json::array();
    root["categories"] = ordered_json::array();
    long long ann_id = 1;
    for (const auto& img : ds.images) {
        root["images"].push_back({{"id", image_id_to_json(img.id)},
                                  {"file_name", img.filePathOrUri},
                                  {"width", img.width},
                                  {"height", img.height}});
        for (const auto& a : img.annotations) {
            const double w = a.box.x2() - a.box.x1();
            const double h = a.box.y2() - a.box.y1();
            root["annotations"].push_back({{"id", ann_id++},
                                           {"image_id", image_id_to_json(img.id)},
                                           {"category_id", a.categoryId},
                                           {"bbox", {a.box.x1(), a.box.y1(), w, h}},
                                           {"area", w * h},
                                           {"iscrowd", a.crowd ? 1 : 0}});
        }
    }
    for (const auto& c : ds.categories.entries) {
        root["categories"].push_back({{"id", c.id}, {"name", c.name}});
    }
    return root.dump(1) + "\n";
}

Dataset parse_voc_xml(std::span<const std::string> documents, const CategoryTable& categories) {
    return parse_voc_impl(documents, categories, nullptr);
}

Dataset parse_voc_xml(std::span<const std::string> documents, const CategoryTable& categories,
                      std::vector<Rejection>& rejections) {
    return parse_voc_impl(documents, categories, &rejections);
}

std::string serialize_voc_xml(const ImageRecord& image) {
    std::ostringstream os;
    os << "<annotation>\n";
    os << "\t<filename>" << xml_escape(image.filePathOrUri) << "</filename>\n";
    os << "\t<size>\n\t\t<width>" << image.width << "</width>\n\t\t<height>" << image.height
       << "</height>\n\t\t<depth>3</depth>\n\t</size>\n";
    for (const auto& a : image.annotations) {
        os << "\t<object>\n\t\t<name>" << xml_escape(a.categoryName) << "</name>\n";
        os << "\t\t<difficult>" << (a.crowd ? 1 : 0) << "</difficult>\n";
        os << "\t\t<bndbox>\n";
        os << "\t\t\t<xmin>" << format_number(a.box.x1() + 1.0) << "</xmin>\n";
        os << "\t\t\t<ymin>" << format_number(a.box.y1() + 1.0) << "</ymin>\n";
        os << "\t\t\t<xmax>" << format_number(a.box.x2()) << "</xmax>\n";
        os << "\t\t\t<ymax>" << format_number(a.box.y2()) << "</ymax>\n";
        os << "\t\t</bndbox>\n\t</object>\n";
    }
    os << "</annotation>\n";
    return os.str();
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("short write to " + path.string());
}

}  // namespace vpl
