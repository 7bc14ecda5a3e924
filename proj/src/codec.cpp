#include "vpl/codec.hpp"

#include "vpl/error.hpp"

namespace vpl {

namespace {

using json = nlohmann::json;

template <typename Err>
const json& field(const json& j, const char* key, const std::string& where) {
    if (!j.is_object()) throw Err(where + ": expected an object");
    auto it = j.find(key);
    if (it == j.end()) throw Err(where + ": missing field '" + key + "'");
    return *it;
}

template <typename Err>
double number(const json& v, const std::string& what) {
    if (!v.is_number()) throw Err(what + " must be a number");
    return v.get<double>();
}

template <typename Err>
std::array<double, 4> four_numbers(const json& v, const std::string& what) {
    if (!v.is_array() || v.size() != 4) throw Err(what + " must be an array of 4 numbers");
    return {number<Err>(v[0], what), number<Err>(v[1], what), number<Err>(v[2], what), number<Err>(v[3], what)};
}

std::string id_string(const json& v, const std::string& what) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    throw ParseError(what + " must be a string or integer");
}

json parse_json(std::string_view bytes, const char* what) {
    try {
        return json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed ") + what + ": " + e.what());
    }
}

}  // namespace

ojson detection_output_to_json(const DetectionOutput& out) {
    ojson j;
    j["imageId"] = out.imageId;
    j["categoryIds"] = out.categoryIds;
    j["scoresAreLogits"] = out.scoresAreLogits;
    j["backgroundColumn"] = "last";
    j["scores"] = ojson::array();
    for (std::size_t q = 0; q < out.scores.rows(); ++q) {
        auto row = out.scores.row(q);
        j["scores"].push_back(std::vector<double>(row.begin(), row.end()));
    }
    j["boxes"] = ojson::array();
    for (const auto& b : out.boxes) j["boxes"].push_back({b[0], b[1], b[2], b[3]});
    return j;
}

DetectionOutput detection_output_from_json(const json& j) {
    const std::string where = "detector output";
    DetectionOutput out;
    out.imageId = id_string(field<ParseError>(j, "imageId", where), "imageId");
    const std::string ctx = where + " (image " + out.imageId + ")";
    const json& cats = field<ParseError>(j, "categoryIds", ctx);
    if (!cats.is_array()) throw ParseError(ctx + ": categoryIds must be an array");
    for (const auto& c : cats) {
        if (!c.is_number_integer()) throw ParseError(ctx + ": categoryIds must be integers");
        out.categoryIds.push_back(c.get<int>());
    }
    if (auto it = j.find("scoresAreLogits"); it != j.end()) {
        if (!it->is_boolean()) throw ParseError(ctx + ": scoresAreLogits must be a boolean");
        out.scoresAreLogits = it->get<bool>();
    } else {
        out.scoresAreLogits = true;  // logits + sigmoid is the default
    }
    if (auto it = j.find("backgroundColumn"); it != j.end() && *it != "last") {
        throw ParseError(ctx + ": backgroundColumn must be \"last\"");
    }
    const json& scores = field<ParseError>(j, "scores", ctx);
    if (!scores.is_array() || scores.empty()) throw ParseError(ctx + ": scores must be a non-empty matrix");
    const std::size_t cols = out.categoryIds.size() + 1;
    std::vector<double> flat;
    flat.reserve(scores.size() * cols);
    for (std::size_t q = 0; q < scores.size(); ++q) {
        const json& row = scores[q];
        if (!row.is_array() || row.size() != cols) {
            throw ParseError(ctx + ": scores row " + std::to_string(q) + " must have " + std::to_string(cols) +
                             " entries (categories + background)");
        }
        for (const auto& v : row) flat.push_back(number<ParseError>(v, ctx + ": score"));
    }
    out.scores = ScoreMatrix(scores.size(), cols, std::move(flat));
    const json& boxes = field<ParseError>(j, "boxes", ctx);
    if (!boxes.is_array()) throw ParseError(ctx + ": boxes must be an array");
    for (const auto& b : boxes) out.boxes.push_back(four_numbers<ParseError>(b, ctx + ": box"));
    try {
        validate_detection_output(out);
    } catch (const ValidationError& e) {
        throw ParseError(e.what());
    }
    return out;
}

std::string serialize_detection_output(const DetectionOutput& out) {
    return detection_output_to_json(out).dump() + "\n";
}

DetectionOutput parse_detection_output(std::string_view bytes) {
    return detection_output_from_json(parse_json(bytes, "detector output"));
}

ojson pseudo_gt_to_json(const PseudoGT& pg) {
    const auto& a = pg.annotation;
    ojson j;
    j["imageId"] = a.sourceImageId;
    j["queryIndex"] = pg.queryIndex;
    j["categoryId"] = a.categoryId;
    j["categoryName"] = a.categoryName;
    j["box"] = {a.box.x1(), a.box.y1(), a.box.x2(), a.box.y2()};
    j["confidence"] = pg.confidence;
    j["verification"] = std::string(to_string(pg.verification));
    return j;
}

PseudoGT pseudo_gt_from_json(const json& j) {
    const std::string where = "pseudo GT";
    PseudoGT pg;
    pg.annotation.sourceImageId = id_string(field<ParseError>(j, "imageId", where), "imageId");
    const auto& q = field<ParseError>(j, "queryIndex", where);
    const auto& c = field<ParseError>(j, "categoryId", where);
    if (!q.is_number_integer() || !c.is_number_integer()) throw ParseError(where + ": ids must be integers");
    pg.queryIndex = q.get<int>();
    pg.annotation.categoryId = c.get<int>();
    if (auto it = j.find("categoryName"); it != j.end() && it->is_string()) pg.annotation.categoryName = *it;
    const auto b = four_numbers<ParseError>(field<ParseError>(j, "box", where), where + " box");
    pg.annotation.box = BBox::abs_corner(b[0], b[1], b[2], b[3]);
    pg.confidence = number<ParseError>(field<ParseError>(j, "confidence", where), where + " confidence");
    if (auto it = j.find("verification"); it != j.end()) {
        if (!it->is_string()) throw ParseError(where + ": verification must be a string");
        pg.verification = verification_from_string(it->get<std::string>());
    }
    return pg;
}

std::string serialize_pseudo_file(const PseudoFile& file) {
    ojson j;
    j["taskIndex"] = file.taskIndex;
    j["tau"] = file.tau;
    j["items"] = ojson::array();
    for (const auto& pg : file.items) j["items"].push_back(pseudo_gt_to_json(pg));
    return j.dump(1) + "\n";
}

PseudoFile parse_pseudo_file(std::string_view bytes) {
    const json j = parse_json(bytes, "pseudo-GT file");
    PseudoFile f;
    const auto& t = field<ParseError>(j, "taskIndex", "pseudo-GT file");
    if (!t.is_number_integer()) throw ParseError("pseudo-GT file: taskIndex must be an integer");
    f.taskIndex = t.get<int>();
    f.tau = number<ParseError>(field<ParseError>(j, "tau", "pseudo-GT file"), "tau");
    const auto& items = field<ParseError>(j, "items", "pseudo-GT file");
    if (!items.is_array()) throw ParseError("pseudo-GT file: items must be an array");
    for (const auto& it : items) f.items.push_back(pseudo_gt_from_json(it));
    return f;
}

ojson verify_request_to_json(const VerificationRequest& req) {
    const auto& p = req.prompt;
    ojson j;
    j["imageRef"] = p.imageRef;
    if (!p.imagePath.empty()) j["imagePath"] = p.imagePath;
    j["box"] = {p.boxAbs.x1(), p.boxAbs.y1(), p.boxAbs.x2(), p.boxAbs.y2()};
    ojson cells = ojson::array();
    for (auto c : p.maskGrid.cells) cells.push_back(static_cast<int>(c));
    j["grid"] = {{"w", p.maskGrid.width}, {"h", p.maskGrid.height}, {"cells", std::move(cells)}};
    j["prompt"] = p.promptText;
    if (!req.idempotencyKey.empty()) j["idempotencyKey"] = req.idempotencyKey;
    return j;
}

VerificationRequest verify_request_from_json(const json& j) {
    const std::string where = "verify request";
    if (!j.is_object()) throw ProtocolError(where + ": body must be a JSON object");
    VerificationRequest req;
    auto& p = req.prompt;
    const bool has_ref = j.contains("imageRef");
    const bool has_image = j.contains("image");
    if (!has_ref && !has_image) throw ProtocolError(where + ": one of 'imageRef' or 'image' is required");
    if (has_ref) {
        if (!j["imageRef"].is_string() || j["imageRef"].get<std::string>().empty()) {
            throw ProtocolError(where + ": 'imageRef' must be a non-empty string");
        }
        p.imageRef = j["imageRef"].get<std::string>();
    }
    if (has_image && !j["image"].is_string()) throw ProtocolError(where + ": 'image' must be a base64 string");
    if (auto it = j.find("imagePath"); it != j.end()) {
        if (!it->is_string()) throw ProtocolError(where + ": 'imagePath' must be a string");
        p.imagePath = *it;
    }
    const auto b = four_numbers<ProtocolError>(field<ProtocolError>(j, "box", where), where + ": 'box'");
    if (!(b[0] < b[2]) || !(b[1] < b[3]) || b[0] < 0 || b[1] < 0) {
        throw ProtocolError(where + ": 'box' must satisfy 0 <= x1 < x2 and 0 <= y1 < y2");
    }
    p.boxAbs = BBox::abs_corner(b[0], b[1], b[2], b[3]);

    const json& grid = field<ProtocolError>(j, "grid", where);
    const json& gw = field<ProtocolError>(grid, "w", where + ": 'grid'");
    const json& gh = field<ProtocolError>(grid, "h", where + ": 'grid'");
    const json& cells = field<ProtocolError>(grid, "cells", where + ": 'grid'");
    if (!gw.is_number_integer() || !gh.is_number_integer() || gw.get<int>() < 1 || gh.get<int>() < 1) {
        throw ProtocolError(where + ": 'grid.w' and 'grid.h' must be positive integers");
    }
    p.maskGrid.width = gw.get<int>();
    p.maskGrid.height = gh.get<int>();
    if (!cells.is_array() || cells.size() != static_cast<std::size_t>(p.maskGrid.width * p.maskGrid.height)) {
        throw ProtocolError(where + ": 'grid.cells' must hold w*h entries");
    }
    for (const auto& c : cells) {
        if (!c.is_number_integer() || (c.get<int>() != 0 && c.get<int>() != 1)) {
            throw ProtocolError(where + ": 'grid.cells' entries must be 0 or 1");
        }
        p.maskGrid.cells.push_back(static_cast<std::uint8_t>(c.get<int>()));
    }
    const json& prompt = field<ProtocolError>(j, "prompt", where);
    if (!prompt.is_string() || prompt.get<std::string>().empty()) {
        throw ProtocolError(where + ": 'prompt' must be a non-empty string");
    }
    p.promptText = prompt.get<std::string>();
    p.categoryName = category_from_prompt(p.promptText);
    if (auto it = j.find("idempotencyKey"); it != j.end()) {
        if (!it->is_string()) throw ProtocolError(where + ": 'idempotencyKey' must be a string");
        req.idempotencyKey = *it;
    }
    return req;
}

ojson verify_response_to_json(std::string_view text) {
    ojson j;
    j["text"] = std::string(text);
    return j;
}

std::string verify_response_text(const json& j) {
    const json& t = field<ProtocolError>(j, "text", "verify response");
    if (!t.is_string()) throw ProtocolError("verify response: 'text' must be a string");
    return t.get<std::string>();
}

ojson detect_request_to_json(const DetectRequest& req) {
    ojson j;
    j["imageRef"] = req.imageRef;
    if (!req.imagePath.empty()) j["imagePath"] = req.imagePath;
    j["width"] = req.width;
    j["height"] = req.height;
    return j;
}

DetectRequest detect_request_from_json(const json& j) {
    const std::string where = "detect request";
    DetectRequest req;
    const json& ref = field<ProtocolError>(j, "imageRef", where);
    if (!ref.is_string() || ref.get<std::string>().empty()) {
        throw ProtocolError(where + ": 'imageRef' must be a non-empty string");
    }
    req.imageRef = ref.get<std::string>();
    if (auto it = j.find("imagePath"); it != j.end()) {
        if (!it->is_string()) throw ProtocolError(where + ": 'imagePath' must be a string");
        req.imagePath = *it;
    }
    const json& w = field<ProtocolError>(j, "width", where);
    const json& h = field<ProtocolError>(j, "height", where);
    if (!w.is_number_integer() || !h.is_number_integer() || w.get<int>() <= 0 || h.get<int>() <= 0) {
        throw ProtocolError(where + ": 'width' and 'height' must be positive integers");
    }
    req.width = w.get<int>();
    req.height = h.get<int>();
    return req;
}

}  // namespace vpl
