#pragma once

// JSON encodings shared by the on-disk artifacts and the service protocol.

#include "vpl/pseudo.hpp"
#include "vpl/verify.hpp"

#include <json.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace vpl {

using ojson = nlohmann::ordered_json;

// Detector output: {imageId, categoryIds[C], scoresAreLogits, scores[Q][C+1],
// boxes[Q][4]}; optional "backgroundColumn" must be "last".
ojson detection_output_to_json(const DetectionOutput& out);
DetectionOutput detection_output_from_json(const nlohmann::json& j);
std::string serialize_detection_output(const DetectionOutput& out);
DetectionOutput parse_detection_output(std::string_view bytes);

ojson pseudo_gt_to_json(const PseudoGT& pg);
PseudoGT pseudo_gt_from_json(const nlohmann::json& j);

/// Pseudo-GT artifact for one task.
struct PseudoFile {
    int taskIndex = 0;
    double tau = kDefaultTau;
    std::vector<PseudoGT> items;
};

std::string serialize_pseudo_file(const PseudoFile& file);
PseudoFile parse_pseudo_file(std::string_view bytes);

// Verification protocol (POST /verify). Request:
//   {imageRef | image(base64), imagePath?, box[4], grid{w,h,cells[w*h]},
//    prompt, idempotencyKey?}
// Response: {text}.
ojson verify_request_to_json(const VerificationRequest& req);
/// Validates and decodes; throws ProtocolError naming the offending field.
VerificationRequest verify_request_from_json(const nlohmann::json& j);
ojson verify_response_to_json(std::string_view text);
std::string verify_response_text(const nlohmann::json& j);

// Detection protocol (POST /detect). Request {imageRef, imagePath?, width,
// height}; response is a detector-output document.
struct DetectRequest {
    ImageId imageRef;
    std::string imagePath;
    int width = 0;
    int height = 0;
};

ojson detect_request_to_json(const DetectRequest& req);
DetectRequest detect_request_from_json(const nlohmann::json& j);

}  // namespace vpl
