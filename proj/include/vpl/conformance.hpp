#pragma once

#include "vpl/codec.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace vpl {

/// One request/expectation pair of the protocol conformance suite.
struct ConformanceCase {
    std::string name;
    std::string endpoint;  // "/verify" or "/detect"
    nlohmann::json request;
    bool expectAccepted = true;          // 2xx expected; otherwise a 4xx with {"error": ...}
    std::optional<std::string> answer;   // "yes"/"no" expected from a stub verifier
    std::optional<std::size_t> queries;  // expected /detect row count from a stub detector
};

struct ConformanceOutcome {
    std::string name;
    bool passed = false;
    std::string message;
};

/// Reads protocol/fixtures/cases.json.
std::vector<ConformanceCase> load_conformance_cases(const std::filesystem::path& fixtureDir);

/// Checks a request fixture against the C++ protocol validators: returns an
/// empty string when the validator's accept/reject decision matches the
/// case, otherwise a description of the mismatch.
std::string check_request_fixture(const ConformanceCase& c);

/// Checks a response body for `endpoint` against the protocol. Throws
/// ProtocolError describing the first violation.
void validate_response(const std::string& endpoint, const nlohmann::json& requestBody,
                       const nlohmann::json& response);

/// Sends every case to a running service and checks status codes, response
/// shapes and stub expectations. Throws BackendError when the service cannot
/// be reached at all.
std::vector<ConformanceOutcome> run_conformance(const std::string& url, const std::vector<ConformanceCase>& cases,
                                                int timeoutMs = 5000);

}  // namespace vpl
