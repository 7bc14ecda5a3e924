#include "vpl/conformance.hpp"

#include "vpl/error.hpp"
#include "vpl/http_backend.hpp"
#include "vpl/ingest.hpp"

#include <httplib.h>

namespace vpl {

namespace {

using json = nlohmann::json;

ConformanceCase case_from_json(const json& j, std::size_t index) {
    const std::string where = "conformance case " + std::to_string(index);
    ConformanceCase c;
    try {
        c.name = j.at("name").get<std::string>();
        c.endpoint = j.at("endpoint").get<std::string>();
        c.request = j.at("request");
        const json& expect = j.at("expect");
        const std::string status = expect.at("status").get<std::string>();
        if (status != "ok" && status != "client_error") throw ParseError(where + ": unknown status " + status);
        c.expectAccepted = status == "ok";
        if (expect.contains("answer")) c.answer = expect["answer"].get<std::string>();
        if (expect.contains("queries")) c.queries = expect["queries"].get<std::size_t>();
    } catch (const json::exception& e) {
        throw ParseError(where + ": " + e.what());
    }
    if (c.endpoint != "/verify" && c.endpoint != "/detect") {
        throw ParseError(where + ": endpoint must be /verify or /detect");
    }
    return c;
}

}  // namespace

std::vector<ConformanceCase> load_conformance_cases(const std::filesystem::path& fixtureDir) {
    const auto path = fixtureDir / "cases.json";
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("cases") || !doc["cases"].is_array()) {
        throw ParseError(path.string() + ": expected {\"cases\": [...]}");
    }
    std::vector<ConformanceCase> cases;
    for (std::size_t i = 0; i < doc["cases"].size(); ++i) cases.push_back(case_from_json(doc["cases"][i], i));
    return cases;
}

std::string check_request_fixture(const ConformanceCase& c) {
    std::string error;
    try {
        if (c.endpoint == "/verify") {
            verify_request_from_json(c.request);
        } else {
            detect_request_from_json(c.request);
        }
    } catch (const ProtocolError& e) {
        error = e.what();
    }
    if (c.expectAccepted && !error.empty()) return "valid fixture rejected: " + error;
    if (!c.expectAccepted && error.empty()) return "invalid fixture accepted";
    return {};
}

void validate_response(const std::string& endpoint, const json& requestBody, const json& response) {
    if (endpoint == "/verify") {
        if (!response.is_object()) throw ProtocolError("verify response must be an object");
        verify_response_text(response);
        return;
    }
    DetectionOutput out;
    try {
        out = detection_output_from_json(response);
    } catch (const ParseError& e) {
        throw ProtocolError(std::string("detect response: ") + e.what());
    }
    if (requestBody.contains("imageRef") && out.imageId != requestBody["imageRef"].get<std::string>()) {
        throw ProtocolError("detect response imageId '" + out.imageId + "' does not echo the request's imageRef");
    }
}

std::vector<ConformanceOutcome> run_conformance(const std::string& url, const std::vector<ConformanceCase>& cases,
                                                int timeoutMs) {
    const ServiceUrl service = ServiceUrl::parse(url);
    httplib::Client cli(service.origin);
    const int sec = timeoutMs / 1000;
    const int usec = (timeoutMs % 1000) * 1000;
    cli.set_connection_timeout(sec, usec);
    cli.set_read_timeout(sec, usec);

    std::vector<ConformanceOutcome> outcomes;
    for (const auto& c : cases) {
        ConformanceOutcome o{c.name, false, {}};
        auto res = cli.Post(service.endpoint(c.endpoint), c.request.dump(), "application/json");
        if (!res) {
            throw BackendError("POST " + service.origin + service.endpoint(c.endpoint) +
                               " failed: " + httplib::to_string(res.error()));
        }
        json body;
        try {
            body = json::parse(res->body);
        } catch (const json::exception&) {
            o.message = "HTTP " + std::to_string(res->status) + " with a non-JSON body";
            outcomes.push_back(o);
            continue;
        }
        if (!c.expectAccepted) {
            if (res->status < 400 || res->status >= 500) {
                o.message = "expected a 4xx status, got " + std::to_string(res->status);
            } else if (!body.is_object() || !body.contains("error") || !body["error"].is_string()) {
                o.message = "4xx response lacks a string 'error' field";
            } else {
                o.passed = true;
            }
            outcomes.push_back(o);
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            o.message = "expected 2xx, got " + std::to_string(res->status) + ": " + res->body;
            outcomes.push_back(o);
            continue;
        }
        try {
            validate_response(c.endpoint, c.request, body);
            if (c.answer) {
                const Verdict v = parse_verdict(verify_response_text(body));
                const Answer want = *c.answer == "yes" ? Answer::Yes : Answer::No;
                if (v.answer != want) {
                    throw ProtocolError("expected answer '" + *c.answer + "', got '" + v.rawText + "'");
                }
            }
            if (c.queries) {
                const auto rows = body["scores"].size();
                if (rows != *c.queries) {
                    throw ProtocolError("expected " + std::to_string(*c.queries) + " query rows, got " +
                                        std::to_string(rows));
                }
            }
            o.passed = true;
        } catch (const ProtocolError& e) {
            o.message = e.what();
        }
        outcomes.push_back(o);
    }
    return outcomes;
}

}  // namespace vpl
