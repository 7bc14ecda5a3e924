#include "vpl/http_backend.hpp"

#include "vpl/error.hpp"

#include <httplib.h>

namespace vpl {

namespace {

httplib::Client make_client(const ServiceUrl& url, int timeoutMs) {
    httplib::Client cli(url.origin);
    const auto sec = timeoutMs / 1000;
    const auto usec = (timeoutMs % 1000) * 1000;
    cli.set_connection_timeout(sec, usec);
    cli.set_read_timeout(sec, usec);
    cli.set_write_timeout(sec, usec);
    return cli;
}

nlohmann::json post_json(const ServiceUrl& url, int timeoutMs, const std::string& path, const std::string& body) {
    auto cli = make_client(url, timeoutMs);
    auto res = cli.Post(url.endpoint(path), body, "application/json");
    if (!res) {
        throw BackendError("POST " + url.origin + url.endpoint(path) + " failed: " + httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
        throw BackendError("POST " + url.origin + url.endpoint(path) + " returned HTTP " +
                           std::to_string(res->status) + ": " + res->body);
    }
    try {
        return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError("response from " + url.endpoint(path) + " is not JSON: " + e.what());
    }
}

}  // namespace

ServiceUrl ServiceUrl::parse(const std::string& url) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos) throw ValidationError("service URL needs a scheme: '" + url + "'");
    if (url.compare(0, scheme, "http") != 0) {
        throw ValidationError("only http:// service URLs are supported: '" + url + "'");
    }
    ServiceUrl out;
    const auto path = url.find('/', scheme + 3);
    out.origin = url.substr(0, path);
    if (path != std::string::npos) out.prefix = url.substr(path);
    while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
    if (out.origin.size() <= scheme + 3) throw ValidationError("service URL lacks a host: '" + url + "'");
    return out;
}

HttpVerificationBackend::HttpVerificationBackend(const std::string& url, int timeoutMs)
    : url_(ServiceUrl::parse(url)), timeoutMs_(timeoutMs) {}

std::string HttpVerificationBackend::id() const { return "http(" + url_.origin + url_.prefix + ")"; }

std::string HttpVerificationBackend::ask(const VerificationRequest& request) const {
    const auto reply = post_json(url_, timeoutMs_, "/verify", verify_request_to_json(request).dump());
    return verify_response_text(reply);
}

HttpDetectorClient::HttpDetectorClient(const std::string& url, int timeoutMs)
    : url_(ServiceUrl::parse(url)), timeoutMs_(timeoutMs) {}

DetectionOutput HttpDetectorClient::detect(const DetectRequest& request) const {
    const auto reply = post_json(url_, timeoutMs_, "/detect", detect_request_to_json(request).dump());
    try {
        return detection_output_from_json(reply);
    } catch (const ParseError& e) {
        throw ProtocolError(std::string("/detect response: ") + e.what());
    }
}

bool service_healthy(const std::string& url, int timeoutMs) {
    const auto parsed = ServiceUrl::parse(url);
    auto cli = make_client(parsed, timeoutMs);
    auto res = cli.Get(parsed.endpoint("/healthz"));
    return res && res->status >= 200 && res->status < 300;
}

}  // namespace vpl
