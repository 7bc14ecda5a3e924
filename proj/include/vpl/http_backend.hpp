#pragma once

#include "vpl/codec.hpp"
#include "vpl/verify.hpp"

#include <string>

namespace vpl {

/// Splits "http://host:port/prefix" into host part and path prefix.
struct ServiceUrl {
    std::string origin;  // scheme://host[:port]
    std::string prefix;  // "" or "/something", no trailing slash

    static ServiceUrl parse(const std::string& url);
    std::string endpoint(const std::string& path) const { return prefix + path; }
};

/// Verification backend speaking the JSON protocol over HTTP (POST /verify).
/// Transport failures and non-2xx answers surface as BackendError so that
/// verify_batch retries them.
class HttpVerificationBackend final : public VerificationBackend {
public:
    explicit HttpVerificationBackend(const std::string& url, int timeoutMs = 30000);
    std::string id() const override;
    std::string ask(const VerificationRequest& request) const override;

private:
    ServiceUrl url_;
    int timeoutMs_;
};

/// Client for POST /detect.
class HttpDetectorClient {
public:
    explicit HttpDetectorClient(const std::string& url, int timeoutMs = 30000);
    DetectionOutput detect(const DetectRequest& request) const;

private:
    ServiceUrl url_;
    int timeoutMs_;
};

/// GET /healthz; true on a 2xx answer.
bool service_healthy(const std::string& url, int timeoutMs = 2000);

}  // namespace vpl
