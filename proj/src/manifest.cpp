#include "vpl/manifest.hpp"

#include "vpl/error.hpp"
#include "vpl/ingest.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <memory>

namespace vpl {

std::string sha256_hex(std::string_view data) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
        throw Error("sha256 computation failed");
    }
    std::string hex;
    hex.reserve(len * 2);
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

std::string file_digest(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

std::string Manifest::to_json() const {
    ojson j;
    j["command"] = command;
    j["toolVersion"] = toolVersion;
    j["configHash"] = config_hash();
    j["config"] = config;
    j["seeds"] = seeds;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["extra"] = extra;
    return j.dump(1) + "\n";
}

Manifest Manifest::from_json(std::string_view bytes) {
    ojson j;
    try {
        j = ojson::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed manifest: ") + e.what());
    }
    Manifest m;
    try {
        m.command = j.at("command").get<std::string>();
        m.toolVersion = j.at("toolVersion").get<std::string>();
        m.config = j.at("config");
        m.seeds = j.at("seeds").get<std::map<std::string, std::uint64_t>>();
        m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
        m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
        if (j.contains("extra")) m.extra = j["extra"];
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed manifest: ") + e.what());
    }
    return m;
}

}  // namespace vpl
