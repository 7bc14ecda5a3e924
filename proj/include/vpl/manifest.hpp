#pragma once

#include "vpl/codec.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace vpl {

inline constexpr std::string_view kToolVersion = "0.3.0";

std::string sha256_hex(std::string_view data);
std::string file_digest(const std::filesystem::path& path);

/// Run record written next to every stage's artifacts. Contains no
/// timestamps, so identical runs produce identical manifests.
struct Manifest {
    std::string command;
    std::string toolVersion{kToolVersion};
    ojson config = ojson::object();  // effective configuration
    std::map<std::string, std::uint64_t> seeds;
    std::map<std::string, std::string> inputs;   // path -> sha256
    std::map<std::string, std::string> outputs;  // path -> sha256
    ojson extra = ojson::object();

    std::string config_hash() const { return sha256_hex(config.dump()); }
    std::string to_json() const;
    static Manifest from_json(std::string_view bytes);
};

}  // namespace vpl
