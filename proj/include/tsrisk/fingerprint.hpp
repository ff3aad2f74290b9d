#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace tsrisk::io {

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state = 0xcbf29ce484222325ULL);
/// 16 lowercase hex digits.
std::string to_hex(std::uint64_t value);
std::string fingerprint(std::string_view bytes);
/// Fingerprint of the compact dump; object keys are sorted, so equal
/// documents give equal fingerprints.
std::string fingerprint_json(const nlohmann::json& document);
std::string fingerprint_file(const std::filesystem::path& path);

} // namespace tsrisk::io
