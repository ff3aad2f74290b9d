#pragma once

// Binary container shared by checkpoints and normalized datasets.
//
//   offset 0   8 bytes   magic "TSRISK\0\0"
//   offset 8   u64 LE    header length H
//   offset 16  H bytes   UTF-8 JSON header
//   then                 float64 LE payload, tensors back to back
//
// The JSON header carries "format_version", "kind", "tensors" (name and
// shape of each payload tensor, in payload order) and a free-form
// "metadata" object.

#include "tsrisk/tensor.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace tsrisk::io {

struct Container {
    std::string kind;
    std::uint32_t format_version = 0;
    nlohmann::json metadata = nlohmann::json::object();
    std::vector<std::pair<std::string, Tensor>> tensors;

    const Tensor& tensor(const std::string& name) const;
};

void write_container(const std::filesystem::path& path, const Container& container);
Container read_container(const std::filesystem::path& path, const std::string& expected_kind);

std::vector<char> encode_container(const Container& container);
Container decode_container(const std::vector<char>& bytes, const std::string& expected_kind);

/// Writes `bytes` to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

} // namespace tsrisk::io
