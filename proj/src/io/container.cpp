#include "tsrisk/container.hpp"

#include "tsrisk/errors.hpp"

#include <bit>
#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <sstream>

namespace tsrisk::io {

namespace {

constexpr char kMagic[8] = {'T', 'S', 'R', 'I', 'S', 'K', '\0', '\0'};

template <typename T>
char* put_le(char* out, T value)
{
    auto bits = std::bit_cast<std::array<char, sizeof(T)>>(value);
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bits.begin(), bits.end());
    }
    std::memcpy(out, bits.data(), sizeof(T));
    return out + sizeof(T);
}

template <typename T>
T get_le(const char* p)
{
    std::array<char, sizeof(T)> bits;
    std::memcpy(bits.data(), p, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bits.begin(), bits.end());
    }
    return std::bit_cast<T>(bits);
}

} // namespace

const Tensor& Container::tensor(const std::string& name) const
{
    for (const auto& [n, t] : tensors) {
        if (n == name) {
            return t;
        }
    }
    throw FormatError(kind + " container: missing tensor '" + name + "'");
}

std::vector<char> encode_container(const Container& container)
{
    nlohmann::json header;
    header["format_version"] = container.format_version;
    header["kind"] = container.kind;
    header["metadata"] = container.metadata;
    header["tensors"] = nlohmann::json::array();
    std::size_t payload = 0;
    for (const auto& [name, t] : container.tensors) {
        header["tensors"].push_back({{"name", name}, {"shape", t.shape()}});
        payload += t.size();
    }
    const std::string text = header.dump();

    std::vector<char> out(16 + text.size() + payload * 8);
    char* p = out.data();
    std::memcpy(p, kMagic, sizeof kMagic);
    p = put_le<std::uint64_t>(p + sizeof kMagic, text.size());
    std::memcpy(p, text.data(), text.size());
    p += text.size();
    for (const auto& entry : container.tensors) {
        for (double v : entry.second.values()) {
            p = put_le<double>(p, v);
        }
    }
    return out;
}

Container decode_container(const std::vector<char>& bytes, const std::string& expected_kind)
{
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
        throw FormatError("not a tsrisk container (bad magic)");
    }
    const auto header_len = get_le<std::uint64_t>(bytes.data() + 8);
    if (header_len > bytes.size() - 16) {
        throw FormatError("corrupt container: header length exceeds file size");
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("corrupt container header: ") + e.what());
    }
    if (!header.is_object() || !header.contains("format_version")) {
        throw FormatError("container header has no format_version field");
    }

    Container c;
    try {
        c.format_version = header.at("format_version").get<std::uint32_t>();
        c.kind = header.at("kind").get<std::string>();
        c.metadata = header.value("metadata", nlohmann::json::object());
        if (c.kind != expected_kind) {
            throw FormatError("container kind '" + c.kind + "', expected '" + expected_kind + "'");
        }
        std::size_t offset = 16 + header_len;
        for (const auto& entry : header.at("tensors")) {
            Shape shape = entry.at("shape").get<Shape>();
            const std::size_t n = shape_size(shape);
            if (n > (bytes.size() - offset) / 8) {
                throw FormatError("corrupt container: payload truncated at '" + entry.at("name").get<std::string>() + "'");
            }
            std::vector<double> values(n);
            for (std::size_t i = 0; i < n; ++i) {
                values[i] = get_le<double>(bytes.data() + offset + i * 8);
            }
            offset += n * 8;
            c.tensors.emplace_back(entry.at("name").get<std::string>(), Tensor(std::move(shape), std::move(values)));
        }
        if (offset != bytes.size()) {
            throw FormatError("corrupt container: " + std::to_string(bytes.size() - offset) + " trailing bytes");
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("corrupt container header: ") + e.what());
    }
    return c;
}

void write_container(const std::filesystem::path& path, const Container& container)
{
    const std::vector<char> bytes = encode_container(container);
    write_file_atomic(path, std::string(bytes.begin(), bytes.end()));
}

Container read_container(const std::filesystem::path& path, const std::string& expected_kind)
{
    const std::string text = read_file(path);
    return decode_container(std::vector<char>(text.begin(), text.end()), expected_kind);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw DataError("cannot write " + tmp.string());
        }
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw DataError("write failed: " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace tsrisk::io
