#include "tsrisk/fingerprint.hpp"

#include "tsrisk/container.hpp"

#include <cstdio>

namespace tsrisk::io {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state)
{
    for (unsigned char c : bytes) {
        state ^= c;
        state *= 0x100000001b3ULL;
    }
    return state;
}

std::string to_hex(std::uint64_t value)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

std::string fingerprint(std::string_view bytes)
{
    return to_hex(fnv1a64(bytes));
}

std::string fingerprint_json(const nlohmann::json& document)
{
    return fingerprint(std::string_view(document.dump()));
}

std::string fingerprint_file(const std::filesystem::path& path)
{
    return fingerprint(std::string_view(read_file(path)));
}

} // namespace tsrisk::io
