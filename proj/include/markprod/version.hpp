#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace markprod {

inline constexpr std::string_view kToolName = "markprod";
inline constexpr std::string_view kToolVersion = "0.1.0";

inline std::string version_line() {
    return std::string(kToolName) + " " + std::string(kToolVersion);
}

/// FNV-1a, used to stamp outputs with the configuration they came from.
inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace markprod
