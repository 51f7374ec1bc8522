#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace stochlyap {

/// 64-bit FNV-1a. Used for content digests of scenarios and artifacts, not
/// for security.
std::uint64_t fnv1a64(std::string_view bytes);

/// fnv1a64 as 16 lowercase hex digits.
std::string hex_digest(std::string_view bytes);

}  // namespace stochlyap
