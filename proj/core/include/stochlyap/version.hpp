#pragma once

namespace stochlyap {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace stochlyap
