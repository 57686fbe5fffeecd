#pragma once

namespace gwtrace {

inline constexpr const char* kToolName = "gwtrace";
inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace gwtrace
