#pragma once

namespace whorl {

inline constexpr const char* kToolName = "whorl";
inline constexpr const char* kVersion = "1.0.0";

}  // namespace whorl
