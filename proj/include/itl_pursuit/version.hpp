#pragma once

namespace itl_pursuit {

inline constexpr const char* kToolName = "itl-pursuit";
inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

}  // namespace itl_pursuit
