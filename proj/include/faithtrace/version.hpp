#pragma once

namespace faithtrace {

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr int kManifestVersion = 1;

}  // namespace faithtrace
