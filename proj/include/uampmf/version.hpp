#pragma once

namespace uampmf {

inline constexpr int kVersionMajor = 1;
inline constexpr int kVersionMinor = 0;
inline constexpr int kVersionPatch = 0;
inline constexpr const char* kVersion = "1.0.0";

}  // namespace uampmf
