#pragma once

namespace effdiff {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace effdiff
