#pragma once

namespace ionpair {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ionpair
