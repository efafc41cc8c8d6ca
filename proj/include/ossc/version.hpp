#pragma once

namespace ossc {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ossc
