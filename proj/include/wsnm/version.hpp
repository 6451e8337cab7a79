#pragma once

namespace wsnm {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace wsnm
