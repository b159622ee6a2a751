#pragma once

namespace asme {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace asme
