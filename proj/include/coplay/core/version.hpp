#pragma once

namespace coplay {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace coplay
