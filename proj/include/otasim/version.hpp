#pragma once

namespace otasim {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace otasim
