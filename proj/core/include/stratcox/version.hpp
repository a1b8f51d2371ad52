#pragma once

namespace stratcox {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace stratcox
