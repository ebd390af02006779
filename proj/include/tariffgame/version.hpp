#pragma once

namespace tariffgame {

inline constexpr const char* kToolName = "tariffgame";
inline constexpr const char* kVersion = "0.1.0";

}  // namespace tariffgame
