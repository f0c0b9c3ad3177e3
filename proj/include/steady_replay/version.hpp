#pragma once

namespace steady_replay {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace steady_replay
