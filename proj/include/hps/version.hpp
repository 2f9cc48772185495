#pragma once

namespace hps {

inline constexpr const char* kToolName = "hps";
inline constexpr const char* kVersion = "0.1.0";

}  // namespace hps
