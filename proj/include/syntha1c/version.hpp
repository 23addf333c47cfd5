#pragma once

namespace syntha1c {

inline constexpr const char* kToolkitVersion = "0.1.0";

}  // namespace syntha1c
