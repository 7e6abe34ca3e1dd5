#pragma once

namespace sciret {

inline constexpr const char kVersion[] = "0.1.0";

}  // namespace sciret
