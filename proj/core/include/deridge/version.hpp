#pragma once

namespace deridge {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace deridge
