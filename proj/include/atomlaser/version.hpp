#pragma once

namespace atomlaser {

inline constexpr const char* version = "0.1.0";

} // namespace atomlaser
