#pragma once

namespace atomlaser {

// CODATA 2018 reduced Planck constant, J s.
inline constexpr double hbar = 1.054571817e-34;

inline constexpr double pi = 3.141592653589793238462643383279502884;

} // namespace atomlaser
