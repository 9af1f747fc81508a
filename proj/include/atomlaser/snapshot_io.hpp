// Binary field-snapshot files: a 64-byte header (magic "ATOMLNW1", point
// count, dx, x0, time stamp, field count) followed by little-endian IEEE
// double pairs for psi_t then psi_u.
#pragma once

#include <string>

#include "atomlaser/gpe.hpp"

namespace atomlaser {

void write_snapshot(const std::string& path, const FieldState& state);
FieldState read_snapshot(const std::string& path);

} // namespace atomlaser
