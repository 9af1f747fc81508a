#include "atomlaser/snapshot_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace atomlaser {

namespace {

constexpr char kMagic[8] = {'A', 'T', 'O', 'M', 'L', 'N', 'W', '1'};

struct Header {
    char magic[8];
    std::uint64_t count;
    double dx;
    double x0;
    double time;
    std::uint64_t field_count;
    std::uint64_t reserved[2];
};
static_assert(sizeof(Header) == 64, "snapshot header must be 64 bytes");

} // namespace

void write_snapshot(const std::string& path, const FieldState& state) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open snapshot file for writing: " + path);
    Header h{};
    std::memcpy(h.magic, kMagic, sizeof(kMagic));
    h.count = state.grid.n;
    h.dx = state.grid.dx();
    h.x0 = state.grid.x0;
    h.time = state.time;
    h.field_count = 2;
    out.write(reinterpret_cast<const char*>(&h), sizeof(h));
    auto write_field = [&](const std::vector<std::complex<double>>& v) {
        out.write(reinterpret_cast<const char*>(v.data()),
                  static_cast<std::streamsize>(v.size() * sizeof(std::complex<double>)));
    };
    write_field(state.psi_t);
    write_field(state.psi_u);
    if (!out) throw ConfigError("short write on snapshot file: " + path);
}

FieldState read_snapshot(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open snapshot file: " + path);
    Header h{};
    in.read(reinterpret_cast<char*>(&h), sizeof(h));
    if (!in || std::memcmp(h.magic, kMagic, sizeof(kMagic)) != 0)
        throw ConfigError("not a field snapshot file: " + path);
    if (h.field_count != 2) throw ConfigError("unsupported snapshot field count");
    FieldState f;
    f.grid.n = h.count;
    f.grid.length = h.dx * static_cast<double>(h.count);
    f.grid.x0 = h.x0;
    f.grid.validate();
    f.time = h.time;
    f.psi_t.resize(h.count);
    f.psi_u.resize(h.count);
    auto read_field = [&](std::vector<std::complex<double>>& v) {
        in.read(reinterpret_cast<char*>(v.data()),
                static_cast<std::streamsize>(v.size() * sizeof(std::complex<double>)));
    };
    read_field(f.psi_t);
    read_field(f.psi_u);
    if (!in) throw ConfigError("truncated snapshot file: " + path);
    return f;
}

} // namespace atomlaser
