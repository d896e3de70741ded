#include "fpde/io.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace fpde::io {

namespace {

constexpr char kMagic[8] = {'F', 'P', 'D', 'E', 'G', 'F', '0', '1'};

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

template <class T>
void put(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::ifstream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw std::runtime_error("grid function file truncated");
  return v;
}

}  // namespace

void save_grid_function(const std::string& path, const grids::GridFunction& u) {
  u.validate();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(u.sg.dim));
  put<std::uint64_t>(os, static_cast<std::uint64_t>(u.tg.steps));
  put<std::uint64_t>(os, static_cast<std::uint64_t>(u.sg.cells));
  put<double>(os, u.tg.t0);
  put<double>(os, u.tg.h);
  put<double>(os, u.sg.length);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(u.components));
  put<std::uint32_t>(os, 0u);  // reserved
  os.write(reinterpret_cast<const char*>(u.v.data()),
           static_cast<std::streamsize>(u.v.size() * sizeof(double)));
  if (!os) throw std::runtime_error("write failed: " + path);
}

grids::GridFunction load_grid_function(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for reading: " + path);
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw std::runtime_error("not a grid function file: " + path);
  grids::GridFunction u;
  u.sg.dim = static_cast<int>(get<std::uint32_t>(is));
  u.tg.steps = static_cast<std::size_t>(get<std::uint64_t>(is));
  u.sg.cells = static_cast<std::size_t>(get<std::uint64_t>(is));
  u.tg.t0 = get<double>(is);
  u.tg.h = get<double>(is);
  u.sg.length = get<double>(is);
  u.components = static_cast<std::size_t>(get<std::uint32_t>(is));
  (void)get<std::uint32_t>(is);
  u.v.resize(u.tg.nodes() * u.sg.points() * u.components);
  is.read(reinterpret_cast<char*>(u.v.data()),
          static_cast<std::streamsize>(u.v.size() * sizeof(double)));
  if (!is) throw std::runtime_error("grid function file truncated: " + path);
  u.validate();
  return u;
}

void save_csv(const std::string& path, const grids::GridFunction& u) {
  u.validate();
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << "t";
  for (int a = 0; a < u.sg.dim; ++a) os << ",x" << a;
  for (std::size_t c = 0; c < u.components; ++c) os << ",v" << c;
  os << "\n";
  char buf[64];
  for (std::size_t it = 0; it < u.tg.nodes(); ++it) {
    for (std::size_t ix = 0; ix < u.sg.points(); ++ix) {
      std::snprintf(buf, sizeof buf, "%.17g", u.tg.t(it));
      os << buf;
      const auto pos = u.sg.node_pos(ix);
      for (int a = 0; a < u.sg.dim; ++a) {
        std::snprintf(buf, sizeof buf, "%.17g", pos[a]);
        os << ',' << buf;
      }
      for (std::size_t c = 0; c < u.components; ++c) {
        std::snprintf(buf, sizeof buf, "%.17g", u.at(it, ix, c));
        os << ',' << buf;
      }
      os << "\n";
    }
  }
}

}  // namespace fpde::io
