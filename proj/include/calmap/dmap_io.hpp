#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "calmap/errors.hpp"
#include "calmap/types.hpp"

namespace calmap {

// DMAP v1: ASCII header "DMAPv1 <H> <W>\n" followed by H*W little-endian
// float32 cells, row-major. Round trips are bit-exact.

namespace detail {

inline std::uint32_t swap_u32(std::uint32_t v) {
  return ((v & 0x000000ffu) << 24) | ((v & 0x0000ff00u) << 8) | ((v & 0x00ff0000u) >> 8) |
         ((v & 0xff000000u) >> 24);
}

}  // namespace detail

inline void write_dmap(const std::filesystem::path& path, const DensityMap& map) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("write_dmap: cannot open " + path.string());
  out << "DMAPv1 " << map.height() << ' ' << map.width() << '\n';
  static_assert(sizeof(float) == 4);
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(map.cells().data()),
              static_cast<std::streamsize>(map.cells().size() * sizeof(float)));
  } else {
    for (float v : map.cells()) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      bits = detail::swap_u32(bits);
      out.write(reinterpret_cast<const char*>(&bits), 4);
    }
  }
  if (!out) throw std::runtime_error("write_dmap: write failed for " + path.string());
}

inline DensityMap read_dmap(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("read_dmap: cannot open " + path.string());

  std::string header;
  char ch;
  while (in.get(ch) && ch != '\n') {
    header.push_back(ch);
    if (header.size() > 64) throw ParseError("read_dmap: oversized header in " + path.string());
  }
  std::istringstream hs(header);
  std::string magic;
  long long height = 0, width = 0;
  if (!(hs >> magic >> height >> width) || magic != "DMAPv1") {
    throw ParseError("read_dmap: bad header '" + header + "' in " + path.string());
  }
  std::string trailing;
  if (hs >> trailing) throw ParseError("read_dmap: trailing header tokens in " + path.string());
  if (height < 1 || width < 1 || height > (1 << 20) || width > (1 << 20)) {
    throw ParseError("read_dmap: implausible dimensions in " + path.string());
  }

  Grid<float> cells(static_cast<int>(height), static_cast<int>(width), 0.0f);
  const std::streamsize payload = static_cast<std::streamsize>(cells.size() * sizeof(float));
  in.read(reinterpret_cast<char*>(cells.cells().data()), payload);
  if (in.gcount() != payload) throw ParseError("read_dmap: truncated payload in " + path.string());
  if (in.peek() != std::ifstream::traits_type::eof()) {
    throw ParseError("read_dmap: trailing bytes in " + path.string());
  }
  if constexpr (std::endian::native != std::endian::little) {
    for (float& v : cells.cells()) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      bits = detail::swap_u32(bits);
      std::memcpy(&v, &bits, 4);
    }
  }
  try {
    return DensityMap::from_grid(std::move(cells));
  } catch (const ValidationError& e) {
    throw ValidationError(std::string(e.what()) + " (" + path.string() + ")");
  }
}

}  // namespace calmap
