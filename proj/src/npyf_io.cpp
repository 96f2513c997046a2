#include "t2/data/npyf_io.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <vector>

static_assert(std::endian::native == std::endian::little,
              "t2il io assumes a little-endian host");

namespace t2 {

void write_t2il(const std::string& path, const Tensor<float>& planes) {
  require(planes.is_grid() && planes.n == 1 && planes.c == 3,
          "write_t2il: need a single 3-plane array, got " + planes.shape_str());
  require(planes.h < 65536 && planes.w < 65536,
          "write_t2il: dims exceed u16: " + planes.shape_str());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path);

  const uint16_t h = static_cast<uint16_t>(planes.h);
  const uint16_t w = static_cast<uint16_t>(planes.w);
  f.write("T2IL", 4);
  f.write(reinterpret_cast<const char*>(&h), 2);
  f.write(reinterpret_cast<const char*>(&w), 2);
  std::vector<float> row(planes.w);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < planes.h; ++y) {
      for (int x = 0; x < planes.w; ++x) row[x] = planes.at(0, c, y, x);
      f.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
  if (!f) throw IoError("short write: " + path);
}

Tensor<float> read_t2il(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for reading: " + path);
  char magic[4];
  uint16_t h = 0, w = 0;
  f.read(magic, 4);
  f.read(reinterpret_cast<char*>(&h), 2);
  f.read(reinterpret_cast<char*>(&w), 2);
  if (!f || std::string(magic, 4) != "T2IL")
    throw IoError("not a t2il file: " + path);
  if (h == 0 || w == 0) throw IoError("empty t2il array: " + path);

  auto out = Tensor<float>::grid(1, 3, h, w);
  std::vector<float> row(w);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y) {
      f.read(reinterpret_cast<char*>(row.data()),
             static_cast<std::streamsize>(row.size() * sizeof(float)));
      if (!f) throw IoError("truncated t2il file: " + path);
      for (int x = 0; x < w; ++x) out.at(0, c, y, x) = row[x];
    }
  return out;
}

}  // namespace t2
