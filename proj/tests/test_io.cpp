#include <cstdint>
#include <cstring>
#include <fstream>

#include "doctest.h"
#include "support/tmpdir.hpp"
#include "t2/core/rng.hpp"
#include "t2/data/checksum.hpp"
#include "t2/data/dataset.hpp"
#include "t2/data/image_io.hpp"
#include "t2/data/npyf_io.hpp"

using namespace t2;
using t2::testing::TmpDir;

namespace {

Tensor<float> random_image(int h, int w, uint64_t seed) {
  auto t = Tensor<float>::grid(1, 3, h, w);
  Rng rng(seed);
  for (Eigen::Index i = 0; i < t.m.size(); ++i)
    t.m.data()[i] = static_cast<float>(rng.uniform());
  return t;
}

void corrupt_byte(const std::string& path, long offset, char delta) {
  std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
  REQUIRE(f.good());
  f.seekg(offset);
  char b = 0;
  f.read(&b, 1);
  f.seekp(offset);
  b = static_cast<char>(b + delta);
  f.write(&b, 1);
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  return std::string((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("png round trip is exact on quantized data") {
  TmpDir dir("t2_io_png");
  auto img = Tensor<float>::grid(1, 3, 20, 31);
  Rng rng(3);
  for (Eigen::Index i = 0; i < img.m.size(); ++i)
    img.m.data()[i] = static_cast<float>(rng.uniform_int(256)) / 255.0f;

  write_png_rgb8(dir.file("a.png"), img);
  auto back = read_png_rgb8(dir.file("a.png"));
  REQUIRE(back.same_shape(img));
  CHECK(back.m == img.m);
}

TEST_CASE("png writing quantizes to the nearest 8-bit step") {
  TmpDir dir("t2_io_png_q");
  auto img = Tensor<float>::grid(1, 3, 4, 4);
  img.m.setConstant(0.5f);            // 127.5, ties round away from zero
  img.at(0, 0, 0, 0) = 0.2501f;       // just above 63.5 -> 64
  img.at(0, 1, 0, 0) = -3.0f;         // clamps to 0
  img.at(0, 2, 0, 0) = 7.0f;          // clamps to 1
  write_png_rgb8(dir.file("q.png"), img);
  auto back = read_png_rgb8(dir.file("q.png"));
  CHECK(back.at(0, 0, 0, 0) == 64.0f / 255.0f);
  CHECK(back.at(0, 1, 0, 0) == 0.0f);
  CHECK(back.at(0, 2, 0, 0) == 1.0f);
  CHECK(back.at(0, 0, 1, 1) == 128.0f / 255.0f);
}

TEST_CASE("png io rejects bad inputs") {
  TmpDir dir("t2_io_png_bad");
  auto two = Tensor<float>::grid(2, 3, 4, 4);
  CHECK_THROWS_AS(write_png_rgb8(dir.file("x.png"), two), ValidationError);
  auto gray = Tensor<float>::grid(1, 1, 4, 4);
  CHECK_THROWS_AS(write_png_rgb8(dir.file("x.png"), gray), ValidationError);

  CHECK_THROWS_AS(read_png_rgb8(dir.file("absent.png")), IoError);
  CHECK_THROWS_AS(
      write_png_rgb8(dir.file("no/such/dir/x.png"), random_image(4, 4, 1)),
      IoError);

  std::ofstream f(dir.file("junk.png"), std::ios::binary);
  f << "definitely not a png";
  f.close();
  CHECK_THROWS_AS(read_png_rgb8(dir.file("junk.png")), IoError);
}

TEST_CASE("illumination file round trip is bit exact") {
  TmpDir dir("t2_io_t2il");
  auto t = random_image(13, 29, 11);
  t.at(0, 0, 0, 0) = 1e-39f;  // subnormals survive the round trip
  t.at(0, 1, 0, 0) = 1.0f;
  write_t2il(dir.file("i.npyf"), t);
  auto back = read_t2il(dir.file("i.npyf"));
  REQUIRE(back.same_shape(t));
  CHECK(std::memcmp(back.m.data(), t.m.data(),
                    sizeof(float) * t.m.size()) == 0);
}

TEST_CASE("illumination file header layout is as documented") {
  TmpDir dir("t2_io_t2il_hdr");
  auto t = Tensor<float>::grid(1, 3, 2, 3);
  for (Eigen::Index i = 0; i < t.m.size(); ++i)
    t.m.data()[i] = static_cast<float>(i);
  write_t2il(dir.file("h.npyf"), t);
  const std::string raw = slurp(dir.file("h.npyf"));
  REQUIRE(raw.size() == 8 + 3 * 2 * 3 * 4);
  CHECK(raw.substr(0, 4) == "T2IL");
  CHECK(static_cast<unsigned char>(raw[4]) == 2);  // height u16 LE
  CHECK(static_cast<unsigned char>(raw[5]) == 0);
  CHECK(static_cast<unsigned char>(raw[6]) == 3);  // width u16 LE
  CHECK(static_cast<unsigned char>(raw[7]) == 0);
  float first = 0, last = 0;
  std::memcpy(&first, raw.data() + 8, 4);
  std::memcpy(&last, raw.data() + raw.size() - 4, 4);
  CHECK(first == t.at(0, 0, 0, 0));
  CHECK(last == t.at(0, 2, 1, 2));
}

TEST_CASE("illumination file errors are detected") {
  TmpDir dir("t2_io_t2il_bad");
  CHECK_THROWS_AS(read_t2il(dir.file("absent.npyf")), IoError);

  {
    std::ofstream f(dir.file("magic.npyf"), std::ios::binary);
    f << "NOPE1234____";
  }
  CHECK_THROWS_WITH_AS(read_t2il(dir.file("magic.npyf")),
                       doctest::Contains("not a t2il file"), IoError);

  write_t2il(dir.file("short.npyf"), random_image(4, 4, 2));
  std::filesystem::resize_file(dir.path / "short.npyf", 8 + 10);
  CHECK_THROWS_WITH_AS(read_t2il(dir.file("short.npyf")),
                       doctest::Contains("truncated"), IoError);
}

TEST_CASE("crc32 helpers match the reference check value") {
  const char* msg = "123456789";
  const uint32_t crc = crc32_bytes(msg, 9);
  CHECK(crc == 0xCBF43926u);
  CHECK(crc32_hex(crc) == "cbf43926");
  CHECK(crc32_hex(0x1u) == "00000001");

  // seeded continuation equals one-shot over the concatenation
  const uint32_t part = crc32_bytes(msg, 4);
  CHECK(crc32_bytes(msg + 4, 5, part) == crc);

  TmpDir dir("t2_io_crc");
  {
    std::ofstream f(dir.file("m.bin"), std::ios::binary);
    f << msg;
  }
  CHECK(crc32_file(dir.file("m.bin")) == crc);
  CHECK_THROWS_AS(crc32_file(dir.file("absent.bin")), IoError);
}

TEST_CASE("precomputed decomposition store looks up by file stem") {
  TmpDir dir("t2_io_store");
  auto field = random_image(8, 8, 21);
  field.m = field.m.cwiseMax(0.01f);
  write_t2il(dir.file("scene_007.npyf"), field);

  PrecomputedDecompositionStore store{dir.str()};
  CHECK(store.contains("scene_007"));
  CHECK_FALSE(store.contains("scene_008"));
  auto back = store.load("scene_007");
  CHECK(back.m == field.m);

  CHECK_THROWS_WITH_AS(store.load("scene_008"),
                       doctest::Contains("scene_008"), LookupError);
}

TEST_CASE("checksum detects a corrupted stored file") {
  TmpDir dir("t2_io_crc_corrupt");
  auto img = random_image(16, 16, 5);
  write_png_rgb8(dir.file("c.png"), img);
  const uint32_t before = crc32_file(dir.file("c.png"));
  corrupt_byte(dir.file("c.png"), 40, 1);
  CHECK(crc32_file(dir.file("c.png")) != before);
}
