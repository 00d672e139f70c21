#include <doctest.h>

#include <cstring>
#include <fstream>

#include "flowseek/flow_io.hpp"
#include "support.hpp"

using namespace flowseek;
using namespace flowseek::test;

namespace {

std::vector<std::uint8_t> file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Reads a little-endian float32 by hand.
float le_float(const std::vector<std::uint8_t>& b, std::size_t off) {
  const std::uint32_t bits = std::uint32_t(b[off]) | std::uint32_t(b[off + 1]) << 8 |
                             std::uint32_t(b[off + 2]) << 16 | std::uint32_t(b[off + 3]) << 24;
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

FlowFieldd float_valued(FlowFieldd f) {
  f.u = f.u.cast<float>().cast<double>();
  f.v = f.v.cast<float>().cast<double>();
  return f;
}

}  // namespace

TEST_CASE(".flo layout of a single zero pixel") {
  const auto dir = temp_dir("flo_layout");
  const auto path = (dir / "one.flo").string();
  write_flo(path, FlowFieldd::Zero(1, 1));
  const auto b = file_bytes(path);
  REQUIRE(b.size() == 20);
  CHECK(le_float(b, 0) == 202021.25f);
  CHECK(b[4] == 1);
  CHECK(b[8] == 1);
  CHECK(le_float(b, 12) == 0.0f);
  const auto back = read_flo(path);
  CHECK(back.u(0, 0) == 0.0);
  CHECK(back.valid(0, 0));
}

TEST_CASE(".flo round trip is bitwise exact") {
  Rng rng(1);
  const auto dir = temp_dir("flo_roundtrip");
  for (int trial = 0; trial < 20; ++trial) {
    const auto f = float_valued(random_flow(rng, 12, 16, -300, 300));
    const auto path = (dir / "f.flo").string();
    write_flo(path, f);
    const auto g = read_flo(path);
    REQUIRE(g.height() == 12);
    REQUIRE(g.width() == 16);
    CHECK((g.u == f.u).all());
    CHECK((g.v == f.v).all());
    CHECK(g.valid.all());
    // Writing the decoded field again reproduces the file byte for byte.
    CHECK(encode_flo(g) == file_bytes(path));
  }
}

TEST_CASE(".flo payload is little-endian interleaved rows") {
  FlowFieldd f(2, 3);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) {
      f.u(i, j) = i * 10 + j + 0.5;
      f.v(i, j) = -(i * 10 + j);
    }
  const auto b = encode_flo(f);
  CHECK(b[4] == 3);
  CHECK(b[8] == 2);
  CHECK(le_float(b, 12 + 8 * 4) == 11.5f);  // pixel (1, 1) u
  CHECK(le_float(b, 12 + 8 * 5 + 4) == -12.0f);
}

TEST_CASE(".flo error paths") {
  auto bytes = encode_flo(FlowFieldd::Zero(2, 2));
  SUBCASE("bad magic names the offset") {
    bytes[0] ^= 0xFF;
    try {
      decode_flo(bytes, "x.flo");
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("offset 0") != std::string::npos);
    }
  }
  SUBCASE("truncated") {
    bytes.pop_back();
    CHECK_THROWS_AS(decode_flo(bytes), FormatError);
    CHECK_THROWS_AS(decode_flo(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 7)), FormatError);
  }
  SUBCASE("dimension overflow") {
    bytes[4] = bytes[5] = bytes[6] = 0xFF;
    bytes[7] = 0x7F;
    bytes[8] = bytes[9] = bytes[10] = 0xFF;
    bytes[11] = 0x7F;
    CHECK_THROWS_AS(decode_flo(bytes), FormatError);
  }
  SUBCASE("missing file names the path") {
    try {
      read_flo("/nonexistent/dir/missing.flo");
      FAIL("expected IoError");
    } catch (const IoError& e) {
      CHECK(std::string(e.what()).find("missing.flo") != std::string::npos);
    }
  }
  SUBCASE("invalid pixels use the unknown marker") {
    FlowFieldd f(1, 2);
    f.valid(0, 1) = false;
    const auto b = encode_flo(f);
    CHECK(le_float(b, 20) == kFloUnknown);
    const auto g = decode_flo(b);
    CHECK(g.valid(0, 0));
    CHECK_FALSE(g.valid(0, 1));
  }
}

TEST_CASE("KITTI PNG") {
  const auto dir = temp_dir("kitti");
  const auto path = (dir / "k.png").string();
  SUBCASE("zero flow") {
    const auto img = encode_kitti(FlowFieldd::Zero(3, 4));
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 4; ++j) {
        CHECK(img.at(i, j, 0) == 32768);
        CHECK(img.at(i, j, 1) == 32768);
        CHECK(img.at(i, j, 2) == 1);
      }
    write_kitti_png(path, FlowFieldd::Zero(3, 4));
    const auto back = read_kitti_png(path);
    CHECK((back.u == 0.0).all());
    CHECK((back.v == 0.0).all());
    CHECK(back.valid.all());
  }
  SUBCASE("random round trip within half a quantum") {
    Rng rng(2);
    for (int trial = 0; trial < 10; ++trial) {
      auto f = random_flow(rng, 9, 7, -400, 400);
      f.valid(uniform_int(rng, 0, 8), uniform_int(rng, 0, 6)) = false;
      write_kitti_png(path, f);
      const auto g = read_kitti_png(path);
      CHECK((g.valid == f.valid).all());
      for (int i = 0; i < 9; ++i)
        for (int j = 0; j < 7; ++j) {
          if (!f.valid(i, j)) continue;
          CHECK(std::abs(g.u(i, j) - f.u(i, j)) <= 1.0 / 128);
          CHECK(std::abs(g.v(i, j) - f.v(i, j)) <= 1.0 / 128);
        }
    }
  }
  SUBCASE("invalid pixels store validity 0") {
    FlowFieldd f(2, 2);
    f.valid(1, 0) = false;
    const auto img = encode_kitti(f);
    CHECK(img.at(1, 0, 2) == 0);
    CHECK_FALSE(decode_kitti(img).valid(1, 0));
  }
  SUBCASE("out of range flow reports the magnitude") {
    FlowFieldd f(2, 2);
    f.u(1, 1) = -600.5;
    try {
      encode_kitti(f);
      FAIL("expected RangeError");
    } catch (const RangeError& e) {
      CHECK(std::string(e.what()).find("600.5") != std::string::npos);
    }
  }
  SUBCASE("8-bit PNG is not a KITTI flow") {
    RawImage g{2, 2, 1, 8, {0, 1, 2, 3}};
    write_png(path, g);
    CHECK_THROWS_AS(read_kitti_png(path), FormatError);
  }
}

TEST_CASE("format dispatch by extension") {
  CHECK(flow_format_from_path("a/b.flo") == FlowFileFormat::middlebury_flo);
  CHECK(flow_format_from_path("a/b.PNG") == FlowFileFormat::kitti_png);
  CHECK_THROWS_AS(flow_format_from_path("a/b.txt"), FormatError);
}

TEST_CASE("colour wheel visualization") {
  CHECK(color_wheel().size() == 55);
  SUBCASE("zero flow is white") {
    const auto img = flow_to_color(FlowFieldd::Zero(3, 3));
    for (auto p : img.pixels) CHECK(p == 255);
  }
  SUBCASE("(1, 0) at full scale is the first wheel colour") {
    FlowFieldd f(1, 1);
    f.u(0, 0) = 1;
    const auto img = flow_to_color(f, 1.0);
    for (int c = 0; c < 3; ++c) CHECK(img.at(0, 0, c) == color_wheel()[0][c]);
  }
  SUBCASE("scale invariance") {
    Rng rng(3);
    const auto f = random_flow(rng, 6, 6, -3, 3);
    auto g = f;
    g.u *= 2;
    g.v *= 2;
    CHECK(flow_to_color(f, 2.5).pixels == flow_to_color(g, 5.0).pixels);
  }
  SUBCASE("invalid pixels are black") {
    FlowFieldd f(1, 2);
    f.valid(0, 1) = false;
    const auto img = flow_to_color(f);
    for (int c = 0; c < 3; ++c) CHECK(img.at(0, 1, c) == 0);
  }
}

TEST_CASE("PNG writer and reader") {
  const auto dir = temp_dir("png");
  const auto path = (dir / "p.png").string();
  RawImage img{3, 2, 3, 16, {}};
  for (int n = 0; n < 18; ++n) img.samples.push_back(std::uint16_t(n * 3000 + 7));
  write_png(path, img);
  const auto back = read_png(path);
  CHECK(back.width == 3);
  CHECK(back.height == 2);
  CHECK(back.channels == 3);
  CHECK(back.bit_depth == 16);
  CHECK(back.samples == img.samples);
  CHECK_THROWS_AS(read_png((dir / "none.png").string()), IoError);
  std::ofstream((dir / "junk.png").string()) << "not a png";
  CHECK_THROWS_AS(read_png((dir / "junk.png").string()), FormatError);
}
