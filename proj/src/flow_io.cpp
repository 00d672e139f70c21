#include "flowseek/flow_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>
#include <sstream>

namespace flowseek {
namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t x) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>((x >> (8 * b)) & 0xFF));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t offset) {
  std::uint32_t x = 0;
  for (int b = 0; b < 4; ++b) x |= std::uint32_t(in[offset + b]) << (8 * b);
  return x;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  if (s.size() < suffix.size()) return false;
  return std::equal(suffix.rbegin(), suffix.rend(), s.rbegin(),
                    [](char a, char b) { return a == std::tolower(static_cast<unsigned char>(b)); });
}

}  // namespace

FlowFileFormat flow_format_from_path(const std::string& path) {
  if (ends_with(path, ".flo")) return FlowFileFormat::middlebury_flo;
  if (ends_with(path, ".png")) return FlowFileFormat::kitti_png;
  throw FormatError("unknown flow file extension (expected .flo or .png): " + path);
}

std::vector<std::uint8_t> encode_flo(const FlowFieldd& flow) {
  if (flow.width() < 1 || flow.height() < 1) throw DimensionError("cannot encode an empty flow");
  std::vector<std::uint8_t> out;
  out.reserve(12 + std::size_t(flow.pixels()) * 8);
  put_u32(out, std::bit_cast<std::uint32_t>(kFloTag));
  put_u32(out, static_cast<std::uint32_t>(flow.width()));
  put_u32(out, static_cast<std::uint32_t>(flow.height()));
  for (int i = 0; i < flow.height(); ++i) {
    for (int j = 0; j < flow.width(); ++j) {
      float u = kFloUnknown, v = kFloUnknown;
      if (flow.valid(i, j)) {
        if (!std::isfinite(flow.u(i, j)) || !std::isfinite(flow.v(i, j)))
          throw RangeError("non-finite flow at valid pixel (" + std::to_string(i) + ", " + std::to_string(j) + ")");
        u = static_cast<float>(flow.u(i, j));
        v = static_cast<float>(flow.v(i, j));
      }
      put_u32(out, std::bit_cast<std::uint32_t>(u));
      put_u32(out, std::bit_cast<std::uint32_t>(v));
    }
  }
  return out;
}

FlowFieldd decode_flo(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  if (bytes.size() < 12) throw FormatError(name + ": truncated .flo header (" + std::to_string(bytes.size()) + " bytes)");
  const float tag = std::bit_cast<float>(get_u32(bytes, 0));
  if (tag != kFloTag) throw FormatError(name + ": bad .flo magic at byte offset 0");
  const auto width = static_cast<std::int32_t>(get_u32(bytes, 4));
  const auto height = static_cast<std::int32_t>(get_u32(bytes, 8));
  if (width < 1 || height < 1)
    throw FormatError(name + ": invalid .flo dimensions " + std::to_string(width) + "x" + std::to_string(height) +
                      " at byte offset 4");
  const std::uint64_t payload = std::uint64_t(width) * std::uint64_t(height) * 8u;
  if (payload > std::uint64_t(std::numeric_limits<std::int32_t>::max()) * 8u)
    throw FormatError(name + ": .flo dimensions overflow");
  if (bytes.size() < 12 + payload)
    throw FormatError(name + ": truncated .flo payload, expected " + std::to_string(12 + payload) + " bytes, got " +
                      std::to_string(bytes.size()));
  if (bytes.size() > 12 + payload) throw FormatError(name + ": trailing bytes after .flo payload");

  FlowFieldd flow(height, width);
  std::size_t off = 12;
  for (int i = 0; i < height; ++i) {
    for (int j = 0; j < width; ++j, off += 8) {
      const float u = std::bit_cast<float>(get_u32(bytes, off));
      const float v = std::bit_cast<float>(get_u32(bytes, off + 4));
      if (!(std::abs(u) <= 1e9f) || !(std::abs(v) <= 1e9f)) {
        flow.valid(i, j) = false;
        continue;
      }
      flow.u(i, j) = u;
      flow.v(i, j) = v;
    }
  }
  return flow;
}

void write_flo(const std::string& path, const FlowFieldd& flow) {
  const auto bytes = encode_flo(flow);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing: " + path);
}

FlowFieldd read_flo(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_flo(bytes, path);
}

RawImage encode_kitti(const FlowFieldd& flow) {
  double max_mag = 0;
  for (int i = 0; i < flow.height(); ++i)
    for (int j = 0; j < flow.width(); ++j)
      if (flow.valid(i, j)) {
        if (!std::isfinite(flow.u(i, j)) || !std::isfinite(flow.v(i, j)))
          throw RangeError("non-finite flow at valid pixel (" + std::to_string(i) + ", " + std::to_string(j) + ")");
        max_mag = std::max({max_mag, std::abs(flow.u(i, j)), std::abs(flow.v(i, j))});
      }
  if (max_mag >= 512.0) {
    std::ostringstream msg;
    msg << "flow exceeds KITTI PNG range (|component| < 512): max magnitude " << max_mag;
    throw RangeError(msg.str());
  }

  RawImage img;
  img.width = flow.width();
  img.height = flow.height();
  img.channels = 3;
  img.bit_depth = 16;
  img.samples.resize(std::size_t(img.width) * img.height * 3);
  auto quantize = [](double x) {
    return static_cast<std::uint16_t>(std::clamp(std::round(x * kKittiScale + kKittiOffset), 0.0, 65535.0));
  };
  for (int i = 0; i < img.height; ++i) {
    for (int j = 0; j < img.width; ++j) {
      const std::size_t p = (std::size_t(i) * img.width + j) * 3;
      const bool ok = flow.valid(i, j);
      img.samples[p] = ok ? quantize(flow.u(i, j)) : std::uint16_t(kKittiOffset);
      img.samples[p + 1] = ok ? quantize(flow.v(i, j)) : std::uint16_t(kKittiOffset);
      img.samples[p + 2] = ok ? 1 : 0;
    }
  }
  return img;
}

FlowFieldd decode_kitti(const RawImage& img, const std::string& name) {
  if (img.channels != 3 || img.bit_depth != 16) throw FormatError(name + ": KITTI flow must be a 16-bit RGB PNG");
  FlowFieldd flow(img.height, img.width);
  for (int i = 0; i < img.height; ++i) {
    for (int j = 0; j < img.width; ++j) {
      const bool ok = img.at(i, j, 2) > 0;
      flow.valid(i, j) = ok;
      if (!ok) continue;
      flow.u(i, j) = (double(img.at(i, j, 0)) - kKittiOffset) / kKittiScale;
      flow.v(i, j) = (double(img.at(i, j, 1)) - kKittiOffset) / kKittiScale;
    }
  }
  return flow;
}

void write_kitti_png(const std::string& path, const FlowFieldd& flow) { write_png(path, encode_kitti(flow)); }

FlowFieldd read_kitti_png(const std::string& path) { return decode_kitti(read_png(path), path); }

void write_flow(const std::string& path, const FlowFieldd& flow) {
  if (flow_format_from_path(path) == FlowFileFormat::middlebury_flo)
    write_flo(path, flow);
  else
    write_kitti_png(path, flow);
}

FlowFieldd read_flow(const std::string& path) {
  return flow_format_from_path(path) == FlowFileFormat::middlebury_flo ? read_flo(path) : read_kitti_png(path);
}

RawImage Rgb8Image::raw() const {
  RawImage r;
  r.width = width;
  r.height = height;
  r.channels = 3;
  r.bit_depth = 8;
  r.samples.assign(pixels.begin(), pixels.end());
  return r;
}

const std::vector<std::array<std::uint8_t, 3>>& color_wheel() {
  static const auto wheel = [] {
    constexpr int RY = 15, YG = 6, GC = 4, CB = 11, BM = 13, MR = 6;
    std::vector<std::array<std::uint8_t, 3>> w;
    auto push = [&](int r, int g, int b) {
      w.push_back({static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)});
    };
    for (int i = 0; i < RY; ++i) push(255, 255 * i / RY, 0);
    for (int i = 0; i < YG; ++i) push(255 - 255 * i / YG, 255, 0);
    for (int i = 0; i < GC; ++i) push(0, 255, 255 * i / GC);
    for (int i = 0; i < CB; ++i) push(0, 255 - 255 * i / CB, 255);
    for (int i = 0; i < BM; ++i) push(255 * i / BM, 0, 255);
    for (int i = 0; i < MR; ++i) push(255, 0, 255 - 255 * i / MR);
    return w;
  }();
  return wheel;
}

Rgb8Image flow_to_color(const FlowFieldd& flow, std::optional<double> max_magnitude) {
  double max_rad = 0;
  if (max_magnitude) {
    max_rad = *max_magnitude;
  } else {
    for (int i = 0; i < flow.height(); ++i)
      for (int j = 0; j < flow.width(); ++j)
        if (flow.valid(i, j) && std::isfinite(flow.u(i, j)) && std::isfinite(flow.v(i, j)))
          max_rad = std::max(max_rad, std::hypot(flow.u(i, j), flow.v(i, j)));
  }
  if (!(max_rad > 0)) max_rad = 1;

  const auto& wheel = color_wheel();
  const int ncols = static_cast<int>(wheel.size());
  Rgb8Image img;
  img.width = flow.width();
  img.height = flow.height();
  img.pixels.assign(std::size_t(img.width) * img.height * 3, 0);
  for (int i = 0; i < img.height; ++i) {
    for (int j = 0; j < img.width; ++j) {
      if (!flow.valid(i, j) || !std::isfinite(flow.u(i, j)) || !std::isfinite(flow.v(i, j))) continue;
      const double fu = flow.u(i, j) / max_rad;
      const double fv = flow.v(i, j) / max_rad;
      const double rad = std::sqrt(fu * fu + fv * fv);
      const double a = std::atan2(-fv, -fu) / std::numbers::pi;
      const double fk = (a + 1.0) / 2.0 * (ncols - 1);
      const int k0 = static_cast<int>(fk);
      const int k1 = (k0 + 1) % ncols;
      const double f = fk - k0;
      for (int b = 0; b < 3; ++b) {
        const double c0 = wheel[k0][b] / 255.0;
        const double c1 = wheel[k1][b] / 255.0;
        double col = (1 - f) * c0 + f * c1;
        if (rad <= 1)
          col = 1 - rad * (1 - col);
        else
          col *= 0.75;
        img.pixels[(std::size_t(i) * img.width + j) * 3 + b] = static_cast<std::uint8_t>(255.0 * col);
      }
    }
  }
  return img;
}

}  // namespace flowseek
