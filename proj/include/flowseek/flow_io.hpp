// Flow file formats and visualisation.
//
// Middlebury .flo: float32 tag 202021.25, int32 width, int32 height, then
// interleaved (u, v) float32 in row order, all little-endian. Values with
// magnitude above 1e9 mark unknown flow.
//
// KITTI flow PNG: 16-bit RGB, R/G = round(flow * 64 + 2^15), B = validity.

#ifndef FLOWSEEK_FLOW_IO_HPP
#define FLOWSEEK_FLOW_IO_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flowseek/png.hpp"
#include "flowseek/types.hpp"

namespace flowseek {

enum class FlowFileFormat { middlebury_flo, kitti_png };

inline constexpr float kFloTag = 202021.25f;
inline constexpr float kFloUnknown = 1e10f;
inline constexpr double kKittiScale = 64.0;
inline constexpr double kKittiOffset = 32768.0;

/// Format from the file extension (.flo or .png).
FlowFileFormat flow_format_from_path(const std::string& path);

void write_flo(const std::string& path, const FlowFieldd& flow);
FlowFieldd read_flo(const std::string& path);

std::vector<std::uint8_t> encode_flo(const FlowFieldd& flow);
FlowFieldd decode_flo(const std::vector<std::uint8_t>& bytes, const std::string& name = "<memory>");

void write_kitti_png(const std::string& path, const FlowFieldd& flow);
FlowFieldd read_kitti_png(const std::string& path);

RawImage encode_kitti(const FlowFieldd& flow);
FlowFieldd decode_kitti(const RawImage& img, const std::string& name = "<memory>");

/// Dispatches on the extension.
void write_flow(const std::string& path, const FlowFieldd& flow);
FlowFieldd read_flow(const std::string& path);

struct Rgb8Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // interleaved RGB

  std::uint8_t at(int i, int j, int c) const { return pixels[(std::size_t(i) * width + j) * 3 + c]; }
  RawImage raw() const;
};

/// The 55-entry Middlebury colour wheel (RY, YG, GC, CB, BM, MR segments).
const std::vector<std::array<std::uint8_t, 3>>& color_wheel();

/// Colour-wheel rendering: hue from flow direction, saturation from
/// magnitude / max_magnitude (largest valid magnitude when absent). Invalid
/// pixels are black.
Rgb8Image flow_to_color(const FlowFieldd& flow, std::optional<double> max_magnitude = std::nullopt);

}  // namespace flowseek

#endif  // FLOWSEEK_FLOW_IO_HPP
