// Minimal PNG reading/writing on top of libpng (8- and 16-bit gray/RGB).

#ifndef FLOWSEEK_PNG_HPP
#define FLOWSEEK_PNG_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace flowseek {

/// Interleaved samples, row-major; 8-bit images use the low byte only.
struct RawImage {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 or 3
  int bit_depth = 8;  // 8 or 16
  std::vector<std::uint16_t> samples;

  std::uint16_t at(int i, int j, int c) const {
    return samples[(std::size_t(i) * width + j) * channels + c];
  }
};

void write_png(const std::string& path, const RawImage& img);
RawImage read_png(const std::string& path);

}  // namespace flowseek

#endif  // FLOWSEEK_PNG_HPP
