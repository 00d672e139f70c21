#include "flowseek/png.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <memory>

#include "flowseek/types.hpp"

namespace flowseek {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void write_png(const std::string& path, const RawImage& img) {
  if (img.width < 1 || img.height < 1) throw DimensionError("cannot write an empty PNG: " + path);
  if ((img.channels != 1 && img.channels != 3) || (img.bit_depth != 8 && img.bit_depth != 16))
    throw ParameterError("unsupported PNG layout for " + path);
  if (img.samples.size() != std::size_t(img.width) * img.height * img.channels)
    throw DimensionError("PNG sample count does not match dimensions: " + path);

  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot open for writing: " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng initialisation failed for " + path);
  }

  const int bytes = img.bit_depth / 8;
  const std::size_t stride = std::size_t(img.width) * img.channels * bytes;
  std::vector<png_byte> buffer(stride * img.height);
  for (std::size_t n = 0; n < img.samples.size(); ++n) {
    const std::uint16_t s = img.samples[n];
    if (bytes == 1) {
      buffer[n] = static_cast<png_byte>(s & 0xFF);
    } else {
      // PNG stores 16-bit samples big-endian.
      buffer[2 * n] = static_cast<png_byte>(s >> 8);
      buffer[2 * n + 1] = static_cast<png_byte>(s & 0xFF);
    }
  }
  std::vector<png_bytep> rows(img.height);
  for (int i = 0; i < img.height; ++i) rows[i] = buffer.data() + stride * i;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed writing PNG: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.width, img.height, img.bit_depth,
               img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(fp.get()) != 0) throw IoError("failed flushing PNG: " + path);
}

RawImage read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open for reading: " + path);

  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw FormatError("not a PNG file: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng initialisation failed for " + path);
  }

  RawImage img;
  std::vector<png_byte> buffer;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("corrupt PNG: " + path);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.channels = png_get_channels(png, info);
  depth = png_get_bit_depth(png, info);
  img.bit_depth = depth;
  if ((img.channels != 1 && img.channels != 3) || (depth != 8 && depth != 16)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("unsupported PNG layout: " + path);
  }

  const std::size_t stride = png_get_rowbytes(png, info);
  buffer.resize(stride * img.height);
  rows.resize(img.height);
  for (int i = 0; i < img.height; ++i) rows[i] = buffer.data() + stride * i;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const std::size_t count = std::size_t(img.width) * img.height * img.channels;
  img.samples.resize(count);
  for (int i = 0; i < img.height; ++i) {
    const png_byte* row = rows[i];
    for (std::size_t n = 0; n < std::size_t(img.width) * img.channels; ++n) {
      const std::size_t dst = std::size_t(i) * img.width * img.channels + n;
      img.samples[dst] = depth == 8 ? row[n] : static_cast<std::uint16_t>((row[2 * n] << 8) | row[2 * n + 1]);
    }
  }
  return img;
}

}  // namespace flowseek
