#include "styleseg/data/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <vector>

namespace styleseg {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct PngRow {
  std::vector<png_bytep> rows;
};

[[noreturn]] void fail(const std::string& path, const char* what) {
  throw std::runtime_error("png: " + std::string(what) + ": " + path);
}

/// Decodes into 8-bit gray or RGB row-major bytes.
void decode_png(const std::string& path, std::vector<unsigned char>& bytes,
                int& width, int& height, int& channels) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) fail(path, "cannot open");

  unsigned char sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8)) {
    fail(path, "not a PNG file");
  }

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail(path, "read struct allocation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail(path, "info struct allocation failed");
  }
  std::vector<png_bytep> row_ptrs;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(path, "decode error");
  }

  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_byte color_type = png_get_color_type(png, info);
  const png_byte bit_depth = png_get_bit_depth(png, info);

  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (bit_depth == 16) png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  channels = static_cast<int>(png_get_channels(png, info));
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(path, "unsupported channel count after normalization");
  }

  const std::size_t stride = png_get_rowbytes(png, info);
  bytes.assign(stride * height, 0);
  row_ptrs.resize(height);
  for (int r = 0; r < height; ++r) row_ptrs[r] = bytes.data() + r * stride;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
}

void encode_png(const std::string& path, const std::vector<unsigned char>& bytes,
                int width, int height, int channels) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) fail(path, "cannot open for writing");

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail(path, "write struct allocation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail(path, "info struct allocation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(path, "encode error");
  }

  png_init_io(png, file.get());
  const int color_type =
      channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  for (int r = 0; r < height; ++r) {
    png_write_row(png, const_cast<png_bytep>(bytes.data() + r * stride));
  }
  png_write_end(png, info);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

Image read_png(const std::string& path) {
  std::vector<unsigned char> bytes;
  int width = 0, height = 0, channels = 0;
  decode_png(path, bytes, width, height, channels);

  Image image(channels, height, width);
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const std::size_t px = (static_cast<std::size_t>(r) * width + c);
      for (int ch = 0; ch < channels; ++ch) {
        image.data[ch * plane + px] =
            static_cast<float>(bytes[px * channels + ch]) / 255.0f;
      }
    }
  }
  return image;
}

SegmentationMask read_png_mask(const std::string& path) {
  std::vector<unsigned char> bytes;
  int width = 0, height = 0, channels = 0;
  decode_png(path, bytes, width, height, channels);

  SegmentationMask mask(height, width);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const std::size_t px = (static_cast<std::size_t>(r) * width + c);
      mask.grid[px] = bytes[px * channels] != 0 ? 1 : 0;
    }
  }
  return mask;
}

void write_png(const std::string& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw std::invalid_argument("write_png: only 1- or 3-channel images");
  }
  const std::size_t plane =
      static_cast<std::size_t>(image.height) * image.width;
  std::vector<unsigned char> bytes(plane * image.channels);
  for (std::size_t px = 0; px < plane; ++px) {
    for (int ch = 0; ch < image.channels; ++ch) {
      float v = image.data[ch * plane + px];
      v = std::min(1.0f, std::max(0.0f, v));
      bytes[px * image.channels + ch] =
          static_cast<unsigned char>(std::lround(v * 255.0f));
    }
  }
  encode_png(path, bytes, image.width, image.height, image.channels);
}

void write_png_mask(const std::string& path, const SegmentationMask& mask) {
  std::vector<unsigned char> bytes(mask.grid.size());
  for (std::size_t i = 0; i < mask.grid.size(); ++i) {
    bytes[i] = mask.grid[i] ? 255 : 0;
  }
  encode_png(path, bytes, mask.width, mask.height, 1);
}

}  // namespace styleseg
