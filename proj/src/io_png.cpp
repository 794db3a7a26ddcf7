#include <png.h>

#include <algorithm>
#include <csetjmp>
#include <cstdio>
#include <memory>

#include "ampsynth/error.hpp"
#include "ampsynth/io.hpp"

namespace ampsynth::io {

namespace {

using FilePtr = std::unique_ptr<FILE, int (*)(FILE*)>;

struct PngInfo {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int channels = 0;
  int bit_depth = 0;
};

// libpng reports errors by longjmp; the functions holding setjmp keep only
// trivially destructible locals.
bool read_header(png_structp png, png_infop info, FILE* fp, PngInfo* out) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_init_io(png, fp);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_read_update_info(png, info);
  out->width = png_get_image_width(png, info);
  out->height = png_get_image_height(png, info);
  out->channels = png_get_channels(png, info);
  out->bit_depth = png_get_bit_depth(png, info);
  return true;
}

bool read_rows(png_structp png, png_infop info, png_bytepp rows) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_read_image(png, rows);
  png_read_end(png, info);
  return true;
}

bool write_rows(png_structp png, png_infop info, FILE* fp, png_uint_32 width, png_uint_32 height,
                int bit_depth, int color_type, png_bytepp rows) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_init_io(png, fp);
  png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows);
  png_write_end(png, info);
  return true;
}

void quiet_warning(png_structp, png_const_charp) {}

}  // namespace

Image read_png(const std::filesystem::path& path, const std::string& id) {
  FilePtr fp(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!fp) fail(ErrorCode::kUnreadable, "cannot open '" + path.string() + "'");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    fail(ErrorCode::kUnsupportedFormat, "'" + path.string() + "' is not a PNG file");
  std::rewind(fp.get());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, quiet_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::bad_alloc();
  }
  struct Guard {
    png_structp* png;
    png_infop* info;
    ~Guard() { png_destroy_read_struct(png, info, nullptr); }
  } guard{&png, &info};

  PngInfo hdr;
  if (!read_header(png, info, fp.get(), &hdr)) fail(ErrorCode::kUnreadable, "corrupt PNG header in '" + path.string() + "'");
  const std::size_t bytes_per_sample = hdr.bit_depth == 16 ? 2 : 1;
  const std::size_t row_bytes = hdr.width * hdr.channels * bytes_per_sample;
  std::vector<png_byte> pixels(row_bytes * hdr.height);
  std::vector<png_bytep> rows(hdr.height);
  for (png_uint_32 y = 0; y < hdr.height; ++y) rows[y] = pixels.data() + y * row_bytes;
  if (!read_rows(png, info, rows.data())) fail(ErrorCode::kUnreadable, "corrupt PNG data in '" + path.string() + "'");

  const Shape shape{hdr.height, hdr.width};
  const bool has_alpha = hdr.channels == 2 || hdr.channels == 4;
  const int color_channels = has_alpha ? hdr.channels - 1 : hdr.channels;
  std::vector<std::vector<double>> planes(hdr.channels, std::vector<double>(shape.size()));
  for (std::size_t px = 0; px < shape.size(); ++px) {
    for (int c = 0; c < hdr.channels; ++c) {
      const png_byte* s = pixels.data() + (px * hdr.channels + c) * bytes_per_sample;
      planes[c][px] = bytes_per_sample == 2 ? static_cast<double>((s[0] << 8) | s[1]) : s[0];
    }
  }

  Image img;
  for (int c = 0; c < color_channels; ++c) img.channels.emplace_back(shape, std::move(planes[c]), id);
  if (has_alpha) img.alpha.emplace(shape, std::move(planes.back()), id);
  img.meta.format = FileFormat::kPng;
  img.meta.png.bit_depth = hdr.bit_depth == 16 ? 16 : 8;
  return img;
}

void write_png(const std::filesystem::path& path, const std::vector<Volume>& channels, int bit_depth) {
  require(!channels.empty() && channels.size() <= 4, "PNG output needs 1 to 4 channels");
  require(bit_depth == 8 || bit_depth == 16, "PNG bit depth must be 8 or 16");
  const Shape& shape = channels.front().shape();
  require(shape.rank() == 2, "PNG output needs 2D channels");
  for (const auto& c : channels) require(c.shape() == shape, "PNG channels must share one shape");

  static constexpr int kColorType[] = {PNG_COLOR_TYPE_GRAY, PNG_COLOR_TYPE_GRAY_ALPHA, PNG_COLOR_TYPE_RGB,
                                       PNG_COLOR_TYPE_RGB_ALPHA};
  const std::size_t nch = channels.size();
  const std::size_t bytes_per_sample = bit_depth == 16 ? 2 : 1;
  const double maxval = bit_depth == 16 ? 65535.0 : 255.0;
  const std::size_t height = shape[0];
  const std::size_t width = shape[1];
  const std::size_t row_bytes = width * nch * bytes_per_sample;
  std::vector<png_byte> pixels(row_bytes * height);
  for (std::size_t px = 0; px < shape.size(); ++px) {
    for (std::size_t c = 0; c < nch; ++c) {
      const auto q = static_cast<unsigned>(std::clamp(round_half_even(channels[c][px]), 0.0, maxval));
      png_byte* d = pixels.data() + (px * nch + c) * bytes_per_sample;
      if (bytes_per_sample == 2) {
        d[0] = static_cast<png_byte>(q >> 8);
        d[1] = static_cast<png_byte>(q & 0xFF);
      } else {
        d[0] = static_cast<png_byte>(q);
      }
    }
  }
  std::vector<png_bytep> rows(height);
  for (std::size_t y = 0; y < height; ++y) rows[y] = pixels.data() + y * row_bytes;

  FilePtr fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) fail(ErrorCode::kWriteFailed, "cannot open '" + path.string() + "' for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, quiet_warning);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    throw std::bad_alloc();
  }
  const bool ok = write_rows(png, info, fp.get(), static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
                             bit_depth, kColorType[nch - 1], rows.data());
  png_destroy_write_struct(&png, &info);
  if (!ok) fail(ErrorCode::kWriteFailed, "PNG encoding failed for '" + path.string() + "'");
}

}  // namespace ampsynth::io
