#pragma once

// PNG frame I/O through libpng. Integer value v at bit depth b decodes to
// v / (2^b - 1); encoding clamps to [0,1] and rounds half-up.

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <cctype>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "bvsr/error.hpp"
#include "bvsr/image.hpp"

namespace bvsr {

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// libpng reports errors by longjmp; the message is stashed for the exception
// raised once control is back in C++ frames.
inline thread_local std::string png_last_error;

[[noreturn]] inline void png_error_handler(png_structp png, png_const_charp msg) {
  png_last_error = msg ? msg : "unknown error";
  png_longjmp(png, 1);
}
inline void png_warning_handler(png_structp, png_const_charp) {}

}  // namespace detail

/// Quantizes one sample for a given bit depth (clamp, then round half-up).
inline std::uint32_t quantize_sample(double v, int bit_depth) {
  const double max_code = static_cast<double>((1u << bit_depth) - 1u);
  const double c = std::min(std::max(v, 0.0), 1.0);
  return static_cast<std::uint32_t>(std::floor(c * max_code + 0.5));
}

/// Reads 8- or 16-bit gray / RGB PNG. Alpha is dropped, palettes expanded.
inline Frame read_png(const std::filesystem::path& path) {
  detail::FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw IoError(path.string() + " is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                           &detail::png_error_handler, &detail::png_warning_handler);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};
  if (!info) throw IoError("png_create_info_struct failed");

  std::vector<png_byte> buffer;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    throw IoError(path.string() + ": libpng: " + detail::png_last_error);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) {
    png_set_palette_to_rgb(png);
    depth = 8;
  }
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
    depth = 8;
  }
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (depth == 16) png_set_swap(png);  // host little-endian 16-bit words
  png_read_update_info(png, info);

  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int channels = png_get_channels(png, info);
  depth = png_get_bit_depth(png, info);

  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * height);
  rows.resize(height);
  for (int y = 0; y < height; ++y) rows[y] = buffer.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  if (channels != 1 && channels != 3) {
    throw IoError(path.string() + ": unsupported channel count " + std::to_string(channels));
  }

  Frame out(height, width, channels);
  const double max_code = static_cast<double>((1u << depth) - 1u);
  for (int y = 0; y < height; ++y) {
    for (int i = 0; i < width * channels; ++i) {
      std::uint32_t v;
      if (depth == 16) {
        std::uint16_t w;
        std::memcpy(&w, rows[y] + 2 * i, 2);
        v = w;
      } else {
        v = rows[y][i];
      }
      out.data()[static_cast<std::size_t>(y) * width * channels + i] = v / max_code;
    }
  }
  return out;
}

inline void write_png(const std::filesystem::path& path, const Frame& frame, int bit_depth = 8) {
  if (bit_depth != 8 && bit_depth != 16) throw ConfigError("PNG bit depth must be 8 or 16");
  if (frame.channels() != 1 && frame.channels() != 3) {
    throw DimensionError("write_png: frames must have 1 or 3 channels, got " + frame.shape_string());
  }
  detail::FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw IoError("cannot create " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            &detail::png_error_handler, &detail::png_warning_handler);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};
  if (!info) throw IoError("png_create_info_struct failed");

  const int bytes = bit_depth / 8;
  const std::size_t row_samples = static_cast<std::size_t>(frame.width()) * frame.channels();
  std::vector<png_byte> row(row_samples * bytes);
  if (setjmp(png_jmpbuf(png))) {
    throw IoError(path.string() + ": libpng: " + detail::png_last_error);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, frame.width(), frame.height(), bit_depth,
               frame.channels() == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);

  for (int y = 0; y < frame.height(); ++y) {
    for (std::size_t i = 0; i < row_samples; ++i) {
      const std::uint32_t q = quantize_sample(frame.data()[y * row_samples + i], bit_depth);
      if (bit_depth == 16) {
        const std::uint16_t w = static_cast<std::uint16_t>(q);
        std::memcpy(row.data() + 2 * i, &w, 2);
      } else {
        row[i] = static_cast<png_byte>(q);
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
}

/// frame_%06d.png
inline std::string frame_filename(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%06zu.png", index);
  return buf;
}

/// All *.png files in a directory, sorted by name.
inline std::vector<std::filesystem::path> list_png_files(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

inline Sequence read_sequence(const std::filesystem::path& dir) {
  const auto files = list_png_files(dir);
  if (files.empty()) throw IoError("no PNG frames in " + dir.string());
  Sequence seq;
  for (const auto& f : files) seq.push_back(read_png(f));
  return seq;
}

inline void write_sequence(const std::filesystem::path& dir, const Sequence& seq, int bit_depth = 8) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < seq.size(); ++i) write_png(dir / frame_filename(i), seq[i], bit_depth);
}

}  // namespace bvsr
