#pragma once

// PNG/JPEG decoding to RGB rasters and PNG encoding. Alpha is dropped on
// load and grayscale is promoted to RGB.

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "vfunnel/error.hpp"
#include "vfunnel/imaging.hpp"

namespace vfunnel {

namespace detail {

struct FileCloser {
  void operator()(std::FILE *f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline RasterImage decode_png(const std::filesystem::path &path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw InvalidInput("png decode failed for " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGBA;
  std::vector<std::uint8_t> rgba(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, rgba.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw InvalidInput("png decode failed for " + path.string() + ": " + msg);
  }
  const std::size_t n = static_cast<std::size_t>(image.width) * image.height;
  std::vector<std::uint8_t> rgb(n * 3);
  for (std::size_t k = 0; k < n; ++k) {
    rgb[k * 3] = rgba[k * 4];
    rgb[k * 3 + 1] = rgba[k * 4 + 1];
    rgb[k * 3 + 2] = rgba[k * 4 + 2];
  }
  return RasterImage(image.width, image.height, std::move(rgb));
}

struct JpegErrorState {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

extern "C" inline void jpeg_error_longjmp(j_common_ptr cinfo) {
  auto *state = reinterpret_cast<JpegErrorState *>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, state->message);
  std::longjmp(state->jump, 1);
}

// Kept free of objects with destructors between setjmp and any longjmp.
inline bool decode_jpeg_raw(std::FILE *f, std::vector<std::uint8_t> &rgb, JDIMENSION &w,
                            JDIMENSION &h, char *message) {
  jpeg_decompress_struct cinfo;
  JpegErrorState err;
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_error_longjmp;
  err.message[0] = '\0';
  if (setjmp(err.jump)) {
    std::strncpy(message, err.message, JMSG_LENGTH_MAX);
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, f);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  w = cinfo.output_width;
  h = cinfo.output_height;
  rgb.resize(static_cast<std::size_t>(w) * h * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = rgb.data() + static_cast<std::size_t>(cinfo.output_scanline) * w * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return true;
}

inline RasterImage decode_jpeg(const std::filesystem::path &path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) {
    throw InvalidInput("cannot open image " + path.string());
  }
  std::vector<std::uint8_t> rgb;
  JDIMENSION w = 0;
  JDIMENSION h = 0;
  char message[JMSG_LENGTH_MAX] = {};
  if (!decode_jpeg_raw(f.get(), rgb, w, h, message)) {
    throw InvalidInput("jpeg decode failed for " + path.string() + ": " + message);
  }
  return RasterImage(w, h, std::move(rgb));
}

} // namespace detail

/// Loads a PNG or JPEG, chosen by file signature rather than extension.
inline RasterImage load_image(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InvalidInput("cannot open image " + path.string());
  }
  unsigned char magic[8] = {};
  in.read(reinterpret_cast<char *>(magic), sizeof(magic));
  const auto got = in.gcount();
  if (got >= 8 && png_sig_cmp(magic, 0, 8) == 0) {
    return detail::decode_png(path);
  }
  if (got >= 3 && magic[0] == 0xFF && magic[1] == 0xD8 && magic[2] == 0xFF) {
    return detail::decode_jpeg(path);
  }
  throw InvalidInput("unsupported image format: " + path.string() + " (expected PNG or JPEG)");
}

inline void save_png(const RasterImage &img, const std::filesystem::path &path) {
  if (img.empty()) {
    throw InvalidInput("save_png: empty image");
  }
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.data().data(), 0, nullptr)) {
    throw std::runtime_error("png encode failed for " + path.string() + ": " + image.message);
  }
}

} // namespace vfunnel
