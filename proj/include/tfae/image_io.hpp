#pragma once

// 8-bit PNG / PGM (P5) / JPEG input and 8-bit grayscale PNG output.

#include <png.h>
#include <stdio.h>  // jpeglib.h needs FILE before inclusion
#include <jpeglib.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tfae/error.hpp"
#include "tfae/image.hpp"

namespace tfae {

enum class Channel { gray, red, green, blue };

inline std::string_view to_string(Channel c) {
  switch (c) {
    case Channel::gray: return "gray";
    case Channel::red: return "red";
    case Channel::green: return "green";
    case Channel::blue: return "blue";
  }
  return "?";
}

inline Channel parse_channel(std::string_view s) {
  if (s == "gray") return Channel::gray;
  if (s == "red") return Channel::red;
  if (s == "green") return Channel::green;
  if (s == "blue") return Channel::blue;
  throw ParameterError("unknown channel '" + std::string(s) + "'");
}

namespace detail {

/// Decoded 8-bit raster, 1 or 3 interleaved components.
struct Raster {
  std::size_t width = 0;
  std::size_t height = 0;
  int components = 1;
  std::vector<std::uint8_t> bytes;
};

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for '" + path + "'");
  return data;
}

inline Raster decode_png(const std::vector<std::uint8_t>& file, const std::string& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, file.data(), file.size())) {
    throw FormatError("'" + path + "': " + image.message);
  }
  if (image.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&image);
    throw FormatError("'" + path + "': only 8-bit PNG is supported");
  }
  Raster r;
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  r.width = image.width;
  r.height = image.height;
  r.components = color ? 3 : 1;
  r.bytes.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, r.bytes.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw FormatError("'" + path + "': " + msg);
  }
  return r;
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

inline Raster decode_jpeg(const std::vector<std::uint8_t>& file, const std::string& path) {
  jpeg_decompress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  Raster r;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw FormatError("'" + path + "': " + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, file.data(), static_cast<unsigned long>(file.size()));
  jpeg_read_header(&cinfo, TRUE);
  if (cinfo.data_precision != 8) {
    jpeg_destroy_decompress(&cinfo);
    throw FormatError("'" + path + "': only 8-bit JPEG is supported");
  }
  cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_start_decompress(&cinfo);
  r.width = cinfo.output_width;
  r.height = cinfo.output_height;
  r.components = cinfo.output_components;
  r.bytes.resize(r.width * r.height * static_cast<std::size_t>(r.components));
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = r.bytes.data() + static_cast<std::size_t>(cinfo.output_scanline) * r.width *
                                        static_cast<std::size_t>(r.components);
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return r;
}

inline Raster decode_pgm(const std::vector<std::uint8_t>& file, const std::string& path) {
  std::size_t pos = 2;
  auto next_token = [&]() -> long {
    while (pos < file.size()) {
      if (file[pos] == '#') {
        while (pos < file.size() && file[pos] != '\n') ++pos;
      } else if (std::isspace(file[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    long value = 0;
    bool any = false;
    while (pos < file.size() && std::isdigit(file[pos])) {
      value = value * 10 + (file[pos] - '0');
      ++pos;
      any = true;
      if (value > 1'000'000) throw FormatError("'" + path + "': PGM header value too large");
    }
    if (!any) throw FormatError("'" + path + "': malformed PGM header");
    return value;
  };
  const long w = next_token();
  const long h = next_token();
  const long maxval = next_token();
  ++pos;  // single whitespace before the raster
  if (maxval <= 0 || maxval > 255) throw FormatError("'" + path + "': only 8-bit PGM is supported");
  Raster r;
  r.width = static_cast<std::size_t>(w);
  r.height = static_cast<std::size_t>(h);
  r.components = 1;
  if (file.size() < pos + r.width * r.height) throw FormatError("'" + path + "': truncated PGM");
  r.bytes.assign(file.begin() + static_cast<std::ptrdiff_t>(pos),
                 file.begin() + static_cast<std::ptrdiff_t>(pos + r.width * r.height));
  if (maxval != 255) {
    for (auto& b : r.bytes) {
      b = static_cast<std::uint8_t>(std::lround(255.0 * std::min<long>(b, maxval) / maxval));
    }
  }
  return r;
}

inline Raster decode_any(const std::string& path) {
  const std::vector<std::uint8_t> file = read_file(path);
  static constexpr std::array<std::uint8_t, 4> png_magic{0x89, 'P', 'N', 'G'};
  if (file.size() >= 4 && std::equal(png_magic.begin(), png_magic.end(), file.begin())) {
    return decode_png(file, path);
  }
  if (file.size() >= 2 && file[0] == 'P' && file[1] == '5') return decode_pgm(file, path);
  if (file.size() >= 2 && file[0] == 0xFF && file[1] == 0xD8) return decode_jpeg(file, path);
  throw FormatError("'" + path + "': not a PNG, binary PGM or JPEG file");
}

}  // namespace detail

/// Loads an 8-bit image and extracts one channel as intensities in [0,1].
///
/// With no channel requested, colour images use green and grayscale images
/// use their single channel. Requesting a colour channel from a grayscale
/// file falls back to gray and writes a warning to `warn` (if non-null).
/// `Channel::gray` on a colour file uses BT.601 luma.
inline Image load_image(const std::string& path, std::optional<Channel> channel = std::nullopt,
                        std::ostream* warn = &std::cerr) {
  const detail::Raster r = detail::decode_any(path);
  Image img(r.width, r.height);
  Channel ch = channel.value_or(r.components == 1 ? Channel::gray : Channel::green);
  if (r.components == 1 && ch != Channel::gray) {
    if (warn) {
      *warn << "warning: '" << path << "' is grayscale; ignoring channel '" << to_string(ch)
            << "'\n";
    }
    ch = Channel::gray;
  }
  const auto n = r.width * r.height;
  for (std::size_t i = 0; i < n; ++i) {
    double v = 0.0;
    if (r.components == 1) {
      v = r.bytes[i];
    } else {
      const std::uint8_t* px = &r.bytes[3 * i];
      switch (ch) {
        case Channel::red: v = px[0]; break;
        case Channel::green: v = px[1]; break;
        case Channel::blue: v = px[2]; break;
        case Channel::gray: v = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]; break;
      }
    }
    img.values()[i] = v / 255.0;
  }
  return img;
}

/// Writes 8-bit grayscale PNG; row-major bytes.
inline void write_png_gray(const std::string& path, std::size_t width, std::size_t height,
                           const std::vector<std::uint8_t>& bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, bytes.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot write '" + path + "': " + msg);
  }
}

/// Intensities are clamped to [0,1] and quantized to 0..255.
inline void save_image_png(const std::string& path, const Image& img) {
  std::vector<std::uint8_t> bytes(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    bytes[i] = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(img.values()[i], 0.0, 1.0)));
  }
  write_png_gray(path, img.width(), img.height(), bytes);
}

/// Vessel pixels written as 255, background as 0.
inline void save_mask_png(const std::string& path, const BinaryMask& mask) {
  std::vector<std::uint8_t> bytes(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) bytes[i] = mask.grid().values()[i] ? 255 : 0;
  write_png_gray(path, mask.width(), mask.height(), bytes);
}

/// Any nonzero pixel of the first channel counts as vessel.
inline BinaryMask load_mask(const std::string& path) {
  const detail::Raster r = detail::decode_any(path);
  Grid<std::uint8_t> g(r.width, r.height);
  for (std::size_t i = 0; i < r.width * r.height; ++i) {
    g.values()[i] = r.bytes[i * static_cast<std::size_t>(r.components)];
  }
  return BinaryMask::from_nonzero(g);
}

}  // namespace tfae
