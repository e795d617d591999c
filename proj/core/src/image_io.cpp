#include "planefield/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <vector>

#include <json.hpp>

namespace planefield {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FileHandle = std::unique_ptr<std::FILE, FileCloser>;

// Round-half-to-even 8-bit quantization of a [0, 1] value; nearbyint uses
// the default FE_TONEAREST rounding mode.
unsigned char quantize8(double v) {
  const double clamped = std::clamp(v, 0.0, 1.0);
  return static_cast<unsigned char>(std::nearbyint(clamped * 255.0));
}

}  // namespace

Tensor read_png(const std::filesystem::path& path) {
  FileHandle file(std::fopen(path.string().c_str(), "rb"));
  if (!file) {
    throw IoError("cannot open image: " + path.string());
  }

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("libpng initialization failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng initialization failed");
  }

  std::vector<unsigned char> pixels;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0, height = 0;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("malformed PNG: " + path.string(), 0);
  }

  png_init_io(png, file.get());
  png_read_info(png, info);
  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  const int color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);

  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (color_type == PNG_COLOR_TYPE_GRAY ||
      color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  pixels.resize(static_cast<std::size_t>(height) * width * 3);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) {
    rows[y] = pixels.data() + static_cast<std::size_t>(y) * width * 3;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Tensor out({static_cast<int>(height), static_cast<int>(width), 3});
  for (std::int64_t i = 0; i < out.size(); ++i) {
    out[i] = pixels[static_cast<std::size_t>(i)] / 255.0;
  }
  return out;
}

void write_png(const Tensor& image, const std::filesystem::path& path) {
  if (image.rank() != 3 || (image.dim(2) != 3 && image.dim(2) != 1) ||
      image.dim(0) <= 0 || image.dim(1) <= 0) {
    throw ShapeError("PNG output must be (H, W, 3) or (H, W, 1)");
  }
  const int h = image.dim(0), w = image.dim(1), channels = image.dim(2);

  std::vector<unsigned char> pixels(static_cast<std::size_t>(h) * w * channels);
  for (std::int64_t i = 0; i < image.size(); ++i) {
    if (!std::isfinite(image[i])) {
      throw DomainError("PNG output must be finite");
    }
    pixels[static_cast<std::size_t>(i)] = quantize8(image[i]);
  }

  FileHandle file(std::fopen(path.string().c_str(), "wb"));
  if (!file) {
    throw IoError("cannot open image for writing: " + path.string());
  }
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("libpng initialization failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng initialization failed");
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) {
    rows[static_cast<std::size_t>(y)] =
        pixels.data() + static_cast<std::size_t>(y) * w * channels;
  }

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG encoding failed: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w),
               static_cast<png_uint_32>(h), 8,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_float_tensor(const Tensor& tensor,
                        const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open tensor file for writing: " + path.string());
  }
  out.write(reinterpret_cast<const char*>(tensor.data()),
            static_cast<std::streamsize>(tensor.size() * sizeof(double)));
  if (!out) {
    throw IoError("failed writing tensor file: " + path.string());
  }

  nlohmann::json manifest;
  manifest["dtype"] = "float64";
  manifest["order"] = "row-major";
  manifest["shape"] = tensor.shape();
  std::ofstream meta(path.string() + ".json");
  if (!meta) {
    throw IoError("cannot open tensor manifest for writing: " +
                  path.string() + ".json");
  }
  meta << manifest.dump(2) << "\n";
}

Tensor read_float_tensor(const std::filesystem::path& path) {
  std::ifstream meta(path.string() + ".json");
  if (!meta) {
    throw IoError("cannot open tensor manifest: " + path.string() + ".json");
  }
  nlohmann::json manifest;
  try {
    meta >> manifest;
    if (manifest.at("dtype").get<std::string>() != "float64") {
      throw FormatError("unsupported tensor dtype", 0);
    }
    const auto shape = manifest.at("shape").get<std::vector<int>>();
    Tensor out(shape);
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      throw IoError("cannot open tensor file: " + path.string());
    }
    in.read(reinterpret_cast<char*>(out.data()),
            static_cast<std::streamsize>(out.size() * sizeof(double)));
    if (!in) {
      throw FormatError("tensor file truncated", 0);
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid tensor manifest: ") + e.what(), 0);
  }
}

}  // namespace planefield
