#pragma once

#include <filesystem>

#include "planefield/tensor.hpp"

namespace planefield {

/// Decodes a PNG into an (H, W, 3) tensor in [0, 1]. Grayscale and palette
/// images are expanded to RGB; an alpha channel is dropped; 16-bit samples
/// are reduced to 8. Throws IoError / FormatError.
Tensor read_png(const std::filesystem::path& path);

/// Encodes an (H, W, 3) or (H, W, 1) tensor in [0, 1] as an 8-bit RGB or
/// grayscale PNG. Values are clamped and quantized with round-half-to-even.
void write_png(const Tensor& image, const std::filesystem::path& path);

/// Raw little-endian float64 dump plus a sibling "<path>.json" manifest
/// recording dtype, shape, and layout.
void write_float_tensor(const Tensor& tensor,
                        const std::filesystem::path& path);
Tensor read_float_tensor(const std::filesystem::path& path);

}  // namespace planefield
