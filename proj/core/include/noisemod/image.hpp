#pragma once

#include "noisemod/tensor.hpp"

#include <string>
#include <vector>

namespace noisemod {

/// Tile equally shaped [c,h,w] images into one [c, rows*h, cols*w] image,
/// row-major. cols defaults to min(n, 10), so 80 images form an 8x10 grid;
/// the last row is padded with zeros when n is not a multiple of cols.
Tensor make_grid(const std::vector<Tensor>& images, std::size_t cols = 0);

/// 8-bit grayscale (c=1) or RGB (c=3) PNG; values clamped from [0,1].
void write_png(const std::string& path, const Tensor& image);

/// Binary PGM (c=1) or PPM (c=3); the dependency-free sibling of the PNG.
void write_pnm(const std::string& path, const Tensor& image);

/// Writes <path_base>.png plus the .pgm/.ppm fallback; returns the PNG path.
std::string export_image_grid(const std::vector<Tensor>& images, const std::string& path_base,
                              std::size_t cols = 0);

} // namespace noisemod
