#include "noisemod/image.hpp"

#include "noisemod/error.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace noisemod {

Tensor make_grid(const std::vector<Tensor>& images, std::size_t cols) {
    if (images.empty()) throw ShapeError("make_grid: no images");
    const Tensor& first = images[0];
    if (first.rank() != 3) throw ShapeError("make_grid: images must be [c,h,w]");
    for (const Tensor& img : images)
        if (!img.same_shape(first)) throw ShapeError("make_grid: mixed image shapes");

    const std::size_t n = images.size();
    if (cols == 0) cols = std::min<std::size_t>(n, 10);
    const std::size_t rows = (n + cols - 1) / cols;
    const std::size_t c = first.shape[0], h = first.shape[1], w = first.shape[2];

    Tensor grid({c, rows * h, cols * w});
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = i / cols, col = i % cols;
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t y = 0; y < h; ++y) {
                const double* src = images[i].data.data() + (ch * h + y) * w;
                double* dst = grid.data.data() +
                              (ch * rows * h + r * h + y) * cols * w + col * w;
                std::memcpy(dst, src, w * sizeof(double));
            }
    }
    return grid;
}

namespace {

std::uint8_t to_u8(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void check_image(const Tensor& image) {
    if (image.rank() != 3 || (image.shape[0] != 1 && image.shape[0] != 3))
        throw ShapeError("image writer: want [1,h,w] or [3,h,w], got " + image.shape_str());
}

// Interleaved 8-bit rows, each prefixed with the PNG filter byte 0.
std::vector<std::uint8_t> filtered_scanlines(const Tensor& image) {
    const std::size_t c = image.shape[0], h = image.shape[1], w = image.shape[2];
    std::vector<std::uint8_t> raw;
    raw.reserve(h * (1 + w * c));
    for (std::size_t y = 0; y < h; ++y) {
        raw.push_back(0);
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t ch = 0; ch < c; ++ch)
                raw.push_back(to_u8(image.data[(ch * h + y) * w + x]));
    }
    return raw;
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void put_chunk(std::vector<std::uint8_t>& out, const char type[4],
               const std::vector<std::uint8_t>& payload) {
    put_be32(out, static_cast<std::uint32_t>(payload.size()));
    const std::size_t type_at = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    const uLong crc =
        crc32(0L, out.data() + type_at, static_cast<uInt>(4 + payload.size()));
    put_be32(out, static_cast<std::uint32_t>(crc));
}

} // namespace

void write_png(const std::string& path, const Tensor& image) {
    check_image(image);
    const std::size_t c = image.shape[0], h = image.shape[1], w = image.shape[2];

    const std::vector<std::uint8_t> raw = filtered_scanlines(image);
    uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> zdata(zlen);
    if (compress2(zdata.data(), &zlen, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw Error("write_png: deflate failed");
    zdata.resize(zlen);

    std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    std::vector<std::uint8_t> ihdr;
    put_be32(ihdr, static_cast<std::uint32_t>(w));
    put_be32(ihdr, static_cast<std::uint32_t>(h));
    ihdr.push_back(8);                      // bit depth
    ihdr.push_back(c == 1 ? 0 : 2);         // grayscale / truecolor
    ihdr.insert(ihdr.end(), {0, 0, 0});     // compression, filter, interlace
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", zdata);
    put_chunk(out, "IEND", {});

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("write_png: cannot open " + path);
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw DataError("write_png: write failed for " + path);
}

void write_pnm(const std::string& path, const Tensor& image) {
    check_image(image);
    const std::size_t c = image.shape[0], h = image.shape[1], w = image.shape[2];

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("write_pnm: cannot open " + path);
    f << (c == 1 ? "P5" : "P6") << "\n" << w << " " << h << "\n255\n";
    std::vector<std::uint8_t> row(w * c);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t ch = 0; ch < c; ++ch)
                row[x * c + ch] = to_u8(image.data[(ch * h + y) * w + x]);
        f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!f) throw DataError("write_pnm: write failed for " + path);
}

std::string export_image_grid(const std::vector<Tensor>& images, const std::string& path_base,
                              std::size_t cols) {
    const Tensor grid = make_grid(images, cols);
    std::string base = path_base;
    if (base.size() > 4 && base.substr(base.size() - 4) == ".png")
        base = base.substr(0, base.size() - 4);
    const std::string png = base + ".png";
    write_png(png, grid);
    write_pnm(base + (grid.shape[0] == 1 ? ".pgm" : ".ppm"), grid);
    return png;
}

} // namespace noisemod
