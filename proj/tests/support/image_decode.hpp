// Minimal readers for the PNG/PNM files this project writes, used to
// verify round-trips. Handles exactly the encoder's output profile:
// 8-bit gray or RGB, filter 0, single IDAT.
#pragma once

#include <zlib.h>

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace imgdec {

struct DecodedImage {
    std::size_t width = 0, height = 0, channels = 0;
    std::vector<std::uint8_t> pixels; // interleaved rows
};

inline std::vector<std::uint8_t> read_all(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return {raw.begin(), raw.end()};
}

inline std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t off) {
    return (static_cast<std::uint32_t>(b.at(off)) << 24) |
           (static_cast<std::uint32_t>(b.at(off + 1)) << 16) |
           (static_cast<std::uint32_t>(b.at(off + 2)) << 8) |
           static_cast<std::uint32_t>(b.at(off + 3));
}

inline DecodedImage decode_png(const std::string& path) {
    const auto buf = read_all(path);
    static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    for (int i = 0; i < 8; ++i)
        if (buf.at(i) != sig[i]) throw std::runtime_error("bad PNG signature");

    DecodedImage img;
    std::vector<std::uint8_t> idat;
    std::size_t pos = 8;
    int bit_depth = 0, color_type = -1;
    while (pos + 8 <= buf.size()) {
        const std::uint32_t len = be32(buf, pos);
        const std::string type(buf.begin() + pos + 4, buf.begin() + pos + 8);
        const std::size_t data_at = pos + 8;
        if (data_at + len + 4 > buf.size()) throw std::runtime_error("truncated chunk");

        const uLong crc_expect = be32(buf, data_at + len);
        const uLong crc_actual = crc32(0L, buf.data() + pos + 4, static_cast<uInt>(4 + len));
        if (crc_expect != crc_actual) throw std::runtime_error("chunk CRC mismatch");

        if (type == "IHDR") {
            img.width = be32(buf, data_at);
            img.height = be32(buf, data_at + 4);
            bit_depth = buf.at(data_at + 8);
            color_type = buf.at(data_at + 9);
        } else if (type == "IDAT") {
            idat.insert(idat.end(), buf.begin() + data_at, buf.begin() + data_at + len);
        } else if (type == "IEND") {
            break;
        }
        pos = data_at + len + 4;
    }
    if (bit_depth != 8 || (color_type != 0 && color_type != 2))
        throw std::runtime_error("unsupported PNG profile");
    img.channels = color_type == 0 ? 1 : 3;

    const std::size_t row = 1 + img.width * img.channels;
    std::vector<std::uint8_t> raw(img.height * row);
    uLongf raw_len = raw.size();
    if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
        raw_len != raw.size())
        throw std::runtime_error("inflate failed");

    img.pixels.reserve(img.height * img.width * img.channels);
    for (std::size_t y = 0; y < img.height; ++y) {
        if (raw[y * row] != 0) throw std::runtime_error("unexpected PNG filter");
        img.pixels.insert(img.pixels.end(), raw.begin() + y * row + 1,
                          raw.begin() + (y + 1) * row);
    }
    return img;
}

inline DecodedImage decode_pnm(const std::string& path) {
    const auto buf = read_all(path);
    DecodedImage img;
    std::size_t pos = 0;
    auto token = [&]() {
        while (pos < buf.size() && std::isspace(buf[pos])) ++pos;
        std::string t;
        while (pos < buf.size() && !std::isspace(buf[pos])) t.push_back(static_cast<char>(buf[pos++]));
        return t;
    };
    const std::string magic = token();
    if (magic == "P5") img.channels = 1;
    else if (magic == "P6") img.channels = 3;
    else throw std::runtime_error("bad PNM magic");
    img.width = std::stoul(token());
    img.height = std::stoul(token());
    if (token() != "255") throw std::runtime_error("unexpected maxval");
    ++pos; // single whitespace after maxval
    const std::size_t n = img.width * img.height * img.channels;
    if (buf.size() - pos != n) throw std::runtime_error("bad PNM payload size");
    img.pixels.assign(buf.begin() + pos, buf.end());
    return img;
}

} // namespace imgdec
