#include "simicl/png_io.hpp"

#include <zlib.h>

#include <array>
#include <cstring>
#include <fstream>

namespace simicl {

namespace {

void put_u32_be(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

uint32_t read_u32_be(const uint8_t* p) {
    return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
           (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

void append_chunk(std::vector<uint8_t>& out, const char type[4], const std::vector<uint8_t>& payload) {
    put_u32_be(out, static_cast<uint32_t>(payload.size()));
    std::vector<uint8_t> body(type, type + 4);
    body.insert(body.end(), payload.begin(), payload.end());
    out.insert(out.end(), body.begin(), body.end());
    const uint32_t crc = static_cast<uint32_t>(crc32(0L, body.data(), static_cast<uInt>(body.size())));
    put_u32_be(out, crc);
}

std::vector<uint8_t> zlib_compress(const std::vector<uint8_t>& raw) {
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> out(bound);
    if (compress2(out.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK) {
        throw Error(ErrorCode::IoError, "zlib compression failed");
    }
    out.resize(bound);
    return out;
}

std::vector<uint8_t> zlib_decompress(const std::vector<uint8_t>& packed, size_t expected) {
    std::vector<uint8_t> out(expected);
    uLongf out_len = static_cast<uLongf>(expected);
    if (uncompress(out.data(), &out_len, packed.data(), static_cast<uLong>(packed.size())) != Z_OK ||
        out_len != expected) {
        throw Error(ErrorCode::IoError, "zlib decompression failed");
    }
    return out;
}

constexpr std::array<uint8_t, 8> kPngSignature = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};

uint8_t paeth(uint8_t a, uint8_t b, uint8_t c) {
    const int p = int(a) + int(b) - int(c);
    const int pa = std::abs(p - int(a));
    const int pb = std::abs(p - int(b));
    const int pc = std::abs(p - int(c));
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

} // namespace

void write_png_gray8(const std::string& path, const GridU8& img) {
    if (img.rows <= 0 || img.cols <= 0) {
        throw Error(ErrorCode::InvalidDimension, "cannot write empty image: " + path);
    }
    // Filter 0 (None) on every scanline keeps the output deterministic.
    std::vector<uint8_t> raw;
    raw.reserve(static_cast<size_t>(img.rows) * (img.cols + 1));
    for (int r = 0; r < img.rows; ++r) {
        raw.push_back(0);
        const uint8_t* row = &img.data[static_cast<size_t>(r) * img.cols];
        raw.insert(raw.end(), row, row + img.cols);
    }

    std::vector<uint8_t> file(kPngSignature.begin(), kPngSignature.end());
    std::vector<uint8_t> ihdr;
    put_u32_be(ihdr, static_cast<uint32_t>(img.cols));
    put_u32_be(ihdr, static_cast<uint32_t>(img.rows));
    ihdr.push_back(8); // bit depth
    ihdr.push_back(0); // color type: grayscale
    ihdr.push_back(0); // compression
    ihdr.push_back(0); // filter method
    ihdr.push_back(0); // no interlace
    append_chunk(file, "IHDR", ihdr);
    append_chunk(file, "IDAT", zlib_compress(raw));
    append_chunk(file, "IEND", {});

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot open for writing: " + path);
    }
    out.write(reinterpret_cast<const char*>(file.data()), static_cast<std::streamsize>(file.size()));
    if (!out) {
        throw Error(ErrorCode::IoError, "short write: " + path);
    }
}

GridU8 read_png_gray8(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open for reading: " + path);
    }
    std::vector<uint8_t> file((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (file.size() < 8 || !std::equal(kPngSignature.begin(), kPngSignature.end(), file.begin())) {
        throw Error(ErrorCode::ParseError, "not a PNG file: " + path);
    }

    uint32_t width = 0;
    uint32_t height = 0;
    bool have_header = false;
    std::vector<uint8_t> idat;
    size_t pos = 8;
    while (pos + 12 <= file.size()) {
        const uint32_t length = read_u32_be(&file[pos]);
        const char* type = reinterpret_cast<const char*>(&file[pos + 4]);
        if (pos + 12 + length > file.size()) {
            throw Error(ErrorCode::ParseError, "truncated PNG chunk: " + path);
        }
        const uint8_t* payload = &file[pos + 8];
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (length != 13) {
                throw Error(ErrorCode::ParseError, "bad IHDR: " + path);
            }
            width = read_u32_be(payload);
            height = read_u32_be(payload + 4);
            const uint8_t bit_depth = payload[8];
            const uint8_t color_type = payload[9];
            const uint8_t interlace = payload[12];
            if (bit_depth != 8 || color_type != 0 || interlace != 0) {
                throw Error(ErrorCode::ParseError, "unsupported PNG variant (need gray8): " + path);
            }
            have_header = true;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), payload, payload + length);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        pos += 12 + length;
    }
    if (!have_header || width == 0 || height == 0) {
        throw Error(ErrorCode::ParseError, "missing PNG header: " + path);
    }

    const size_t stride = width;
    std::vector<uint8_t> raw = zlib_decompress(idat, (stride + 1) * height);

    GridU8 img(static_cast<int>(height), static_cast<int>(width));
    std::vector<uint8_t> prev(stride, 0);
    for (uint32_t r = 0; r < height; ++r) {
        const uint8_t filter = raw[r * (stride + 1)];
        const uint8_t* src = &raw[r * (stride + 1) + 1];
        uint8_t* dst = &img.data[static_cast<size_t>(r) * stride];
        for (uint32_t c = 0; c < stride; ++c) {
            const uint8_t left = c > 0 ? dst[c - 1] : 0;
            const uint8_t up = prev[c];
            const uint8_t up_left = c > 0 ? prev[c - 1] : 0;
            switch (filter) {
            case 0: dst[c] = src[c]; break;
            case 1: dst[c] = static_cast<uint8_t>(src[c] + left); break;
            case 2: dst[c] = static_cast<uint8_t>(src[c] + up); break;
            case 3: dst[c] = static_cast<uint8_t>(src[c] + ((int(left) + int(up)) >> 1)); break;
            case 4: dst[c] = static_cast<uint8_t>(src[c] + paeth(left, up, up_left)); break;
            default:
                throw Error(ErrorCode::ParseError, "unknown PNG filter: " + path);
            }
        }
        std::memcpy(prev.data(), dst, stride);
    }
    return img;
}

} // namespace simicl
