#pragma once

// Bit-exact 16-bit single-channel PNG codec on top of libpng. Samples are
// stored big-endian in the file, as the PNG spec requires.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <vector>

#include <png.h>

#include "pdcq/core.hpp"

namespace pdcq {

// Decoder failures are distinguishable: a file that is not a PNG at all, a
// PNG with the wrong bit depth, and a PNG with the wrong channel count are
// different errors.
struct PngError : FormatError {
    enum class Kind { not_png, bad_bit_depth, bad_channels };
    Kind kind;
    PngError(Kind k, const std::string& msg) : FormatError(msg), kind(k) {}
};

struct GrayImage16 {
    uint32_t width = 0;
    uint32_t height = 0;
    std::vector<uint16_t> pixels;  // row-major

    GrayImage16() = default;
    GrayImage16(uint32_t w, uint32_t h) : width(w), height(h), pixels(static_cast<size_t>(w) * h, 0) {}
};

namespace detail {

struct FileCloser {
    std::FILE* fp = nullptr;
    ~FileCloser() {
        if (fp) std::fclose(fp);
    }
};

}  // namespace detail

inline GrayImage16 read_gray16_png(const std::filesystem::path& path) {
    detail::FileCloser file;
    file.fp = std::fopen(path.string().c_str(), "rb");
    if (!file.fp) throw IoError("cannot open " + path.string());

    unsigned char sig[8];
    if (std::fread(sig, 1, 8, file.fp) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw PngError(PngError::Kind::not_png, path.string() + " is not a PNG file");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw Error("png_create_info_struct failed");
    }

    GrayImage16 image;
    std::vector<png_bytep> rows;
    std::vector<uint8_t> raw;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw PngError(PngError::Kind::not_png, "corrupt PNG stream in " + path.string());
    }

    png_init_io(png, file.fp);
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const int bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);
    const int channels = png_get_channels(png, info);

    if (bit_depth != 16) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw PngError(PngError::Kind::bad_bit_depth,
                       path.string() + " has bit depth " + std::to_string(bit_depth) + ", expected 16");
    }
    if (color_type != PNG_COLOR_TYPE_GRAY || channels != 1) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw PngError(PngError::Kind::bad_channels,
                       path.string() + " has " + std::to_string(channels) +
                           " channel(s), expected 1 grayscale channel");
    }

    image.width = width;
    image.height = height;
    image.pixels.resize(static_cast<size_t>(width) * height);
    raw.resize(static_cast<size_t>(width) * height * 2);
    rows.resize(height);
    for (png_uint_32 y = 0; y < height; ++y)
        rows[y] = raw.data() + static_cast<size_t>(y) * width * 2;

    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    for (size_t i = 0; i < image.pixels.size(); ++i)
        image.pixels[i] = static_cast<uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
    return image;
}

inline void write_gray16_png(const GrayImage16& image, const std::filesystem::path& path) {
    if (image.pixels.size() != static_cast<size_t>(image.width) * image.height)
        throw ConfigError("image buffer does not match width*height");

    detail::FileCloser file;
    file.fp = std::fopen(path.string().c_str(), "wb");
    if (!file.fp) throw IoError("cannot open " + path.string() + " for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error("png_create_info_struct failed");
    }

    std::vector<uint8_t> raw(static_cast<size_t>(image.width) * image.height * 2);
    for (size_t i = 0; i < image.pixels.size(); ++i) {
        raw[2 * i] = static_cast<uint8_t>(image.pixels[i] >> 8);
        raw[2 * i + 1] = static_cast<uint8_t>(image.pixels[i] & 0xff);
    }
    std::vector<png_bytep> rows(image.height);
    for (uint32_t y = 0; y < image.height; ++y)
        rows[y] = raw.data() + static_cast<size_t>(y) * image.width * 2;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("failed writing PNG " + path.string());
    }

    png_init_io(png, file.fp);
    png_set_IHDR(png, info, image.width, image.height, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);

    if (std::fflush(file.fp) != 0) throw IoError("failed flushing PNG " + path.string());
}

}  // namespace pdcq
