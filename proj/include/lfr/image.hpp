#pragma once

#include "lfr/error.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace lfr {

/// Interleaved RGB image with float channels, row-major, y down.
struct ImageRGB {
    int width = 0;
    int height = 0;
    std::vector<float> data;

    ImageRGB() = default;
    ImageRGB(int w, int h, float fill = 0.0f) : width(w), height(h), data(std::size_t(w) * h * 3, fill) {}

    float* pixel(int x, int y) { return data.data() + (std::size_t(y) * width + x) * 3; }
    const float* pixel(int x, int y) const { return data.data() + (std::size_t(y) * width + x) * 3; }
};

/// Single-channel float map, used for transmittance.
struct ImageGray {
    int width = 0;
    int height = 0;
    std::vector<float> data;

    ImageGray() = default;
    ImageGray(int w, int h, float fill = 0.0f) : width(w), height(h), data(std::size_t(w) * h, fill) {}

    float& at(int x, int y) { return data[std::size_t(y) * width + x]; }
    float at(int x, int y) const { return data[std::size_t(y) * width + x]; }
};

/// 8-bit interleaved image with 1 (gray), 3 (RGB) or 4 (RGBA) channels.
struct Image8 {
    int width = 0;
    int height = 0;
    int channels = 3;
    std::vector<std::uint8_t> data;

    Image8() = default;
    Image8(int w, int h, int c = 3, std::uint8_t fill = 0)
        : width(w), height(h), channels(c), data(std::size_t(w) * h * c, fill) {}

    std::uint8_t* pixel(int x, int y) { return data.data() + (std::size_t(y) * width + x) * channels; }
    const std::uint8_t* pixel(int x, int y) const {
        return data.data() + (std::size_t(y) * width + x) * channels;
    }
    friend bool operator==(const Image8&, const Image8&) = default;
};

inline std::uint8_t quantize_unit(float v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

inline Image8 to_rgb8(const ImageRGB& img) {
    Image8 out(img.width, img.height, 3);
    std::transform(img.data.begin(), img.data.end(), out.data.begin(), quantize_unit);
    return out;
}

inline Image8 to_gray8(const ImageGray& img) {
    Image8 out(img.width, img.height, 1);
    std::transform(img.data.begin(), img.data.end(), out.data.begin(), quantize_unit);
    return out;
}

inline ImageRGB to_float(const Image8& img) {
    if (img.channels != 3) throw ArgumentError("to_float: expected an RGB image");
    ImageRGB out(img.width, img.height);
    std::transform(img.data.begin(), img.data.end(), out.data.begin(),
                   [](std::uint8_t v) { return float(v) / 255.0f; });
    return out;
}

namespace detail {

inline void png_append(png_structp png, png_bytep bytes, png_size_t n) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), bytes, bytes + n);
}

struct PngSource {
    std::span<const std::uint8_t> bytes;
    std::size_t offset = 0;
};

inline void png_consume(png_structp png, png_bytep dst, png_size_t n) {
    auto* src = static_cast<PngSource*>(png_get_io_ptr(png));
    if (src->offset + n > src->bytes.size()) png_error(png, "truncated PNG stream");
    std::memcpy(dst, src->bytes.data() + src->offset, n);
    src->offset += n;
}

inline void png_record_error(png_structp png, png_const_charp msg) {
    auto* slot = static_cast<std::string*>(png_get_error_ptr(png));
    if (slot) *slot = msg;
    png_longjmp(png, 1);
}

}  // namespace detail

/// Encodes to PNG in memory. Output is deterministic for identical pixels.
inline std::vector<std::uint8_t> encode_png(const Image8& img) {
    const int color_type = [&] {
        switch (img.channels) {
            case 1: return PNG_COLOR_TYPE_GRAY;
            case 3: return PNG_COLOR_TYPE_RGB;
            case 4: return PNG_COLOR_TYPE_RGBA;
            default: throw ArgumentError("encode_png: unsupported channel count");
        }
    }();
    std::string message;
    std::vector<std::uint8_t> out;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, detail::png_record_error, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw FormatError("png: " + message);
    }
    {
        png_set_write_fn(png, &out, detail::png_append, nullptr);
        png_set_IHDR(png, info, img.width, img.height, 8, color_type, PNG_INTERLACE_NONE,
                     PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        const std::size_t stride = std::size_t(img.width) * img.channels;
        for (int y = 0; y < img.height; ++y)
            png_write_row(png, const_cast<png_bytep>(img.data.data() + stride * y));
        png_write_end(png, nullptr);
    }
    png_destroy_write_struct(&png, &info);
    return out;
}

/// Decodes 8-bit gray/RGB/RGBA PNGs (palette and 16-bit are converted).
inline Image8 decode_png(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw FormatError("png: bad signature");
    std::string message;
    detail::PngSource src{bytes, 0};
    Image8 img;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, detail::png_record_error, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("png: " + message);
    }
    {
        png_set_read_fn(png, &src, detail::png_consume);
        png_read_info(png, info);
        png_set_strip_16(png);
        png_set_palette_to_rgb(png);
        png_set_expand_gray_1_2_4_to_8(png);
        png_read_update_info(png, info);
        img.width = static_cast<int>(png_get_image_width(png, info));
        img.height = static_cast<int>(png_get_image_height(png, info));
        img.channels = png_get_channels(png, info);
        img.data.resize(std::size_t(img.width) * img.height * img.channels);
        const std::size_t stride = std::size_t(img.width) * img.channels;
        for (int y = 0; y < img.height; ++y) png_read_row(png, img.data.data() + stride * y, nullptr);
    }
    png_destroy_read_struct(&png, &info, nullptr);
    if (img.channels == 2) throw FormatError("png: gray+alpha images are not supported");
    return img;
}

inline void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path);
}

inline std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_png(const std::string& path, const Image8& img) { write_file(path, encode_png(img)); }

inline Image8 read_png(const std::string& path) { return decode_png(read_file(path)); }

}  // namespace lfr
