#include "derain/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include "derain/errors.hpp"

namespace derain {
namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

int quantize(float v, int levels) {
    double c = std::min(1.0, std::max(0.0, static_cast<double>(v)));
    return static_cast<int>(std::lround(c * levels));
}

}  // namespace

Image read_image_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw DataError("cannot open PNG for reading: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("libpng init failed: " + path);
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw DataError("libpng init failed: " + path);
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("malformed PNG: " + path);
    }

    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    int bit_depth = png_get_bit_depth(png, info);
    int color_type = png_get_color_type(png, info);

    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (bit_depth == 16) png_set_swap(png);  // stream is big-endian
    png_read_update_info(png, info);

    bit_depth = png_get_bit_depth(png, info);
    int channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("unsupported PNG channel count in " + path);
    }

    std::vector<png_byte> raw(static_cast<size_t>(h) * png_get_rowbytes(png, info));
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y)
        rows[y] = raw.data() + static_cast<size_t>(y) * png_get_rowbytes(png, info);
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Image img(static_cast<int>(h), static_cast<int>(w), channels);
    size_t n = img.data.size();
    if (bit_depth == 16) {
        const uint16_t* src = reinterpret_cast<const uint16_t*>(raw.data());
        for (size_t i = 0; i < n; ++i)
            img.data[i] = static_cast<float>(src[i] / 65535.0);
    } else {
        const uint8_t* src = raw.data();
        for (size_t i = 0; i < n; ++i)
            img.data[i] = static_cast<float>(src[i] / 255.0);
    }
    return img;
}

void write_image_png(const std::string& path, const Image& img, int bit_depth) {
    if (bit_depth != 8 && bit_depth != 16)
        throw ConfigError("PNG bit depth must be 8 or 16");
    if (img.channels != 1 && img.channels != 3)
        throw ShapeError("PNG write supports 1 or 3 channels");
    if (img.empty()) throw ShapeError("cannot write empty image: " + path);

    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw DataError("cannot open PNG for writing: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("libpng init failed: " + path);
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw DataError("libpng init failed: " + path);
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("PNG write failed: " + path);
    }

    png_init_io(png, fp.get());
    int color = (img.channels == 3) ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
    png_set_IHDR(png, info, img.width, img.height, bit_depth, color,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    size_t n = img.data.size();
    if (bit_depth == 16) {
        std::vector<uint16_t> buf(n);
        for (size_t i = 0; i < n; ++i)
            buf[i] = static_cast<uint16_t>(quantize(img.data[i], 65535));
        png_set_swap(png);
        std::vector<png_bytep> rows(img.height);
        for (int y = 0; y < img.height; ++y)
            rows[y] = reinterpret_cast<png_bytep>(buf.data() + static_cast<size_t>(y) * img.width * img.channels);
        png_write_image(png, rows.data());
        png_write_end(png, nullptr);
    } else {
        std::vector<uint8_t> buf(n);
        for (size_t i = 0; i < n; ++i)
            buf[i] = static_cast<uint8_t>(quantize(img.data[i], 255));
        std::vector<png_bytep> rows(img.height);
        for (int y = 0; y < img.height; ++y)
            rows[y] = buf.data() + static_cast<size_t>(y) * img.width * img.channels;
        png_write_image(png, rows.data());
        png_write_end(png, nullptr);
    }
    png_destroy_write_struct(&png, &info);
}

Mask read_mask_png(const std::string& path) {
    Image img = read_image_png(path);
    if (img.channels != 1) throw DataError("mask PNG must be single channel: " + path);
    Mask m(img.height, img.width);
    for (size_t i = 0; i < m.data.size(); ++i)
        m.data[i] = img.data[i] > 0.5f ? 1 : 0;
    return m;
}

void write_mask_png(const std::string& path, const Mask& mask) {
    Image img(mask.height, mask.width, 1);
    for (size_t i = 0; i < mask.data.size(); ++i)
        img.data[i] = mask.data[i] ? 1.0f : 0.0f;
    write_image_png(path, img, 8);
}

}  // namespace derain
