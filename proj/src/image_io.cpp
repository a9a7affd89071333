#include "reface/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>

namespace reface::img {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

uint8_t to_byte(float v) {
    const float scaled = (v + 1.0f) * 127.5f;
    const float clamped = scaled < 0.0f ? 0.0f : (scaled > 255.0f ? 255.0f : scaled);
    return static_cast<uint8_t>(std::lround(clamped));
}

}  // namespace

void save_png(const std::string& path, const Tensor<float>& image) {
    REFACE_CHECK(image.rank() == 3 && image.dim(0) == 3, "save_png: expected [3,H,W], got ",
                 shape_str(image.shape()));
    const int h = image.dim(1), w = image.dim(2);

    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) fail_value("save_png: cannot open '", path, "' for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        fail_value("save_png: libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail_value("save_png: libpng error writing '", path, "'");
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, png_uint_32(w), png_uint_32(h), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<uint8_t> row(size_t(w) * 3);
    const float* px = image.ptr();
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                row[size_t(x) * 3 + size_t(c)] = to_byte(px[(size_t(c) * h + size_t(y)) * w + x]);
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Tensor<float> load_png(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) fail_value("load_png: cannot open '", path, "'");

    uint8_t sig[8];
    if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        fail_value("load_png: '", path, "' is not a PNG file");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail_value("load_png: libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail_value("load_png: libpng error reading '", path, "'");
    }
    png_init_io(png, f.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    // normalize anything to 8-bit RGB
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_packing(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY ||
        png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    const int w = int(png_get_image_width(png, info));
    const int h = int(png_get_image_height(png, info));
    REFACE_CHECK(png_get_channels(png, info) == 3, "load_png: '", path,
                 "' did not normalize to RGB");

    std::vector<uint8_t> pixels(size_t(h) * size_t(w) * 3);
    std::vector<png_bytep> rows(static_cast<size_t>(h));
    for (int y = 0; y < h; ++y) rows[size_t(y)] = pixels.data() + size_t(y) * size_t(w) * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Tensor<float> out({3, h, w});
    float* dst = out.ptr();
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                dst[(size_t(c) * h + size_t(y)) * w + x] =
                    float(pixels[(size_t(y) * w + size_t(x)) * 3 + size_t(c)]) / 127.5f - 1.0f;
    return out;
}

Tensor<float> hstack_images(const std::vector<Tensor<float>>& images) {
    REFACE_CHECK(!images.empty(), "hstack_images: no images");
    const int h = images[0].dim(1), w = images[0].dim(2);
    for (const auto& im : images)
        REFACE_CHECK(im.rank() == 3 && im.dim(0) == 3 && im.dim(1) == h && im.dim(2) == w,
                     "hstack_images: size mismatch, got ", shape_str(im.shape()));
    Tensor<float> out({3, h, int(images.size()) * w});
    const int wo = int(images.size()) * w;
    for (size_t i = 0; i < images.size(); ++i)
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < h; ++y)
                std::memcpy(out.ptr() + (size_t(c) * h + size_t(y)) * wo + i * size_t(w),
                            images[i].ptr() + (size_t(c) * h + size_t(y)) * w, sizeof(float) * w);
    return out;
}

Tensor<float> vstack_images(const std::vector<Tensor<float>>& rows) {
    REFACE_CHECK(!rows.empty(), "vstack_images: no rows");
    const int w = rows[0].dim(2);
    int h_total = 0;
    for (const auto& im : rows) {
        REFACE_CHECK(im.rank() == 3 && im.dim(0) == 3 && im.dim(2) == w,
                     "vstack_images: width mismatch, got ", shape_str(im.shape()));
        h_total += im.dim(1);
    }
    Tensor<float> out({3, h_total, w});
    int y0 = 0;
    for (const auto& im : rows) {
        const int h = im.dim(1);
        for (int c = 0; c < 3; ++c)
            std::memcpy(out.ptr() + (size_t(c) * h_total + size_t(y0)) * w,
                        im.ptr() + size_t(c) * h * w, sizeof(float) * size_t(h) * w);
        y0 += h;
    }
    return out;
}

}  // namespace reface::img
