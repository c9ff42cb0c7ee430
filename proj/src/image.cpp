#include "lensdeg/image.hpp"

#include "lensdeg/error.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace lensdeg {

RasterImage::RasterImage(int w, int h, float fill)
    : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, fill) {}

std::vector<float> RasterImage::channel(int ch) const {
    std::vector<float> plane(static_cast<std::size_t>(width) * height);
    for (std::size_t i = 0; i < plane.size(); ++i) plane[i] = data[i * 3 + ch];
    return plane;
}

void RasterImage::set_channel(int ch, std::span<const float> plane) {
    for (std::size_t i = 0; i < plane.size(); ++i) data[i * 3 + ch] = plane[i];
}

std::vector<float> RasterImage::luminance() const {
    std::vector<float> y(static_cast<std::size_t>(width) * height);
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] = 0.2126f * data[i * 3] + 0.7152f * data[i * 3 + 1] + 0.0722f * data[i * 3 + 2];
    }
    return y;
}

void RasterImage::validate() const {
    if (width <= 0 || height <= 0) throw ValidationError("image dimensions must be positive");
    if (data.size() != static_cast<std::size_t>(width) * height * 3) {
        throw ValidationError("image buffer does not match its dimensions");
    }
    if (!std::ranges::all_of(data, [](float v) { return v >= 0.0f && v <= 1.0f; })) {
        throw ValidationError("image samples must lie in [0, 1]");
    }
}

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

double srgb_to_linear(double v) {
    return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}
double linear_to_srgb(double v) {
    return v <= 0.0031308 ? v * 12.92 : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

[[noreturn]] void png_fail(png_structp, png_const_charp msg) { throw IoError(std::string("png: ") + msg); }
void png_warn(png_structp, png_const_charp) {}

void append_bytes(png_structp png, png_bytep data, png_size_t n) {
    auto* out = static_cast<std::vector<unsigned char>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + n);
}
void flush_nothing(png_structp) {}

std::vector<unsigned char> encode_rows(int width, int height, int channels, int bit_depth,
                                       const std::vector<std::uint16_t>& samples) {
    if (bit_depth != 8 && bit_depth != 16) throw ValidationError("PNG bit depth must be 8 or 16");
    std::vector<unsigned char> bytes;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
    png_infop info = png_create_info_struct(png);
    try {
        png_set_write_fn(png, &bytes, append_bytes, flush_nothing);
        png_set_IHDR(png, info, width, height, bit_depth,
                     channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                     PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        const std::size_t row_samples = static_cast<std::size_t>(width) * channels;
        std::vector<png_byte> row(row_samples * (bit_depth / 8));
        for (int y = 0; y < height; ++y) {
            const auto* src = &samples[y * row_samples];
            for (std::size_t i = 0; i < row_samples; ++i) {
                if (bit_depth == 8) {
                    row[i] = static_cast<png_byte>(src[i]);
                } else {
                    row[2 * i] = static_cast<png_byte>(src[i] >> 8);
                    row[2 * i + 1] = static_cast<png_byte>(src[i] & 0xff);
                }
            }
            png_write_row(png, row.data());
        }
        png_write_end(png, nullptr);
    } catch (...) {
        png_destroy_write_struct(&png, &info);
        throw;
    }
    png_destroy_write_struct(&png, &info);
    return bytes;
}

void write_rows(const std::string& path, int width, int height, int channels, int bit_depth,
                const std::vector<std::uint16_t>& samples) {
    const auto bytes = encode_rows(width, height, channels, bit_depth, samples);
    FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file || std::fwrite(bytes.data(), 1, bytes.size(), file.get()) != bytes.size()) {
        throw IoError("cannot write '" + path + "'");
    }
}

std::uint16_t quantize(double v, int bit_depth) {
    const double max = bit_depth == 8 ? 255.0 : 65535.0;
    return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * max));
}

}  // namespace

LoadedImage read_png(const std::string& path, const PngOptions& options) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) throw IoError("cannot open image '" + path + "'");
    png_byte sig[8];
    if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw IoError("'" + path + "' is not a PNG file");
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
    png_infop info = png_create_info_struct(png);
    LoadedImage out;
    try {
        png_init_io(png, file.get());
        png_set_sig_bytes(png, 8);
        png_read_info(png, info);
        const int width = static_cast<int>(png_get_image_width(png, info));
        const int height = static_cast<int>(png_get_image_height(png, info));
        const int color = png_get_color_type(png, info);
        int depth = png_get_bit_depth(png, info);
        if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
        if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
        if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
        if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
        png_set_strip_alpha(png);
        if (depth < 8) depth = 8;
        png_read_update_info(png, info);

        out.bit_depth = depth;
        out.image = RasterImage(width, height);
        const std::size_t rowbytes = png_get_rowbytes(png, info);
        std::vector<png_byte> row(rowbytes);
        const double max = depth == 16 ? 65535.0 : 255.0;
        for (int y = 0; y < height; ++y) {
            png_read_row(png, row.data(), nullptr);
            for (int x = 0; x < width; ++x) {
                for (int ch = 0; ch < 3; ++ch) {
                    const std::size_t i = static_cast<std::size_t>(x) * 3 + ch;
                    const double code = depth == 16 ? (row[2 * i] << 8 | row[2 * i + 1]) : row[i];
                    double v = code / max;
                    if (!options.assume_linear) v = srgb_to_linear(v);
                    out.image.at(x, y, ch) = static_cast<float>(v);
                }
            }
        }
        png_read_end(png, nullptr);
    } catch (...) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw;
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

void write_png(const std::string& path, const RasterImage& img, int bit_depth, const PngOptions& options) {
    std::vector<std::uint16_t> samples(img.data.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double v = img.data[i];
        if (!options.assume_linear) v = linear_to_srgb(std::clamp(v, 0.0, 1.0));
        samples[i] = quantize(v, bit_depth);
    }
    write_rows(path, img.width, img.height, 3, bit_depth, samples);
}

std::vector<unsigned char> encode_png(const RasterImage& img, int bit_depth) {
    std::vector<std::uint16_t> samples(img.data.size());
    for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = quantize(img.data[i], bit_depth);
    return encode_rows(img.width, img.height, 3, bit_depth, samples);
}

void write_gray_png(const std::string& path, int width, int height, std::span<const double> values,
                    int bit_depth) {
    if (values.size() != static_cast<std::size_t>(width) * height) {
        throw ValidationError("gray plane does not match its dimensions");
    }
    std::vector<std::uint16_t> samples(values.size());
    for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = quantize(values[i], bit_depth);
    write_rows(path, width, height, 1, bit_depth, samples);
}

}  // namespace lensdeg
