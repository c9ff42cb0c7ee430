#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

namespace lensdeg {

/// H×W×3 float image, interleaved RGB, values in [0, 1].
struct RasterImage {
    int width = 0;
    int height = 0;
    std::vector<float> data;

    RasterImage() = default;
    RasterImage(int w, int h, float fill = 0.0f);

    float& at(int x, int y, int ch) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + ch]; }
    float at(int x, int y, int ch) const {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + ch];
    }

    /// Single channel as a dense row-major plane.
    std::vector<float> channel(int ch) const;
    void set_channel(int ch, std::span<const float> plane);
    /// Rec. 709 luma, row-major.
    std::vector<float> luminance() const;

    /// Throws ValidationError when dimensions or sample ranges are violated.
    void validate() const;

    bool operator==(const RasterImage&) const = default;
};

struct PngOptions {
    /// Treat 8/16-bit code values as linear (v / max). False applies the sRGB transfer curve.
    bool assume_linear = true;
};

struct LoadedImage {
    RasterImage image;
    int bit_depth = 8;
};

/// Gray, gray+alpha, RGB and RGBA inputs are accepted; alpha is dropped, gray replicated.
LoadedImage read_png(const std::string& path, const PngOptions& options = {});
void write_png(const std::string& path, const RasterImage& img, int bit_depth = 8,
               const PngOptions& options = {});
/// In-memory PNG of linear code values.
std::vector<unsigned char> encode_png(const RasterImage& img, int bit_depth = 8);
/// Single-channel plane in [0, 1] as a grayscale PNG.
void write_gray_png(const std::string& path, int width, int height, std::span<const double> values,
                    int bit_depth = 16);

}  // namespace lensdeg
