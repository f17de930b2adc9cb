#pragma once
#include <cstdint>
#include <vector>

namespace derain {

// Interleaved HWC float image, intensities nominally in [0,1].
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<float> data;

    Image() = default;
    Image(int h, int w, int c, float fill = 0.0f)
        : height(h), width(w), channels(c),
          data(static_cast<size_t>(h) * w * c, fill) {}

    float& at(int y, int x, int c = 0) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    const float& at(int y, int x, int c = 0) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }

    size_t pixel_count() const { return static_cast<size_t>(height) * width; }
    bool same_shape(const Image& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
    bool empty() const { return data.empty(); }
};

// Binary per-pixel map, values are exactly 0 or 1.
struct Mask {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> data;

    Mask() = default;
    Mask(int h, int w, uint8_t fill = 0)
        : height(h), width(w), data(static_cast<size_t>(h) * w, fill) {}

    uint8_t& at(int y, int x) { return data[static_cast<size_t>(y) * width + x]; }
    uint8_t at(int y, int x) const { return data[static_cast<size_t>(y) * width + x]; }
    size_t count_ones() const;
};

void clip01(Image& img);

// Snap every value to the 16-bit PNG grid (round(v*65535)/65535). Synthesis
// quantizes B and S before compositing so the on-disk dataset reproduces the
// formation equations exactly after re-quantization.
void snap_to_grid16(Image& img);

Image crop(const Image& img, int y0, int x0, int h, int w);
Mask crop(const Mask& m, int y0, int x0, int h, int w);

// Replicates a single channel across `channels`, or drops to 1 channel by
// BT.601 luminance. Identity when counts already match.
Image with_channels(const Image& img, int channels);

float max_abs_diff(const Image& a, const Image& b);

}  // namespace derain
