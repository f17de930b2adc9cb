#include "derain/image.hpp"

#include <algorithm>
#include <cmath>

#include "derain/errors.hpp"

namespace derain {

size_t Mask::count_ones() const {
    size_t n = 0;
    for (uint8_t v : data) n += (v != 0);
    return n;
}

void clip01(Image& img) {
    for (float& v : img.data) v = std::min(1.0f, std::max(0.0f, v));
}

void snap_to_grid16(Image& img) {
    for (float& v : img.data) {
        double c = std::min(1.0, std::max(0.0, static_cast<double>(v)));
        v = static_cast<float>(std::lround(c * 65535.0) / 65535.0);
    }
}

Image crop(const Image& img, int y0, int x0, int h, int w) {
    if (y0 < 0 || x0 < 0 || y0 + h > img.height || x0 + w > img.width)
        throw ShapeError("crop window out of bounds");
    Image out(h, w, img.channels);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < img.channels; ++c)
                out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
    return out;
}

Mask crop(const Mask& m, int y0, int x0, int h, int w) {
    if (y0 < 0 || x0 < 0 || y0 + h > m.height || x0 + w > m.width)
        throw ShapeError("crop window out of bounds");
    Mask out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out.at(y, x) = m.at(y0 + y, x0 + x);
    return out;
}

Image with_channels(const Image& img, int channels) {
    if (img.channels == channels) return img;
    Image out(img.height, img.width, channels);
    if (img.channels == 1) {
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                for (int c = 0; c < channels; ++c)
                    out.at(y, x, c) = img.at(y, x, 0);
    } else if (img.channels == 3 && channels == 1) {
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                out.at(y, x, 0) = 0.299f * img.at(y, x, 0) +
                                  0.587f * img.at(y, x, 1) +
                                  0.114f * img.at(y, x, 2);
    } else {
        throw ShapeError("unsupported channel conversion");
    }
    return out;
}

float max_abs_diff(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw ShapeError("max_abs_diff: shape mismatch");
    float m = 0.0f;
    for (size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::fabs(a.data[i] - b.data[i]));
    return m;
}

}  // namespace derain
