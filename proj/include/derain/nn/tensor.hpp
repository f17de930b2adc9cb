#pragma once
#include <cstddef>
#include <vector>

#include "derain/errors.hpp"
#include "derain/image.hpp"

namespace derain::nn {

// Planar CHW tensor. Scalar type T is float at runtime and double for the
// finite-difference gradient checks.
template <typename T>
struct Tensor {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<T> data;

    Tensor() = default;
    Tensor(int c, int h, int w, T fill = T(0))
        : channels(c), height(h), width(w),
          data(static_cast<size_t>(c) * h * w, fill) {}

    T& at(int c, int y, int x) {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }
    const T& at(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }

    T* plane(int c) { return data.data() + static_cast<size_t>(c) * height * width; }
    const T* plane(int c) const { return data.data() + static_cast<size_t>(c) * height * width; }

    size_t size() const { return data.size(); }
    size_t plane_size() const { return static_cast<size_t>(height) * width; }
    bool same_shape(const Tensor& o) const {
        return channels == o.channels && height == o.height && width == o.width;
    }
    void zero() { std::fill(data.begin(), data.end(), T(0)); }
};

template <typename T>
Tensor<T> image_to_tensor(const Image& img) {
    Tensor<T> t(img.channels, img.height, img.width);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                t.at(c, y, x) = static_cast<T>(img.at(y, x, c));
    return t;
}

template <typename T>
Image tensor_to_image(const Tensor<T>& t) {
    Image img(t.height, t.width, t.channels);
    for (int c = 0; c < t.channels; ++c)
        for (int y = 0; y < t.height; ++y)
            for (int x = 0; x < t.width; ++x)
                img.at(y, x, c) = static_cast<float>(t.at(c, y, x));
    return img;
}

// Named view over one parameter array and its gradient accumulator.
template <typename T>
struct ParamRef {
    std::string name;
    std::vector<T>* value = nullptr;
    std::vector<T>* grad = nullptr;
    std::vector<int> shape;
};

}  // namespace derain::nn
