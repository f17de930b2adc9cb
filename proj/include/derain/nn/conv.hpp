#pragma once
#include <Eigen/Dense>

#include <algorithm>
#include <string>
#include <vector>

#include "derain/nn/tensor.hpp"
#include "derain/rng.hpp"

namespace derain::nn {

// 3x3 convolution with configurable dilation and zero padding sized so the
// output resolution equals the input. Lowered to GEMM over row tiles via
// im2col; Eigen supplies the matrix kernel.
template <typename T>
class Conv2d {
public:
    using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using MapMat = Eigen::Map<Mat>;
    using MapConst = Eigen::Map<const Mat>;

    Conv2d() = default;
    Conv2d(std::string name, int in_ch, int out_ch, int ksize, int dilation)
        : name_(std::move(name)), in_ch_(in_ch), out_ch_(out_ch),
          ksize_(ksize), dilation_(dilation),
          weight_(static_cast<size_t>(out_ch) * in_ch * ksize * ksize, T(0)),
          bias_(out_ch, T(0)),
          grad_weight_(weight_.size(), T(0)),
          grad_bias_(out_ch, T(0)) {}

    // He-style init: N(0, sqrt(2/fan_in)), biases zero.
    void init_he(Rng& rng) {
        double fan_in = static_cast<double>(in_ch_) * ksize_ * ksize_;
        double scale = std::sqrt(2.0 / fan_in);
        for (T& w : weight_) w = static_cast<T>(rng.normal() * scale);
        std::fill(bias_.begin(), bias_.end(), T(0));
    }

    void forward(const Tensor<T>& x, Tensor<T>& y) const {
        check_input(x);
        y = Tensor<T>(out_ch_, x.height, x.width);
        const int hw_tile = tile_rows(x.width);
        std::vector<T> cols;
        for (int y0 = 0; y0 < x.height; y0 += hw_tile) {
            int rows = std::min(hw_tile, x.height - y0);
            im2col(x, y0, rows, cols);
            const int patch = in_ch_ * ksize_ * ksize_;
            const int npix = rows * x.width;
            MapConst w(weight_.data(), out_ch_, patch);
            MapConst c(cols.data(), patch, npix);
            Mat out = w * c;
            for (int oc = 0; oc < out_ch_; ++oc) {
                T* dst = y.plane(oc) + static_cast<size_t>(y0) * x.width;
                const T b = bias_[oc];
                for (int i = 0; i < npix; ++i) dst[i] = out(oc, i) + b;
            }
        }
    }

    // Accumulates parameter gradients and writes the input gradient.
    void backward(const Tensor<T>& x, const Tensor<T>& dy, Tensor<T>& dx) {
        check_input(x);
        dx = Tensor<T>(in_ch_, x.height, x.width);
        const int hw_tile = tile_rows(x.width);
        const int patch = in_ch_ * ksize_ * ksize_;
        std::vector<T> cols;
        for (int y0 = 0; y0 < x.height; y0 += hw_tile) {
            int rows = std::min(hw_tile, x.height - y0);
            int npix = rows * x.width;
            im2col(x, y0, rows, cols);

            Mat dyt(out_ch_, npix);
            for (int oc = 0; oc < out_ch_; ++oc) {
                const T* src = dy.plane(oc) + static_cast<size_t>(y0) * x.width;
                for (int i = 0; i < npix; ++i) dyt(oc, i) = src[i];
            }

            MapConst c(cols.data(), patch, npix);
            MapMat gw(grad_weight_.data(), out_ch_, patch);
            gw.noalias() += dyt * c.transpose();
            for (int oc = 0; oc < out_ch_; ++oc) grad_bias_[oc] += dyt.row(oc).sum();

            MapConst w(weight_.data(), out_ch_, patch);
            Mat dcols = w.transpose() * dyt;
            col2im_add(dcols, y0, rows, dx);
        }
    }

    std::vector<ParamRef<T>> params() {
        return {
            {name_ + "/weight", &weight_, &grad_weight_, {out_ch_, in_ch_, ksize_, ksize_}},
            {name_ + "/bias", &bias_, &grad_bias_, {out_ch_}},
        };
    }

    void zero_grad() {
        std::fill(grad_weight_.begin(), grad_weight_.end(), T(0));
        std::fill(grad_bias_.begin(), grad_bias_.end(), T(0));
    }

    int in_channels() const { return in_ch_; }
    int out_channels() const { return out_ch_; }
    int dilation() const { return dilation_; }
    const std::string& name() const { return name_; }
    std::vector<T>& weight() { return weight_; }
    std::vector<T>& bias() { return bias_; }

private:
    void check_input(const Tensor<T>& x) const {
        if (x.channels != in_ch_)
            throw ShapeError("conv " + name_ + ": expected " + std::to_string(in_ch_) +
                             " input channels, got " + std::to_string(x.channels));
        if (x.height < 1 || x.width < 1) throw ShapeError("conv " + name_ + ": empty input");
    }

    static int tile_rows(int width) {
        return std::max(1, 65536 / std::max(1, width));
    }

    // Gathers patches for output rows [y0, y0+rows) into a patch x npix matrix.
    void im2col(const Tensor<T>& x, int y0, int rows, std::vector<T>& cols) const {
        const int pad = dilation_ * (ksize_ - 1) / 2;
        const int patch = in_ch_ * ksize_ * ksize_;
        const int npix = rows * x.width;
        cols.assign(static_cast<size_t>(patch) * npix, T(0));
        for (int ic = 0; ic < in_ch_; ++ic) {
            const T* src = x.plane(ic);
            for (int ky = 0; ky < ksize_; ++ky) {
                for (int kx = 0; kx < ksize_; ++kx) {
                    const int prow = (ic * ksize_ + ky) * ksize_ + kx;
                    T* dst = cols.data() + static_cast<size_t>(prow) * npix;
                    const int oy_off = ky * dilation_ - pad;
                    const int ox_off = kx * dilation_ - pad;
                    for (int r = 0; r < rows; ++r) {
                        const int sy = y0 + r + oy_off;
                        if (sy < 0 || sy >= x.height) continue;
                        const T* srow = src + static_cast<size_t>(sy) * x.width;
                        T* drow = dst + static_cast<size_t>(r) * x.width;
                        const int xlo = std::max(0, -ox_off);
                        const int xhi = std::min(x.width, x.width - ox_off);
                        for (int xx = xlo; xx < xhi; ++xx) drow[xx] = srow[xx + ox_off];
                    }
                }
            }
        }
    }

    void col2im_add(const Mat& dcols, int y0, int rows, Tensor<T>& dx) const {
        const int pad = dilation_ * (ksize_ - 1) / 2;
        for (int ic = 0; ic < in_ch_; ++ic) {
            T* dst = dx.plane(ic);
            for (int ky = 0; ky < ksize_; ++ky) {
                for (int kx = 0; kx < ksize_; ++kx) {
                    const int prow = (ic * ksize_ + ky) * ksize_ + kx;
                    const int oy_off = ky * dilation_ - pad;
                    const int ox_off = kx * dilation_ - pad;
                    for (int r = 0; r < rows; ++r) {
                        const int sy = y0 + r + oy_off;
                        if (sy < 0 || sy >= dx.height) continue;
                        T* drow = dst + static_cast<size_t>(sy) * dx.width;
                        const int xlo = std::max(0, -ox_off);
                        const int xhi = std::min(dx.width, dx.width - ox_off);
                        for (int xx = xlo; xx < xhi; ++xx)
                            drow[xx + ox_off] += dcols(prow, static_cast<Eigen::Index>(r) * dx.width + xx);
                    }
                }
            }
        }
    }

    std::string name_;
    int in_ch_ = 0, out_ch_ = 0, ksize_ = 3, dilation_ = 1;
    std::vector<T> weight_, bias_;
    std::vector<T> grad_weight_, grad_bias_;
};

template <typename T>
void relu_forward(Tensor<T>& t) {
    for (T& v : t.data) v = v > T(0) ? v : T(0);
}

// dx = dy where pre-activation input was positive.
template <typename T>
void relu_backward(const Tensor<T>& pre, const Tensor<T>& dy, Tensor<T>& dx) {
    dx = Tensor<T>(dy.channels, dy.height, dy.width);
    for (size_t i = 0; i < dy.data.size(); ++i)
        dx.data[i] = pre.data[i] > T(0) ? dy.data[i] : T(0);
}

}  // namespace derain::nn
