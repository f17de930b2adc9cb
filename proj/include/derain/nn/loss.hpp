#pragma once
#include <cmath>

#include "derain/image.hpp"
#include "derain/nn/net.hpp"
#include "derain/nn/tensor.hpp"

namespace derain::nn {

// Balance factors for the background and detection terms of the joint loss.
struct LossWeights {
    double lambda_bg = 1.0;
    double lambda_det = 0.1;

    void validate() const {
        if (lambda_bg < 0 || lambda_det < 0)
            throw ConfigError("loss weights must be nonnegative");
    }
};

struct LossBreakdown {
    double streak_mse = 0;
    double bg_mse = 0;    // unweighted
    double det_ce = 0;    // unweighted, nats per pixel
    double total = 0;     // streak_mse + lambda_bg*bg_mse + lambda_det*det_ce
};

template <typename T>
struct LossGrads {
    Tensor<T> d_logits;      // includes the lambda_det factor
    Tensor<T> d_streak;
    Tensor<T> d_background;  // includes the lambda_bg factor
};

template <typename T>
void check_finite(const Tensor<T>& t, const char* what) {
    for (const T& v : t.data)
        if (!std::isfinite(static_cast<double>(v)))
            throw DivergenceError(std::string("non-finite value in ") + what);
}

// Mean-per-pixel streak MSE + weighted background MSE + weighted two-class
// softmax cross-entropy against the binary rain mask. Accumulation is done
// in double regardless of T. When `grads` is given, fills the output
// gradients scaled by `grad_scale` (used for batch averaging).
template <typename T>
LossBreakdown joint_loss(const Prediction<T>& pred, const Tensor<T>& truth_streak,
                         const Tensor<T>& truth_bg, const Mask& truth_mask,
                         const LossWeights& w, LossGrads<T>* grads = nullptr,
                         double grad_scale = 1.0) {
    w.validate();
    const int h = pred.background.height;
    const int wd = pred.background.width;
    const int ci = pred.background.channels;
    if (truth_bg.channels != ci || truth_bg.height != h || truth_bg.width != wd)
        throw ShapeError("joint_loss: background shape mismatch");
    if (truth_streak.channels != 1 || truth_streak.height != h || truth_streak.width != wd)
        throw ShapeError("joint_loss: streak shape mismatch");
    if (truth_mask.height != h || truth_mask.width != wd)
        throw ShapeError("joint_loss: mask shape mismatch");
    for (uint8_t v : truth_mask.data)
        if (v > 1) throw ConfigError("joint_loss: mask must be binary");
    check_finite(pred.streak, "predicted streak");
    check_finite(pred.background, "predicted background");
    check_finite(pred.logits, "detection logits");
    check_finite(truth_streak, "streak target");
    check_finite(truth_bg, "background target");

    const size_t npix = static_cast<size_t>(h) * wd;
    LossBreakdown out;

    if (grads) {
        grads->d_logits = Tensor<T>(2, h, wd);
        grads->d_streak = Tensor<T>(1, h, wd);
        grads->d_background = Tensor<T>(ci, h, wd);
    }

    double acc = 0;
    for (size_t i = 0; i < npix; ++i) {
        double d = static_cast<double>(pred.streak.data[i]) - truth_streak.data[i];
        acc += d * d;
        if (grads) grads->d_streak.data[i] = static_cast<T>(2.0 * d / npix * grad_scale);
    }
    out.streak_mse = acc / static_cast<double>(npix);

    acc = 0;
    const size_t nel = npix * ci;
    for (size_t i = 0; i < nel; ++i) {
        double d = static_cast<double>(pred.background.data[i]) - truth_bg.data[i];
        acc += d * d;
        if (grads)
            grads->d_background.data[i] =
                static_cast<T>(w.lambda_bg * 2.0 * d / nel * grad_scale);
    }
    out.bg_mse = acc / static_cast<double>(nel);

    // Stable log-softmax over the two logit channels.
    acc = 0;
    const T* z0 = pred.logits.plane(0);
    const T* z1 = pred.logits.plane(1);
    for (size_t i = 0; i < npix; ++i) {
        double a = z0[i], b = z1[i];
        double m = std::max(a, b);
        double lse = m + std::log(std::exp(a - m) + std::exp(b - m));
        double r = truth_mask.data[i];
        acc += -(r * (b - lse) + (1.0 - r) * (a - lse));
        if (grads) {
            double p1 = std::exp(b - lse);
            double p0 = std::exp(a - lse);
            double s = w.lambda_det / static_cast<double>(npix) * grad_scale;
            grads->d_logits.plane(1)[i] = static_cast<T>((p1 - r) * s);
            grads->d_logits.plane(0)[i] = static_cast<T>((p0 - (1.0 - r)) * s);
        }
    }
    out.det_ce = acc / static_cast<double>(npix);

    out.total = out.streak_mse + w.lambda_bg * out.bg_mse + w.lambda_det * out.det_ce;
    return out;
}

// Plain MSE against an image target, for the veil-removal network.
template <typename T>
double mse_loss(const Tensor<T>& pred, const Tensor<T>& truth, Tensor<T>* d_pred = nullptr,
                double grad_scale = 1.0) {
    if (!pred.same_shape(truth)) throw ShapeError("mse_loss: shape mismatch");
    check_finite(pred, "prediction");
    if (d_pred) *d_pred = Tensor<T>(pred.channels, pred.height, pred.width);
    double acc = 0;
    const size_t n = pred.data.size();
    for (size_t i = 0; i < n; ++i) {
        double d = static_cast<double>(pred.data[i]) - truth.data[i];
        acc += d * d;
        if (d_pred) d_pred->data[i] = static_cast<T>(2.0 * d / n * grad_scale);
    }
    return acc / static_cast<double>(n);
}

}  // namespace derain::nn
