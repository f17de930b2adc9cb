#pragma once
#include <functional>
#include <string>
#include <vector>

#include "derain/image.hpp"

namespace derain {

// Single-channel double-precision plane used by the metric computations.
struct Plane {
    int height = 0;
    int width = 0;
    std::vector<double> data;

    Plane() = default;
    Plane(int h, int w) : height(h), width(w), data(static_cast<size_t>(h) * w, 0.0) {}
    double& at(int y, int x) { return data[static_cast<size_t>(y) * width + x]; }
    double at(int y, int x) const { return data[static_cast<size_t>(y) * width + x]; }
};

// BT.601 luminance (0.299, 0.587, 0.114) for RGB; identity for gray.
Plane to_luminance(const Image& img);

// 10*log10(1/MSE) on the luminance channel, peak 1.0. Identical inputs give
// +infinity.
double psnr(const Image& a, const Image& b);

// Mean local SSIM on luminance: 11x11 Gaussian window (sigma 1.5),
// K1 = 0.01, K2 = 0.03, peak 1.0. Windows are evaluated where they fit
// entirely inside the image.
double ssim(const Image& a, const Image& b);

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimK1 = 0.01;
constexpr double kSsimK2 = 0.03;

struct MaskMetrics {
    double accuracy = 0;
    double precision = 0;
    double recall = 0;
    double f1 = 0;
};

// Confusion-matrix metrics of the thresholded probability map against the
// binary truth.
MaskMetrics mask_metrics(const Image& pred_prob, const Mask& truth, float threshold = 0.5f);

struct TimingStats {
    double median_s_per_image = 0;
    double min_s_per_image = 0;
    double max_s_per_image = 0;
    int repeats = 0;
    int image_count = 0;
};

// Runs `fn` over all images `warmup` times unrecorded, then `repeats` more,
// reporting seconds-per-image statistics. repeats must be >= 3.
TimingStats time_inference(const std::function<void(const Image&)>& fn,
                           const std::vector<Image>& images, int warmup, int repeats);

}  // namespace derain
