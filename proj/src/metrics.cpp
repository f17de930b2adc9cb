#include "derain/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "derain/errors.hpp"

namespace derain {

Plane to_luminance(const Image& img) {
    Plane out(img.height, img.width);
    if (img.channels == 1) {
        for (size_t i = 0; i < img.data.size(); ++i) out.data[i] = img.data[i];
    } else if (img.channels == 3) {
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                out.at(y, x) = 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) +
                               0.114 * img.at(y, x, 2);
    } else {
        throw ShapeError("to_luminance: channel count must be 1 or 3");
    }
    return out;
}

double psnr(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw ShapeError("psnr: shape mismatch");
    Plane ya = to_luminance(a);
    Plane yb = to_luminance(b);
    double acc = 0;
    for (size_t i = 0; i < ya.data.size(); ++i) {
        double d = ya.data[i] - yb.data[i];
        acc += d * d;
    }
    double mse = acc / static_cast<double>(ya.data.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

namespace {

std::vector<double> gaussian_kernel(int size, double sigma) {
    std::vector<double> k(size);
    const int half = size / 2;
    double sum = 0;
    for (int i = 0; i < size; ++i) {
        double d = i - half;
        k[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Separable Gaussian filtering; only rows/cols where the window fits are
// meaningful and the caller reads just those.
Plane filter_separable(const Plane& src, const std::vector<double>& k) {
    const int half = static_cast<int>(k.size()) / 2;
    Plane tmp(src.height, src.width), out(src.height, src.width);
    for (int y = 0; y < src.height; ++y)
        for (int x = half; x < src.width - half; ++x) {
            double acc = 0;
            for (size_t i = 0; i < k.size(); ++i)
                acc += k[i] * src.at(y, x - half + static_cast<int>(i));
            tmp.at(y, x) = acc;
        }
    for (int y = half; y < src.height - half; ++y)
        for (int x = half; x < src.width - half; ++x) {
            double acc = 0;
            for (size_t i = 0; i < k.size(); ++i)
                acc += k[i] * tmp.at(y - half + static_cast<int>(i), x);
            out.at(y, x) = acc;
        }
    return out;
}

}  // namespace

double ssim(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw ShapeError("ssim: shape mismatch");
    if (a.height < kSsimWindow || a.width < kSsimWindow)
        throw ShapeError("ssim: image smaller than the 11x11 window");

    Plane x = to_luminance(a);
    Plane y = to_luminance(b);
    const auto k = gaussian_kernel(kSsimWindow, kSsimSigma);

    Plane xx(x.height, x.width), yy(x.height, x.width), xy(x.height, x.width);
    for (size_t i = 0; i < x.data.size(); ++i) {
        xx.data[i] = x.data[i] * x.data[i];
        yy.data[i] = y.data[i] * y.data[i];
        xy.data[i] = x.data[i] * y.data[i];
    }

    Plane mx = filter_separable(x, k);
    Plane my = filter_separable(y, k);
    Plane mxx = filter_separable(xx, k);
    Plane myy = filter_separable(yy, k);
    Plane mxy = filter_separable(xy, k);

    const double c1 = kSsimK1 * kSsimK1;  // (K1*L)^2 with L = 1
    const double c2 = kSsimK2 * kSsimK2;
    const int half = kSsimWindow / 2;

    double acc = 0;
    size_t count = 0;
    for (int yy0 = half; yy0 < x.height - half; ++yy0)
        for (int xx0 = half; xx0 < x.width - half; ++xx0) {
            const double mux = mx.at(yy0, xx0);
            const double muy = my.at(yy0, xx0);
            const double vx = mxx.at(yy0, xx0) - mux * mux;
            const double vy = myy.at(yy0, xx0) - muy * muy;
            const double cxy = mxy.at(yy0, xx0) - mux * muy;
            const double num = (2.0 * mux * muy + c1) * (2.0 * cxy + c2);
            const double den = (mux * mux + muy * muy + c1) * (vx + vy + c2);
            acc += num / den;
            ++count;
        }
    return acc / static_cast<double>(count);
}

MaskMetrics mask_metrics(const Image& pred_prob, const Mask& truth, float threshold) {
    if (pred_prob.channels != 1)
        throw ShapeError("mask_metrics: prediction must be single channel");
    if (pred_prob.height != truth.height || pred_prob.width != truth.width)
        throw ShapeError("mask_metrics: shape mismatch");
    for (uint8_t v : truth.data)
        if (v > 1) throw ConfigError("mask_metrics: truth mask must be binary");

    size_t tp = 0, tn = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < truth.data.size(); ++i) {
        const bool p = pred_prob.data[i] >= threshold;
        const bool t = truth.data[i] != 0;
        if (p && t) ++tp;
        else if (p && !t) ++fp;
        else if (!p && t) ++fn;
        else ++tn;
    }
    MaskMetrics m;
    const size_t n = truth.data.size();
    m.accuracy = n ? static_cast<double>(tp + tn) / n : 1.0;
    m.precision = (tp + fp) ? static_cast<double>(tp) / (tp + fp) : 1.0;
    m.recall = (tp + fn) ? static_cast<double>(tp) / (tp + fn) : 1.0;
    m.f1 = (m.precision + m.recall) > 0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    return m;
}

TimingStats time_inference(const std::function<void(const Image&)>& fn,
                           const std::vector<Image>& images, int warmup, int repeats) {
    if (repeats < 3) throw ConfigError("time_inference: repeats must be >= 3");
    if (images.empty()) throw ConfigError("time_inference: no images");
    for (int i = 0; i < warmup; ++i)
        for (const Image& img : images) fn(img);

    std::vector<double> per_image;
    for (int r = 0; r < repeats; ++r) {
        auto t0 = std::chrono::steady_clock::now();
        for (const Image& img : images) fn(img);
        auto t1 = std::chrono::steady_clock::now();
        per_image.push_back(std::chrono::duration<double>(t1 - t0).count() /
                            static_cast<double>(images.size()));
    }
    std::sort(per_image.begin(), per_image.end());
    TimingStats s;
    s.repeats = repeats;
    s.image_count = static_cast<int>(images.size());
    s.min_s_per_image = per_image.front();
    s.max_s_per_image = per_image.back();
    const size_t mid = per_image.size() / 2;
    s.median_s_per_image = (per_image.size() % 2)
                               ? per_image[mid]
                               : 0.5 * (per_image[mid - 1] + per_image[mid]);
    return s;
}

}  // namespace derain
