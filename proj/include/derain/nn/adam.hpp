#pragma once
#include <cmath>
#include <cstdint>
#include <vector>

#include "derain/nn/tensor.hpp"

namespace derain::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adaptive-moment gradient descent over a set of parameter views.
template <typename T>
class Adam {
public:
    Adam() = default;
    explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

    void attach(std::vector<ParamRef<T>> params) {
        params_ = std::move(params);
        m_.clear();
        v_.clear();
        for (auto& p : params_) {
            m_.emplace_back(p.value->size(), T(0));
            v_.emplace_back(p.value->size(), T(0));
        }
        t_ = 0;
    }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (size_t k = 0; k < params_.size(); ++k) {
            std::vector<T>& w = *params_[k].value;
            const std::vector<T>& g = *params_[k].grad;
            std::vector<T>& m = m_[k];
            std::vector<T>& v = v_[k];
            for (size_t i = 0; i < w.size(); ++i) {
                double gi = g[i];
                double mi = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
                double vi = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
                m[i] = static_cast<T>(mi);
                v[i] = static_cast<T>(vi);
                double update = cfg_.lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg_.eps);
                w[i] = static_cast<T>(w[i] - update);
            }
        }
    }

    int64_t step_count() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

    // Serialization hooks.
    const std::vector<ParamRef<T>>& attached() const { return params_; }
    std::vector<std::vector<T>>& moments_m() { return m_; }
    std::vector<std::vector<T>>& moments_v() { return v_; }
    void set_step_count(int64_t t) { t_ = t; }

private:
    AdamConfig cfg_;
    int64_t t_ = 0;
    std::vector<ParamRef<T>> params_;
    std::vector<std::vector<T>> m_, v_;
};

}  // namespace derain::nn
