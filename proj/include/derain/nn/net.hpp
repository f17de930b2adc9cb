#pragma once
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "derain/nn/conv.hpp"
#include "derain/nn/tensor.hpp"

namespace derain::nn {

// Order in which the three task heads are evaluated. The default matches the
// detect-then-estimate-then-remove dataflow; the alternatives rewire the
// graph without changing output shapes.
enum class HeadOrdering { MaskStreakBackground, StreakMaskBackground, Parallel };

std::string head_ordering_name(HeadOrdering h);
HeadOrdering head_ordering_from_name(const std::string& s);

struct NetworkConfig {
    int input_channels = 3;
    int feature_channels = 16;
    int intra_recurrences = 2;
    std::vector<int> dilation_factors = {1, 2, 3};
    int kernel_size = 3;
    HeadOrdering head_ordering = HeadOrdering::MaskStreakBackground;

    void validate() const;
};

// Two stacked 3x3 convolutions with a shared dilation factor, ReLU after
// each. Receptive field is (4d+1)^2: 5x5 / 9x9 / 13x13 for d = 1, 2, 3.
template <typename T>
class DilatedPath {
public:
    struct Cache {
        Tensor<T> pre1, act1, pre2;
    };

    DilatedPath() = default;
    DilatedPath(const std::string& name, int channels, int ksize, int dilation)
        : conv1_(name + "/conv1", channels, channels, ksize, dilation),
          conv2_(name + "/conv2", channels, channels, ksize, dilation) {}

    void init(Rng& rng) {
        conv1_.init_he(rng);
        conv2_.init_he(rng);
    }

    void forward(const Tensor<T>& x, Tensor<T>& out, Cache& c) const {
        conv1_.forward(x, c.pre1);
        c.act1 = c.pre1;
        relu_forward(c.act1);
        conv2_.forward(c.act1, c.pre2);
        out = c.pre2;
        relu_forward(out);
    }

    void backward(const Tensor<T>& x, const Cache& c, const Tensor<T>& dout, Tensor<T>& dx) {
        Tensor<T> dpre2, dact1, dpre1;
        relu_backward(c.pre2, dout, dpre2);
        conv2_.backward(c.act1, dpre2, dact1);
        relu_backward(c.pre1, dact1, dpre1);
        conv1_.backward(x, dpre1, dx);
    }

    std::vector<ParamRef<T>> params() {
        auto p = conv1_.params();
        auto q = conv2_.params();
        p.insert(p.end(), q.begin(), q.end());
        return p;
    }

    void zero_grad() {
        conv1_.zero_grad();
        conv2_.zero_grad();
    }

    Conv2d<T>& conv1() { return conv1_; }
    Conv2d<T>& conv2() { return conv2_; }

private:
    Conv2d<T> conv1_, conv2_;
};

// Feature backbone: an input transform followed by `intra_recurrences`
// refinement rounds. Each round feeds the running features through the
// parallel dilated paths and adds the path outputs onto the identity skip.
template <typename T>
class FeatureExtractor {
public:
    struct Cache {
        Tensor<T> pre_in;                   // input transform, pre-activation
        std::vector<Tensor<T>> round_in;    // [0] after the transform; [r+1] after round r
        std::vector<std::vector<typename DilatedPath<T>::Cache>> path_caches;
        const Tensor<T>& features() const { return round_in.back(); }
    };

    FeatureExtractor() = default;
    FeatureExtractor(const std::string& name, const NetworkConfig& cfg)
        : input_tf_(name + "/input_tf", cfg.input_channels, cfg.feature_channels,
                    cfg.kernel_size, 1) {
        for (int r = 0; r < cfg.intra_recurrences; ++r) {
            std::vector<DilatedPath<T>> round;
            for (size_t p = 0; p < cfg.dilation_factors.size(); ++p) {
                round.emplace_back(name + "/round" + std::to_string(r) + "/path" + std::to_string(p),
                                   cfg.feature_channels, cfg.kernel_size, cfg.dilation_factors[p]);
            }
            rounds_.push_back(std::move(round));
        }
    }

    void init(Rng& rng) {
        input_tf_.init_he(rng);
        for (auto& round : rounds_)
            for (auto& path : round) path.init(rng);
    }

    void forward(const Tensor<T>& x, Cache& c) const {
        input_tf_.forward(x, c.pre_in);
        c.round_in.clear();
        c.round_in.reserve(rounds_.size() + 1);
        c.round_in.push_back(c.pre_in);
        relu_forward(c.round_in[0]);
        c.path_caches.assign(rounds_.size(), {});
        for (size_t r = 0; r < rounds_.size(); ++r) {
            const Tensor<T>& fin = c.round_in[r];
            Tensor<T> fout = fin;  // identity skip
            c.path_caches[r].resize(rounds_[r].size());
            for (size_t p = 0; p < rounds_[r].size(); ++p) {
                Tensor<T> po;
                rounds_[r][p].forward(fin, po, c.path_caches[r][p]);
                for (size_t i = 0; i < fout.data.size(); ++i) fout.data[i] += po.data[i];
            }
            c.round_in.push_back(std::move(fout));
        }
    }

    void backward(const Tensor<T>& x, const Cache& c, const Tensor<T>& d_features) {
        Tensor<T> dout = d_features;
        for (int r = static_cast<int>(rounds_.size()) - 1; r >= 0; --r) {
            Tensor<T> din = dout;  // identity skip
            for (size_t p = 0; p < rounds_[r].size(); ++p) {
                Tensor<T> dpx;
                rounds_[r][p].backward(c.round_in[r], c.path_caches[r][p], dout, dpx);
                for (size_t i = 0; i < din.data.size(); ++i) din.data[i] += dpx.data[i];
            }
            dout = std::move(din);
        }
        Tensor<T> dpre, dx_unused;
        relu_backward(c.pre_in, dout, dpre);
        input_tf_.backward(x, dpre, dx_unused);
    }

    std::vector<ParamRef<T>> params() {
        auto out = input_tf_.params();
        for (auto& round : rounds_)
            for (auto& path : round) {
                auto p = path.params();
                out.insert(out.end(), p.begin(), p.end());
            }
        return out;
    }

    void zero_grad() {
        input_tf_.zero_grad();
        for (auto& round : rounds_)
            for (auto& path : round) path.zero_grad();
    }

private:
    Conv2d<T> input_tf_;
    std::vector<std::vector<DilatedPath<T>>> rounds_;
};

template <typename T>
struct Prediction {
    Tensor<T> logits;      // 2 x H x W, channel 1 is the rain class
    Tensor<T> mask_prob;   // 1 x H x W
    Tensor<T> streak;      // 1 x H x W
    Tensor<T> background;  // C x H x W
};

namespace detail {

template <typename T>
Tensor<T> concat_channels(const std::vector<const Tensor<T>*>& parts) {
    int ch = 0;
    for (auto* p : parts) ch += p->channels;
    Tensor<T> out(ch, parts[0]->height, parts[0]->width);
    size_t off = 0;
    for (auto* p : parts) {
        std::copy(p->data.begin(), p->data.end(), out.data.begin() + off);
        off += p->data.size();
    }
    return out;
}

template <typename T>
void split_channels(const Tensor<T>& d, const std::vector<Tensor<T>*>& parts,
                    const std::vector<int>& channel_counts) {
    size_t off = 0;
    for (size_t i = 0; i < parts.size(); ++i) {
        *parts[i] = Tensor<T>(channel_counts[i], d.height, d.width);
        std::copy(d.data.begin() + off, d.data.begin() + off + parts[i]->data.size(),
                  parts[i]->data.begin());
        off += parts[i]->data.size();
    }
}

}  // namespace detail

// Multi-task rain network: shared dilated backbone plus detection (2-channel
// softmax), streak and background heads wired in the configured order.
template <typename T>
class MultiTaskNet {
public:
    struct Workspace {
        Tensor<T> input;
        typename FeatureExtractor<T>::Cache feat;
        Tensor<T> det_in, det_pre1, det_act1, logits;
        Tensor<T> prob;  // 2 x H x W softmax output
        Tensor<T> streak_in, streak;
        Tensor<T> resid;  // O - prob1 * streak, sequential orderings only
        Tensor<T> bg_in, background;
    };

    MultiTaskNet() = default;
    MultiTaskNet(const NetworkConfig& cfg, uint64_t seed) : cfg_(cfg) {
        cfg_.validate();
        const int cf = cfg_.feature_channels;
        const int ci = cfg_.input_channels;
        const int k = cfg_.kernel_size;
        extractor_ = FeatureExtractor<T>("extractor", cfg_);
        switch (cfg_.head_ordering) {
            case HeadOrdering::MaskStreakBackground:
                det1_ = Conv2d<T>("det/conv1", cf, cf, k, 1);
                streak_conv_ = Conv2d<T>("streak/conv", cf + 1, 1, k, 1);
                bg_conv_ = Conv2d<T>("bg/conv", cf + 1 + 1 + ci, ci, k, 1);
                break;
            case HeadOrdering::StreakMaskBackground:
                streak_conv_ = Conv2d<T>("streak/conv", cf, 1, k, 1);
                det1_ = Conv2d<T>("det/conv1", cf + 1, cf, k, 1);
                bg_conv_ = Conv2d<T>("bg/conv", cf + 1 + 1 + ci, ci, k, 1);
                break;
            case HeadOrdering::Parallel:
                det1_ = Conv2d<T>("det/conv1", cf, cf, k, 1);
                streak_conv_ = Conv2d<T>("streak/conv", cf, 1, k, 1);
                bg_conv_ = Conv2d<T>("bg/conv", cf, ci, k, 1);
                break;
        }
        det2_ = Conv2d<T>("det/conv2", cf, 2, k, 1);
        Rng rng(seed);
        extractor_.init(rng);
        det1_.init_he(rng);
        det2_.init_he(rng);
        streak_conv_.init_he(rng);
        bg_conv_.init_he(rng);
    }

    Prediction<T> forward(const Tensor<T>& input, Workspace* ws = nullptr) const {
        Workspace local;
        Workspace& w = ws ? *ws : local;
        if (input.channels != cfg_.input_channels)
            throw ShapeError("network expects " + std::to_string(cfg_.input_channels) +
                             " input channels, got " + std::to_string(input.channels));
        w.input = input;
        extractor_.forward(input, w.feat);
        const Tensor<T>& f = w.feat.features();

        switch (cfg_.head_ordering) {
            case HeadOrdering::MaskStreakBackground: {
                w.det_in = f;
                run_detection(w);
                Tensor<T> p1 = prob_plane(w.prob, 1);
                w.streak_in = detail::concat_channels<T>({&f, &p1});
                streak_conv_.forward(w.streak_in, w.streak);
                make_residual(w, p1);
                w.bg_in = detail::concat_channels<T>({&f, &p1, &w.streak, &w.resid});
                bg_conv_.forward(w.bg_in, w.background);
                break;
            }
            case HeadOrdering::StreakMaskBackground: {
                w.streak_in = f;
                streak_conv_.forward(w.streak_in, w.streak);
                w.det_in = detail::concat_channels<T>({&f, &w.streak});
                run_detection(w);
                Tensor<T> p1 = prob_plane(w.prob, 1);
                make_residual(w, p1);
                w.bg_in = detail::concat_channels<T>({&f, &p1, &w.streak, &w.resid});
                bg_conv_.forward(w.bg_in, w.background);
                break;
            }
            case HeadOrdering::Parallel: {
                w.det_in = f;
                run_detection(w);
                w.streak_in = f;
                streak_conv_.forward(w.streak_in, w.streak);
                w.bg_in = f;
                bg_conv_.forward(w.bg_in, w.background);
                break;
            }
        }

        Prediction<T> out;
        out.logits = w.logits;
        out.mask_prob = prob_plane(w.prob, 1);
        out.streak = w.streak;
        out.background = w.background;
        return out;
    }

    // Runs the backbone only and returns the rain feature map.
    Tensor<T> extract_features(const Tensor<T>& input) const {
        typename FeatureExtractor<T>::Cache c;
        extractor_.forward(input, c);
        return c.features();
    }

    // Gradients of the loss w.r.t. the three outputs flow back through the
    // head wiring (including the soft mask consumed by downstream heads)
    // into all parameters.
    void backward(const Workspace& w, const Tensor<T>& d_logits_ext,
                  const Tensor<T>& d_streak_ext, const Tensor<T>& d_background_ext) {
        const Tensor<T>& f = w.feat.features();
        const int cf = cfg_.feature_channels;
        const int ci = cfg_.input_channels;
        Tensor<T> d_f(cf, f.height, f.width);

        if (cfg_.head_ordering == HeadOrdering::Parallel) {
            Tensor<T> d_tmp;
            bg_conv_.backward(w.bg_in, d_background_ext, d_tmp);
            add(d_f, d_tmp);
            streak_conv_.backward(w.streak_in, d_streak_ext, d_tmp);
            add(d_f, d_tmp);
            Tensor<T> d_det_in = detection_backward(w, d_logits_ext, Tensor<T>(1, f.height, f.width));
            add(d_f, d_det_in);
            extractor_.backward(w.input, w.feat, d_f);
            return;
        }

        Tensor<T> p1 = prob_plane(w.prob, 1);

        // background head -> concat [F, p1, streak, resid]
        Tensor<T> d_bg_in;
        bg_conv_.backward(w.bg_in, d_background_ext, d_bg_in);
        Tensor<T> d_f_b, d_p1, d_streak, d_resid;
        detail::split_channels(d_bg_in, {&d_f_b, &d_p1, &d_streak, &d_resid}, {cf, 1, 1, ci});
        add(d_f, d_f_b);

        // resid = O - p1 * streak (O broadcast over channels)
        Tensor<T> d_resid_sum(1, f.height, f.width);
        for (int c = 0; c < ci; ++c) {
            const T* src = d_resid.plane(c);
            T* dst = d_resid_sum.plane(0);
            for (size_t i = 0; i < d_resid_sum.data.size(); ++i) dst[i] += src[i];
        }
        for (size_t i = 0; i < d_p1.data.size(); ++i) {
            d_p1.data[i] += -w.streak.data[i] * d_resid_sum.data[i];
            d_streak.data[i] += -p1.data[i] * d_resid_sum.data[i];
        }
        add(d_streak, d_streak_ext);

        if (cfg_.head_ordering == HeadOrdering::MaskStreakBackground) {
            // streak head consumed [F, p1]
            Tensor<T> d_streak_in;
            streak_conv_.backward(w.streak_in, d_streak, d_streak_in);
            Tensor<T> d_f_s, d_p1_s;
            detail::split_channels(d_streak_in, {&d_f_s, &d_p1_s}, {cf, 1});
            add(d_f, d_f_s);
            add(d_p1, d_p1_s);

            Tensor<T> d_det_in = detection_backward(w, d_logits_ext, d_p1);
            add(d_f, d_det_in);
        } else {  // StreakMaskBackground: detection consumed [F, streak]
            Tensor<T> d_det_in = detection_backward(w, d_logits_ext, d_p1);
            Tensor<T> d_f_d, d_streak_d;
            detail::split_channels(d_det_in, {&d_f_d, &d_streak_d}, {cf, 1});
            add(d_f, d_f_d);
            add(d_streak, d_streak_d);

            Tensor<T> d_streak_in;
            streak_conv_.backward(w.streak_in, d_streak, d_streak_in);
            add(d_f, d_streak_in);
        }

        extractor_.backward(w.input, w.feat, d_f);
    }

    std::vector<ParamRef<T>> params() {
        auto out = extractor_.params();
        for (auto& conv : {&det1_, &det2_, &streak_conv_, &bg_conv_}) {
            auto p = conv->params();
            out.insert(out.end(), p.begin(), p.end());
        }
        return out;
    }

    void zero_grad() {
        extractor_.zero_grad();
        det1_.zero_grad();
        det2_.zero_grad();
        streak_conv_.zero_grad();
        bg_conv_.zero_grad();
    }

    const NetworkConfig& config() const { return cfg_; }

private:
    static void add(Tensor<T>& dst, const Tensor<T>& src) {
        for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
    }

    static Tensor<T> prob_plane(const Tensor<T>& prob, int channel) {
        Tensor<T> out(1, prob.height, prob.width);
        std::copy(prob.plane(channel), prob.plane(channel) + prob.plane_size(),
                  out.data.begin());
        return out;
    }

    void run_detection(Workspace& w) const {
        det1_.forward(w.det_in, w.det_pre1);
        w.det_act1 = w.det_pre1;
        relu_forward(w.det_act1);
        det2_.forward(w.det_act1, w.logits);
        softmax2(w.logits, w.prob);
    }

    // resid[c] = O[c] - p1 * streak, the rain-subtracted shortcut fed to the
    // background head.
    void make_residual(Workspace& w, const Tensor<T>& p1) const {
        w.resid = Tensor<T>(cfg_.input_channels, w.input.height, w.input.width);
        const size_t n = w.resid.plane_size();
        for (int c = 0; c < cfg_.input_channels; ++c) {
            const T* o = w.input.plane(c);
            T* r = w.resid.plane(c);
            for (size_t i = 0; i < n; ++i)
                r[i] = o[i] - p1.data[i] * w.streak.data[i];
        }
    }

    // Softmax over the two logit channels, per pixel.
    static void softmax2(const Tensor<T>& logits, Tensor<T>& prob) {
        prob = Tensor<T>(2, logits.height, logits.width);
        const T* z0 = logits.plane(0);
        const T* z1 = logits.plane(1);
        T* p0 = prob.plane(0);
        T* p1 = prob.plane(1);
        const size_t n = logits.plane_size();
        for (size_t i = 0; i < n; ++i) {
            T m = std::max(z0[i], z1[i]);
            T e0 = std::exp(z0[i] - m);
            T e1 = std::exp(z1[i] - m);
            T s = e0 + e1;
            p0[i] = e0 / s;
            p1[i] = e1 / s;
        }
    }

    // Routes d_p1 through the softmax and adds the external logit gradient,
    // then runs the two detection convolutions backward. Returns the
    // gradient w.r.t. the detection input concat.
    Tensor<T> detection_backward(const Workspace& w, const Tensor<T>& d_logits_ext,
                                 const Tensor<T>& d_p1) {
        Tensor<T> d_logits = d_logits_ext;
        const T* p0 = w.prob.plane(0);
        const T* p1 = w.prob.plane(1);
        T* dz0 = d_logits.plane(0);
        T* dz1 = d_logits.plane(1);
        const size_t n = w.prob.plane_size();
        for (size_t i = 0; i < n; ++i) {
            T g = p0[i] * p1[i] * d_p1.data[i];
            dz1[i] += g;
            dz0[i] -= g;
        }
        Tensor<T> d_act1, d_pre1, d_det_in;
        det2_.backward(w.det_act1, d_logits, d_act1);
        relu_backward(w.det_pre1, d_act1, d_pre1);
        det1_.backward(w.det_in, d_pre1, d_det_in);
        return d_det_in;
    }

    NetworkConfig cfg_;
    FeatureExtractor<T> extractor_;
    Conv2d<T> det1_, det2_, streak_conv_, bg_conv_;
};

// Veil-removal network: the same backbone restricted to one refinement round
// plus a single image head on [F, O] so a pass-through is learnable.
template <typename T>
class DehazeNet {
public:
    struct Workspace {
        Tensor<T> input;
        typename FeatureExtractor<T>::Cache feat;
        Tensor<T> head_in, output;
    };

    DehazeNet() = default;
    DehazeNet(const NetworkConfig& base, uint64_t seed) {
        cfg_ = base;
        cfg_.intra_recurrences = 1;
        cfg_.head_ordering = HeadOrdering::MaskStreakBackground;
        cfg_.validate();
        extractor_ = FeatureExtractor<T>("dehaze", cfg_);
        head_ = Conv2d<T>("dehaze/head", cfg_.feature_channels + cfg_.input_channels,
                          cfg_.input_channels, cfg_.kernel_size, 1);
        Rng rng(seed);
        extractor_.init(rng);
        head_.init_he(rng);
    }

    Tensor<T> forward(const Tensor<T>& input, Workspace* ws = nullptr) const {
        Workspace local;
        Workspace& w = ws ? *ws : local;
        if (input.channels != cfg_.input_channels)
            throw ShapeError("dehaze network input channel mismatch");
        w.input = input;
        extractor_.forward(input, w.feat);
        const Tensor<T>& f = w.feat.features();
        w.head_in = detail::concat_channels<T>({&f, &input});
        head_.forward(w.head_in, w.output);
        return w.output;
    }

    void backward(const Workspace& w, const Tensor<T>& d_output) {
        Tensor<T> d_head_in;
        head_.backward(w.head_in, d_output, d_head_in);
        Tensor<T> d_f, d_in;
        detail::split_channels(d_head_in, {&d_f, &d_in},
                               {cfg_.feature_channels, cfg_.input_channels});
        extractor_.backward(w.input, w.feat, d_f);
    }

    std::vector<ParamRef<T>> params() {
        auto out = extractor_.params();
        auto p = head_.params();
        out.insert(out.end(), p.begin(), p.end());
        return out;
    }

    void zero_grad() {
        extractor_.zero_grad();
        head_.zero_grad();
    }

    const NetworkConfig& config() const { return cfg_; }

private:
    NetworkConfig cfg_;
    FeatureExtractor<T> extractor_;
    Conv2d<T> head_;
};

}  // namespace derain::nn
