#include "derain/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "derain/errors.hpp"
#include "derain/nn/tensor.hpp"

namespace fs = std::filesystem;

namespace derain {

TrainSample make_derain_sample(const RainExample& ex) {
    TrainSample s;
    s.rain = ex.rain;
    s.mask = ex.mask;
    if (ex.haze) {
        s.background = compose_haze_only(ex.background, *ex.haze);
        s.streak = ex.streak;
        for (size_t i = 0; i < s.streak.data.size(); ++i)
            s.streak.data[i] *= ex.haze->alpha_map.empty()
                                    ? ex.haze->alpha
                                    : ex.haze->alpha_map.data[i];
    } else {
        s.background = ex.background;
        s.streak = ex.streak;
    }
    return s;
}

DehazeSample make_dehaze_sample(const RainExample& ex) {
    return {ex.rain, ex.background};
}

namespace {

TrainSample crop_sample(const TrainSample& s, int y0, int x0, int size) {
    TrainSample out;
    out.rain = crop(s.rain, y0, x0, size, size);
    out.background = crop(s.background, y0, x0, size, size);
    out.streak = crop(s.streak, y0, x0, size, size);
    out.mask = crop(s.mask, y0, x0, size, size);
    return out;
}

std::vector<TrainSample> sample_batch(const std::vector<TrainSample>& full, int batch,
                                      int crop_size, Rng& rng) {
    std::vector<TrainSample> out;
    out.reserve(static_cast<size_t>(batch));
    for (int b = 0; b < batch; ++b) {
        const TrainSample& s = full[static_cast<size_t>(
            rng.uniform_int(0, static_cast<int>(full.size()) - 1))];
        const int h = s.rain.height, w = s.rain.width;
        if (crop_size >= h && crop_size >= w) {
            out.push_back(s);
        } else {
            const int y0 = rng.uniform_int(0, h - crop_size);
            const int x0 = rng.uniform_int(0, w - crop_size);
            out.push_back(crop_sample(s, y0, x0, crop_size));
        }
    }
    return out;
}

// One optimizer step of the stage cascade. stages_by_t may repeat the same
// network (shared weights); gradients then accumulate across stages.
double cascade_step(const std::vector<TrainSample>& batch,
                    const std::vector<nn::MultiTaskNet<float>*>& stages_by_t,
                    const nn::LossWeights& weights, nn::Adam<float>& adam,
                    nn::LossBreakdown* breakdown) {
    if (batch.empty()) throw ConfigError("train step: empty batch");
    for (auto* s : stages_by_t) s->zero_grad();

    nn::LossBreakdown sum;
    const double scale = 1.0 / static_cast<double>(batch.size());
    nn::MultiTaskNet<float>::Workspace ws;
    nn::LossGrads<float> lg;
    for (const TrainSample& s : batch) {
        nn::Tensor<float> input = nn::image_to_tensor<float>(s.rain);
        const nn::Tensor<float> t_streak = nn::image_to_tensor<float>(s.streak);
        const nn::Tensor<float> t_bg = nn::image_to_tensor<float>(s.background);
        for (auto* net : stages_by_t) {
            auto pred = net->forward(input, &ws);
            auto lb = nn::joint_loss(pred, t_streak, t_bg, s.mask, weights, &lg, scale);
            net->backward(ws, lg.d_logits, lg.d_streak, lg.d_background);
            sum.streak_mse += lb.streak_mse * scale;
            sum.bg_mse += lb.bg_mse * scale;
            sum.det_ce += lb.det_ce * scale;
            sum.total += lb.total * scale;
            input = std::move(pred.background);  // next stage input, detached
        }
    }
    adam.step();
    if (breakdown) *breakdown = sum;
    return sum.total;
}

std::string checkpoint_path(const std::string& dir, const std::string& run, int64_t step) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "_step%06lld.ckpt", static_cast<long long>(step));
    return (fs::path(dir) / (run + buf)).string();
}

}  // namespace

double train_step(const std::vector<TrainSample>& batch, nn::MultiTaskNet<float>& net,
                  const nn::LossWeights& weights, nn::Adam<float>& adam,
                  nn::LossBreakdown* breakdown) {
    return cascade_step(batch, {&net}, weights, adam, breakdown);
}

namespace {

template <typename SaveFn, typename StepFn, typename ValFn>
TrainResult run_training_loop(int64_t start_step, const TrainSettings& ts,
                              StepFn&& do_step, SaveFn&& save, ValFn&& validate,
                              std::ostream* log_stream) {
    TrainResult result;
    std::string last_ckpt = "(none)";
    double best_val = std::numeric_limits<double>::infinity();

    for (int64_t step = start_step; step < ts.steps; ++step) {
        nn::LossBreakdown lb;
        double loss;
        try {
            loss = do_step(step, &lb);
        } catch (const DivergenceError& e) {
            throw DivergenceError(std::string(e.what()) +
                                  "; last checkpoint: " + last_ckpt);
        }
        if (!std::isfinite(loss))
            throw DivergenceError("training diverged (non-finite loss) at step " +
                                  std::to_string(step + 1) +
                                  "; last checkpoint: " + last_ckpt);
        const int64_t done = step + 1;
        if (step == start_step) result.initial_loss = loss;
        result.final_loss = loss;
        result.steps_done = done;
        if (done == start_step + 1 || done % ts.log_every == 0 || done == ts.steps) {
            result.log.push_back({done, lb.total, lb.streak_mse, lb.bg_mse, lb.det_ce});
            if (log_stream)
                (*log_stream) << "step " << done << " loss " << lb.total
                              << " (streak " << lb.streak_mse << ", bg " << lb.bg_mse
                              << ", det " << lb.det_ce << ")\n";
        }
        const bool checkpoint_now =
            !ts.out_dir.empty() &&
            (done % ts.checkpoint_every == 0 || done == ts.steps);
        if (checkpoint_now) {
            last_ckpt = save(done, false);
            const double val = validate();
            if (std::isfinite(val) && val < best_val) {
                best_val = val;
                result.best_checkpoint = save(done, true);
            }
        }
    }
    if (!ts.out_dir.empty()) result.final_checkpoint = save(ts.steps, false);
    return result;
}

}  // namespace

TrainResult train_derain(const std::vector<RainExample>& data, DerainModel& model,
                         const nn::LossWeights& weights, const OptimizerSettings& opt,
                         const TrainSettings& settings, nn::Adam<float>& adam,
                         const std::vector<RainExample>* validation,
                         std::ostream* log_stream) {
    if (data.empty()) throw ConfigError("training dataset is empty");
    if (settings.tau < 1) throw ConfigError("tau must be >= 1");
    if (!model.shared_stages &&
        settings.tau != static_cast<int>(model.stages.size()))
        throw ConfigError("tau must equal the stage count for unshared stages");

    std::vector<TrainSample> samples;
    samples.reserve(data.size());
    for (const auto& ex : data) {
        if (ex.rain.height < 16 || ex.rain.width < 16)
            throw ConfigError("training example smaller than 16x16: " + ex.id);
        samples.push_back(make_derain_sample(ex));
    }
    std::vector<TrainSample> val_samples;
    if (validation)
        for (const auto& ex : *validation) val_samples.push_back(make_derain_sample(ex));

    std::vector<nn::MultiTaskNet<float>*> stages_by_t;
    for (int t = 0; t < settings.tau; ++t) stages_by_t.push_back(&model.stage(t));

    if (!settings.out_dir.empty()) fs::create_directories(settings.out_dir);

    auto do_step = [&](int64_t step, nn::LossBreakdown* lb) {
        Rng rng(Rng::derive(settings.seed, static_cast<uint64_t>(step)));
        auto batch = sample_batch(samples, opt.batch_size, opt.crop, rng);
        return cascade_step(batch, stages_by_t, weights, adam, lb);
    };
    auto save = [&](int64_t step, bool best) {
        model.train_step = step;
        const std::string path =
            best ? (fs::path(settings.out_dir) / (settings.run_name + "_best.ckpt")).string()
                 : checkpoint_path(settings.out_dir, settings.run_name, step);
        save_derain_checkpoint(path, model, &adam);
        return path;
    };
    auto validate = [&]() {
        if (val_samples.empty()) return std::numeric_limits<double>::quiet_NaN();
        double acc = 0;
        nn::MultiTaskNet<float>::Workspace ws;
        for (const TrainSample& s : val_samples) {
            nn::Tensor<float> input = nn::image_to_tensor<float>(s.rain);
            const nn::Tensor<float> t_streak = nn::image_to_tensor<float>(s.streak);
            const nn::Tensor<float> t_bg = nn::image_to_tensor<float>(s.background);
            for (auto* net : stages_by_t) {
                auto pred = net->forward(input, &ws);
                acc += nn::joint_loss(pred, t_streak, t_bg, s.mask, weights).total;
                input = std::move(pred.background);
            }
        }
        return acc / static_cast<double>(val_samples.size());
    };

    TrainResult result = run_training_loop(model.train_step, settings, do_step, save,
                                           validate, log_stream);
    model.train_step = result.steps_done ? result.steps_done : model.train_step;
    if (!settings.out_dir.empty() && !result.log.empty())
        write_train_log((fs::path(settings.out_dir) / (settings.run_name + "_log.csv")).string(),
                        result.log);
    return result;
}

TrainResult train_dehaze(const std::vector<RainExample>& data, DehazeModel& model,
                         const OptimizerSettings& opt, const TrainSettings& settings,
                         nn::Adam<float>& adam, std::ostream* log_stream) {
    if (data.empty()) throw ConfigError("training dataset is empty");
    std::vector<DehazeSample> samples;
    for (const auto& ex : data) samples.push_back(make_dehaze_sample(ex));

    if (!settings.out_dir.empty()) fs::create_directories(settings.out_dir);

    auto do_step = [&](int64_t step, nn::LossBreakdown* lb) {
        Rng rng(Rng::derive(settings.seed, static_cast<uint64_t>(step)));
        model.net.zero_grad();
        const double scale = 1.0 / static_cast<double>(opt.batch_size);
        double total = 0;
        nn::DehazeNet<float>::Workspace ws;
        for (int b = 0; b < opt.batch_size; ++b) {
            const DehazeSample& s = samples[static_cast<size_t>(
                rng.uniform_int(0, static_cast<int>(samples.size()) - 1))];
            const int h = s.input.height, w = s.input.width;
            Image in = s.input, tgt = s.target;
            if (opt.crop < h && opt.crop < w) {
                const int y0 = rng.uniform_int(0, h - opt.crop);
                const int x0 = rng.uniform_int(0, w - opt.crop);
                in = crop(in, y0, x0, opt.crop, opt.crop);
                tgt = crop(tgt, y0, x0, opt.crop, opt.crop);
            }
            auto out = model.net.forward(nn::image_to_tensor<float>(in), &ws);
            nn::Tensor<float> d_out;
            total += nn::mse_loss(out, nn::image_to_tensor<float>(tgt), &d_out, scale) * scale;
            model.net.backward(ws, d_out);
        }
        adam.step();
        if (lb) *lb = {0, total, 0, total};
        return total;
    };
    auto save = [&](int64_t step, bool best) {
        model.train_step = step;
        const std::string path =
            best ? (fs::path(settings.out_dir) / (settings.run_name + "_best.ckpt")).string()
                 : checkpoint_path(settings.out_dir, settings.run_name, step);
        save_dehaze_checkpoint(path, model, &adam);
        return path;
    };
    auto validate = [] { return std::numeric_limits<double>::quiet_NaN(); };

    TrainResult result = run_training_loop(model.train_step, settings, do_step, save,
                                           validate, log_stream);
    model.train_step = result.steps_done ? result.steps_done : model.train_step;
    if (!settings.out_dir.empty() && !result.log.empty())
        write_train_log((fs::path(settings.out_dir) / (settings.run_name + "_log.csv")).string(),
                        result.log);
    return result;
}

void write_train_log(const std::string& path, const std::vector<TrainLogRow>& rows) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write training log: " + path);
    out << "step,total,streak_mse,bg_mse,det_ce\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g,%.9g,%.9g\n",
                      static_cast<long long>(r.step), r.total, r.streak_mse, r.bg_mse,
                      r.det_ce);
        out << buf;
    }
}

}  // namespace derain
