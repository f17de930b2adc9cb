#pragma once
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "derain/checkpoint.hpp"
#include "derain/nn/adam.hpp"
#include "derain/nn/loss.hpp"
#include "derain/synthesis.hpp"

namespace derain {

// Full-image training targets assembled from a RainExample. For hazy
// examples the veil stays in the background target and scales the streak
// target (O = [aB + (1-a)A] + (aS)R), so the streak-removal model learns
// streaks only and the veil is left to the dehaze stage.
struct TrainSample {
    Image rain;
    Image background;  // background-head target
    Image streak;      // 1-channel streak-head target
    Mask mask;
};

TrainSample make_derain_sample(const RainExample& ex);

struct DehazeSample {
    Image input;
    Image target;
};

DehazeSample make_dehaze_sample(const RainExample& ex);

struct OptimizerSettings {
    nn::AdamConfig adam;
    int batch_size = 8;
    int crop = 64;
};

struct TrainSettings {
    int64_t steps = 2000;
    int checkpoint_every = 500;
    int log_every = 100;
    uint64_t seed = 1;
    std::string out_dir;  // empty disables checkpoint files
    std::string run_name = "model";
    int tau = 1;  // recurrence depth during training
};

struct TrainLogRow {
    int64_t step = 0;
    double total = 0, streak_mse = 0, bg_mse = 0, det_ce = 0;
};

struct TrainResult {
    double initial_loss = 0;
    double final_loss = 0;
    int64_t steps_done = 0;
    std::string final_checkpoint;
    std::string best_checkpoint;
    std::vector<TrainLogRow> log;
};

// One optimizer step over a batch; returns the pre-update batch loss.
double train_step(const std::vector<TrainSample>& batch, nn::MultiTaskNet<float>& net,
                  const nn::LossWeights& weights, nn::Adam<float>& adam,
                  nn::LossBreakdown* breakdown = nullptr);

// Trains the (possibly recurrent) streak-removal model. Stage t is fed the
// stage t-1 background prediction as a fixed input; every stage is scored
// against the same targets and the reported loss is the sum over stages.
// Resumes from model.train_step when it is nonzero.
TrainResult train_derain(const std::vector<RainExample>& data, DerainModel& model,
                         const nn::LossWeights& weights, const OptimizerSettings& opt,
                         const TrainSettings& settings, nn::Adam<float>& adam,
                         const std::vector<RainExample>* validation = nullptr,
                         std::ostream* log_stream = nullptr);

TrainResult train_dehaze(const std::vector<RainExample>& data, DehazeModel& model,
                         const OptimizerSettings& opt, const TrainSettings& settings,
                         nn::Adam<float>& adam,
                         std::ostream* log_stream = nullptr);

void write_train_log(const std::string& path, const std::vector<TrainLogRow>& rows);

}  // namespace derain
