#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "derain/nn/adam.hpp"
#include "derain/nn/net.hpp"

namespace derain {

// Streak-removal model: one network per recurrence stage, or a single
// network applied at every stage when weights are shared.
struct DerainModel {
    nn::NetworkConfig config;
    bool shared_stages = true;
    std::vector<nn::MultiTaskNet<float>> stages;
    int64_t train_step = 0;
    std::string config_hash;

    const nn::MultiTaskNet<float>& stage(int t) const {
        return shared_stages ? stages.front() : stages.at(static_cast<size_t>(t));
    }
    nn::MultiTaskNet<float>& stage(int t) {
        return shared_stages ? stages.front() : stages.at(static_cast<size_t>(t));
    }
    // Largest recurrence depth the stored stages support (unbounded when shared).
    int max_tau() const {
        return shared_stages ? 1 << 20 : static_cast<int>(stages.size());
    }
    std::vector<nn::ParamRef<float>> all_params();
    void zero_grad() {
        for (auto& s : stages) s.zero_grad();
    }
};

DerainModel make_derain_model(const nn::NetworkConfig& cfg, int stage_count,
                              bool shared_stages, uint64_t seed);

struct DehazeModel {
    nn::NetworkConfig config;  // intra_recurrences forced to 1 by the net
    nn::DehazeNet<float> net;
    int64_t train_step = 0;
    std::string config_hash;
};

DehazeModel make_dehaze_model(const nn::NetworkConfig& cfg, uint64_t seed);

// Self-describing binary checkpoint: magic, JSON header (network config,
// tensor index, optimizer state, step count), float32 payload.
void save_derain_checkpoint(const std::string& path, DerainModel& model,
                            nn::Adam<float>* adam = nullptr);
void save_dehaze_checkpoint(const std::string& path, DehazeModel& model,
                            nn::Adam<float>* adam = nullptr);

DerainModel load_derain_model(const std::string& path);
DehazeModel load_dehaze_model(const std::string& path);

// Restores optimizer moments and step count saved alongside the model.
// `adam` must already be attached to the model parameters. Returns false if
// the checkpoint carries no optimizer state.
bool restore_adam_state(const std::string& path, nn::Adam<float>& adam);

// Kind tag of a checkpoint file ("derain" or "dehaze").
std::string checkpoint_kind(const std::string& path);

}  // namespace derain
