#include "derain/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "derain/errors.hpp"
#include "derain/nn/tensor.hpp"

namespace derain {

void PipelineConfig::validate() const {
    if (tau < 1) throw ConfigError("pipeline tau must be >= 1");
    if (sequence.empty()) throw ConfigError("pipeline sequence must be nonempty");
    for (const auto& s : sequence)
        if (s != "derain" && s != "dehaze")
            throw ConfigError("unknown pipeline stage: " + s);
    if (export_bit_depth != 8 && export_bit_depth != 16)
        throw ConfigError("export bit depth must be 8 or 16");
}

namespace {

std::vector<double> image_to_state(const Image& img) {
    return std::vector<double>(img.data.begin(), img.data.end());
}

Image state_to_image(const std::vector<double>& state, int h, int w, int c) {
    Image img(h, w, c);
    for (size_t i = 0; i < state.size(); ++i) img.data[i] = static_cast<float>(state[i]);
    return img;
}

// One recurrence on the double-precision state.
void recurrent_pass(const DerainModel& model, std::vector<double>& state, int h, int w,
                    int c, int tau, RecurrenceTrace* trace) {
    if (tau < 1) throw ConfigError("tau must be >= 1");
    if (!model.shared_stages && tau > model.max_tau())
        throw ConfigError("recurrent checkpoint holds " + std::to_string(model.max_tau()) +
                          " stages, tau=" + std::to_string(tau) + " requested");
    if (trace) {
        trace->height = h;
        trace->width = w;
        trace->channels = c;
        trace->input = state;
        trace->steps.clear();
    }
    for (int t = 0; t < tau; ++t) {
        Image in = state_to_image(state, h, w, c);
        const nn::MultiTaskNet<float>& net = model.stage(t);
        auto pred = net.forward(nn::image_to_tensor<float>(in));
        Image bg = nn::tensor_to_image(pred.background);

        RecurrenceStep step;
        step.residue.resize(state.size());
        step.background.resize(state.size());
        for (size_t i = 0; i < state.size(); ++i) {
            // residue relative to the image the network actually saw
            step.residue[i] =
                static_cast<double>(in.data[i]) - static_cast<double>(bg.data[i]);
            step.background[i] = state[i] - step.residue[i];
        }
        state = step.background;
        if (trace) {
            step.mask_prob = nn::tensor_to_image(pred.mask_prob);
            step.streak = nn::tensor_to_image(pred.streak);
            trace->steps.push_back(std::move(step));
        }
    }
}

}  // namespace

DerainOnceResult derain_once(const nn::MultiTaskNet<float>& net, const Image& rain) {
    auto pred = net.forward(nn::image_to_tensor<float>(rain));
    DerainOnceResult out;
    out.background = nn::tensor_to_image(pred.background);
    out.mask_prob = nn::tensor_to_image(pred.mask_prob);
    out.streak = nn::tensor_to_image(pred.streak);
    out.residue = Image(rain.height, rain.width, rain.channels);
    for (size_t i = 0; i < rain.data.size(); ++i)
        out.residue.data[i] = rain.data[i] - out.background.data[i];
    return out;
}

Image derain_recurrent(const DerainModel& model, const Image& rain, int tau,
                       RecurrenceTrace* trace) {
    std::vector<double> state = image_to_state(rain);
    recurrent_pass(model, state, rain.height, rain.width, rain.channels, tau, trace);
    return state_to_image(state, rain.height, rain.width, rain.channels);
}

std::vector<double> replay_trace(const RecurrenceTrace& trace) {
    std::vector<double> state = trace.input;
    for (const RecurrenceStep& step : trace.steps)
        for (size_t i = 0; i < state.size(); ++i) state[i] -= step.residue[i];
    return state;
}

Image dehaze(const DehazeModel& model, const Image& hazy) {
    auto out = model.net.forward(nn::image_to_tensor<float>(hazy));
    return nn::tensor_to_image(out);
}

PipelineModels load_pipeline_models(const PipelineConfig& cfg) {
    cfg.validate();
    PipelineModels models;
    for (const auto& stage : cfg.sequence) {
        if (stage == "derain" && !models.derain_model) {
            if (cfg.derain_checkpoint.empty())
                throw ConfigError("pipeline stage 'derain' has no derain_checkpoint");
            models.derain_model = load_derain_model(cfg.derain_checkpoint);
        } else if (stage == "dehaze" && !models.dehaze_model) {
            if (cfg.dehaze_checkpoint.empty())
                throw ConfigError("pipeline stage 'dehaze' has no dehaze_checkpoint");
            models.dehaze_model = load_dehaze_model(cfg.dehaze_checkpoint);
        }
    }
    return models;
}

Image run_sequence(const PipelineModels& models, const PipelineConfig& cfg,
                   const Image& input, std::vector<StageTrace>* trace) {
    cfg.validate();
    const int h = input.height, w = input.width, c = input.channels;
    std::vector<double> state = image_to_state(input);
    if (trace) trace->clear();
    for (const std::string& stage : cfg.sequence) {
        if (stage == "derain") {
            if (!models.derain_model)
                throw ConfigError("pipeline stage 'derain' has no loaded model");
            recurrent_pass(*models.derain_model, state, h, w, c, cfg.tau, nullptr);
        } else {
            if (!models.dehaze_model)
                throw ConfigError("pipeline stage 'dehaze' has no loaded model");
            Image out = dehaze(*models.dehaze_model, state_to_image(state, h, w, c));
            state = image_to_state(out);
        }
        if (trace) trace->push_back({stage, state_to_image(state, h, w, c)});
    }
    return state_to_image(state, h, w, c);
}

Image clipped(const Image& img) {
    Image out = img;
    clip01(out);
    return out;
}

}  // namespace derain
