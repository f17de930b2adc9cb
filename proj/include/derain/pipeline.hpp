#pragma once
#include <optional>
#include <string>
#include <vector>

#include "derain/checkpoint.hpp"
#include "derain/image.hpp"

namespace derain {

struct PipelineConfig {
    int tau = 3;
    std::vector<std::string> sequence = {"derain", "dehaze", "derain"};
    std::string derain_checkpoint;
    std::string dehaze_checkpoint;
    int export_bit_depth = 8;

    void validate() const;
};

struct DerainOnceResult {
    Image residue;     // O - predicted background
    Image mask_prob;   // rain probability
    Image streak;      // predicted streak layer
    Image background;  // predicted background
};

// Single pass of the multi-task network.
DerainOnceResult derain_once(const nn::MultiTaskNet<float>& net, const Image& rain);

// Per-iteration record of the recurrent derainer. The double-precision
// state makes the residue bookkeeping exact: background = input_state -
// residue at every step, and the final background equals the initial input
// minus the summed residues.
struct RecurrenceStep {
    std::vector<double> residue;
    std::vector<double> background;  // state after this step
    Image mask_prob;
    Image streak;
};

struct RecurrenceTrace {
    int height = 0, width = 0, channels = 0;
    std::vector<double> input;  // initial rain image
    std::vector<RecurrenceStep> steps;
};

// Applies the model tau times, accumulating residues. Intermediate images
// stay in floating point (no quantization, no clipping); clip at export.
Image derain_recurrent(const DerainModel& model, const Image& rain, int tau,
                       RecurrenceTrace* trace = nullptr);

// Folds the trace (input minus each residue in order); bitwise equal to the
// background state the pipeline produced.
std::vector<double> replay_trace(const RecurrenceTrace& trace);

// Single pass of the veil-removal network.
Image dehaze(const DehazeModel& model, const Image& hazy);

struct StageTrace {
    std::string stage;
    Image output;  // unclipped float snapshot after the stage
};

struct PipelineModels {
    std::optional<DerainModel> derain_model;
    std::optional<DehazeModel> dehaze_model;
};

// Loads the checkpoints demanded by the configured sequence; a stage without
// its checkpoint is a configuration error naming the stage.
PipelineModels load_pipeline_models(const PipelineConfig& cfg);

Image run_sequence(const PipelineModels& models, const PipelineConfig& cfg,
                   const Image& input, std::vector<StageTrace>* trace = nullptr);

// Clips to [0,1]; the export step of the pipeline.
Image clipped(const Image& img);

}  // namespace derain
