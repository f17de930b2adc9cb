#pragma once
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "derain/image.hpp"
#include "derain/rng.hpp"

namespace derain {

// Sampling ranges for one family of streaks. Streaks are anti-aliased line
// segments with a Gaussian cross-section; width is the nominal full width in
// pixels (sigma = width/2) and density counts streaks per kilopixel.
struct StreakTemplate {
    float dir_min_deg = 70.0f;
    float dir_max_deg = 110.0f;
    float jitter_deg = 2.0f;      // per-streak deviation from the layer direction
    float length_min = 12.0f;
    float length_max = 22.0f;
    float width_min = 1.0f;
    float width_max = 2.0f;
    float intensity_min = 0.15f;
    float intensity_max = 0.55f;
    float density = 5.0f;
};

struct HazeRanges {
    float alpha_min = 0.6f;
    float alpha_max = 0.95f;
    float light_min = 0.7f;
    float light_max = 1.0f;
};

// Atmospheric veil parameters: scalar transmission (or a per-pixel map) plus
// global atmospheric light per channel.
struct HazeParams {
    float alpha = 1.0f;
    Image alpha_map;  // optional H x W x 1; empty means scalar alpha
    std::array<float, 3> atmospheric_light{0.9f, 0.9f, 0.9f};

    float alpha_at(int y, int x) const {
        return alpha_map.empty() ? alpha : alpha_map.at(y, x, 0);
    }
    void validate(int h, int w) const;
};

struct SynthesisConfig {
    int num_directions = 1;   // streak families per example
    int overlap_count = 1;    // upper bound on layers in any composition
    int repeats = 1;          // examples per background
    StreakTemplate streaks;
    float mask_threshold = 0.05f;
    std::optional<HazeRanges> haze;
    float haze_probability = 1.0f;  // chance a heavy example gets a veil
    uint64_t rng_seed = 0;

    void validate() const;
};

// Additive intensity layer for one streak family.
struct StreakLayer {
    Image data;  // H x W x 1, nonnegative
    float direction_deg = 90.0f;
    float length_min = 0, length_max = 0;
    float width_min = 0, width_max = 0;
    float density = 0;
};

struct RainExample {
    std::string id;
    Image rain;        // O
    Image background;  // B
    Image streak;      // combined S, H x W x 1
    Mask mask;         // R
    std::optional<HazeParams> haze;
};

enum class RainMode { Light, Heavy, HazeOnly };
std::string rain_mode_name(RainMode m);
RainMode rain_mode_from_name(const std::string& s);

// --- manifest records: everything needed to re-render bit-identically ---

struct LayerRecord {
    float direction_deg = 90.0f;
    uint64_t seed = 0;
    float jitter_deg = 0, length_min = 0, length_max = 0;
    float width_min = 0, width_max = 0;
    float intensity_min = 0, intensity_max = 0;
    float density = 0;
};

struct ExampleRecord {
    std::string id;
    int background_index = 0;
    uint64_t background_seed = 0;  // procedural backgrounds only
    std::vector<LayerRecord> layers;
    bool has_haze = false;
    float alpha = 1.0f;
    std::array<float, 3> atmospheric_light{0, 0, 0};
};

struct BackgroundSpec {
    enum class Type { Directory, Procedural };
    Type type = Type::Procedural;
    std::string path;                 // directory mode
    std::vector<std::string> files;   // resolved + sorted, directory mode
    std::vector<std::string> hashes;  // FNV-1a per file, directory mode
    int count = 8;                    // procedural mode
    int width = 96, height = 96;
};

struct DatasetManifest {
    int schema_version = 1;
    std::string config_hash;
    std::string split = "train";
    RainMode mode = RainMode::Light;
    uint64_t seed = 0;
    SynthesisConfig synthesis;
    BackgroundSpec backgrounds;
    std::vector<ExampleRecord> examples;
};

// --- operations ---

// Renders the streak family at `direction_index`, sampling its base
// direction and per-streak parameters from `rng`.
StreakLayer render_streak_layer(const SynthesisConfig& cfg, int direction_index,
                                int height, int width, Rng& rng);

// Deterministic render from a recorded layer description.
StreakLayer render_layer_from_record(const LayerRecord& rec, int height, int width);

// mask(x) = 1 iff the summed streak intensity exceeds `threshold`.
Mask derive_mask(const std::vector<StreakLayer>& layers, float threshold);

// O = clip(B + S * R)
Image compose_light_rain(const Image& background, const StreakLayer& streak, const Mask& mask);

// O = clip(alpha * (B + sum_t S_t * R) + (1 - alpha) * A)
Image compose_heavy_rain(const Image& background, const std::vector<StreakLayer>& streaks,
                         const Mask& mask, const HazeParams& haze, int overlap_bound = 0);

// O = clip(alpha * B + (1 - alpha) * A)
Image compose_haze_only(const Image& background, const HazeParams& haze);

// Smooth random scene used when no photographic backgrounds are supplied.
Image procedural_background(int height, int width, uint64_t seed);

// Samples all per-example parameters into a manifest. Backgrounds in
// directory mode must already be resolved (files listed).
DatasetManifest generate_manifest(const SynthesisConfig& cfg, RainMode mode,
                                  const BackgroundSpec& backgrounds,
                                  const std::string& split);

// Re-renders every example from its manifest record. Pure function of the
// manifest (plus the background files for directory mode).
std::vector<RainExample> synthesize_from_manifest(const DatasetManifest& manifest);

// generate_manifest + synthesize_from_manifest in one call.
std::vector<RainExample> build_dataset(const SynthesisConfig& cfg, RainMode mode,
                                       const BackgroundSpec& backgrounds,
                                       const std::string& split, DatasetManifest* manifest_out);

uint64_t fnv1a64(const void* data, size_t len);
std::string fnv1a64_hex(const std::string& s);

}  // namespace derain
