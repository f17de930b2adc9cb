#pragma once
#include <json.hpp>

#include "derain/nn/adam.hpp"
#include "derain/nn/loss.hpp"
#include "derain/nn/net.hpp"
#include "derain/pipeline.hpp"
#include "derain/synthesis.hpp"

namespace derain {

using json = nlohmann::json;

// ---- synthesis ----

inline void to_json(json& j, const StreakTemplate& s) {
    j = json{{"dir_min_deg", s.dir_min_deg},   {"dir_max_deg", s.dir_max_deg},
             {"jitter_deg", s.jitter_deg},     {"length_min", s.length_min},
             {"length_max", s.length_max},     {"width_min", s.width_min},
             {"width_max", s.width_max},       {"intensity_min", s.intensity_min},
             {"intensity_max", s.intensity_max}, {"density", s.density}};
}
inline void from_json(const json& j, StreakTemplate& s) {
    j.at("dir_min_deg").get_to(s.dir_min_deg);
    j.at("dir_max_deg").get_to(s.dir_max_deg);
    j.at("jitter_deg").get_to(s.jitter_deg);
    j.at("length_min").get_to(s.length_min);
    j.at("length_max").get_to(s.length_max);
    j.at("width_min").get_to(s.width_min);
    j.at("width_max").get_to(s.width_max);
    j.at("intensity_min").get_to(s.intensity_min);
    j.at("intensity_max").get_to(s.intensity_max);
    j.at("density").get_to(s.density);
}

inline void to_json(json& j, const HazeRanges& h) {
    j = json{{"alpha_min", h.alpha_min},
             {"alpha_max", h.alpha_max},
             {"light_min", h.light_min},
             {"light_max", h.light_max}};
}
inline void from_json(const json& j, HazeRanges& h) {
    j.at("alpha_min").get_to(h.alpha_min);
    j.at("alpha_max").get_to(h.alpha_max);
    j.at("light_min").get_to(h.light_min);
    j.at("light_max").get_to(h.light_max);
}

inline void to_json(json& j, const SynthesisConfig& c) {
    j = json{{"num_directions", c.num_directions},
             {"overlap_count", c.overlap_count},
             {"repeats", c.repeats},
             {"streaks", c.streaks},
             {"mask_threshold", c.mask_threshold},
             {"haze_probability", c.haze_probability},
             {"rng_seed", c.rng_seed}};
    if (c.haze) j["haze"] = *c.haze;
    else j["haze"] = nullptr;
}
inline void from_json(const json& j, SynthesisConfig& c) {
    j.at("num_directions").get_to(c.num_directions);
    j.at("overlap_count").get_to(c.overlap_count);
    if (j.contains("repeats")) j.at("repeats").get_to(c.repeats);
    j.at("streaks").get_to(c.streaks);
    j.at("mask_threshold").get_to(c.mask_threshold);
    if (j.contains("haze_probability")) j.at("haze_probability").get_to(c.haze_probability);
    c.rng_seed = j.value("rng_seed", static_cast<uint64_t>(0));
    if (j.contains("haze") && !j.at("haze").is_null())
        c.haze = j.at("haze").get<HazeRanges>();
    else
        c.haze.reset();
}

inline void to_json(json& j, const LayerRecord& r) {
    j = json{{"direction_deg", r.direction_deg}, {"seed", r.seed},
             {"jitter_deg", r.jitter_deg},       {"length_min", r.length_min},
             {"length_max", r.length_max},       {"width_min", r.width_min},
             {"width_max", r.width_max},         {"intensity_min", r.intensity_min},
             {"intensity_max", r.intensity_max}, {"density", r.density}};
}
inline void from_json(const json& j, LayerRecord& r) {
    j.at("direction_deg").get_to(r.direction_deg);
    j.at("seed").get_to(r.seed);
    j.at("jitter_deg").get_to(r.jitter_deg);
    j.at("length_min").get_to(r.length_min);
    j.at("length_max").get_to(r.length_max);
    j.at("width_min").get_to(r.width_min);
    j.at("width_max").get_to(r.width_max);
    j.at("intensity_min").get_to(r.intensity_min);
    j.at("intensity_max").get_to(r.intensity_max);
    j.at("density").get_to(r.density);
}

inline void to_json(json& j, const ExampleRecord& r) {
    j = json{{"id", r.id},
             {"background_index", r.background_index},
             {"background_seed", r.background_seed},
             {"layers", r.layers},
             {"has_haze", r.has_haze}};
    if (r.has_haze) {
        j["alpha"] = r.alpha;
        j["atmospheric_light"] = r.atmospheric_light;
    }
}
inline void from_json(const json& j, ExampleRecord& r) {
    j.at("id").get_to(r.id);
    j.at("background_index").get_to(r.background_index);
    j.at("background_seed").get_to(r.background_seed);
    j.at("layers").get_to(r.layers);
    j.at("has_haze").get_to(r.has_haze);
    if (r.has_haze) {
        j.at("alpha").get_to(r.alpha);
        j.at("atmospheric_light").get_to(r.atmospheric_light);
    }
}

inline void to_json(json& j, const BackgroundSpec& b) {
    j = json{{"type", b.type == BackgroundSpec::Type::Procedural ? "procedural" : "dir"}};
    if (b.type == BackgroundSpec::Type::Procedural) {
        j["count"] = b.count;
        j["width"] = b.width;
        j["height"] = b.height;
    } else {
        j["path"] = b.path;
        j["files"] = b.files;
        j["hashes"] = b.hashes;
    }
}
inline void from_json(const json& j, BackgroundSpec& b) {
    const std::string t = j.at("type").get<std::string>();
    if (t == "procedural") {
        b.type = BackgroundSpec::Type::Procedural;
        j.at("count").get_to(b.count);
        j.at("width").get_to(b.width);
        j.at("height").get_to(b.height);
    } else if (t == "dir") {
        b.type = BackgroundSpec::Type::Directory;
        j.at("path").get_to(b.path);
        if (j.contains("files")) j.at("files").get_to(b.files);
        if (j.contains("hashes")) j.at("hashes").get_to(b.hashes);
    } else {
        throw ConfigError("unknown background type: " + t);
    }
}

inline void to_json(json& j, const DatasetManifest& m) {
    j = json{{"schema_version", m.schema_version},
             {"config_hash", m.config_hash},
             {"split", m.split},
             {"mode", rain_mode_name(m.mode)},
             {"seed", m.seed},
             {"synthesis", m.synthesis},
             {"backgrounds", m.backgrounds},
             {"examples", m.examples}};
}
inline void from_json(const json& j, DatasetManifest& m) {
    j.at("schema_version").get_to(m.schema_version);
    if (j.contains("config_hash")) j.at("config_hash").get_to(m.config_hash);
    j.at("split").get_to(m.split);
    m.mode = rain_mode_from_name(j.at("mode").get<std::string>());
    j.at("seed").get_to(m.seed);
    j.at("synthesis").get_to(m.synthesis);
    j.at("backgrounds").get_to(m.backgrounds);
    j.at("examples").get_to(m.examples);
}

}  // namespace derain

namespace derain::nn {

inline void to_json(json& j, const NetworkConfig& c) {
    j = json{{"input_channels", c.input_channels},
             {"feature_channels", c.feature_channels},
             {"intra_recurrences", c.intra_recurrences},
             {"dilation_factors", c.dilation_factors},
             {"kernel_size", c.kernel_size},
             {"head_ordering", head_ordering_name(c.head_ordering)}};
}
inline void from_json(const json& j, NetworkConfig& c) {
    if (j.contains("input_channels")) j.at("input_channels").get_to(c.input_channels);
    if (j.contains("feature_channels")) j.at("feature_channels").get_to(c.feature_channels);
    if (j.contains("intra_recurrences")) j.at("intra_recurrences").get_to(c.intra_recurrences);
    if (j.contains("dilation_factors")) j.at("dilation_factors").get_to(c.dilation_factors);
    if (j.contains("kernel_size")) j.at("kernel_size").get_to(c.kernel_size);
    if (j.contains("head_ordering"))
        c.head_ordering = head_ordering_from_name(j.at("head_ordering").get<std::string>());
}

inline void to_json(json& j, const LossWeights& w) {
    j = json{{"lambda_bg", w.lambda_bg}, {"lambda_det", w.lambda_det}};
}
inline void from_json(const json& j, LossWeights& w) {
    if (j.contains("lambda_bg")) j.at("lambda_bg").get_to(w.lambda_bg);
    if (j.contains("lambda_det")) j.at("lambda_det").get_to(w.lambda_det);
}

inline void to_json(json& j, const AdamConfig& a) {
    j = json{{"lr", a.lr}, {"beta1", a.beta1}, {"beta2", a.beta2}, {"eps", a.eps}};
}
inline void from_json(const json& j, AdamConfig& a) {
    if (j.contains("lr")) j.at("lr").get_to(a.lr);
    if (j.contains("beta1")) j.at("beta1").get_to(a.beta1);
    if (j.contains("beta2")) j.at("beta2").get_to(a.beta2);
    if (j.contains("eps")) j.at("eps").get_to(a.eps);
}

}  // namespace derain::nn

namespace derain {

inline void to_json(json& j, const PipelineConfig& c) {
    j = json{{"tau", c.tau},
             {"sequence", c.sequence},
             {"derain_checkpoint", c.derain_checkpoint},
             {"dehaze_checkpoint", c.dehaze_checkpoint},
             {"export_bit_depth", c.export_bit_depth}};
}
inline void from_json(const json& j, PipelineConfig& c) {
    if (j.contains("tau")) j.at("tau").get_to(c.tau);
    if (j.contains("sequence")) j.at("sequence").get_to(c.sequence);
    if (j.contains("derain_checkpoint")) j.at("derain_checkpoint").get_to(c.derain_checkpoint);
    if (j.contains("dehaze_checkpoint")) j.at("dehaze_checkpoint").get_to(c.dehaze_checkpoint);
    if (j.contains("export_bit_depth")) j.at("export_bit_depth").get_to(c.export_bit_depth);
}

// Provenance hash recorded in every produced artifact.
inline std::string config_hash(const json& j) { return fnv1a64_hex(j.dump()); }

json load_json_file(const std::string& path);
void save_json_file(const std::string& path, const json& j);

}  // namespace derain
