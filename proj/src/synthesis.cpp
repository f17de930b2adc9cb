#include "derain/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "derain/errors.hpp"
#include "derain/png_io.hpp"

namespace derain {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr float kStreakCutoffSigmas = 3.0f;  // hard support bound of a streak
}  // namespace

void HazeParams::validate(int h, int w) const {
    auto check = [](float a) {
        if (!(a > 0.0f && a <= 1.0f))
            throw ConfigError("transmission alpha must lie in (0,1]");
    };
    if (alpha_map.empty()) {
        check(alpha);
    } else {
        if (alpha_map.height != h || alpha_map.width != w || alpha_map.channels != 1)
            throw ShapeError("transmission map shape mismatch");
        for (float a : alpha_map.data) check(a);
    }
    for (float a : atmospheric_light)
        if (!(a >= 0.0f && a <= 1.0f))
            throw ConfigError("atmospheric light must lie in [0,1]");
}

void SynthesisConfig::validate() const {
    if (num_directions < 1) throw ConfigError("num_directions must be >= 1");
    if (overlap_count < num_directions)
        throw ConfigError("overlap_count must be >= num_directions");
    if (repeats < 1) throw ConfigError("repeats must be >= 1");
    if (!(mask_threshold > 0.0f)) throw ConfigError("mask_threshold must be > 0");
    if (haze_probability < 0.0f || haze_probability > 1.0f)
        throw ConfigError("haze_probability must lie in [0,1]");
    const StreakTemplate& s = streaks;
    if (s.dir_min_deg > s.dir_max_deg || s.length_min > s.length_max ||
        s.width_min > s.width_max || s.intensity_min > s.intensity_max)
        throw ConfigError("streak parameter range is empty");
    if (s.length_min <= 0 || s.width_min <= 0 || s.intensity_min < 0 || s.density < 0 ||
        s.jitter_deg < 0)
        throw ConfigError("streak parameters must be positive");
}

std::string rain_mode_name(RainMode m) {
    switch (m) {
        case RainMode::Light: return "light";
        case RainMode::Heavy: return "heavy";
        case RainMode::HazeOnly: return "haze";
    }
    return "light";
}

RainMode rain_mode_from_name(const std::string& s) {
    if (s == "light") return RainMode::Light;
    if (s == "heavy") return RainMode::Heavy;
    if (s == "haze") return RainMode::HazeOnly;
    throw ConfigError("unknown rain mode: " + s);
}

uint64_t fnv1a64(const void* data, size_t len) {
    const uint8_t* p = static_cast<const uint8_t*>(data);
    uint64_t h = 1469598103934665603ULL;
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

std::string fnv1a64_hex(const std::string& s) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(s.data(), s.size())));
    return buf;
}

StreakLayer render_layer_from_record(const LayerRecord& rec, int height, int width) {
    if (height < 1 || width < 1) throw ConfigError("streak layer shape must be positive");
    StreakLayer layer;
    layer.data = Image(height, width, 1);
    layer.direction_deg = rec.direction_deg;
    layer.length_min = rec.length_min;
    layer.length_max = rec.length_max;
    layer.width_min = rec.width_min;
    layer.width_max = rec.width_max;
    layer.density = rec.density;

    const long count = std::lround(static_cast<double>(rec.density) * height * width / 1000.0);
    for (long i = 0; i < count; ++i) {
        Rng srng(Rng::derive(rec.seed, static_cast<uint64_t>(i)));
        const double cx = srng.uniform(0.0, width);
        const double cy = srng.uniform(0.0, height);
        const double angle =
            rec.direction_deg + srng.uniform(-rec.jitter_deg, rec.jitter_deg);
        const double len = srng.uniform(rec.length_min, rec.length_max);
        const double w = srng.uniform(rec.width_min, rec.width_max);
        const double intensity = srng.uniform(rec.intensity_min, rec.intensity_max);
        const double sigma = w / 2.0;

        // Angle measured from +x toward -y (up on screen).
        const double dx = std::cos(angle * kPi / 180.0);
        const double dy = -std::sin(angle * kPi / 180.0);
        const double hx = dx * len / 2.0, hy = dy * len / 2.0;
        const double x0 = cx - hx, y0 = cy - hy;
        const double x1 = cx + hx, y1 = cy + hy;

        const double reach = kStreakCutoffSigmas * sigma;
        const int bx0 = std::max(0, static_cast<int>(std::floor(std::min(x0, x1) - reach)));
        const int bx1 = std::min(width - 1, static_cast<int>(std::ceil(std::max(x0, x1) + reach)));
        const int by0 = std::max(0, static_cast<int>(std::floor(std::min(y0, y1) - reach)));
        const int by1 = std::min(height - 1, static_cast<int>(std::ceil(std::max(y0, y1) + reach)));

        const double vx = x1 - x0, vy = y1 - y0;
        const double vv = vx * vx + vy * vy;
        for (int y = by0; y <= by1; ++y) {
            for (int x = bx0; x <= bx1; ++x) {
                const double qx = x - x0, qy = y - y0;
                double t = vv > 0 ? (qx * vx + qy * vy) / vv : 0.0;
                t = std::min(1.0, std::max(0.0, t));
                const double ex = qx - t * vx, ey = qy - t * vy;
                const double d2 = ex * ex + ey * ey;
                if (d2 > reach * reach) continue;
                layer.data.at(y, x, 0) +=
                    static_cast<float>(intensity * std::exp(-d2 / (2.0 * sigma * sigma)));
            }
        }
    }
    return layer;
}

StreakLayer render_streak_layer(const SynthesisConfig& cfg, int direction_index,
                                int height, int width, Rng& rng) {
    cfg.validate();
    if (direction_index < 0 || direction_index >= cfg.num_directions)
        throw ConfigError("direction_index out of range");
    LayerRecord rec;
    rec.direction_deg = static_cast<float>(
        rng.uniform(cfg.streaks.dir_min_deg, cfg.streaks.dir_max_deg));
    rec.seed = rng.next_u64();
    rec.jitter_deg = cfg.streaks.jitter_deg;
    rec.length_min = cfg.streaks.length_min;
    rec.length_max = cfg.streaks.length_max;
    rec.width_min = cfg.streaks.width_min;
    rec.width_max = cfg.streaks.width_max;
    rec.intensity_min = cfg.streaks.intensity_min;
    rec.intensity_max = cfg.streaks.intensity_max;
    rec.density = cfg.streaks.density;
    return render_layer_from_record(rec, height, width);
}

Mask derive_mask(const std::vector<StreakLayer>& layers, float threshold) {
    if (layers.empty()) throw ConfigError("derive_mask: no layers");
    if (!(threshold > 0.0f)) throw ConfigError("derive_mask: threshold must be > 0");
    const Image& first = layers.front().data;
    for (const auto& l : layers)
        if (!l.data.same_shape(first)) throw ShapeError("derive_mask: layer shape mismatch");
    Mask mask(first.height, first.width);
    const size_t n = mask.data.size();
    for (size_t i = 0; i < n; ++i) {
        float sum = 0;
        for (const auto& l : layers) sum += l.data.data[i];
        mask.data[i] = sum > threshold ? 1 : 0;
    }
    return mask;
}

namespace {

void check_overlay_shapes(const Image& bg, const Image& s, const Mask& r) {
    if (s.height != bg.height || s.width != bg.width || s.channels != 1)
        throw ShapeError("streak layer shape does not match background");
    if (r.height != bg.height || r.width != bg.width)
        throw ShapeError("rain mask shape does not match background");
}

}  // namespace

Image compose_light_rain(const Image& background, const StreakLayer& streak, const Mask& mask) {
    check_overlay_shapes(background, streak.data, mask);
    Image out(background.height, background.width, background.channels);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) {
            const float add = mask.at(y, x) ? streak.data.at(y, x, 0) : 0.0f;
            for (int c = 0; c < out.channels; ++c)
                out.at(y, x, c) = std::min(1.0f, std::max(0.0f, background.at(y, x, c) + add));
        }
    return out;
}

Image compose_heavy_rain(const Image& background, const std::vector<StreakLayer>& streaks,
                         const Mask& mask, const HazeParams& haze, int overlap_bound) {
    if (streaks.empty()) throw ConfigError("compose_heavy_rain: no streak layers");
    if (overlap_bound > 0 && static_cast<int>(streaks.size()) > overlap_bound)
        throw ConfigError("compose_heavy_rain: more streak layers than the overlap bound");
    for (const auto& s : streaks) check_overlay_shapes(background, s.data, mask);
    haze.validate(background.height, background.width);

    Image out(background.height, background.width, background.channels);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) {
            float sum = 0;
            for (const auto& s : streaks) sum += s.data.at(y, x, 0);
            const float add = mask.at(y, x) ? sum : 0.0f;
            const float a = haze.alpha_at(y, x);
            for (int c = 0; c < out.channels; ++c) {
                const float v = a * (background.at(y, x, c) + add) +
                                (1.0f - a) * haze.atmospheric_light[c];
                out.at(y, x, c) = std::min(1.0f, std::max(0.0f, v));
            }
        }
    return out;
}

Image compose_haze_only(const Image& background, const HazeParams& haze) {
    haze.validate(background.height, background.width);
    Image out(background.height, background.width, background.channels);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) {
            const float a = haze.alpha_at(y, x);
            for (int c = 0; c < out.channels; ++c) {
                const float v = a * background.at(y, x, c) +
                                (1.0f - a) * haze.atmospheric_light[c];
                out.at(y, x, c) = std::min(1.0f, std::max(0.0f, v));
            }
        }
    return out;
}

Image procedural_background(int height, int width, uint64_t seed) {
    Rng rng(seed);
    Image img(height, width, 3);

    // Directional base gradient.
    const double theta = rng.uniform(0.0, 2.0 * kPi);
    const double gx = std::cos(theta), gy = std::sin(theta);
    std::array<double, 3> base, slope;
    for (int c = 0; c < 3; ++c) {
        base[c] = rng.uniform(0.25, 0.7);
        slope[c] = rng.uniform(-0.25, 0.25);
    }
    const double diag = std::sqrt(static_cast<double>(width) * width +
                                  static_cast<double>(height) * height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const double t = (gx * x + gy * y) / diag;
            for (int c = 0; c < 3; ++c)
                img.at(y, x, c) = static_cast<float>(base[c] + slope[c] * t);
        }

    // Smooth blobs.
    const int blobs = rng.uniform_int(4, 8);
    for (int b = 0; b < blobs; ++b) {
        const double bx = rng.uniform(0.0, width);
        const double by = rng.uniform(0.0, height);
        const double rad = rng.uniform(width / 10.0, width / 2.5);
        std::array<double, 3> amp;
        for (int c = 0; c < 3; ++c) amp[c] = rng.uniform(-0.28, 0.28);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                const double d2 = (x - bx) * (x - bx) + (y - by) * (y - by);
                const double g = std::exp(-d2 / (2.0 * rad * rad));
                for (int c = 0; c < 3; ++c)
                    img.at(y, x, c) += static_cast<float>(amp[c] * g);
            }
    }

    // Mild oriented texture so the scene is not piecewise-flat.
    const double freq = rng.uniform(0.08, 0.35);
    const double tdir = rng.uniform(0.0, kPi);
    const double phase = rng.uniform(0.0, 2.0 * kPi);
    const double tamp = rng.uniform(0.015, 0.05);
    const double tx = std::cos(tdir), ty = std::sin(tdir);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const float v = static_cast<float>(tamp * std::sin(freq * (tx * x + ty * y) + phase));
            for (int c = 0; c < 3; ++c) img.at(y, x, c) += v;
        }

    for (float& v : img.data) v = std::min(0.97f, std::max(0.03f, v));
    return img;
}

DatasetManifest generate_manifest(const SynthesisConfig& cfg, RainMode mode,
                                  const BackgroundSpec& backgrounds,
                                  const std::string& split) {
    cfg.validate();
    const bool needs_haze = mode == RainMode::HazeOnly ||
                            (mode == RainMode::Heavy && cfg.haze_probability > 0.0f);
    if (needs_haze && !cfg.haze)
        throw ConfigError("mode requires haze sampling ranges in the config");

    DatasetManifest m;
    m.split = split;
    m.mode = mode;
    m.seed = cfg.rng_seed;
    m.synthesis = cfg;
    m.backgrounds = backgrounds;

    const int n_bg = backgrounds.type == BackgroundSpec::Type::Procedural
                         ? backgrounds.count
                         : static_cast<int>(backgrounds.files.size());
    if (n_bg < 1) throw ConfigError("no backgrounds available");

    const int s = (mode == RainMode::Light) ? 1
                  : (mode == RainMode::HazeOnly) ? 0
                                                 : cfg.num_directions;
    int idx = 0;
    for (int bg = 0; bg < n_bg; ++bg) {
        for (int rep = 0; rep < cfg.repeats; ++rep, ++idx) {
            Rng ex_rng(Rng::derive(cfg.rng_seed, static_cast<uint64_t>(idx)));
            ExampleRecord rec;
            char id[16];
            std::snprintf(id, sizeof(id), "%04d", idx);
            rec.id = id;
            rec.background_index = bg;
            if (backgrounds.type == BackgroundSpec::Type::Procedural)
                rec.background_seed = ex_rng.next_u64();
            for (int l = 0; l < s; ++l) {
                LayerRecord lr;
                lr.direction_deg = static_cast<float>(
                    ex_rng.uniform(cfg.streaks.dir_min_deg, cfg.streaks.dir_max_deg));
                lr.seed = ex_rng.next_u64();
                lr.jitter_deg = cfg.streaks.jitter_deg;
                lr.length_min = cfg.streaks.length_min;
                lr.length_max = cfg.streaks.length_max;
                lr.width_min = cfg.streaks.width_min;
                lr.width_max = cfg.streaks.width_max;
                lr.intensity_min = cfg.streaks.intensity_min;
                lr.intensity_max = cfg.streaks.intensity_max;
                lr.density = cfg.streaks.density;
                rec.layers.push_back(lr);
            }
            if (mode == RainMode::HazeOnly ||
                (mode == RainMode::Heavy && cfg.haze &&
                 ex_rng.uniform() < cfg.haze_probability)) {
                rec.has_haze = true;
                rec.alpha = static_cast<float>(
                    ex_rng.uniform(cfg.haze->alpha_min, cfg.haze->alpha_max));
                const float a = static_cast<float>(
                    ex_rng.uniform(cfg.haze->light_min, cfg.haze->light_max));
                rec.atmospheric_light = {a, a, a};
            }
            m.examples.push_back(std::move(rec));
        }
    }
    return m;
}

namespace {

Image load_background(const DatasetManifest& m, const ExampleRecord& rec) {
    const BackgroundSpec& bgs = m.backgrounds;
    Image bg;
    if (bgs.type == BackgroundSpec::Type::Procedural) {
        bg = procedural_background(bgs.height, bgs.width, rec.background_seed);
    } else {
        const std::string file =
            bgs.path + "/" + bgs.files.at(static_cast<size_t>(rec.background_index));
        bg = read_image_png(file);
        bg = with_channels(bg, 3);
    }
    if (bg.height < 16 || bg.width < 16)
        throw ConfigError("background smaller than the 16x16 minimum");
    snap_to_grid16(bg);
    return bg;
}

}  // namespace

std::vector<RainExample> synthesize_from_manifest(const DatasetManifest& m) {
    std::vector<RainExample> out;
    out.reserve(m.examples.size());
    for (const ExampleRecord& rec : m.examples) {
        RainExample ex;
        ex.id = rec.id;
        ex.background = load_background(m, rec);
        const int h = ex.background.height, w = ex.background.width;

        std::vector<StreakLayer> layers;
        for (const LayerRecord& lr : rec.layers)
            layers.push_back(render_layer_from_record(lr, h, w));

        // Combined streak layer, snapped to the PNG grid before masking and
        // compositing so the on-disk dataset reproduces the formation
        // equation after re-quantization.
        StreakLayer combined;
        combined.data = Image(h, w, 1);
        if (!layers.empty()) {
            for (const auto& l : layers)
                for (size_t i = 0; i < combined.data.data.size(); ++i)
                    combined.data.data[i] += l.data.data[i];
            combined.direction_deg = layers.front().direction_deg;
            combined.length_min = layers.front().length_min;
            combined.length_max = layers.front().length_max;
            combined.width_min = layers.front().width_min;
            combined.width_max = layers.front().width_max;
            combined.density = layers.front().density;
        }
        snap_to_grid16(combined.data);
        ex.streak = combined.data;
        ex.mask = layers.empty() ? Mask(h, w)
                                 : derive_mask({combined}, m.synthesis.mask_threshold);

        if (rec.has_haze) {
            HazeParams hp;
            hp.alpha = rec.alpha;
            hp.atmospheric_light = rec.atmospheric_light;
            ex.haze = hp;
        }

        switch (m.mode) {
            case RainMode::Light:
                ex.rain = compose_light_rain(ex.background, combined, ex.mask);
                snap_to_grid16(ex.rain);
                break;
            case RainMode::Heavy:
                if (ex.haze) {
                    ex.rain = compose_heavy_rain(ex.background, {combined}, ex.mask, *ex.haze,
                                                 m.synthesis.overlap_count);
                } else {
                    ex.rain = compose_light_rain(ex.background, combined, ex.mask);
                    snap_to_grid16(ex.rain);
                }
                break;
            case RainMode::HazeOnly: {
                HazeParams hp = ex.haze ? *ex.haze : HazeParams{};
                ex.rain = compose_haze_only(ex.background, hp);
                break;
            }
        }
        out.push_back(std::move(ex));
    }
    return out;
}

std::vector<RainExample> build_dataset(const SynthesisConfig& cfg, RainMode mode,
                                       const BackgroundSpec& backgrounds,
                                       const std::string& split,
                                       DatasetManifest* manifest_out) {
    DatasetManifest m = generate_manifest(cfg, mode, backgrounds, split);
    auto examples = synthesize_from_manifest(m);
    if (manifest_out) *manifest_out = std::move(m);
    return examples;
}

}  // namespace derain
