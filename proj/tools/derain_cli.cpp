// Command-line driver: dataset synthesis, training, inference, evaluation
// and timing benchmarks. Exit codes: 0 success, 1 usage/config error,
// 2 runtime error.
#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>

#include "derain/config.hpp"
#include "derain/dataset.hpp"
#include "derain/errors.hpp"
#include "derain/metrics.hpp"
#include "derain/pipeline.hpp"
#include "derain/png_io.hpp"
#include "derain/report.hpp"
#include "derain/training.hpp"

namespace fs = std::filesystem;
using namespace derain;

namespace {

// DERAIN_OUT_ROOT re-roots relative output paths.
std::string resolve_out(const std::string& path) {
    if (path.empty() || fs::path(path).is_absolute()) return path;
    const char* root = std::getenv("DERAIN_OUT_ROOT");
    if (!root || !*root) return path;
    return (fs::path(root) / path).string();
}

std::string stem_id(const fs::path& p) {
    std::string stem = p.stem().string();
    const std::string suffix = "_derained";
    if (stem.size() > suffix.size() &&
        stem.compare(stem.size() - suffix.size(), suffix.size(), suffix) == 0)
        stem.resize(stem.size() - suffix.size());
    return stem;
}

// ---------------- synth ----------------

int cmd_synth(const std::string& config_path, const std::string& replay_path,
              const std::string& out_dir) {
    DatasetManifest manifest;
    if (!replay_path.empty()) {
        manifest = load_manifest(replay_path);
        check_background_hashes(manifest.backgrounds);
    } else {
        json cfg = load_json_file(config_path);
        SynthesisConfig synth;
        if (cfg.contains("synthesis")) cfg.at("synthesis").get_to(synth);
        if (cfg.contains("seed")) synth.rng_seed = cfg.at("seed").get<uint64_t>();
        const RainMode mode = rain_mode_from_name(cfg.value("mode", "light"));
        const std::string split = cfg.value("split", "train");

        BackgroundSpec bgs;
        if (cfg.contains("backgrounds")) {
            const json& b = cfg.at("backgrounds");
            if (b.at("type").get<std::string>() == "dir") {
                bgs = scan_background_dir(b.at("path").get<std::string>());
            } else {
                b.get_to(bgs);
            }
        }
        manifest = generate_manifest(synth, mode, bgs, split);
        manifest.config_hash = config_hash(cfg);
    }

    auto examples = synthesize_from_manifest(manifest);
    write_dataset(resolve_out(out_dir), manifest, examples);
    std::cout << "wrote " << examples.size() << " examples to "
              << dataset_dir(resolve_out(out_dir), manifest.split) << "\n";
    return 0;
}

// ---------------- train ----------------

std::string find_resume_checkpoint(const std::string& dir, const std::string& run) {
    std::string best;
    int64_t best_step = -1;
    if (!fs::is_directory(dir)) return best;
    const std::string prefix = run + "_step";
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string name = e.path().filename().string();
        if (name.rfind(prefix, 0) == 0 && e.path().extension() == ".ckpt") {
            const int64_t step = std::atoll(name.c_str() + prefix.size());
            if (step > best_step) {
                best_step = step;
                best = e.path().string();
            }
        }
    }
    return best;
}

int cmd_train(const std::string& config_path, bool resume) {
    json cfg = load_json_file(config_path);
    const std::string mode = cfg.value("mode", "single");
    const std::string dataset_path = cfg.at("dataset").get<std::string>();
    const uint64_t seed = cfg.value("seed", static_cast<uint64_t>(1));

    nn::NetworkConfig net_cfg;
    if (cfg.contains("network")) cfg.at("network").get_to(net_cfg);
    nn::LossWeights weights;
    if (cfg.contains("loss")) cfg.at("loss").get_to(weights);

    OptimizerSettings opt;
    if (cfg.contains("optimizer")) {
        cfg.at("optimizer").get_to(opt.adam);
        opt.batch_size = cfg.at("optimizer").value("batch_size", opt.batch_size);
        opt.crop = cfg.at("optimizer").value("crop", opt.crop);
    }

    TrainSettings ts;
    ts.seed = seed;
    if (cfg.contains("train")) {
        const json& t = cfg.at("train");
        ts.steps = t.value("steps", ts.steps);
        ts.checkpoint_every = t.value("checkpoint_every", ts.checkpoint_every);
        ts.log_every = t.value("log_every", ts.log_every);
        ts.tau = t.value("tau", 1);
    }
    ts.run_name = cfg.value("run_name", mode);
    ts.out_dir = resolve_out(cfg.value("output_dir", std::string("runs/") + ts.run_name));
    const bool shared = cfg.contains("train") && cfg.at("train").value("shared_stages", false);
    const std::string hash = config_hash(cfg);

    auto data = load_dataset(dataset_path);
    std::vector<RainExample> val;
    if (cfg.contains("validation") && !cfg.at("validation").is_null())
        val = load_dataset(cfg.at("validation").get<std::string>());

    std::cout << "training '" << ts.run_name << "' (" << mode << ") on "
              << data.size() << " examples for " << ts.steps << " steps\n";

    if (mode == "dehaze") {
        DehazeModel model = make_dehaze_model(net_cfg, seed);
        model.config_hash = hash;
        nn::Adam<float> adam(opt.adam);
        adam.attach(model.net.params());
        if (resume) {
            const std::string ckpt = find_resume_checkpoint(ts.out_dir, ts.run_name);
            if (!ckpt.empty()) {
                model = load_dehaze_model(ckpt);
                adam.attach(model.net.params());
                restore_adam_state(ckpt, adam);
                std::cout << "resumed from " << ckpt << " at step " << model.train_step << "\n";
            }
        }
        auto result = train_dehaze(data, model, opt, ts, adam, &std::cout);
        std::cout << "final checkpoint: " << result.final_checkpoint << "\n";
        return 0;
    }
    if (mode != "single" && mode != "recurrent")
        throw ConfigError("unknown training mode: " + mode);

    const int tau = (mode == "recurrent") ? ts.tau : 1;
    ts.tau = tau;
    DerainModel model = make_derain_model(net_cfg, tau, shared, seed);
    model.config_hash = hash;
    nn::Adam<float> adam(opt.adam);
    adam.attach(model.all_params());
    if (resume) {
        const std::string ckpt = find_resume_checkpoint(ts.out_dir, ts.run_name);
        if (!ckpt.empty()) {
            model = load_derain_model(ckpt);
            adam.attach(model.all_params());
            restore_adam_state(ckpt, adam);
            std::cout << "resumed from " << ckpt << " at step " << model.train_step << "\n";
        }
    }
    auto result = train_derain(data, model, weights, opt, ts, adam,
                               val.empty() ? nullptr : &val, &std::cout);
    std::cout << "final checkpoint: " << result.final_checkpoint << "\n";
    if (!result.best_checkpoint.empty())
        std::cout << "best-on-validation: " << result.best_checkpoint << "\n";
    return 0;
}

// ---------------- infer ----------------

Image montage(const Image& a, const Image& b) {
    const int gap = 4;
    Image out(a.height, a.width + gap + b.width, a.channels, 1.0f);
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x)
            for (int c = 0; c < a.channels; ++c) out.at(y, x, c) = a.at(y, x, c);
    for (int y = 0; y < b.height; ++y)
        for (int x = 0; x < b.width; ++x)
            for (int c = 0; c < b.channels; ++c)
                out.at(y, a.width + gap + x, c) = b.at(y, x, c);
    return out;
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::string token;
    for (char ch : s + ",") {
        if (ch == ',') {
            if (!token.empty()) out.push_back(token);
            token.clear();
        } else {
            token += ch;
        }
    }
    return out;
}

int cmd_infer(const std::string& pipeline_path, const std::vector<std::string>& inputs,
              const std::string& out_dir, int tau_override,
              const std::string& sequence_override, bool want_trace, bool want_montage) {
    PipelineConfig cfg;
    if (!pipeline_path.empty()) load_json_file(pipeline_path).get_to(cfg);
    if (tau_override > 0) cfg.tau = tau_override;
    if (!sequence_override.empty()) cfg.sequence = split_commas(sequence_override);
    cfg.validate();
    PipelineModels models = load_pipeline_models(cfg);
    const std::string out = resolve_out(out_dir);
    fs::create_directories(out);
    const std::string hash = config_hash(json(cfg));

    int failures = 0;
    for (const std::string& in_path : inputs) {
        try {
            Image input = with_channels(read_image_png(in_path), 3);
            std::vector<StageTrace> trace;
            Image result = run_sequence(models, cfg, input, &trace);
            const std::string id = stem_id(fs::path(in_path));
            const std::string out_png = (fs::path(out) / (id + "_derained.png")).string();
            write_image_png(out_png, clipped(result), cfg.export_bit_depth);
            if (want_montage)
                write_image_png((fs::path(out) / (id + "_montage.png")).string(),
                                montage(clipped(input), clipped(result)),
                                cfg.export_bit_depth);
            if (want_trace) {
                json stages = json::array();
                const Image* prev = &input;
                for (size_t i = 0; i < trace.size(); ++i) {
                    const std::string stage_png =
                        (fs::path(out) / (id + "_stage" + std::to_string(i) + "_" +
                                          trace[i].stage + ".png")).string();
                    write_image_png(stage_png, clipped(trace[i].output),
                                    cfg.export_bit_depth);
                    double mean_change = 0;
                    for (size_t k = 0; k < trace[i].output.data.size(); ++k)
                        mean_change += std::abs(trace[i].output.data[k] - prev->data[k]);
                    mean_change /= static_cast<double>(trace[i].output.data.size());
                    stages.push_back(json{{"stage", trace[i].stage},
                                          {"file", fs::path(stage_png).filename().string()},
                                          {"mean_abs_change", mean_change}});
                    prev = &trace[i].output;
                }
                save_json_file((fs::path(out) / (id + "_trace.json")).string(),
                               json{{"input", in_path},
                                    {"config_hash", hash},
                                    {"tau", cfg.tau},
                                    {"sequence", cfg.sequence},
                                    {"stages", stages}});
            }
            std::cout << in_path << " -> " << out_png << "\n";
        } catch (const std::exception& e) {
            ++failures;
            std::cerr << "error processing " << in_path << ": " << e.what() << "\n";
        }
    }
    if (failures) {
        std::cerr << failures << " of " << inputs.size() << " inputs failed\n";
        return 2;
    }
    return 0;
}

// ---------------- eval ----------------

int cmd_eval(const std::string& results_dir, const std::string& truth_dir,
             const std::string& out_prefix) {
    if (!fs::is_directory(results_dir)) throw DataError("results dir not found: " + results_dir);
    if (!fs::is_directory(truth_dir)) throw DataError("truth dir not found: " + truth_dir);

    auto has_suffix = [](const std::string& s, const char* suf) {
        return s.size() > 2 && s.compare(s.size() - 2, 2, suf) == 0;
    };

    std::map<std::string, std::string> truth_by_id;
    for (const auto& e : fs::directory_iterator(truth_dir)) {
        if (!e.is_regular_file() || e.path().extension() != ".png") continue;
        std::string stem = e.path().stem().string();
        if (has_suffix(stem, "_B"))
            truth_by_id[stem.substr(0, stem.size() - 2)] = e.path().string();
        else if (has_suffix(stem, "_O") || has_suffix(stem, "_S") || has_suffix(stem, "_R"))
            continue;
        else
            truth_by_id.emplace(stem, e.path().string());
    }

    EvalReport report;
    report.results_dir = results_dir;
    report.truth_dir = truth_dir;
    report.config_hash = config_hash(json{{"results", results_dir}, {"truth", truth_dir}});

    std::set<std::string> matched_truth;
    std::vector<fs::path> result_files;
    for (const auto& e : fs::directory_iterator(results_dir))
        if (e.is_regular_file() && e.path().extension() == ".png")
            result_files.push_back(e.path());
    std::sort(result_files.begin(), result_files.end());

    for (const auto& rf : result_files) {
        const std::string base = rf.stem().string();
        if (has_suffix(base, "_B") || has_suffix(base, "_S") || has_suffix(base, "_R"))
            continue;  // result dir doubling as a dataset dir: score the O images
        const std::string id = stem_id(rf);
        auto it = truth_by_id.find(id);
        if (it == truth_by_id.end()) {
            const std::string stripped = has_suffix(id, "_O") ? id.substr(0, id.size() - 2) : id;
            it = truth_by_id.find(stripped);
        }
        if (it == truth_by_id.end()) {
            report.unmatched.push_back(id);
            continue;
        }
        matched_truth.insert(it->first);
        Image result = with_channels(read_image_png(rf.string()), 3);
        Image truth = with_channels(read_image_png(it->second), 3);
        EvalRow row;
        row.id = it->first;
        row.psnr_db = psnr(result, truth);
        row.ssim = ssim(result, truth);
        report.rows.push_back(row);
    }
    for (const auto& [id, path] : truth_by_id)
        if (!matched_truth.count(id)) report.unmatched.push_back(id);
    std::sort(report.rows.begin(), report.rows.end(),
              [](const EvalRow& a, const EvalRow& b) { return a.id < b.id; });
    std::sort(report.unmatched.begin(), report.unmatched.end());

    const std::string prefix = resolve_out(out_prefix);
    if (!fs::path(prefix).parent_path().empty())
        fs::create_directories(fs::path(prefix).parent_path());
    write_report_csv(prefix + ".csv", report);
    write_report_json(prefix + ".json", report);

    std::cout << "evaluated " << report.rows.size() << " pairs";
    if (!report.unmatched.empty()) {
        std::cout << " (" << report.unmatched.size() << " unmatched:";
        for (const auto& id : report.unmatched) std::cout << " " << id;
        std::cout << ")";
    }
    std::cout << "\nmean PSNR ";
    if (std::isinf(report.mean_psnr())) std::cout << "inf";
    else std::cout << report.mean_psnr();
    std::cout << " dB, mean SSIM " << report.mean_ssim() << "\n";
    std::cout << "report: " << prefix << ".csv, " << prefix << ".json\n";
    return 0;
}

// ---------------- bench ----------------

int cmd_bench(const std::string& derain_ckpt, const std::string& dehaze_ckpt,
              const std::string& scales_arg, int tau, int repeats, int warmup,
              const std::string& out_prefix) {
    DerainModel model = load_derain_model(derain_ckpt);
    std::optional<DehazeModel> dehaze_model;
    if (!dehaze_ckpt.empty()) dehaze_model = load_dehaze_model(dehaze_ckpt);

    std::vector<int> scales;
    for (const auto& tok : split_commas(scales_arg)) scales.push_back(std::stoi(tok));
    if (scales.empty()) throw ConfigError("no scales given");

    PipelineModels pm;
    pm.derain_model = model;
    if (dehaze_model) pm.dehaze_model = *dehaze_model;

    json table = json::array();
    std::cout << "scale,method,median_s,min_s,max_s\n";
    for (int scale : scales) {
        std::vector<Image> images;
        images.push_back(procedural_background(scale, scale, 12345));

        const int use_tau = model.shared_stages ? tau : std::min(tau, model.max_tau());
        std::vector<std::pair<std::string, std::function<void(const Image&)>>> methods;
        methods.emplace_back("single_pass",
                             [&](const Image& im) { derain_once(model.stage(0), im); });
        methods.emplace_back("recurrent_tau" + std::to_string(use_tau),
                             [&, use_tau](const Image& im) {
                                 derain_recurrent(model, im, use_tau);
                             });
        if (dehaze_model) {
            methods.emplace_back("derain_dehaze_derain", [&, use_tau](const Image& im) {
                PipelineConfig pc;
                pc.tau = use_tau;
                pc.sequence = {"derain", "dehaze", "derain"};
                run_sequence(pm, pc, im);
            });
        }
        for (auto& [name, fn] : methods) {
            TimingStats st = time_inference(fn, images, warmup, repeats);
            char line[160];
            std::snprintf(line, sizeof(line), "%dx%d,%s,%.6f,%.6f,%.6f\n", scale, scale,
                          name.c_str(), st.median_s_per_image, st.min_s_per_image,
                          st.max_s_per_image);
            std::cout << line;
            table.push_back(json{{"scale", scale},
                                 {"method", name},
                                 {"median_s", st.median_s_per_image},
                                 {"min_s", st.min_s_per_image},
                                 {"max_s", st.max_s_per_image},
                                 {"repeats", st.repeats}});
        }
    }
    if (!out_prefix.empty()) {
        const std::string prefix = resolve_out(out_prefix);
        save_json_file(prefix + ".json", json{{"schema_version", 1}, {"rows", table}});
        std::cout << "timing table: " << prefix << ".json\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"joint rain detection and removal toolkit"};
    app.require_subcommand(1);

    auto* synth = app.add_subcommand("synth", "generate a paired rain dataset");
    std::string synth_config, synth_replay, synth_out;
    synth->add_option("--config", synth_config, "synthesis config JSON");
    synth->add_option("--replay", synth_replay, "regenerate from an existing manifest");
    synth->add_option("--out", synth_out, "dataset root directory")->required();

    auto* train = app.add_subcommand("train", "train a model");
    std::string train_config;
    bool train_resume = false;
    train->add_option("--config", train_config, "training config JSON")->required();
    train->add_flag("--resume", train_resume, "resume from the latest checkpoint");

    auto* infer = app.add_subcommand("infer", "run the derain pipeline on images");
    std::string infer_pipeline, infer_out = "out", infer_sequence;
    std::vector<std::string> infer_inputs;
    int infer_tau = 0;
    bool infer_trace = false, infer_montage = false;
    infer->add_option("--pipeline", infer_pipeline, "pipeline config JSON");
    infer->add_option("--out", infer_out, "output directory");
    infer->add_option("--tau", infer_tau, "override recurrence count");
    infer->add_option("--sequence", infer_sequence,
                      "override stage sequence, e.g. derain,dehaze,derain");
    infer->add_flag("--trace", infer_trace, "write per-stage intermediates");
    infer->add_flag("--montage", infer_montage, "write input|output side-by-side PNGs");
    infer->add_option("inputs", infer_inputs, "input PNG files")->required();

    auto* eval = app.add_subcommand("eval", "PSNR/SSIM report of results vs ground truth");
    std::string eval_results, eval_truth, eval_out = "report";
    eval->add_option("--results", eval_results, "directory of result PNGs")->required();
    eval->add_option("--truth", eval_truth, "directory of ground-truth PNGs")->required();
    eval->add_option("--out", eval_out, "report path prefix (.csv/.json)");

    auto* bench = app.add_subcommand("bench", "inference timing table");
    std::string bench_ckpt, bench_dehaze, bench_scales = "80,500", bench_out;
    int bench_tau = 3, bench_repeats = 5, bench_warmup = 1;
    bench->add_option("--checkpoint", bench_ckpt, "derain checkpoint")->required();
    bench->add_option("--dehaze-checkpoint", bench_dehaze, "dehaze checkpoint");
    bench->add_option("--scales", bench_scales, "comma-separated square image sizes");
    bench->add_option("--tau", bench_tau, "recurrence count for the recurrent row");
    bench->add_option("--repeats", bench_repeats, "timing repeats (>= 3)");
    bench->add_option("--warmup", bench_warmup, "warmup rounds");
    bench->add_option("--out", bench_out, "timing table path prefix");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (synth->parsed()) {
            if (synth_config.empty() && synth_replay.empty())
                throw ConfigError("synth requires --config or --replay");
            return cmd_synth(synth_config, synth_replay, synth_out);
        }
        if (train->parsed()) return cmd_train(train_config, train_resume);
        if (infer->parsed())
            return cmd_infer(infer_pipeline, infer_inputs, infer_out, infer_tau,
                             infer_sequence, infer_trace, infer_montage);
        if (eval->parsed()) return cmd_eval(eval_results, eval_truth, eval_out);
        if (bench->parsed())
            return cmd_bench(bench_ckpt, bench_dehaze, bench_scales, bench_tau,
                             bench_repeats, bench_warmup, bench_out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
