#include "derain/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "derain/config.hpp"
#include "derain/errors.hpp"

namespace derain {

namespace {

std::string fmt(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

json metric_json(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

}  // namespace

double EvalReport::mean_psnr() const {
    if (rows.empty()) return std::numeric_limits<double>::quiet_NaN();
    double acc = 0;
    for (const auto& r : rows) acc += r.psnr_db;
    return acc / static_cast<double>(rows.size());
}

double EvalReport::mean_ssim() const {
    if (rows.empty()) return std::numeric_limits<double>::quiet_NaN();
    double acc = 0;
    for (const auto& r : rows) acc += r.ssim;
    return acc / static_cast<double>(rows.size());
}

void write_report_csv(const std::string& path, const EvalReport& report) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write report: " + path);
    out << "id,psnr_db,ssim\n";
    for (const auto& r : report.rows)
        out << r.id << "," << fmt(r.psnr_db) << "," << fmt(r.ssim) << "\n";
    out << "mean," << fmt(report.mean_psnr()) << "," << fmt(report.mean_ssim()) << "\n";
}

void write_report_json(const std::string& path, const EvalReport& report) {
    json rows = json::array();
    for (const auto& r : report.rows)
        rows.push_back(json{{"id", r.id},
                            {"psnr_db", metric_json(r.psnr_db)},
                            {"ssim", metric_json(r.ssim)}});
    json j{{"schema_version", 1},
           {"results_dir", report.results_dir},
           {"truth_dir", report.truth_dir},
           {"config_hash", report.config_hash},
           {"rows", rows},
           {"unmatched", report.unmatched},
           {"aggregate", json{{"count", report.rows.size()},
                              {"mean_psnr_db", metric_json(report.mean_psnr())},
                              {"mean_ssim", metric_json(report.mean_ssim())}}}};
    if (report.has_timing) {
        j["timing"] = json{{"median_s_per_image", report.timing.median_s_per_image},
                           {"min_s_per_image", report.timing.min_s_per_image},
                           {"max_s_per_image", report.timing.max_s_per_image},
                           {"repeats", report.timing.repeats},
                           {"image_count", report.timing.image_count}};
    }
    save_json_file(path, j);
}

}  // namespace derain
