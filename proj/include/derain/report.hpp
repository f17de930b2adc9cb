#pragma once
#include <string>
#include <vector>

#include "derain/metrics.hpp"

namespace derain {

struct EvalRow {
    std::string id;
    double psnr_db = 0;  // +inf for identical pairs
    double ssim = 0;
};

struct EvalReport {
    std::string results_dir;
    std::string truth_dir;
    std::string config_hash;
    std::vector<EvalRow> rows;            // sorted by id
    std::vector<std::string> unmatched;   // ids without a partner
    TimingStats timing;                   // optional, repeats == 0 when absent
    bool has_timing = false;

    double mean_psnr() const;
    double mean_ssim() const;
};

// Renders infinity as the string "inf" in both formats.
void write_report_csv(const std::string& path, const EvalReport& report);
void write_report_json(const std::string& path, const EvalReport& report);

}  // namespace derain
