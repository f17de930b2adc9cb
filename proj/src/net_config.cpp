#include "derain/nn/net.hpp"

#include "derain/errors.hpp"

namespace derain::nn {

std::string head_ordering_name(HeadOrdering h) {
    switch (h) {
        case HeadOrdering::MaskStreakBackground: return "mask_streak_background";
        case HeadOrdering::StreakMaskBackground: return "streak_mask_background";
        case HeadOrdering::Parallel: return "parallel";
    }
    return "mask_streak_background";
}

HeadOrdering head_ordering_from_name(const std::string& s) {
    if (s == "mask_streak_background") return HeadOrdering::MaskStreakBackground;
    if (s == "streak_mask_background") return HeadOrdering::StreakMaskBackground;
    if (s == "parallel") return HeadOrdering::Parallel;
    throw ConfigError("unknown head ordering: " + s);
}

void NetworkConfig::validate() const {
    if (input_channels != 1 && input_channels != 3)
        throw ConfigError("input_channels must be 1 or 3");
    if (feature_channels < 1) throw ConfigError("feature_channels must be >= 1");
    if (intra_recurrences < 0) throw ConfigError("intra_recurrences must be >= 0");
    if (kernel_size != 3)
        throw ConfigError("kernel_size must be 3 (two 3x3 convolutions per dilated path)");
    if (dilation_factors.empty()) throw ConfigError("dilation_factors must be nonempty");
    for (int d : dilation_factors)
        if (d < 1) throw ConfigError("dilation factors must be >= 1");
}

}  // namespace derain::nn
