#pragma once

#include <functional>

#include "npdw/polar.hpp"
#include "npdw/rng.hpp"

namespace npdw {

// Produces teacher-forced leaf LLRs for one fresh channel realization of
// x = u G_N. The frame stream seeds both the channel and any per-frame choices.
using GenieFn = std::function<std::vector<double>(const std::vector<std::uint8_t>& u, rng::Stream& frame_rs)>;

struct DesignConfig {
    int block_len = 0;
    double target_sum_error = 0.1;
    long mc_frames = 2000;
    enum class FrozenMode { kZero, kSeededRandom } frozen_mode = FrozenMode::kZero;
    std::uint64_t frozen_seed = 0;
};

struct DesignResult {
    CodeSpec code;
    std::vector<double> error_rates;   // per-index genie error rate p_i
    std::vector<std::uint32_t> order;  // indices sorted by (p_i, i) ascending
    bool empty_info_set = false;       // rate-0 designs are flagged, not fatal
};

// Genie-aided Monte Carlo design: per-index error rates with all previous
// bits forced correct, then greedy admission while the running sum of
// admitted p_i stays below target_sum_error. Ties break toward lower index.
DesignResult design_code(const GenieFn& genie, const DesignConfig& cfg, rng::Stream& rs);

// Rebuilds a CodeSpec for a different rate from recorded design metadata
// (the sorted index order), admitting the first `info_count` indices.
CodeSpec code_from_order(int block_len, const std::vector<std::uint32_t>& order, std::size_t info_count,
                         DesignConfig::FrozenMode frozen_mode, std::uint64_t frozen_seed);

}  // namespace npdw
