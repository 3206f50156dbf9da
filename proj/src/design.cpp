#include "npdw/design.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace npdw {

CodeSpec code_from_order(int block_len, const std::vector<std::uint32_t>& order, std::size_t info_count,
                         DesignConfig::FrozenMode frozen_mode, std::uint64_t frozen_seed) {
    if (info_count > order.size()) throw std::invalid_argument("code_from_order: info_count too large");
    CodeSpec code;
    code.block_len = block_len;
    code.info_set.assign(order.begin(), order.begin() + static_cast<long>(info_count));
    std::sort(code.info_set.begin(), code.info_set.end());
    code.frozen_values.assign(static_cast<std::size_t>(block_len), 0);
    if (frozen_mode == DesignConfig::FrozenMode::kSeededRandom) {
        rng::Stream fs(frozen_seed);
        for (int i = 0; i < block_len; ++i) {
            const std::uint8_t bit = static_cast<std::uint8_t>(fs.next_u64() & 1u);
            if (code.is_frozen(static_cast<std::uint32_t>(i))) code.frozen_values[static_cast<std::size_t>(i)] = bit;
        }
    }
    code.validate();
    return code;
}

DesignResult design_code(const GenieFn& genie, const DesignConfig& cfg, rng::Stream& rs) {
    const int n = cfg.block_len;
    if (!is_power_of_two(static_cast<std::size_t>(n)))
        throw std::invalid_argument("design_code: block_len must be a power of two");
    if (cfg.mc_frames < 1) throw std::invalid_argument("design_code: mc_frames must be positive");

    std::vector<long> errors(static_cast<std::size_t>(n), 0);
#pragma omp parallel
    {
        std::vector<long> local(static_cast<std::size_t>(n), 0);
        std::vector<std::uint8_t> u(static_cast<std::size_t>(n));
#pragma omp for schedule(dynamic, 8)
        for (long frame = 0; frame < cfg.mc_frames; ++frame) {
            rng::Stream frs = rs.substream(static_cast<std::uint64_t>(frame));
            for (int i = 0; i < n; ++i) u[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(frs.next_u64() & 1u);
            const auto llrs = genie(u, frs);
            for (int i = 0; i < n; ++i) {
                const std::uint8_t hard = llrs[static_cast<std::size_t>(i)] > 0.0 ? 1 : 0;
                if (hard != u[static_cast<std::size_t>(i)]) ++local[static_cast<std::size_t>(i)];
            }
        }
#pragma omp critical
        for (int i = 0; i < n; ++i) errors[static_cast<std::size_t>(i)] += local[static_cast<std::size_t>(i)];
    }

    DesignResult res;
    res.error_rates.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        res.error_rates[static_cast<std::size_t>(i)] = double(errors[static_cast<std::size_t>(i)]) / double(cfg.mc_frames);

    res.order.resize(static_cast<std::size_t>(n));
    std::iota(res.order.begin(), res.order.end(), 0u);
    std::sort(res.order.begin(), res.order.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (res.error_rates[a] != res.error_rates[b]) return res.error_rates[a] < res.error_rates[b];
        return a < b;
    });

    double running = 0.0;
    std::size_t admitted = 0;
    for (; admitted < res.order.size(); ++admitted) {
        const double p = res.error_rates[res.order[admitted]];
        if (running + p >= cfg.target_sum_error) break;
        running += p;
    }

    res.code = code_from_order(n, res.order, admitted, cfg.frozen_mode, cfg.frozen_seed);
    res.empty_info_set = admitted == 0;
    res.code.design_meta = {
        {"target_sum_error", cfg.target_sum_error},
        {"mc_frames", cfg.mc_frames},
        {"seed", rs.seed()},
        {"achieved_sum_error", running},
        {"order", res.order},
        {"error_rates", res.error_rates},
        {"frozen_mode", cfg.frozen_mode == DesignConfig::FrozenMode::kSeededRandom ? "seeded_random" : "zero"},
        {"frozen_seed", cfg.frozen_seed},
    };
    return res;
}

}  // namespace npdw
