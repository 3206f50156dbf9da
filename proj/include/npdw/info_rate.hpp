#pragma once

#include <functional>
#include <vector>

#include "npdw/npd_model.hpp"
#include "npdw/rng.hpp"
#include "npdw/sequence.hpp"
#include "npdw/vendor_json.hpp"

namespace npdw {

// Order-m Markov input distribution over bits with softmax-parameterized
// transition logits. Order 0 recovers i.i.d. inputs; out-of-range context
// positions read as 0.
class InputModel {
public:
    int order = 1;
    std::vector<double> logits;  // [2^order][2], row-major

    explicit InputModel(int markov_order = 1);

    int n_contexts() const { return 1 << order; }
    double p_one(int ctx) const;  // P(x_t = 1 | context)

    std::vector<std::uint8_t> sample(int n, rng::Stream& rs) const;
    double log_prob(const std::vector<std::uint8_t>& x) const;  // natural log
    // Accumulates d log P(x) / d logits into g (size 2^order * 2).
    void accumulate_grad_log_prob(const std::vector<std::uint8_t>& x, std::vector<double>& g) const;

    // Total-variation distance of each conditional row from uniform, maximized
    // over contexts; used to check drift on symmetric channels.
    double max_tv_from_uniform() const;

    nlohmann::json to_json() const;
    static InputModel from_json(const nlohmann::json& j);
};

// Draws traces for one frame given the channel input bits.
using ChannelFn = std::function<std::vector<SymbolSequence>(const std::vector<std::uint8_t>& x, rng::Stream&)>;

// Sampler adapter: x ~ psi, traces ~ channel.
Sampler make_sampler(const InputModel& psi, const ChannelFn& channel, int block_len);

// Joint twin training (shared F/G/H, separate embeddings) under a fixed input
// distribution; thin wrapper over train_npd's twin mode.
TrainResult train_twin(NpdModel& model, const Sampler& sampler, const TrainSchedule& schedule,
                       rng::Stream& rs);

struct OptimizeConfig {
    int outer_iters = 20;
    long inner_steps = 2000;  // twin re-training per outer iteration
    int inner_batch = 64;
    double inner_lr = 1e-3;
    long mi_samples = 4000;
    int mi_batch = 128;
    int psi_steps_per_iter = 1;
    int psi_batch = 256;
    double psi_lr = 0.25;
    bool normalize_rewards = true;  // false = raw score-function estimator
    double plateau_rel = 1e-3;
    int plateau_window = 5;

    nlohmann::json to_json() const;
    static OptimizeConfig from_json(const nlohmann::json& j);
};

struct OptimizeResult {
    InputModel psi;
    std::vector<double> mi_curve;    // estimate after each outer iteration
    int iterations_run = 0;
    int skipped_psi_steps = 0;       // zero-variance reward batches
};

// Alternating maximization: re-train the twin decoders under the current psi,
// then apply score-function gradient steps with (optionally) normalized
// rewards. The model must be warm-started (train_twin) before calling.
OptimizeResult optimize_input(NpdModel& twin_model, InputModel psi, const ChannelFn& channel,
                              const OptimizeConfig& cfg, rng::Stream& rs);

}  // namespace npdw
