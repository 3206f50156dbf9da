#include "npdw/info_rate.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace npdw {

InputModel::InputModel(int markov_order) : order(markov_order) {
    if (order < 0 || order > 16) throw std::invalid_argument("InputModel: order out of range");
    logits.assign(static_cast<std::size_t>(n_contexts()) * 2, 0.0);
}

double InputModel::p_one(int ctx) const {
    const double l0 = logits[static_cast<std::size_t>(ctx) * 2];
    const double l1 = logits[static_cast<std::size_t>(ctx) * 2 + 1];
    return 1.0 / (1.0 + std::exp(l0 - l1));
}

namespace {
inline int step_context(int ctx, std::uint8_t bit, int order) {
    if (order == 0) return 0;
    // Context bit k holds x_{t-1-k}; shift in the newest bit.
    return ((ctx << 1) | bit) & ((1 << order) - 1);
}
}  // namespace

std::vector<std::uint8_t> InputModel::sample(int n, rng::Stream& rs) const {
    std::vector<std::uint8_t> x(static_cast<std::size_t>(n));
    int ctx = 0;
    for (int t = 0; t < n; ++t) {
        const std::uint8_t bit = rs.bernoulli(p_one(ctx)) ? 1 : 0;
        x[static_cast<std::size_t>(t)] = bit;
        ctx = step_context(ctx, bit, order);
    }
    return x;
}

double InputModel::log_prob(const std::vector<std::uint8_t>& x) const {
    double lp = 0.0;
    int ctx = 0;
    for (std::uint8_t bit : x) {
        const double p1 = p_one(ctx);
        lp += std::log(bit ? p1 : 1.0 - p1);
        ctx = step_context(ctx, bit, order);
    }
    return lp;
}

void InputModel::accumulate_grad_log_prob(const std::vector<std::uint8_t>& x, std::vector<double>& g) const {
    if (g.size() != logits.size()) throw std::invalid_argument("grad buffer size mismatch");
    int ctx = 0;
    for (std::uint8_t bit : x) {
        const double p1 = p_one(ctx);
        // d log P(bit | ctx) / d logit_b = 1{b = bit} - softmax_b
        g[static_cast<std::size_t>(ctx) * 2] += (bit == 0 ? 1.0 : 0.0) - (1.0 - p1);
        g[static_cast<std::size_t>(ctx) * 2 + 1] += (bit == 1 ? 1.0 : 0.0) - p1;
        ctx = step_context(ctx, bit, order);
    }
}

double InputModel::max_tv_from_uniform() const {
    double worst = 0.0;
    for (int c = 0; c < n_contexts(); ++c) worst = std::max(worst, std::abs(p_one(c) - 0.5));
    return worst;
}

nlohmann::json InputModel::to_json() const {
    return nlohmann::json{{"order", order}, {"logits", logits}};
}

InputModel InputModel::from_json(const nlohmann::json& j) {
    InputModel m(j.at("order").get<int>());
    m.logits = j.at("logits").get<std::vector<double>>();
    if (m.logits.size() != static_cast<std::size_t>(m.n_contexts()) * 2)
        throw std::invalid_argument("InputModel: logits size mismatch");
    return m;
}

Sampler make_sampler(const InputModel& psi, const ChannelFn& channel, int block_len) {
    return [psi, channel, block_len](rng::Stream& rs) -> Sample {
        Sample s;
        s.x = psi.sample(block_len, rs);
        s.traces = channel(s.x, rs);
        return s;
    };
}

TrainResult train_twin(NpdModel& model, const Sampler& sampler, const TrainSchedule& schedule,
                       rng::Stream& rs) {
    return train_npd(model, sampler, schedule, rs, /*twin_mode=*/true);
}

nlohmann::json OptimizeConfig::to_json() const {
    return nlohmann::json{{"outer_iters", outer_iters},
                          {"inner_steps", inner_steps},
                          {"inner_batch", inner_batch},
                          {"inner_lr", inner_lr},
                          {"mi_samples", mi_samples},
                          {"mi_batch", mi_batch},
                          {"psi_steps_per_iter", psi_steps_per_iter},
                          {"psi_batch", psi_batch},
                          {"psi_lr", psi_lr},
                          {"normalize_rewards", normalize_rewards},
                          {"plateau_rel", plateau_rel},
                          {"plateau_window", plateau_window}};
}

OptimizeConfig OptimizeConfig::from_json(const nlohmann::json& j) {
    OptimizeConfig c;
    c.outer_iters = j.value("outer_iters", c.outer_iters);
    c.inner_steps = j.value("inner_steps", c.inner_steps);
    c.inner_batch = j.value("inner_batch", c.inner_batch);
    c.inner_lr = j.value("inner_lr", c.inner_lr);
    c.mi_samples = j.value("mi_samples", c.mi_samples);
    c.mi_batch = j.value("mi_batch", c.mi_batch);
    c.psi_steps_per_iter = j.value("psi_steps_per_iter", c.psi_steps_per_iter);
    c.psi_batch = j.value("psi_batch", c.psi_batch);
    c.psi_lr = j.value("psi_lr", c.psi_lr);
    c.normalize_rewards = j.value("normalize_rewards", c.normalize_rewards);
    c.plateau_rel = j.value("plateau_rel", c.plateau_rel);
    c.plateau_window = j.value("plateau_window", c.plateau_window);
    return c;
}

OptimizeResult optimize_input(NpdModel& twin_model, InputModel psi, const ChannelFn& channel,
                              const OptimizeConfig& cfg, rng::Stream& rs) {
    if (!twin_model.has_twin) throw std::logic_error("optimize_input: twin model required");
    const int n = twin_model.cfg.block_len;
    OptimizeResult res{psi, {}, 0, 0};
    double best_smoothed = -1e9;

    for (int iter = 0; iter < cfg.outer_iters; ++iter) {
        rng::Stream iter_rs = rs.substream(static_cast<std::uint64_t>(iter) + 1000);

        // (a) adapt the twin decoders to the current input distribution
        TrainSchedule inner;
        inner.steps = cfg.inner_steps;
        inner.batch = cfg.inner_batch;
        inner.lr = cfg.inner_lr;
        inner.warmup_steps = cfg.inner_steps + 1;  // inner runs are short; no divergence aborts
        rng::Stream train_rs = iter_rs.substream(1);
        train_npd(twin_model, make_sampler(res.psi, channel, n), inner, train_rs, true);

        // (b) MI estimate under the current psi
        rng::Stream mi_rs = iter_rs.substream(2);
        const auto est = estimate_mi(twin_model, make_sampler(res.psi, channel, n), cfg.mi_samples,
                                     cfg.mi_batch, mi_rs);
        res.mi_curve.push_back(est.value);
        res.iterations_run = iter + 1;

        // monitored smoothed trajectory
        const int w = std::min<int>(cfg.plateau_window, static_cast<int>(res.mi_curve.size()));
        double smoothed = 0.0;
        for (int i = 0; i < w; ++i) smoothed += res.mi_curve[res.mi_curve.size() - 1 - static_cast<std::size_t>(i)];
        smoothed /= w;
        if (smoothed < best_smoothed - 10.0 * cfg.plateau_rel)
            std::fprintf(stderr, "[optimize_input] smoothed MI dropped: %.5f -> %.5f (iter %d)\n",
                         best_smoothed, smoothed, iter);
        best_smoothed = std::max(best_smoothed, smoothed);

        // plateau stop on relative improvement
        if (static_cast<int>(res.mi_curve.size()) > cfg.plateau_window) {
            const double prev = res.mi_curve[res.mi_curve.size() - 1 - static_cast<std::size_t>(cfg.plateau_window)];
            if (std::abs(est.value - prev) < cfg.plateau_rel * std::max(1.0, std::abs(prev))) break;
        }

        // (c) score-function update(s) of psi
        for (int ps = 0; ps < cfg.psi_steps_per_iter; ++ps) {
            rng::Stream prs = iter_rs.substream(100 + static_cast<std::uint64_t>(ps));
            std::vector<Sample> batch(static_cast<std::size_t>(cfg.psi_batch));
            auto sampler = make_sampler(res.psi, channel, n);
            for (int b = 0; b < cfg.psi_batch; ++b) {
                rng::Stream brs = prs.substream(static_cast<std::uint64_t>(b));
                batch[static_cast<std::size_t>(b)] = sampler(brs);
            }
            const auto losses = eval_losses(twin_model, batch, true);
            std::vector<double> rewards(batch.size());
            double mean = 0.0;
            for (std::size_t j = 0; j < batch.size(); ++j) {
                rewards[j] = losses.twin_bits[j] - losses.w_bits[j];
                mean += rewards[j];
            }
            mean /= double(batch.size());
            double var = 0.0;
            for (double r : rewards) var += (r - mean) * (r - mean);
            var /= double(batch.size());
            const double sd = std::sqrt(var);
            if (cfg.normalize_rewards && sd == 0.0) {
                ++res.skipped_psi_steps;  // uniform rewards carry no signal
                continue;
            }
            std::vector<double> grad(res.psi.logits.size(), 0.0);
            std::vector<double> per(res.psi.logits.size());
            for (std::size_t j = 0; j < batch.size(); ++j) {
                const double wgt = cfg.normalize_rewards ? (rewards[j] - mean) / sd : rewards[j];
                std::fill(per.begin(), per.end(), 0.0);
                res.psi.accumulate_grad_log_prob(batch[j].x, per);
                for (std::size_t t = 0; t < grad.size(); ++t) grad[t] += wgt * per[t];
            }
            for (std::size_t t = 0; t < grad.size(); ++t)
                res.psi.logits[t] += cfg.psi_lr * grad[t] / double(batch.size());
        }
    }
    return res;
}

}  // namespace npdw
