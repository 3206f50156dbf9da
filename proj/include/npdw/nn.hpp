#pragma once

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "npdw/rng.hpp"
#include "npdw/tape.hpp"
#include "npdw/tensor.hpp"
#include "npdw/vendor_json.hpp"

namespace npdw::nn {

struct Param {
    std::string name;
    std::vector<int> shape;
    std::vector<float> value;
    std::vector<float> grad;
    std::vector<float> m;  // Adam first moment
    std::vector<float> v;  // Adam second moment

    long size() const { return static_cast<long>(value.size()); }
};

enum class Init { kZeros, kOnes, kFanInUniform, kNormal002 };

class ParamStore {
public:
    std::vector<Param> params;

    int add(const std::string& name, std::vector<int> shape, Init init, rng::Stream rs) {
        if (index_.count(name)) throw std::invalid_argument("ParamStore: duplicate parameter " + name);
        Param p;
        p.name = name;
        p.shape = std::move(shape);
        const long n = Tensor<float>::count(p.shape);
        p.value.resize(static_cast<std::size_t>(n));
        p.grad.assign(static_cast<std::size_t>(n), 0.0f);
        p.m.assign(static_cast<std::size_t>(n), 0.0f);
        p.v.assign(static_cast<std::size_t>(n), 0.0f);
        switch (init) {
            case Init::kZeros:
                break;
            case Init::kOnes:
                std::fill(p.value.begin(), p.value.end(), 1.0f);
                break;
            case Init::kFanInUniform: {
                const int fan_in = p.shape.size() >= 2
                                       ? static_cast<int>(n / p.shape.back())
                                       : static_cast<int>(n);
                const double bound = 1.0 / std::sqrt(double(fan_in));
                for (auto& x : p.value) x = static_cast<float>((2.0 * rs.uniform() - 1.0) * bound);
                break;
            }
            case Init::kNormal002:
                for (auto& x : p.value) x = static_cast<float>(rs.normal() * 0.02);
                break;
        }
        params.push_back(std::move(p));
        index_[name] = static_cast<int>(params.size()) - 1;
        return static_cast<int>(params.size()) - 1;
    }

    int id(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::invalid_argument("ParamStore: unknown parameter " + name);
        return it->second;
    }
    Param& at(int i) { return params[static_cast<std::size_t>(i)]; }
    const Param& at(int i) const { return params[static_cast<std::size_t>(i)]; }
    Param& at(const std::string& name) { return params[static_cast<std::size_t>(id(name))]; }

    void zero_grad() {
        for (auto& p : params) std::fill(p.grad.begin(), p.grad.end(), 0.0f);
    }

    long total_params() const {
        long n = 0;
        for (const auto& p : params) n += p.size();
        return n;
    }

private:
    std::unordered_map<std::string, int> index_;
};

// Bias-corrected Adam; accumulators live beside the parameters they mirror.
struct OptimizerState {
    long step_count = 0;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

inline void adam_step(ParamStore& store, OptimizerState& opt) {
    opt.step_count += 1;
    const double bc1 = 1.0 - std::pow(opt.beta1, double(opt.step_count));
    const double bc2 = 1.0 - std::pow(opt.beta2, double(opt.step_count));
    for (auto& p : store.params) {
        const long n = p.size();
#pragma omp parallel for schedule(static) if (kernels::parallel_enabled() && n > kernels::kParallelGrain)
        for (long i = 0; i < n; ++i) {
            const double g = p.grad[static_cast<std::size_t>(i)];
            const double m = opt.beta1 * p.m[static_cast<std::size_t>(i)] + (1.0 - opt.beta1) * g;
            const double v = opt.beta2 * p.v[static_cast<std::size_t>(i)] + (1.0 - opt.beta2) * g * g;
            p.m[static_cast<std::size_t>(i)] = static_cast<float>(m);
            p.v[static_cast<std::size_t>(i)] = static_cast<float>(v);
            const double mhat = m / bc1;
            const double vhat = v / bc2;
            p.value[static_cast<std::size_t>(i)] -=
                static_cast<float>(opt.learning_rate * mhat / (std::sqrt(vhat) + opt.epsilon));
        }
    }
}

// Binds store parameters to tape leaves once per tape and copies gradients
// back after the backward pass.
template <class S>
class Binder {
public:
    Binder(Tape<S>& tape, ParamStore& store)
        : tape_(&tape), store_(&store), leaf_(store.params.size(), -1) {}

    int operator()(int param_id) {
        int& l = leaf_[static_cast<std::size_t>(param_id)];
        if (l < 0) {
            const Param& p = store_->at(param_id);
            Tensor<S> t(p.shape);
            for (long i = 0; i < t.size(); ++i) t.v[static_cast<std::size_t>(i)] = static_cast<S>(p.value[static_cast<std::size_t>(i)]);
            l = tape_->leaf(std::move(t));
        }
        return l;
    }
    int operator()(const std::string& name) { return (*this)(store_->id(name)); }

    // Accumulates tape gradients into the store.
    void read_grads() {
        for (std::size_t pid = 0; pid < leaf_.size(); ++pid) {
            if (leaf_[pid] < 0) continue;
            const auto& g = tape_->grad(leaf_[pid]);
            auto& dst = store_->at(static_cast<int>(pid)).grad;
            for (long i = 0; i < g.size(); ++i) dst[static_cast<std::size_t>(i)] += static_cast<float>(g.v[static_cast<std::size_t>(i)]);
        }
    }

private:
    Tape<S>* tape_;
    ParamStore* store_;
    std::vector<int> leaf_;
};

// Two-layer MLP with ReLU: in -> hidden -> out, biases on both layers.
template <class S>
int mlp2(Tape<S>& t, int x, int w1, int b1, int w2, int b2) {
    int h = t.relu(t.add_bias(t.matmul(x, w1), b1));
    return t.add_bias(t.matmul(h, w2), b2);
}

// ---------------------------------------------------------------------------
// Checkpoints: little-endian float payloads hex-encoded inside JSON so
// round-trips are bit-exact and files stay diffable.

namespace detail {
inline std::string floats_to_hex(const std::vector<float>& v) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(v.size() * 8);
    for (float f : v) {
        std::uint32_t u;
        std::memcpy(&u, &f, 4);
        for (int b = 0; b < 4; ++b) {
            const unsigned byte = (u >> (8 * b)) & 0xFFu;
            out.push_back(digits[byte >> 4]);
            out.push_back(digits[byte & 0xF]);
        }
    }
    return out;
}

inline std::vector<float> hex_to_floats(const std::string& hex) {
    if (hex.size() % 8 != 0) throw std::invalid_argument("checkpoint: bad payload length");
    auto nib = [](char c) -> std::uint32_t {
        if (c >= '0' && c <= '9') return static_cast<std::uint32_t>(c - '0');
        if (c >= 'a' && c <= 'f') return static_cast<std::uint32_t>(c - 'a' + 10);
        if (c >= 'A' && c <= 'F') return static_cast<std::uint32_t>(c - 'A' + 10);
        throw std::invalid_argument("checkpoint: bad hex digit");
    };
    std::vector<float> v(hex.size() / 8);
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::uint32_t u = 0;
        for (int b = 0; b < 4; ++b) {
            const std::uint32_t byte = (nib(hex[i * 8 + 2 * b]) << 4) | nib(hex[i * 8 + 2 * b + 1]);
            u |= byte << (8 * b);
        }
        std::memcpy(&v[i], &u, 4);
    }
    return v;
}
}  // namespace detail

inline nlohmann::json checkpoint_to_json(const ParamStore& store, std::uint64_t seed,
                                         const nlohmann::json& config) {
    nlohmann::json j;
    j["format"] = "npdw-ckpt-v1";
    j["generator"] = rng::kGeneratorId;
    j["seed"] = seed;
    j["config"] = config;
    nlohmann::json params = nlohmann::json::object();
    for (const auto& p : store.params) {
        params[p.name] = {{"shape", p.shape}, {"hex", detail::floats_to_hex(p.value)}};
    }
    j["params"] = params;
    return j;
}

// Restores values into an already-constructed store; shapes must match.
inline void checkpoint_restore(ParamStore& store, const nlohmann::json& j) {
    if (j.value("format", "") != std::string("npdw-ckpt-v1"))
        throw std::invalid_argument("checkpoint: unknown format tag");
    const auto& params = j.at("params");
    for (auto& p : store.params) {
        if (!params.contains(p.name)) throw std::invalid_argument("checkpoint: missing parameter " + p.name);
        const auto& jp = params.at(p.name);
        if (jp.at("shape").get<std::vector<int>>() != p.shape)
            throw std::invalid_argument("checkpoint: shape mismatch for " + p.name);
        auto vals = detail::hex_to_floats(jp.at("hex").get<std::string>());
        if (vals.size() != p.value.size()) throw std::invalid_argument("checkpoint: size mismatch for " + p.name);
        p.value = std::move(vals);
    }
}

inline void checkpoint_save(const std::string& path, const ParamStore& store, std::uint64_t seed,
                            const nlohmann::json& config) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    f << checkpoint_to_json(store, seed, config).dump() << "\n";
}

inline nlohmann::json checkpoint_load_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
    nlohmann::json j;
    f >> j;
    return j;
}

}  // namespace npdw::nn
