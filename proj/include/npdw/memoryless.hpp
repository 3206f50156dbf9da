#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "npdw/sequence.hpp"

namespace npdw {

// Channel LLRs are clamped so that opposing certainties met on wrong list
// paths stay finite.
inline constexpr double kLlrCap = 100.0;

// Analytic kernel for binary-input memoryless channels. Embeddings are plain
// LLRs (dim 1):
//   F(e1,e2) = -2 atanh(tanh(e1/2) tanh(e2/2)),  G(e1,e2,u) = e2 + (-1)^u e1,
//   H(e) = e.
struct MemorylessKernel {
    using Scalar = double;

    int dim() const { return 1; }

    void check_node(const double* a, const double* b, double* out, int rows) const {
        for (int i = 0; i < rows; ++i) {
            double t = std::tanh(0.5 * a[i]) * std::tanh(0.5 * b[i]);
            t = std::clamp(t, -(1.0 - 1e-12), 1.0 - 1e-12);
            out[i] = -2.0 * std::atanh(t);
        }
    }

    void bit_node(const double* a, const double* b, const std::uint8_t* bits, double* out, int rows) const {
        for (int i = 0; i < rows; ++i) out[i] = b[i] + (bits[i] ? -a[i] : a[i]);
    }

    void to_llr(const double* e, double* llr, int rows) const {
        for (int i = 0; i < rows; ++i) llr[i] = e[i];
    }
};

// Builds the per-position embeddings E(y) = log W(y|1)/W(y|0) + log P(1)/P(0)
// for a symbol-by-symbol channel.
class MemorylessEmbedder {
public:
    using LlrFn = std::function<double(std::uint8_t /*y*/)>;

    MemorylessEmbedder(LlrFn channel_llr, double prior_llr = 0.0)
        : channel_llr_(std::move(channel_llr)), prior_llr_(prior_llr) {}

    std::vector<double> operator()(const SymbolSequence& y) const {
        std::vector<double> e(y.size());
        for (std::size_t i = 0; i < y.size(); ++i)
            e[i] = std::clamp(channel_llr_(y.symbols[i]) + prior_llr_, -kLlrCap, kLlrCap);
        return e;
    }

    static MemorylessEmbedder bsc(double p, double prior_llr = 0.0) {
        const double l = std::log((1.0 - p) / p);
        return MemorylessEmbedder(
            [l](std::uint8_t y) { return y ? l : -l; }, prior_llr);
    }

    // Erasures arrive as symbol 2 over the {0,1,?} alphabet.
    static MemorylessEmbedder bec(double prior_llr = 0.0) {
        return MemorylessEmbedder(
            [](std::uint8_t y) {
                if (y == 2) return 0.0;
                return y ? 2.0 * kLlrCap : -2.0 * kLlrCap;  // clamped on use
            },
            prior_llr);
    }

private:
    LlrFn channel_llr_;
    double prior_llr_;
};

}  // namespace npdw
