#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "npdw/polar.hpp"

namespace npdw {

// A successive-cancellation kernel: embeddings are rows of `dim()` scalars,
// combined by batched check-node / bit-node maps and projected to LLRs at the
// leaves. The LLR convention is log P(u=1)/P(u=0) throughout the project.
template <class K>
concept ScKernel = requires(const K k, const typename K::Scalar* a, const typename K::Scalar* b,
                            const std::uint8_t* bits, typename K::Scalar* out, double* llr, int rows) {
    typename K::Scalar;
    { k.dim() } -> std::convertible_to<int>;
    k.check_node(a, b, out, rows);
    k.bit_node(a, b, bits, out, rows);
    k.to_llr(a, llr, rows);
};

inline double softplus(double z) {
    return std::log1p(std::exp(-std::abs(z))) + (z > 0.0 ? z : 0.0);
}

// Path-metric increment for deciding bit u at a leaf with the given LLR:
// -log P(u | past, y) in nats.
inline double path_penalty(double llr, std::uint8_t u) { return softplus(u ? -llr : llr); }

namespace detail {

// Copies x-order embedding rows into machine order (bit-reversed), which makes
// the plain strided recursion visit u indices in natural order for
// G_N = B_N F^{(x)n}.
template <class S>
std::vector<S> to_machine_order(const S* emb, int n_rows, int dim) {
    int log_n = 0;
    while ((1 << log_n) < n_rows) ++log_n;
    if ((1 << log_n) != n_rows) throw std::invalid_argument("sc: rows must be a power of two");
    const auto perm = bit_reversal_perm(log_n);
    std::vector<S> out(static_cast<std::size_t>(n_rows) * dim);
    for (int j = 0; j < n_rows; ++j)
        for (int c = 0; c < dim; ++c)
            out[static_cast<std::size_t>(j) * dim + c] =
                emb[static_cast<std::size_t>(perm[j]) * dim + c];
    return out;
}

}  // namespace detail

// Per-call scratch for one SC sweep. level[0] holds the machine-order root
// beliefs; level[t] holds the active node's beliefs at depth t.
template <class S>
struct ScWorkspace {
    int block_len = 0;
    int dim = 0;
    std::vector<std::vector<S>> level;             // level[t]: (N>>t) rows
    std::vector<std::vector<std::uint8_t>> wbits;  // left-child stage bits per depth
    std::vector<std::vector<std::uint8_t>> cw;     // node codeword per depth

    void reset(int n, int d) {
        if (block_len == n && dim == d) return;
        block_len = n;
        dim = d;
        int levels = 1;
        while ((1 << (levels - 1)) < n) ++levels;
        level.assign(levels, {});
        wbits.assign(levels, {});
        cw.assign(levels, {});
        for (int t = 0; t < levels; ++t) {
            const int m = n >> t;
            level[t].resize(static_cast<std::size_t>(m) * d);
            wbits[t].resize(static_cast<std::size_t>(m) / 2 + 1);
            cw[t].resize(static_cast<std::size_t>(m));
        }
    }
};

// Core sweep over beliefs already laid out in machine order (ws.level[0]
// prefilled after ws.reset). `leaf(leaf_offset + slot, llr) -> bit` decides
// what is fed back; decisions land in ws.cw[0] as the node's stage bits.
template <ScKernel K, class LeafFn>
void sc_sweep_machine(const K& k, int n, ScWorkspace<typename K::Scalar>& ws, LeafFn&& leaf,
                      int leaf_offset = 0) {
    using S = typename K::Scalar;
    const int dim = k.dim();
    int next_leaf = leaf_offset;
    auto rec = [&](auto&& self, int t, int m) -> void {
        std::vector<S>& buf = ws.level[t];
        if (m == 1) {
            double llr = 0.0;
            k.to_llr(buf.data(), &llr, 1);
            ws.cw[t][0] = leaf(next_leaf++, llr);
            return;
        }
        const int half = m / 2;
        const S* a = buf.data();
        const S* b = buf.data() + static_cast<std::size_t>(half) * dim;
        k.check_node(a, b, ws.level[t + 1].data(), half);
        self(self, t + 1, half);
        std::copy(ws.cw[t + 1].begin(), ws.cw[t + 1].begin() + half, ws.wbits[t].begin());
        k.bit_node(a, b, ws.wbits[t].data(), ws.level[t + 1].data(), half);
        self(self, t + 1, half);
        for (int i = 0; i < half; ++i) {
            ws.cw[t][i] = static_cast<std::uint8_t>(ws.wbits[t][i] ^ ws.cw[t + 1][i]);
            ws.cw[t][i + half] = ws.cw[t + 1][i];
        }
    };
    rec(rec, 0, n);
}

// Wrapper taking natural x-order beliefs.
template <ScKernel K, class LeafFn>
void sc_sweep(const K& k, const typename K::Scalar* emb_x_order, int n, ScWorkspace<typename K::Scalar>& ws,
              LeafFn&& leaf) {
    ws.reset(n, k.dim());
    ws.level[0] = detail::to_machine_order(emb_x_order, n, k.dim());
    sc_sweep_machine(k, n, ws, leaf);
}

struct ScResult {
    std::vector<std::uint8_t> u_hat;
    std::vector<double> llrs;  // leaf LLRs, log P(1)/P(0)
};

// Standard SC decoding: frozen leaves emit their frozen values, information
// leaves take the hard decision (llr > 0 decides 1).
template <ScKernel K>
ScResult sc_decode(const K& k, const typename K::Scalar* emb_x_order, const CodeSpec& code,
                   ScWorkspace<typename K::Scalar>& ws) {
    ScResult r;
    r.u_hat.resize(static_cast<std::size_t>(code.block_len));
    r.llrs.resize(static_cast<std::size_t>(code.block_len));
    sc_sweep(k, emb_x_order, code.block_len, ws, [&](int i, double llr) -> std::uint8_t {
        r.llrs[static_cast<std::size_t>(i)] = llr;
        const std::uint8_t u = code.is_frozen(static_cast<std::uint32_t>(i))
                                   ? code.frozen_values[static_cast<std::size_t>(i)]
                                   : static_cast<std::uint8_t>(llr > 0.0);
        r.u_hat[static_cast<std::size_t>(i)] = u;
        return u;
    });
    return r;
}

template <ScKernel K>
ScResult sc_decode(const K& k, const typename K::Scalar* emb_x_order, const CodeSpec& code) {
    ScWorkspace<typename K::Scalar> ws;
    return sc_decode(k, emb_x_order, code, ws);
}

// Genie sweep: every leaf is forced to the given bit; returns the leaf LLRs.
// This is the posterior evaluation used by training targets, code design and
// the oracle-equivalence tests.
template <ScKernel K>
std::vector<double> sc_forced_llrs(const K& k, const typename K::Scalar* emb_x_order, int n,
                                   const std::uint8_t* u_forced,
                                   ScWorkspace<typename K::Scalar>& ws) {
    std::vector<double> llrs(static_cast<std::size_t>(n));
    sc_sweep(k, emb_x_order, n, ws, [&](int i, double llr) -> std::uint8_t {
        llrs[static_cast<std::size_t>(i)] = llr;
        return u_forced[i];
    });
    return llrs;
}

template <ScKernel K>
std::vector<double> sc_forced_llrs(const K& k, const typename K::Scalar* emb_x_order, int n,
                                   const std::uint8_t* u_forced) {
    ScWorkspace<typename K::Scalar> ws;
    return sc_forced_llrs(k, emb_x_order, n, u_forced, ws);
}

struct SclResult {
    std::vector<std::uint8_t> u_hat;          // best path
    std::vector<double> path_metrics;         // ascending; path_metrics[0] is the winner
};

// Successive-cancellation list decoding with log-domain penalty accumulation.
// Each path carries its own embedding workspace; no CRC is applied.
template <ScKernel K>
SclResult scl_decode(const K& k, const typename K::Scalar* emb_x_order, const CodeSpec& code, int list_size) {
    using S = typename K::Scalar;
    if (list_size < 1) throw std::invalid_argument("scl_decode: list size must be >= 1");
    const int n = code.block_len;
    const int dim = k.dim();

    struct Path {
        ScWorkspace<S> ws;
        std::vector<std::uint8_t> u;
        double pm = 0.0;
    };

    std::vector<Path> paths(1);
    paths[0].ws.reset(n, dim);
    paths[0].ws.level[0] = detail::to_machine_order(emb_x_order, n, dim);
    paths[0].u.reserve(static_cast<std::size_t>(n));

    int next_leaf = 0;
    auto rec = [&](auto&& self, int t, int m) -> void {
        if (m == 1) {
            const int i = next_leaf++;
            if (code.is_frozen(static_cast<std::uint32_t>(i))) {
                const std::uint8_t u = code.frozen_values[static_cast<std::size_t>(i)];
                for (auto& p : paths) {
                    double llr = 0.0;
                    k.to_llr(p.ws.level[t].data(), &llr, 1);
                    p.pm += path_penalty(llr, u);
                    p.ws.cw[t][0] = u;
                    p.u.push_back(u);
                }
                return;
            }
            struct Cand {
                double pm;
                int src;
                std::uint8_t bit;
            };
            std::vector<Cand> cands;
            cands.reserve(2 * paths.size());
            for (std::size_t p = 0; p < paths.size(); ++p) {
                double llr = 0.0;
                k.to_llr(paths[p].ws.level[t].data(), &llr, 1);
                cands.push_back({paths[p].pm + path_penalty(llr, 0), static_cast<int>(p), 0});
                cands.push_back({paths[p].pm + path_penalty(llr, 1), static_cast<int>(p), 1});
            }
            std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
                if (a.pm != b.pm) return a.pm < b.pm;
                if (a.src != b.src) return a.src < b.src;
                return a.bit < b.bit;
            });
            const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(list_size), cands.size());
            cands.resize(keep);
            // Canonical survivor order keeps the result independent of sort internals.
            std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
                if (a.src != b.src) return a.src < b.src;
                return a.bit < b.bit;
            });
            std::vector<Path> next;
            next.reserve(keep);
            for (const auto& c : cands) {
                next.push_back(paths[static_cast<std::size_t>(c.src)]);
                next.back().pm = c.pm;
                next.back().u.push_back(c.bit);
                next.back().ws.cw[t][0] = c.bit;
            }
            paths = std::move(next);
            return;
        }
        const int half = m / 2;
        for (auto& p : paths) {
            const S* a = p.ws.level[t].data();
            const S* b = a + static_cast<std::size_t>(half) * dim;
            k.check_node(a, b, p.ws.level[t + 1].data(), half);
        }
        self(self, t + 1, half);
        for (auto& p : paths) {
            std::copy(p.ws.cw[t + 1].begin(), p.ws.cw[t + 1].begin() + half, p.ws.wbits[t].begin());
            const S* a = p.ws.level[t].data();
            const S* b = a + static_cast<std::size_t>(half) * dim;
            k.bit_node(a, b, p.ws.wbits[t].data(), p.ws.level[t + 1].data(), half);
        }
        self(self, t + 1, half);
        for (auto& p : paths)
            for (int i = 0; i < half; ++i) {
                p.ws.cw[t][i] = static_cast<std::uint8_t>(p.ws.wbits[t][i] ^ p.ws.cw[t + 1][i]);
                p.ws.cw[t][i + half] = p.ws.cw[t + 1][i];
            }
    };
    rec(rec, 0, n);

    std::size_t best = 0;
    for (std::size_t p = 1; p < paths.size(); ++p)
        if (paths[p].pm < paths[best].pm) best = p;

    SclResult r;
    r.u_hat = paths[best].u;
    r.path_metrics.reserve(paths.size());
    for (const auto& p : paths) r.path_metrics.push_back(p.pm);
    std::sort(r.path_metrics.begin(), r.path_metrics.end());
    return r;
}

// Test aid: counts kernel invocations by row so complexity contracts can be
// asserted exactly. Not thread-safe.
template <class K>
struct CountingKernel {
    using Scalar = typename K::Scalar;
    const K* inner;
    mutable std::uint64_t f_rows = 0, g_rows = 0, h_rows = 0;

    explicit CountingKernel(const K& k) : inner(&k) {}
    int dim() const { return inner->dim(); }
    void check_node(const Scalar* a, const Scalar* b, Scalar* out, int rows) const {
        f_rows += static_cast<std::uint64_t>(rows);
        inner->check_node(a, b, out, rows);
    }
    void bit_node(const Scalar* a, const Scalar* b, const std::uint8_t* bits, Scalar* out, int rows) const {
        g_rows += static_cast<std::uint64_t>(rows);
        inner->bit_node(a, b, bits, out, rows);
    }
    void to_llr(const Scalar* e, double* llr, int rows) const {
        h_rows += static_cast<std::uint64_t>(rows);
        inner->to_llr(e, llr, rows);
    }
};

}  // namespace npdw
