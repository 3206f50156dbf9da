#include "npdw/hybrid.hpp"

#include <stdexcept>

#include "npdw/memoryless.hpp"
#include "npdw/sc.hpp"

namespace npdw {

std::vector<std::vector<std::uint8_t>> split_strands(const std::vector<std::uint8_t>& x, int n_strands) {
    if (n_strands < 1 || x.size() % static_cast<std::size_t>(n_strands) != 0)
        throw std::invalid_argument("split_strands: length must divide evenly");
    const std::size_t n = x.size() / static_cast<std::size_t>(n_strands);
    std::vector<std::vector<std::uint8_t>> out(static_cast<std::size_t>(n_strands));
    for (int a = 0; a < n_strands; ++a)
        out[static_cast<std::size_t>(a)].assign(x.begin() + static_cast<long>(a) * static_cast<long>(n),
                                                x.begin() + static_cast<long>(a + 1) * static_cast<long>(n));
    return out;
}

namespace {

// Depth-switching sweep: learned kernel while nodes span one strand, analytic
// LLR kernel once nodes combine whole strands (node size <= strand count).
template <class LeafFn>
void hybrid_sweep(const NpdModel& model, const std::vector<EmbeddingMatrix>& strand_embs,
                  LeafFn&& leaf) {
    const int n0 = static_cast<int>(strand_embs.size());
    const int n = model.cfg.block_len;
    const int d = model.cfg.embed_dim;
    if (n0 < 1 || !is_power_of_two(static_cast<std::size_t>(n0)))
        throw std::invalid_argument("hybrid: strand count must be a power of two");
    for (const auto& e : strand_embs)
        if (e.rows != n || e.cols != d) throw std::invalid_argument("hybrid: embedding shape mismatch");

    const int total = n * n0;
    int log_total = 0;
    while ((1 << log_total) < total) ++log_total;

    const NeuralKernel k = model.kernel();
    const MemorylessKernel mk;

    // Machine-order root: slot j holds x-row rev(j); x-row p lives in strand
    // p / N at offset p % N.
    const auto rev = bit_reversal_perm(log_total);
    int levels = 1;
    while ((1 << (levels - 1)) < total) ++levels;
    std::vector<std::vector<float>> level(static_cast<std::size_t>(levels));
    std::vector<std::vector<std::uint8_t>> wbits(static_cast<std::size_t>(levels)),
        cw(static_cast<std::size_t>(levels));
    for (int t = 0; t < levels; ++t) {
        const int m = total >> t;
        level[static_cast<std::size_t>(t)].resize(static_cast<std::size_t>(m) * d);
        wbits[static_cast<std::size_t>(t)].resize(static_cast<std::size_t>(m) / 2 + 1);
        cw[static_cast<std::size_t>(t)].resize(static_cast<std::size_t>(m));
    }
    for (int j = 0; j < total; ++j) {
        const int p = static_cast<int>(rev[static_cast<std::size_t>(j)]);
        const float* src = strand_embs[static_cast<std::size_t>(p / n)].row(p % n);
        std::copy(src, src + d, level[0].data() + static_cast<std::size_t>(j) * d);
    }

    ScWorkspace<double> analytic_ws;
    auto rec = [&](auto&& self, int t, int m, int leaf_base) -> void {
        if (m <= n0) {
            // Strand boundary: project embeddings to LLRs, finish analytically.
            std::vector<double> llrs(static_cast<std::size_t>(m));
            k.to_llr(level[static_cast<std::size_t>(t)].data(), llrs.data(), m);
            analytic_ws.reset(m, 1);
            analytic_ws.level[0] = std::move(llrs);
            sc_sweep_machine(mk, m, analytic_ws, leaf, leaf_base);
            std::copy(analytic_ws.cw[0].begin(), analytic_ws.cw[0].begin() + m,
                      cw[static_cast<std::size_t>(t)].begin());
            return;
        }
        const int half = m / 2;
        const float* a = level[static_cast<std::size_t>(t)].data();
        const float* b = a + static_cast<std::size_t>(half) * d;
        k.check_node(a, b, level[static_cast<std::size_t>(t) + 1].data(), half);
        self(self, t + 1, half, leaf_base);
        std::copy(cw[static_cast<std::size_t>(t) + 1].begin(), cw[static_cast<std::size_t>(t) + 1].begin() + half,
                  wbits[static_cast<std::size_t>(t)].begin());
        k.bit_node(a, b, wbits[static_cast<std::size_t>(t)].data(), level[static_cast<std::size_t>(t) + 1].data(),
                   half);
        self(self, t + 1, half, leaf_base + half);
        for (int i = 0; i < half; ++i) {
            cw[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(
                wbits[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)] ^
                cw[static_cast<std::size_t>(t) + 1][static_cast<std::size_t>(i)]);
            cw[static_cast<std::size_t>(t)][static_cast<std::size_t>(i + half)] =
                cw[static_cast<std::size_t>(t) + 1][static_cast<std::size_t>(i)];
        }
    };
    rec(rec, 0, total, 0);
}

}  // namespace

HybridResult hybrid_sc_decode(const NpdModel& model, const std::vector<EmbeddingMatrix>& strand_embs,
                              const CodeSpec& code) {
    const int total = model.cfg.block_len * static_cast<int>(strand_embs.size());
    if (code.block_len != total) throw std::invalid_argument("hybrid_sc_decode: code length mismatch");
    HybridResult r;
    r.u_hat.resize(static_cast<std::size_t>(total));
    r.llrs.resize(static_cast<std::size_t>(total));
    hybrid_sweep(model, strand_embs, [&](int i, double llr) -> std::uint8_t {
        r.llrs[static_cast<std::size_t>(i)] = llr;
        const std::uint8_t u = code.is_frozen(static_cast<std::uint32_t>(i))
                                   ? code.frozen_values[static_cast<std::size_t>(i)]
                                   : static_cast<std::uint8_t>(llr > 0.0);
        r.u_hat[static_cast<std::size_t>(i)] = u;
        return u;
    });
    return r;
}

std::vector<double> hybrid_forced_llrs(const NpdModel& model,
                                       const std::vector<EmbeddingMatrix>& strand_embs,
                                       const std::vector<std::uint8_t>& u) {
    const int total = model.cfg.block_len * static_cast<int>(strand_embs.size());
    if (static_cast<int>(u.size()) != total) throw std::invalid_argument("hybrid_forced_llrs: length mismatch");
    std::vector<double> llrs(static_cast<std::size_t>(total));
    hybrid_sweep(model, strand_embs, [&](int i, double llr) -> std::uint8_t {
        llrs[static_cast<std::size_t>(i)] = llr;
        return u[static_cast<std::size_t>(i)];
    });
    return llrs;
}

}  // namespace npdw
