#pragma once

#include <vector>

#include "npdw/npd_model.hpp"
#include "npdw/polar.hpp"

namespace npdw {

// Multi-strand polar coding: a length N*N0 codeword is split into N0
// contiguous length-N strands, each transmitted through its own channel. The
// decoder runs the learned kernel within strands and the analytic LLR-domain
// kernel where strands are combined, projecting embeddings through H at the
// boundary.

// Strand a holds x[a*N, (a+1)*N).
std::vector<std::vector<std::uint8_t>> split_strands(const std::vector<std::uint8_t>& x, int n_strands);

struct HybridResult {
    std::vector<std::uint8_t> u_hat;
    std::vector<double> llrs;
};

// SC decoding over the hybrid tree. strand_embs[a] is the (possibly
// multi-trace aggregated) N x d embedding of strand a in natural x order.
// code.block_len must equal N * strand count. N0 = 1 reduces to plain NPD
// decoding.
HybridResult hybrid_sc_decode(const NpdModel& model, const std::vector<EmbeddingMatrix>& strand_embs,
                              const CodeSpec& code);

// Teacher-forced leaf LLRs for genie-aided design over the hybrid tree.
std::vector<double> hybrid_forced_llrs(const NpdModel& model,
                                       const std::vector<EmbeddingMatrix>& strand_embs,
                                       const std::vector<std::uint8_t>& u);

}  // namespace npdw
