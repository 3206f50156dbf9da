#pragma once

#include <vector>

#include "npdw/rng.hpp"
#include "npdw/sequence.hpp"

namespace npdw {

struct IdsParams {
    double insert_prob = 0.0;
    double delete_prob = 0.0;
    double subst_prob = 0.0;

    double clean_prob() const { return 1.0 - insert_prob - delete_prob - subst_prob; }
    void validate() const;
};

struct DnaChannelParams {
    IdsParams ids;
    double trace_rate = 1.0;  // Poisson mean for the number of traces

    void validate() const;
};

// One fresh event {ins, del, sub, clean} is drawn per loop iteration; an
// insertion emits a uniform symbol without advancing the input pointer.
// Aborts if the output exceeds 8x the input length (insertion runaway).
SymbolSequence apply_ids(const SymbolSequence& x, const IdsParams& p, rng::Stream& rs);

// Fast path for IDS(0, d, 0): one Bernoulli per symbol, draw-for-draw
// identical to apply_ids with the same stream.
SymbolSequence apply_deletion(const SymbolSequence& x, double d, rng::Stream& rs);

// K ~ Poisson(trace_rate) independent IDS outputs; K = 0 yields an empty list.
std::vector<SymbolSequence> sample_traces(const SymbolSequence& x, const DnaChannelParams& p,
                                          rng::Stream& rs);

}  // namespace npdw
