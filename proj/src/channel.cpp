#include "npdw/channel.hpp"

#include <stdexcept>
#include <string>

namespace npdw {

void IdsParams::validate() const {
    auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in01(insert_prob) || !in01(delete_prob) || !in01(subst_prob))
        throw std::invalid_argument("IdsParams: probabilities must lie in [0,1]");
    if (insert_prob + delete_prob + subst_prob > 1.0 + 1e-12)
        throw std::invalid_argument("IdsParams: insert+delete+subst must not exceed 1");
}

void DnaChannelParams::validate() const {
    ids.validate();
    if (!(trace_rate > 0.0)) throw std::invalid_argument("DnaChannelParams: trace_rate must be positive");
}

SymbolSequence apply_ids(const SymbolSequence& x, const IdsParams& p, rng::Stream& rs) {
    p.validate();
    x.validate();
    const int sigma = x.alphabet_size;
    if (sigma < 2 && p.insert_prob + p.subst_prob > 0.0)
        throw std::invalid_argument("apply_ids: alphabet must have at least 2 symbols "
                                    "when insertions or substitutions are enabled");

    const std::size_t max_out = 8 * x.size() + 8;
    SymbolSequence y;
    y.alphabet_size = sigma;
    y.symbols.reserve(x.size() + 8);

    const double t_ins = p.insert_prob;
    const double t_del = t_ins + p.delete_prob;
    const double t_sub = t_del + p.subst_prob;

    std::size_t n = 0;
    while (n < x.size()) {
        const double u = rs.uniform();
        if (u < t_ins) {
            y.symbols.push_back(static_cast<std::uint8_t>(rs.below(static_cast<std::uint32_t>(sigma))));
            if (y.size() > max_out)
                throw std::runtime_error("apply_ids: output exceeded 8x input length");
        } else if (u < t_del) {
            ++n;
        } else if (u < t_sub) {
            // Uniform over the alphabet minus the current input symbol.
            std::uint8_t s = static_cast<std::uint8_t>(rs.below(static_cast<std::uint32_t>(sigma - 1)));
            if (s >= x.symbols[n]) ++s;
            y.symbols.push_back(s);
            ++n;
        } else {
            y.symbols.push_back(x.symbols[n]);
            ++n;
        }
    }
    return y;
}

SymbolSequence apply_deletion(const SymbolSequence& x, double d, rng::Stream& rs) {
    if (!(d >= 0.0 && d <= 1.0)) throw std::invalid_argument("apply_deletion: d must lie in [0,1]");
    x.validate();
    SymbolSequence y;
    y.alphabet_size = x.alphabet_size;
    y.symbols.reserve(x.size());
    for (auto s : x.symbols)
        if (!(rs.uniform() < d)) y.symbols.push_back(s);
    return y;
}

std::vector<SymbolSequence> sample_traces(const SymbolSequence& x, const DnaChannelParams& p,
                                          rng::Stream& rs) {
    p.validate();
    const int k = rs.poisson(p.trace_rate);
    std::vector<SymbolSequence> traces;
    traces.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) traces.push_back(apply_ids(x, p.ids, rs));
    return traces;
}

}  // namespace npdw
