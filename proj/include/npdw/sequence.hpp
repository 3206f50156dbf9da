#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace npdw {

// Variable-length sequence over a finite alphabet {0, ..., alphabet_size-1}.
struct SymbolSequence {
    int alphabet_size = 2;
    std::vector<std::uint8_t> symbols;

    SymbolSequence() = default;
    SymbolSequence(int alphabet, std::vector<std::uint8_t> syms)
        : alphabet_size(alphabet), symbols(std::move(syms)) {}

    std::size_t size() const { return symbols.size(); }
    bool empty() const { return symbols.empty(); }

    void validate() const {
        if (alphabet_size < 1) throw std::invalid_argument("alphabet_size must be positive");
        for (auto s : symbols)
            if (s >= alphabet_size)
                throw std::invalid_argument("symbol " + std::to_string(int(s)) +
                                            " out of range for alphabet " +
                                            std::to_string(alphabet_size));
    }

    bool operator==(const SymbolSequence& o) const {
        return alphabet_size == o.alphabet_size && symbols == o.symbols;
    }
};

// Consecutive bit pairs map to one 4-ary symbol, big-endian within the pair.
inline SymbolSequence bits_to_quaternary(const SymbolSequence& x) {
    if (x.alphabet_size != 2) throw std::invalid_argument("bits_to_quaternary: binary input required");
    if (x.size() % 2 != 0) throw std::invalid_argument("bits_to_quaternary: odd length");
    SymbolSequence q;
    q.alphabet_size = 4;
    q.symbols.resize(x.size() / 2);
    for (std::size_t i = 0; i < q.symbols.size(); ++i)
        q.symbols[i] = static_cast<std::uint8_t>(2 * x.symbols[2 * i] + x.symbols[2 * i + 1]);
    return q;
}

inline SymbolSequence quaternary_to_bits(const SymbolSequence& q) {
    if (q.alphabet_size != 4) throw std::invalid_argument("quaternary_to_bits: 4-ary input required");
    SymbolSequence x;
    x.alphabet_size = 2;
    x.symbols.resize(q.size() * 2);
    for (std::size_t i = 0; i < q.size(); ++i) {
        x.symbols[2 * i] = static_cast<std::uint8_t>(q.symbols[i] >> 1);
        x.symbols[2 * i + 1] = static_cast<std::uint8_t>(q.symbols[i] & 1);
    }
    return x;
}

}  // namespace npdw
