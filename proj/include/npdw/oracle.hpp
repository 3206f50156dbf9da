#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "npdw/channel.hpp"
#include "npdw/sequence.hpp"

namespace npdw::oracle {

// Number of index sets S with |S| = |y| and x_S = y (subsequence embeddings),
// via the standard O(N*M) dynamic program.
std::uint64_t count_deletion_embeddings(const SymbolSequence& x, const SymbolSequence& y);

// W(y|x) for Del(d): embeddings * d^(N-M) * (1-d)^M. Returns 0 when |y| > |x|.
double deletion_likelihood(const SymbolSequence& x, const SymbolSequence& y, double d);

// Forward lattice over (input position, output position) matching the
// per-iteration event process of apply_ids.
double ids_likelihood(const SymbolSequence& x, const SymbolSequence& y, const IdsParams& p);

// Explicit joint model for tiny block lengths: an input probability table over
// binary x and an enumerable output space.
struct JointModel {
    int block_len = 0;
    std::vector<double> input_table;  // size 2^N; index bit i holds x_i
    std::function<double(const std::vector<std::uint8_t>& x, const SymbolSequence& y)> likelihood;
    std::function<std::vector<SymbolSequence>()> enumerate_outputs;

    void validate() const;

    static JointModel deletion(int n, double d, std::vector<double> input_table);
    static JointModel ids(int n, IdsParams p, std::vector<double> input_table);
    static JointModel bsc(int n, double p, std::vector<double> input_table);
    // Binary erasure channel; outputs live on the {0,1,?}=\{0,1,2\} alphabet.
    static JointModel bec(int n, double eps, std::vector<double> input_table);
};

std::vector<double> uniform_input_table(int n);
std::vector<double> iid_input_table(int n, double p_one);
// Builds the table from an arbitrary per-sequence probability function.
std::vector<double> make_input_table(int n, const std::function<double(const std::vector<std::uint8_t>&)>& prob);

std::vector<std::uint8_t> index_to_bits(std::uint32_t idx, int n);

// Exact synthetic-channel posterior P(u_i = 1 | u^{i-1}, y) by marginalizing
// all suffixes of u with x = u G_N. Throws on a prefix with zero mass.
double synthetic_posterior(const JointModel& model, const SymbolSequence& y,
                           const std::vector<std::uint8_t>& u_prefix, int i);

struct ImpossiblePrefix : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// I(X;Y)/N in bits per input bit by exhaustive summation; aborts if any input
// leaks more than 1e-9 probability mass past the enumerated output space.
double exact_mi(const JointModel& model);

}  // namespace npdw::oracle
