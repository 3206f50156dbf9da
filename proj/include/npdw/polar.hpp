#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vendor_json.hpp"

namespace npdw {

bool is_power_of_two(std::size_t n);

// Index permutation that reverses n-bit binary representations.
std::vector<std::uint32_t> bit_reversal_perm(int n);

// v = u * G_N over GF(2), G_N = B_N F^{(x)n}, computed in O(N log N) via the
// bit-reversal permutation followed by butterfly stages. The map is its own
// inverse.
void polar_transform_inplace(std::vector<std::uint8_t>& u);
std::vector<std::uint8_t> polar_transform(std::vector<std::uint8_t> u);

// Block length, information set and frozen values; the product of code design.
struct CodeSpec {
    int block_len = 0;
    std::vector<std::uint32_t> info_set;         // sorted, subset of [0, N)
    std::vector<std::uint8_t> frozen_values;     // size N; zero at info positions
    nlohmann::json design_meta;                  // channel params, seed, mc_frames, ...

    double rate() const { return block_len ? double(info_set.size()) / block_len : 0.0; }
    bool is_frozen(std::uint32_t i) const;
    void validate() const;

    // Places info bits at info_set positions and frozen values elsewhere,
    // then applies the polar transform.
    std::vector<std::uint8_t> assemble_u(const std::vector<std::uint8_t>& info_bits) const;
    std::vector<std::uint8_t> encode(const std::vector<std::uint8_t>& info_bits) const;

    nlohmann::json to_json() const;
    static CodeSpec from_json(const nlohmann::json& j);
    void save(const std::string& path) const;
    static CodeSpec load(const std::string& path);
};

}  // namespace npdw
