#include "npdw/polar.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace npdw {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::vector<std::uint32_t> bit_reversal_perm(int n) {
    if (n < 0) throw std::invalid_argument("bit_reversal_perm: n must be non-negative");
    const std::uint32_t size = 1u << n;
    std::vector<std::uint32_t> perm(size);
    for (std::uint32_t i = 0; i < size; ++i) {
        std::uint32_t r = 0;
        for (int b = 0; b < n; ++b) r |= ((i >> b) & 1u) << (n - 1 - b);
        perm[i] = r;
    }
    return perm;
}

void polar_transform_inplace(std::vector<std::uint8_t>& u) {
    const std::size_t n = u.size();
    if (!is_power_of_two(n)) throw std::invalid_argument("polar_transform: length must be a power of two");
    // Bit-reversal permutation (in place; the permutation is an involution).
    int log_n = 0;
    while ((std::size_t(1) << log_n) < n) ++log_n;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t r = 0;
        for (int b = 0; b < log_n; ++b) r |= ((i >> b) & 1u) << (log_n - 1 - b);
        if (r > i) std::swap(u[i], u[r]);
    }
    // Butterfly stages of F^{(x)n}.
    for (std::size_t len = 1; len < n; len <<= 1)
        for (std::size_t blk = 0; blk < n; blk += 2 * len)
            for (std::size_t j = 0; j < len; ++j)
                u[blk + j] = static_cast<std::uint8_t>(u[blk + j] ^ u[blk + j + len]);
}

std::vector<std::uint8_t> polar_transform(std::vector<std::uint8_t> u) {
    polar_transform_inplace(u);
    return u;
}

bool CodeSpec::is_frozen(std::uint32_t i) const {
    return !std::binary_search(info_set.begin(), info_set.end(), i);
}

void CodeSpec::validate() const {
    if (!is_power_of_two(static_cast<std::size_t>(block_len)))
        throw std::invalid_argument("CodeSpec: block_len must be a power of two");
    if (frozen_values.size() != static_cast<std::size_t>(block_len))
        throw std::invalid_argument("CodeSpec: frozen_values must have block_len entries");
    if (!std::is_sorted(info_set.begin(), info_set.end()))
        throw std::invalid_argument("CodeSpec: info_set must be sorted");
    if (std::adjacent_find(info_set.begin(), info_set.end()) != info_set.end())
        throw std::invalid_argument("CodeSpec: info_set contains duplicates");
    for (auto i : info_set) {
        if (i >= static_cast<std::uint32_t>(block_len))
            throw std::invalid_argument("CodeSpec: info index out of range");
        if (frozen_values[i] != 0)
            throw std::invalid_argument("CodeSpec: frozen value set at information index");
    }
}

std::vector<std::uint8_t> CodeSpec::assemble_u(const std::vector<std::uint8_t>& info_bits) const {
    if (info_bits.size() != info_set.size())
        throw std::invalid_argument("CodeSpec: wrong number of information bits");
    std::vector<std::uint8_t> u = frozen_values;
    for (std::size_t k = 0; k < info_set.size(); ++k) u[info_set[k]] = info_bits[k];
    return u;
}

std::vector<std::uint8_t> CodeSpec::encode(const std::vector<std::uint8_t>& info_bits) const {
    return polar_transform(assemble_u(info_bits));
}

namespace {
std::string pack_bits_hex(const std::vector<std::uint8_t>& bits) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    const std::size_t nbytes = (bits.size() + 7) / 8;
    out.reserve(2 * nbytes);
    for (std::size_t b = 0; b < nbytes; ++b) {
        unsigned byte = 0;
        for (std::size_t k = 0; k < 8; ++k) {
            const std::size_t idx = 8 * b + k;
            if (idx < bits.size() && bits[idx]) byte |= 1u << k;
        }
        out.push_back(digits[byte >> 4]);
        out.push_back(digits[byte & 0xF]);
    }
    return out;
}

std::vector<std::uint8_t> unpack_bits_hex(const std::string& hex, std::size_t nbits) {
    auto nibble = [](char c) -> unsigned {
        if (c >= '0' && c <= '9') return static_cast<unsigned>(c - '0');
        if (c >= 'a' && c <= 'f') return static_cast<unsigned>(c - 'a' + 10);
        if (c >= 'A' && c <= 'F') return static_cast<unsigned>(c - 'A' + 10);
        throw std::invalid_argument("CodeSpec: bad hex digit");
    };
    if (hex.size() != 2 * ((nbits + 7) / 8))
        throw std::invalid_argument("CodeSpec: hex payload has wrong length");
    std::vector<std::uint8_t> bits(nbits, 0);
    for (std::size_t b = 0; b * 2 < hex.size(); ++b) {
        const unsigned byte = (nibble(hex[2 * b]) << 4) | nibble(hex[2 * b + 1]);
        for (std::size_t k = 0; k < 8; ++k) {
            const std::size_t idx = 8 * b + k;
            if (idx < nbits) bits[idx] = static_cast<std::uint8_t>((byte >> k) & 1u);
        }
    }
    return bits;
}
}  // namespace

nlohmann::json CodeSpec::to_json() const {
    nlohmann::json j;
    j["format"] = "npdw-code-v1";
    j["block_len"] = block_len;
    j["info_set"] = info_set;
    j["frozen_values_hex"] = pack_bits_hex(frozen_values);
    j["design"] = design_meta;
    return j;
}

CodeSpec CodeSpec::from_json(const nlohmann::json& j) {
    if (j.value("format", "") != std::string("npdw-code-v1"))
        throw std::invalid_argument("CodeSpec: unknown format tag");
    CodeSpec c;
    c.block_len = j.at("block_len").get<int>();
    c.info_set = j.at("info_set").get<std::vector<std::uint32_t>>();
    c.frozen_values = unpack_bits_hex(j.at("frozen_values_hex").get<std::string>(),
                                      static_cast<std::size_t>(c.block_len));
    c.design_meta = j.value("design", nlohmann::json::object());
    c.validate();
    return c;
}

void CodeSpec::save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("CodeSpec: cannot open " + path + " for writing");
    f << to_json().dump(2) << "\n";
}

CodeSpec CodeSpec::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("CodeSpec: cannot open " + path);
    nlohmann::json j;
    f >> j;
    return from_json(j);
}

}  // namespace npdw
