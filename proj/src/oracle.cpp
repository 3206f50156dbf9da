#include "npdw/oracle.hpp"

#include <cmath>
#include <stdexcept>

#include "npdw/polar.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace npdw::oracle {

std::uint64_t count_deletion_embeddings(const SymbolSequence& x, const SymbolSequence& y) {
    const std::size_t n = x.size(), m = y.size();
    if (m > n) return 0;
    // dp[j] = number of embeddings of y[0..j) into the prefix of x seen so far.
    std::vector<std::uint64_t> dp(m + 1, 0);
    dp[0] = 1;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = std::min(m, i + 1); j >= 1; --j)
            if (x.symbols[i] == y.symbols[j - 1]) dp[j] += dp[j - 1];
    return dp[m];
}

double deletion_likelihood(const SymbolSequence& x, const SymbolSequence& y, double d) {
    const std::size_t n = x.size(), m = y.size();
    if (m > n) return 0.0;
    if (d == 0.0) return (x == y) ? 1.0 : 0.0;
    const double count = static_cast<double>(count_deletion_embeddings(x, y));
    return count * std::pow(d, static_cast<double>(n - m)) * std::pow(1.0 - d, static_cast<double>(m));
}

double ids_likelihood(const SymbolSequence& x, const SymbolSequence& y, const IdsParams& p) {
    p.validate();
    const std::size_t n = x.size(), m = y.size();
    const int sigma = x.alphabet_size;
    const double pi = p.insert_prob / sigma;                       // insert a specific symbol
    const double pd = p.delete_prob;
    const double ps = sigma > 1 ? p.subst_prob / (sigma - 1) : 0;  // substitute to a specific symbol
    const double pc = p.clean_prob();

    // dp[a][b] = P(consumed a input symbols, emitted y[0..b)).
    std::vector<std::vector<double>> dp(n + 1, std::vector<double>(m + 1, 0.0));
    dp[0][0] = 1.0;
    for (std::size_t a = 0; a <= n; ++a)
        for (std::size_t b = 0; b <= m; ++b) {
            const double w = dp[a][b];
            if (w == 0.0) continue;
            if (a == n) continue;  // the process stops once all inputs are consumed
            if (b < m) dp[a][b + 1] += w * pi;  // insertion: emit uniform, keep pointer
            dp[a + 1][b] += w * pd;             // deletion
            if (b < m) {
                if (y.symbols[b] == x.symbols[a])
                    dp[a + 1][b + 1] += w * pc;
                else
                    dp[a + 1][b + 1] += w * ps;
            }
        }
    return dp[n][m];
}

void JointModel::validate() const {
    if (input_table.size() != (std::size_t(1) << block_len))
        throw std::invalid_argument("JointModel: input table size mismatch");
    double s = 0.0;
    for (double v : input_table) {
        if (v < 0.0) throw std::invalid_argument("JointModel: negative input probability");
        s += v;
    }
    if (std::abs(s - 1.0) > 1e-12) throw std::invalid_argument("JointModel: input table must sum to 1");
}

std::vector<std::uint8_t> index_to_bits(std::uint32_t idx, int n) {
    std::vector<std::uint8_t> x(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>((idx >> i) & 1u);
    return x;
}

std::vector<double> uniform_input_table(int n) {
    return std::vector<double>(std::size_t(1) << n, 1.0 / double(std::uint64_t(1) << n));
}

std::vector<double> iid_input_table(int n, double p_one) {
    std::vector<double> t(std::size_t(1) << n);
    for (std::uint32_t idx = 0; idx < t.size(); ++idx) {
        double v = 1.0;
        for (int i = 0; i < n; ++i) v *= ((idx >> i) & 1u) ? p_one : (1.0 - p_one);
        t[idx] = v;
    }
    return t;
}

std::vector<double> make_input_table(int n,
                                     const std::function<double(const std::vector<std::uint8_t>&)>& prob) {
    std::vector<double> t(std::size_t(1) << n);
    for (std::uint32_t idx = 0; idx < t.size(); ++idx) t[idx] = prob(index_to_bits(idx, n));
    return t;
}

namespace {
std::vector<SymbolSequence> all_sequences_up_to(int alphabet, int max_len) {
    std::vector<SymbolSequence> out;
    for (int m = 0; m <= max_len; ++m) {
        std::vector<std::uint8_t> cur(static_cast<std::size_t>(m), 0);
        while (true) {
            out.emplace_back(alphabet, cur);
            int pos = m - 1;
            while (pos >= 0 && cur[static_cast<std::size_t>(pos)] == alphabet - 1) {
                cur[static_cast<std::size_t>(pos)] = 0;
                --pos;
            }
            if (pos < 0) break;
            ++cur[static_cast<std::size_t>(pos)];
        }
    }
    return out;
}

SymbolSequence to_seq(const std::vector<std::uint8_t>& x, int alphabet = 2) {
    return SymbolSequence(alphabet, x);
}
}  // namespace

JointModel JointModel::deletion(int n, double d, std::vector<double> input_table) {
    JointModel m;
    m.block_len = n;
    m.input_table = std::move(input_table);
    m.likelihood = [d](const std::vector<std::uint8_t>& x, const SymbolSequence& y) {
        return deletion_likelihood(to_seq(x), y, d);
    };
    m.enumerate_outputs = [n]() { return all_sequences_up_to(2, n); };
    m.validate();
    return m;
}

JointModel JointModel::ids(int n, IdsParams p, std::vector<double> input_table) {
    p.validate();
    JointModel m;
    m.block_len = n;
    m.input_table = std::move(input_table);
    m.likelihood = [p](const std::vector<std::uint8_t>& x, const SymbolSequence& y) {
        return ids_likelihood(to_seq(x), y, p);
    };
    m.enumerate_outputs = [n]() { return all_sequences_up_to(2, 2 * n); };
    m.validate();
    return m;
}

JointModel JointModel::bsc(int n, double p, std::vector<double> input_table) {
    JointModel m;
    m.block_len = n;
    m.input_table = std::move(input_table);
    m.likelihood = [p, n](const std::vector<std::uint8_t>& x, const SymbolSequence& y) {
        if (y.size() != static_cast<std::size_t>(n)) return 0.0;
        double w = 1.0;
        for (std::size_t i = 0; i < x.size(); ++i) w *= (x[i] == y.symbols[i]) ? (1.0 - p) : p;
        return w;
    };
    m.enumerate_outputs = [n]() {
        auto all = all_sequences_up_to(2, n);
        std::vector<SymbolSequence> fixed;
        for (auto& s : all)
            if (s.size() == static_cast<std::size_t>(n)) fixed.push_back(std::move(s));
        return fixed;
    };
    m.validate();
    return m;
}

JointModel JointModel::bec(int n, double eps, std::vector<double> input_table) {
    JointModel m;
    m.block_len = n;
    m.input_table = std::move(input_table);
    m.likelihood = [eps, n](const std::vector<std::uint8_t>& x, const SymbolSequence& y) {
        if (y.size() != static_cast<std::size_t>(n)) return 0.0;
        double w = 1.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (y.symbols[i] == 2)
                w *= eps;
            else if (y.symbols[i] == x[i])
                w *= 1.0 - eps;
            else
                return 0.0;
        }
        return w;
    };
    m.enumerate_outputs = [n]() {
        auto all = all_sequences_up_to(3, n);
        std::vector<SymbolSequence> fixed;
        for (auto& s : all)
            if (s.size() == static_cast<std::size_t>(n)) fixed.push_back(std::move(s));
        return fixed;
    };
    m.validate();
    return m;
}

double synthetic_posterior(const JointModel& model, const SymbolSequence& y,
                           const std::vector<std::uint8_t>& u_prefix, int i) {
    const int n = model.block_len;
    if (i < 0 || i >= n) throw std::invalid_argument("synthetic_posterior: index out of range");
    if (u_prefix.size() != static_cast<std::size_t>(i))
        throw std::invalid_argument("synthetic_posterior: prefix length must equal i");

    const int suffix_len = n - i - 1;
    std::vector<std::uint8_t> u(static_cast<std::size_t>(n), 0);
    std::copy(u_prefix.begin(), u_prefix.end(), u.begin());

    double mass[2] = {0.0, 0.0};
    for (int b = 0; b < 2; ++b) {
        u[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(b);
        for (std::uint64_t s = 0; s < (std::uint64_t(1) << suffix_len); ++s) {
            for (int k = 0; k < suffix_len; ++k)
                u[static_cast<std::size_t>(i + 1 + k)] = static_cast<std::uint8_t>((s >> k) & 1u);
            const auto x = polar_transform(u);
            std::uint32_t xi = 0;
            for (int k = 0; k < n; ++k) xi |= static_cast<std::uint32_t>(x[static_cast<std::size_t>(k)]) << k;
            const double px = model.input_table[xi];
            if (px == 0.0) continue;
            mass[b] += px * model.likelihood(x, y);
        }
    }
    const double total = mass[0] + mass[1];
    if (total <= 0.0) throw ImpossiblePrefix("synthetic_posterior: prefix has zero posterior mass");
    return mass[1] / total;
}

double exact_mi(const JointModel& model) {
    model.validate();
    const int n = model.block_len;
    const std::uint32_t nx = std::uint32_t(1) << n;
    const auto ys = model.enumerate_outputs();

    // P_Y and the per-input mass check, one row per input for deterministic merging.
    std::vector<double> py(ys.size(), 0.0);
    std::vector<std::vector<double>> w_rows(nx);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t xi = 0; xi < static_cast<std::int64_t>(nx); ++xi) {
        const auto x = index_to_bits(static_cast<std::uint32_t>(xi), n);
        auto& row = w_rows[static_cast<std::size_t>(xi)];
        row.resize(ys.size());
        double mass = 0.0;
        for (std::size_t yi = 0; yi < ys.size(); ++yi) {
            row[yi] = model.likelihood(x, ys[yi]);
            mass += row[yi];
        }
        if (mass < 1.0 - 1e-9)
            throw std::runtime_error("exact_mi: enumerated output space misses more than 1e-9 mass");
    }
    for (std::uint32_t xi = 0; xi < nx; ++xi) {
        const double px = model.input_table[xi];
        if (px == 0.0) continue;
        for (std::size_t yi = 0; yi < ys.size(); ++yi) py[yi] += px * w_rows[xi][yi];
    }

    std::vector<double> contrib(nx, 0.0);
#pragma omp parallel for schedule(static)
    for (std::int64_t xi = 0; xi < static_cast<std::int64_t>(nx); ++xi) {
        const double px = model.input_table[static_cast<std::size_t>(xi)];
        if (px == 0.0) continue;
        const auto& row = w_rows[static_cast<std::size_t>(xi)];
        double acc = 0.0;
        for (std::size_t yi = 0; yi < ys.size(); ++yi) {
            const double w = row[yi];
            if (w <= 0.0) continue;
            acc += w * std::log2(w / py[yi]);
        }
        contrib[static_cast<std::size_t>(xi)] = px * acc;
    }
    double mi = 0.0;
    for (double c : contrib) mi += c;
    return mi / n;
}

}  // namespace npdw::oracle
