#include <cmath>
#include <map>

#include "doctest.h"
#include "npdw/channel.hpp"
#include "npdw/oracle.hpp"
#include "npdw/polar.hpp"

using namespace npdw;
using namespace npdw::oracle;

namespace {
SymbolSequence bits(std::vector<std::uint8_t> v) { return SymbolSequence(2, std::move(v)); }

std::string key_of(const SymbolSequence& s) {
    std::string k;
    for (auto c : s.symbols) k.push_back(char('0' + c));
    return k;
}

double h2(double p) {
    if (p <= 0.0 || p >= 1.0) return 0.0;
    return -p * std::log2(p) - (1 - p) * std::log2(1 - p);
}
}  // namespace

TEST_CASE("deletion likelihood hand values") {
    CHECK(deletion_likelihood(bits({0, 0, 0}), bits({0}), 0.5) == doctest::Approx(3 * 0.125));
    const auto x = bits({1, 0, 1, 1, 0});
    CHECK(deletion_likelihood(x, x, 0.3) == doctest::Approx(std::pow(0.7, 5)));
    CHECK(deletion_likelihood(bits({1}), bits({1, 1}), 0.3) == 0.0);
}

TEST_CASE("deletion embedding count equals brute-force enumeration, N<=8") {
    for (int n = 1; n <= 8; ++n) {
        for (std::uint32_t xi = 0; xi < (1u << n); ++xi) {
            const auto xv = index_to_bits(xi, n);
            const SymbolSequence x(2, xv);
            std::map<std::string, std::uint64_t> brute;
            for (std::uint32_t keep = 0; keep < (1u << n); ++keep) {
                SymbolSequence y(2, {});
                for (int i = 0; i < n; ++i)
                    if ((keep >> i) & 1u) y.symbols.push_back(xv[static_cast<std::size_t>(i)]);
                ++brute[key_of(y)];
            }
            for (const auto& [k, cnt] : brute) {
                SymbolSequence y(2, {});
                for (char c : k) y.symbols.push_back(static_cast<std::uint8_t>(c - '0'));
                CHECK(count_deletion_embeddings(x, y) == cnt);
            }
        }
    }
}

TEST_CASE("ids likelihood specializes to deletion and identity") {
    rng::Stream rs(3);
    for (int t = 0; t < 200; ++t) {
        const int n = 1 + static_cast<int>(rs.below(8));
        SymbolSequence x(2, {}), y(2, {});
        for (int i = 0; i < n; ++i) x.symbols.push_back(static_cast<std::uint8_t>(rs.next_u64() & 1));
        const int m = static_cast<int>(rs.below(static_cast<std::uint32_t>(n + 1)));
        for (int i = 0; i < m; ++i) y.symbols.push_back(static_cast<std::uint8_t>(rs.next_u64() & 1));
        const double d = 0.31;
        CHECK(ids_likelihood(x, y, IdsParams{0, d, 0}) == doctest::Approx(deletion_likelihood(x, y, d)).epsilon(1e-12));
    }
    const auto x = bits({1, 0, 1});
    CHECK(ids_likelihood(x, x, IdsParams{0, 0, 0}) == doctest::Approx(1.0));
    CHECK(ids_likelihood(x, bits({1, 1, 1}), IdsParams{0, 0, 0}) == 0.0);
}

TEST_CASE("ids likelihood sums to one over the enumerated output space") {
    // The output enumeration caps |y| at 2N; the insertion rate must be small
    // enough that the truncated tail mass stays below 1e-9.
    const IdsParams p{0.01, 0.1, 0.05};
    const int n = 6;
    const auto model = JointModel::ids(n, p, uniform_input_table(n));
    const auto ys = model.enumerate_outputs();
    for (std::uint32_t xi = 0; xi < (1u << n); ++xi) {
        const auto x = index_to_bits(xi, n);
        double mass = 0.0;
        for (const auto& y : ys) mass += model.likelihood(x, y);
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("simulator frequencies match the ids likelihood") {
    const IdsParams p{0.05, 0.1, 0.05};
    const SymbolSequence x = bits({1, 0, 1, 1, 0, 1});
    const SymbolSequence target = bits({1, 0, 1, 1, 0, 1});
    const double w = ids_likelihood(x, target, p);
    const long trials = 200000;
    long hits = 0;
    rng::Stream rs(41);
    for (long t = 0; t < trials; ++t) {
        rng::Stream trs = rs.substream(static_cast<std::uint64_t>(t));
        hits += apply_ids(x, p, trs) == target;
    }
    const double phat = double(hits) / double(trials);
    const double se = std::sqrt(w * (1 - w) / double(trials));
    CHECK(std::abs(phat - w) < 3.0 * se);
}

TEST_CASE("synthetic posterior is degenerate on the noiseless channel") {
    const int n = 4;
    const auto model = JointModel::bsc(n, 1e-15, uniform_input_table(n));
    rng::Stream rs(7);
    for (int t = 0; t < 20; ++t) {
        std::vector<std::uint8_t> u(static_cast<std::size_t>(n));
        for (auto& b : u) b = static_cast<std::uint8_t>(rs.next_u64() & 1);
        const auto x = polar_transform(u);
        const SymbolSequence y(2, x);
        for (int i = 0; i < n; ++i) {
            std::vector<std::uint8_t> prefix(u.begin(), u.begin() + i);
            const double post = synthetic_posterior(model, y, prefix, i);
            CHECK(std::abs(post - double(u[static_cast<std::size_t>(i)])) < 1e-9);
        }
    }
}

TEST_CASE("posterior chain rule recovers the joint") {
    const int n = 8;
    const double d = 0.25;
    const auto model = JointModel::deletion(n, d, uniform_input_table(n));
    const auto ys = model.enumerate_outputs();
    rng::Stream rs(11);
    for (int t = 0; t < 30; ++t) {
        std::vector<std::uint8_t> u(static_cast<std::size_t>(n));
        for (auto& b : u) b = static_cast<std::uint8_t>(rs.next_u64() & 1);
        const auto x = polar_transform(u);
        const SymbolSequence y = ys[rs.below(static_cast<std::uint32_t>(ys.size()))];

        // P(y) by direct enumeration over inputs.
        double py = 0.0;
        for (std::uint32_t xi = 0; xi < (1u << n); ++xi)
            py += model.input_table[xi] * model.likelihood(index_to_bits(xi, n), y);
        if (py == 0.0) continue;

        double chain = py;
        bool possible = true;
        for (int i = 0; i < n && possible; ++i) {
            std::vector<std::uint8_t> prefix(u.begin(), u.begin() + i);
            try {
                const double p1 = synthetic_posterior(model, y, prefix, i);
                chain *= u[static_cast<std::size_t>(i)] ? p1 : 1.0 - p1;
            } catch (const ImpossiblePrefix&) {
                possible = false;
            }
        }
        std::uint32_t xi = 0;
        for (int k = 0; k < n; ++k) xi |= static_cast<std::uint32_t>(x[static_cast<std::size_t>(k)]) << k;
        const double joint = model.input_table[xi] * model.likelihood(x, y);
        if (possible) CHECK(chain == doctest::Approx(joint).epsilon(1e-9));
    }
}

TEST_CASE("posterior is consistent under global symbol relabeling") {
    // Complementing the channel symbols maps posteriors consistently: the
    // deletion channel is invariant under 0<->1, and complementing x equals
    // adding the all-ones codeword, i.e. u -> u ^ g with g = transform(1^N).
    const int n = 4;
    const double d = 0.3;
    const auto model = JointModel::deletion(n, d, uniform_input_table(n));
    const auto g = polar_transform(std::vector<std::uint8_t>(static_cast<std::size_t>(n), 1));
    const SymbolSequence y = bits({1, 0, 1});
    SymbolSequence yc = y;
    for (auto& s : yc.symbols) s = static_cast<std::uint8_t>(1 - s);

    for (std::uint32_t ui = 0; ui < (1u << n); ++ui) {
        const auto u = index_to_bits(ui, n);
        for (int i = 0; i < n; ++i) {
            std::vector<std::uint8_t> prefix(u.begin(), u.begin() + i);
            std::vector<std::uint8_t> prefix_c = prefix;
            for (int k = 0; k < i; ++k) prefix_c[static_cast<std::size_t>(k)] =
                static_cast<std::uint8_t>(prefix_c[static_cast<std::size_t>(k)] ^ g[static_cast<std::size_t>(k)]);
            double p = 0.0;
            bool threw = false;
            try {
                p = synthetic_posterior(model, y, prefix, i);
            } catch (const ImpossiblePrefix&) {
                threw = true;
            }
            if (threw) {
                CHECK_THROWS_AS((void)synthetic_posterior(model, yc, prefix_c, i), ImpossiblePrefix);
                continue;
            }
            const double pc = synthetic_posterior(model, yc, prefix_c, i);
            const double expect = g[static_cast<std::size_t>(i)] ? 1.0 - p : p;
            CHECK(pc == doctest::Approx(expect).epsilon(1e-9));
        }
    }
}

TEST_CASE("exact mutual information endpoints and closed forms") {
    CHECK(exact_mi(JointModel::deletion(4, 0.0, uniform_input_table(4))) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(exact_mi(JointModel::deletion(4, 1.0, uniform_input_table(4))) == doctest::Approx(0.0));
    // Memoryless closed form: I/N = 1 - h2(p) for uniform inputs on a BSC.
    for (double p : {0.05, 0.2}) {
        const auto mi = exact_mi(JointModel::bsc(5, p, uniform_input_table(5)));
        CHECK(mi == doctest::Approx(1.0 - h2(p)).epsilon(1e-9));
    }
    // BEC: I/N = 1 - eps.
    CHECK(exact_mi(JointModel::bec(4, 0.35, uniform_input_table(4))) == doctest::Approx(0.65).epsilon(1e-9));
}

TEST_CASE("exact MI is monotone non-increasing in the deletion rate") {
    const int n = 6;
    double prev = 2.0;
    for (double d : {0.0, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0}) {
        const double mi = exact_mi(JointModel::deletion(n, d, uniform_input_table(n)));
        CHECK(mi <= prev + 1e-9);
        prev = mi;
    }
}

TEST_CASE("frozen regression value for Del(0.5) at N=4") {
    const double mi = exact_mi(JointModel::deletion(4, 0.5, uniform_input_table(4)));
    // Value computed once by this oracle and pinned against regressions.
    CHECK(mi == doctest::Approx(0.264150610347).epsilon(1e-9));
}
