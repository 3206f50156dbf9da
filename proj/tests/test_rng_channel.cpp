#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "npdw/channel.hpp"
#include "npdw/rng.hpp"
#include "npdw/sequence.hpp"

using namespace npdw;

namespace {
SymbolSequence bits(std::vector<std::uint8_t> v) { return SymbolSequence(2, std::move(v)); }

double binom_pmf(int n, int k, double p) {
    double c = 1.0;
    for (int i = 0; i < k; ++i) c = c * double(n - i) / double(i + 1);
    return c * std::pow(p, k) * std::pow(1.0 - p, n - k);
}
}  // namespace

TEST_CASE("stream is deterministic and seed-sensitive") {
    rng::Stream a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) {
        const auto va = a.next_u64();
        CHECK(va == b.next_u64());
    }
    int differs = 0;
    rng::Stream a2(42);
    for (int i = 0; i < 100; ++i) differs += a2.next_u64() != c.next_u64();
    CHECK(differs > 90);
}

TEST_CASE("substreams are independent of parent draws") {
    rng::Stream a(7);
    const auto child_before = a.substream(3);
    a.next_u64();
    a.next_u64();
    const auto child_after = a.substream(3);
    CHECK(child_before.seed() == child_after.seed());
    CHECK(rng::Stream(7).substream(3).seed() != rng::Stream(7).substream(4).seed());
}

TEST_CASE("uniform and poisson moments") {
    rng::Stream rs(123);
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) sum += rs.uniform();
    CHECK(std::abs(sum / n - 0.5) < 0.005);

    double ksum = 0.0, ksq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double k = rs.poisson(5.0);
        ksum += k;
        ksq += k * k;
    }
    const double mean = ksum / n;
    const double sd = std::sqrt((ksq - n * mean * mean) / (n - 1));
    CHECK(std::abs(mean - 5.0) < 3.0 * sd / std::sqrt(double(n)));
}

TEST_CASE("clean IDS channel is the identity") {
    rng::Stream rs(1);
    for (int trial = 0; trial < 50; ++trial) {
        SymbolSequence x(2, {});
        for (int i = 0; i < 40; ++i) x.symbols.push_back(static_cast<std::uint8_t>(rs.next_u64() & 1));
        rng::Stream crs = rs.substream(static_cast<std::uint64_t>(trial));
        CHECK(apply_ids(x, IdsParams{0, 0, 0}, crs) == x);
    }
}

TEST_CASE("delete-everything empties the sequence") {
    rng::Stream rs(2);
    const auto y = apply_ids(bits({0, 1, 1, 0}), IdsParams{0, 1, 0}, rs);
    CHECK(y.symbols.empty());
    rng::Stream rs2(3);
    CHECK(apply_deletion(bits({1, 0, 1}), 1.0, rs2).symbols.empty());
    rng::Stream rs3(4);
    CHECK(apply_deletion(bits({1, 0, 1}), 0.0, rs3) == bits({1, 0, 1}));
}

TEST_CASE("ids mean output length matches the geometric-insertion expectation") {
    // Per consumed symbol the expected emissions are (i+s+c)/(1-i).
    const IdsParams p{0.1, 0.1, 0.0};
    const int n = 64, trials = 100000;
    SymbolSequence x(2, std::vector<std::uint8_t>(n, 1));
    rng::Stream rs(99);
    double sum = 0.0, sumsq = 0.0;
    for (int t = 0; t < trials; ++t) {
        rng::Stream trs = rs.substream(static_cast<std::uint64_t>(t));
        const double len = double(apply_ids(x, p, trs).size());
        sum += len;
        sumsq += len * len;
    }
    const double mean = sum / trials;
    const double sd = std::sqrt((sumsq - trials * mean * mean) / (trials - 1));
    const double expected = n * (p.insert_prob + p.subst_prob + p.clean_prob()) / (1.0 - p.insert_prob);
    CHECK(std::abs(mean - expected) < 3.0 * sd / std::sqrt(double(trials)));
}

TEST_CASE("deletion survivor count follows the binomial law") {
    const int n = 8, trials = 100000;
    const double d = 0.3;
    SymbolSequence x(2, std::vector<std::uint8_t>(n, 1));
    rng::Stream rs(7);
    std::vector<long> hist(static_cast<std::size_t>(n) + 1, 0);
    for (int t = 0; t < trials; ++t) {
        rng::Stream trs = rs.substream(static_cast<std::uint64_t>(t));
        ++hist[apply_deletion(x, d, trs).size()];
    }
    double chi2 = 0.0;
    for (int k = 0; k <= n; ++k) {
        const double expect = trials * binom_pmf(n, k, 1.0 - d);
        chi2 += (hist[static_cast<std::size_t>(k)] - expect) * (hist[static_cast<std::size_t>(k)] - expect) / expect;
    }
    CHECK(chi2 < 20.09);  // chi-square 99th percentile, 8 degrees of freedom
}

TEST_CASE("deletion outputs are subsequences of the input") {
    rng::Stream rs(11);
    for (int t = 0; t < 200; ++t) {
        SymbolSequence x(4, {});
        for (int i = 0; i < 30; ++i) x.symbols.push_back(static_cast<std::uint8_t>(rs.below(4)));
        rng::Stream trs = rs.substream(static_cast<std::uint64_t>(t));
        const auto y = apply_deletion(x, 0.4, trs);
        std::size_t i = 0;
        for (auto s : y.symbols) {
            while (i < x.size() && x.symbols[i] != s) ++i;
            REQUIRE(i < x.size());
            ++i;
        }
    }
}

TEST_CASE("same seed reproduces, different seeds diverge") {
    SymbolSequence x(2, std::vector<std::uint8_t>(128, 1));
    const IdsParams p{0.05, 0.1, 0.05};
    rng::Stream a(5), b(5), c(6);
    const auto ya = apply_ids(x, p, a);
    CHECK(ya == apply_ids(x, p, b));
    CHECK(ya != apply_ids(x, p, c));
}

TEST_CASE("sample_traces draws Poisson trace counts") {
    DnaChannelParams p{IdsParams{0.017, 0.02, 0.022}, 5.0};
    SymbolSequence q(4, std::vector<std::uint8_t>(110, 2));
    rng::Stream rs(31);
    double ksum = 0.0, ksq = 0.0;
    const int trials = 20000;
    for (int t = 0; t < trials; ++t) {
        rng::Stream trs = rs.substream(static_cast<std::uint64_t>(t));
        const double k = double(sample_traces(q, p, trs).size());
        ksum += k;
        ksq += k * k;
    }
    const double mean = ksum / trials;
    const double sd = std::sqrt((ksq - trials * mean * mean) / (trials - 1));
    CHECK(std::abs(mean - 5.0) < 3.0 * sd / std::sqrt(double(trials)));

    // A stream whose Poisson draw is zero yields an empty trace list.
    DnaChannelParams tiny{IdsParams{0, 0.01, 0}, 0.01};
    bool saw_empty = false;
    for (int s = 0; s < 20 && !saw_empty; ++s) {
        rng::Stream srs(static_cast<std::uint64_t>(s));
        saw_empty = sample_traces(q, tiny, srs).empty();
    }
    CHECK(saw_empty);
}

TEST_CASE("trace statistics are exchangeable under draw-order permutation") {
    // Mean trace length from substreams 0..K-1 vs the reversed assignment.
    SymbolSequence q(4, std::vector<std::uint8_t>(60, 1));
    const IdsParams p{0.05, 0.1, 0.02};
    const int k = 2000;
    rng::Stream rs(77);
    double m1 = 0, m2 = 0, v1 = 0, v2 = 0;
    for (int i = 0; i < k; ++i) {
        rng::Stream f = rs.substream(static_cast<std::uint64_t>(i));
        rng::Stream r = rs.substream(static_cast<std::uint64_t>(k - 1 - i));
        const double a = double(apply_ids(q, p, f).size());
        const double b = double(apply_ids(q, p, r).size());
        m1 += a;
        m2 += b;
        v1 += a * a;
        v2 += b * b;
    }
    m1 /= k;
    m2 /= k;
    v1 = v1 / k - m1 * m1;
    v2 = v2 / k - m2 * m2;
    const double z = (m1 - m2) / std::sqrt(v1 / k + v2 / k + 1e-12);
    CHECK(std::abs(z) < 3.0);  // identical samples reordered; must agree exactly up to fp
}

TEST_CASE("parameter validation") {
    rng::Stream rs(1);
    SymbolSequence x(2, {0, 1});
    CHECK_THROWS(apply_ids(x, IdsParams{0.5, 0.4, 0.2}, rs));
    CHECK_THROWS(apply_ids(x, IdsParams{-0.1, 0, 0}, rs));
    SymbolSequence unary(1, {0, 0});
    CHECK_THROWS(apply_ids(unary, IdsParams{0.1, 0, 0}, rs));
    CHECK_NOTHROW(apply_ids(unary, IdsParams{0, 0.5, 0}, rs));
    CHECK_THROWS(apply_deletion(x, 1.5, rs));
}

TEST_CASE("insertion runaway hits the output guard") {
    SymbolSequence x(2, std::vector<std::uint8_t>(64, 0));
    rng::Stream rs(9);
    CHECK_THROWS_AS(apply_ids(x, IdsParams{0.995, 0.005, 0.0}, rs), std::runtime_error);
}

TEST_CASE("bit/quaternary mapping") {
    const auto q = bits_to_quaternary(bits({0, 0, 0, 1, 1, 0, 1, 1}));
    CHECK(q.symbols == std::vector<std::uint8_t>{0, 1, 2, 3});

    rng::Stream rs(13);
    SymbolSequence x(2, {});
    for (int i = 0; i < 256; ++i) x.symbols.push_back(static_cast<std::uint8_t>(rs.next_u64() & 1));
    const auto round = quaternary_to_bits(bits_to_quaternary(x));
    CHECK(round == x);
    CHECK(bits_to_quaternary(x).size() == 128);
    CHECK_THROWS(bits_to_quaternary(bits({0, 1, 1})));
}
