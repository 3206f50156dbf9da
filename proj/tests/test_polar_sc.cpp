#include <cmath>

#include "doctest.h"
#include "npdw/design.hpp"
#include "npdw/memoryless.hpp"
#include "npdw/oracle.hpp"
#include "npdw/polar.hpp"
#include "npdw/sc.hpp"

using namespace npdw;

namespace {

// Naive GF(2) construction of B_N F^{(x)n} for cross-checking the butterflies.
std::vector<std::vector<std::uint8_t>> naive_transform_matrix(int n_bits) {
    const int n = 1 << n_bits;
    // F^{(x)m} by Kronecker recursion, F = [[1,0],[1,1]].
    std::vector<std::vector<std::uint8_t>> f = {{1}};
    for (int m = 0; m < n_bits; ++m) {
        const int sz = static_cast<int>(f.size());
        std::vector<std::vector<std::uint8_t>> g(static_cast<std::size_t>(2 * sz),
                                                 std::vector<std::uint8_t>(static_cast<std::size_t>(2 * sz), 0));
        for (int i = 0; i < sz; ++i)
            for (int j = 0; j < sz; ++j) {
                g[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = f[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
                g[static_cast<std::size_t>(i + sz)][static_cast<std::size_t>(j)] = f[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
                g[static_cast<std::size_t>(i + sz)][static_cast<std::size_t>(j + sz)] = f[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            }
        f = std::move(g);
    }
    // Left-multiply by the bit-reversal permutation: row i of B F is row rev(i) of F.
    const auto rev = bit_reversal_perm(n_bits);
    std::vector<std::vector<std::uint8_t>> bf(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) bf[static_cast<std::size_t>(i)] = f[rev[static_cast<std::size_t>(i)]];
    return bf;
}

std::vector<std::uint8_t> apply_matrix(const std::vector<std::vector<std::uint8_t>>& g,
                                       const std::vector<std::uint8_t>& u) {
    std::vector<std::uint8_t> x(u.size(), 0);
    for (std::size_t j = 0; j < u.size(); ++j)
        for (std::size_t i = 0; i < u.size(); ++i) x[j] = static_cast<std::uint8_t>(x[j] ^ (u[i] & g[i][j]));
    return x;
}

CodeSpec all_frozen_code(int n, std::vector<std::uint8_t> frozen) {
    CodeSpec c;
    c.block_len = n;
    c.frozen_values = std::move(frozen);
    return c;
}

CodeSpec rate1_code(int n) {
    CodeSpec c;
    c.block_len = n;
    c.frozen_values.assign(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i) c.info_set.push_back(static_cast<std::uint32_t>(i));
    return c;
}

}  // namespace

TEST_CASE("bit reversal permutation basics") {
    CHECK(bit_reversal_perm(1) == std::vector<std::uint32_t>{0, 1});
    const auto p3 = bit_reversal_perm(3);
    CHECK(p3[1] == 4);
    CHECK(p3[3] == 6);
    for (int n = 1; n <= 16; ++n) {
        const auto p = bit_reversal_perm(n);
        bool ok = true;
        for (std::uint32_t i = 0; i < p.size(); ++i) ok = ok && p[p[i]] == i;
        CHECK(ok);
    }
}

TEST_CASE("polar transform small cases") {
    CHECK(polar_transform({1, 0}) == std::vector<std::uint8_t>{1, 0});
    CHECK(polar_transform({1, 1}) == std::vector<std::uint8_t>{0, 1});
    CHECK(polar_transform({0, 1}) == std::vector<std::uint8_t>{1, 1});
    CHECK(polar_transform(std::vector<std::uint8_t>(64, 0)) == std::vector<std::uint8_t>(64, 0));
    CHECK_THROWS(polar_transform({1, 0, 1}));
}

TEST_CASE("polar transform matches the naive matrix and is an involution") {
    rng::Stream rs(21);
    for (int nb = 2; nb <= 6; ++nb) {
        const int n = 1 << nb;
        const auto g = naive_transform_matrix(nb);
        for (int t = 0; t < 200; ++t) {
            std::vector<std::uint8_t> u(static_cast<std::size_t>(n));
            for (auto& b : u) b = static_cast<std::uint8_t>(rs.next_u64() & 1);
            const auto x = polar_transform(u);
            CHECK(x == apply_matrix(g, u));
            CHECK(polar_transform(x) == u);
        }
    }
}

TEST_CASE("memoryless kernel formulas") {
    MemorylessKernel k;
    double out = 0.0;
    double a = 0.0, b = 3.7;
    k.check_node(&a, &b, &out, 1);
    CHECK(out == doctest::Approx(0.0).epsilon(1e-12));

    a = 1.2, b = -0.7;
    std::uint8_t bit0 = 0, bit1 = 1;
    k.bit_node(&a, &b, &bit0, &out, 1);
    CHECK(out == doctest::Approx(-0.7 + 1.2));
    k.bit_node(&a, &b, &bit1, &out, 1);
    CHECK(out == doctest::Approx(-0.7 - 1.2));

    a = 3.0, b = 3.0;
    k.check_node(&a, &b, &out, 1);
    CHECK(out == doctest::Approx(-2.0 * std::atanh(std::tanh(1.5) * std::tanh(1.5))).epsilon(1e-12));
}

TEST_CASE("all-frozen code decodes to its frozen values") {
    const int n = 8;
    auto code = all_frozen_code(n, {1, 0, 1, 1, 0, 0, 1, 0});
    MemorylessKernel k;
    std::vector<double> emb(static_cast<std::size_t>(n));
    rng::Stream rs(3);
    for (auto& e : emb) e = 4.0 * rs.uniform() - 2.0;
    const auto r = sc_decode(k, emb.data(), code);
    CHECK(r.u_hat == code.frozen_values);
}

TEST_CASE("SC posteriors equal the enumeration oracle on BSC(0.1), N=4") {
    const int n = 4;
    const double p = 0.1;
    const auto model = oracle::JointModel::bsc(n, p, oracle::uniform_input_table(n));
    const auto embedder = MemorylessEmbedder::bsc(p);
    MemorylessKernel kernel;
    ScWorkspace<double> ws;

    for (std::uint32_t yi = 0; yi < (1u << n); ++yi) {
        SymbolSequence y(2, oracle::index_to_bits(yi, n));
        for (std::uint32_t ui = 0; ui < (1u << n); ++ui) {
            const auto u = oracle::index_to_bits(ui, n);
            const auto emb = embedder(y);
            const auto llrs = sc_forced_llrs(kernel, emb.data(), n, u.data(), ws);
            for (int i = 0; i < n; ++i) {
                std::vector<std::uint8_t> prefix(u.begin(), u.begin() + i);
                const double exact = oracle::synthetic_posterior(model, y, prefix, i);
                const double got = 1.0 / (1.0 + std::exp(-llrs[static_cast<std::size_t>(i)]));
                const double denom = std::max({exact, 1.0 - exact, 1e-12});
                CHECK(std::abs(got - exact) / denom < 1e-9);
            }
        }
    }
}

TEST_CASE("noiseless BSC at rate 1 reproduces the message") {
    const int n = 16;
    const auto code = rate1_code(n);
    const auto embedder = MemorylessEmbedder::bsc(1e-9);
    MemorylessKernel kernel;
    rng::Stream rs(17);
    for (int t = 0; t < 1000; ++t) {
        std::vector<std::uint8_t> u(static_cast<std::size_t>(n));
        for (auto& b : u) b = static_cast<std::uint8_t>(rs.next_u64() & 1);
        const auto x = polar_transform(u);
        const auto emb = embedder(SymbolSequence(2, x));
        CHECK(sc_decode(kernel, emb.data(), code).u_hat == u);
    }
}

TEST_CASE("scl with list size 1 is bit-exact SC") {
    const int n = 32;
    CodeSpec code;
    code.block_len = n;
    code.frozen_values.assign(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i)
        if (i % 3 != 0) code.info_set.push_back(static_cast<std::uint32_t>(i));
    MemorylessKernel kernel;
    rng::Stream rs(23);
    for (int t = 0; t < 100; ++t) {
        std::vector<double> emb(static_cast<std::size_t>(n));
        for (auto& e : emb) e = 6.0 * rs.uniform() - 3.0;
        const auto sc = sc_decode(kernel, emb.data(), code);
        const auto scl = scl_decode(kernel, emb.data(), code, 1);
        CHECK(sc.u_hat == scl.u_hat);
    }
}

TEST_CASE("kernel invocation counts match the closed form") {
    const int n = 64;
    const auto code = rate1_code(n);
    MemorylessKernel inner;
    CountingKernel<MemorylessKernel> k(inner);
    std::vector<double> emb(static_cast<std::size_t>(n), 0.3);
    sc_decode(k, emb.data(), code);
    const std::uint64_t nlogn = static_cast<std::uint64_t>(n / 2) * 6;  // N/2 * log2 N
    CHECK(k.f_rows == nlogn);
    CHECK(k.g_rows == nlogn);
    CHECK(k.h_rows == static_cast<std::uint64_t>(n));
}

TEST_CASE("genie design on a BSC: noiseless gives rate 1, error rates order sensibly") {
    const int n = 16;
    const auto clean_genie = [&](const std::vector<std::uint8_t>& u, rng::Stream&) {
        const auto x = polar_transform(u);
        const auto emb = MemorylessEmbedder::bsc(1e-9)(SymbolSequence(2, x));
        MemorylessKernel kernel;
        return sc_forced_llrs(kernel, emb.data(), n, u.data());
    };
    DesignConfig cfg;
    cfg.block_len = n;
    cfg.mc_frames = 50;
    rng::Stream rs(5);
    const auto res = design_code(clean_genie, cfg, rs);
    CHECK(res.code.info_set.size() == static_cast<std::size_t>(n));
    CHECK(res.code.rate() == doctest::Approx(1.0));

    // Noisy BSC: genie-aided design; doubling the frames changes few indices.
    const double p = 0.1;
    const auto genie = [&](const std::vector<std::uint8_t>& u, rng::Stream& frs) {
        auto x = polar_transform(u);
        for (auto& b : x) b = static_cast<std::uint8_t>(b ^ (frs.bernoulli(p) ? 1 : 0));
        const auto emb = MemorylessEmbedder::bsc(p)(SymbolSequence(2, x));
        MemorylessKernel kernel;
        return sc_forced_llrs(kernel, emb.data(), n, u.data());
    };
    DesignConfig c1;
    c1.block_len = n;
    c1.mc_frames = 3000;
    c1.target_sum_error = 0.3;
    DesignConfig c2 = c1;
    c2.mc_frames = 6000;
    rng::Stream rs1(1001), rs2(1002);
    const auto r1 = design_code(genie, c1, rs1);
    const auto r2 = design_code(genie, c2, rs2);
    int diff = 0;
    for (auto i : r1.code.info_set)
        if (!std::binary_search(r2.code.info_set.begin(), r2.code.info_set.end(), i)) ++diff;
    const double denom = std::max<std::size_t>(r1.code.info_set.size(), 1);
    CHECK(double(diff) / double(denom) < 0.25);
}

TEST_CASE("scl improves FER on a designed BSC code") {
    const int n = 32;
    const double p = 0.08;
    MemorylessKernel kernel;
    const auto embedder = MemorylessEmbedder::bsc(p);
    const auto genie = [&](const std::vector<std::uint8_t>& u, rng::Stream& frs) {
        auto x = polar_transform(u);
        for (auto& b : x) b = static_cast<std::uint8_t>(b ^ (frs.bernoulli(p) ? 1 : 0));
        const auto emb = embedder(SymbolSequence(2, x));
        return sc_forced_llrs(kernel, emb.data(), n, u.data());
    };
    DesignConfig dc;
    dc.block_len = n;
    dc.mc_frames = 4000;
    dc.target_sum_error = 0.35;
    rng::Stream drs(31);
    const auto design = design_code(genie, dc, drs);
    const auto& code = design.code;
    REQUIRE(code.info_set.size() > 4);

    auto run = [&](int list, long frames) {
        long errs = 0;
        rng::Stream rs(77);
        for (long f = 0; f < frames; ++f) {
            rng::Stream frs = rs.substream(static_cast<std::uint64_t>(f));
            std::vector<std::uint8_t> info(code.info_set.size());
            for (auto& b : info) b = static_cast<std::uint8_t>(frs.next_u64() & 1);
            auto u = code.assemble_u(info);
            auto x = polar_transform(u);
            for (auto& b : x) b = static_cast<std::uint8_t>(b ^ (frs.bernoulli(p) ? 1 : 0));
            const auto emb = embedder(SymbolSequence(2, x));
            const auto got = list == 1 ? sc_decode(kernel, emb.data(), code).u_hat
                                       : scl_decode(kernel, emb.data(), code, list).u_hat;
            errs += got != u;
        }
        return double(errs) / double(frames);
    };
    const double fer1 = run(1, 1500);
    const double fer4 = run(4, 1500);
    CHECK(fer4 <= fer1 + 0.02);
}

TEST_CASE("code spec round-trips through json") {
    CodeSpec c;
    c.block_len = 16;
    c.info_set = {1, 3, 5, 7, 9, 11};
    c.frozen_values.assign(16, 0);
    c.frozen_values[0] = 1;
    c.frozen_values[14] = 1;
    c.design_meta = {{"note", "test"}};
    const auto j = c.to_json();
    const auto back = CodeSpec::from_json(j);
    CHECK(back.block_len == c.block_len);
    CHECK(back.info_set == c.info_set);
    CHECK(back.frozen_values == c.frozen_values);

    CodeSpec bad = c;
    bad.frozen_values[1] = 1;  // frozen value at an info position
    CHECK_THROWS(bad.validate());
}
