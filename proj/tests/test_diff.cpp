#include <cmath>
#include <functional>

#include "doctest.h"
#include "npdw/nn.hpp"
#include "npdw/rng.hpp"
#include "npdw/tape.hpp"

using namespace npdw;
using nn::Tensor;

namespace {

using BuildFn = std::function<int(nn::Tape<double>&, const std::vector<int>&)>;

Tensor<double> random_tensor(std::vector<int> shape, rng::Stream& rs, bool avoid_kinks = false) {
    Tensor<double> t(std::move(shape));
    for (auto& v : t.v) {
        v = 2.0 * rs.uniform() - 1.0;
        if (avoid_kinks) v += v >= 0 ? 0.1 : -0.1;  // keep clear of the relu corner
    }
    return t;
}

double eval_loss(const std::vector<Tensor<double>>& inputs, const BuildFn& build) {
    nn::Tape<double> t;
    std::vector<int> ids;
    for (const auto& in : inputs) ids.push_back(t.leaf(in));
    return t.val(build(t, ids)).v[0];
}

// Central finite differences against the recorded backward pass.
void check_gradients(std::vector<Tensor<double>> inputs, const BuildFn& build, double tol = 1e-4,
                     double h = 1e-4) {
    nn::Tape<double> t;
    std::vector<int> ids;
    for (const auto& in : inputs) ids.push_back(t.leaf(in));
    const int loss = build(t, ids);
    t.backward(loss);

    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const auto& analytic = t.grad(ids[k]);
        for (long e = 0; e < inputs[k].size(); ++e) {
            auto perturbed = inputs;
            perturbed[k].v[static_cast<std::size_t>(e)] += h;
            const double up = eval_loss(perturbed, build);
            perturbed[k].v[static_cast<std::size_t>(e)] -= 2 * h;
            const double dn = eval_loss(perturbed, build);
            const double numeric = (up - dn) / (2 * h);
            const double got = analytic.v[static_cast<std::size_t>(e)];
            const double denom = std::max({std::abs(numeric), std::abs(got), 1e-3});
            CHECK_MESSAGE(std::abs(numeric - got) / denom < tol,
                          "input ", k, " elem ", e, " numeric ", numeric, " analytic ", got);
        }
    }
}

std::vector<double> random_weights(long n, rng::Stream& rs) {
    std::vector<double> w(static_cast<std::size_t>(n));
    for (auto& v : w) v = 2.0 * rs.uniform() - 1.0;
    return w;
}

}  // namespace

TEST_CASE("dense layer gradient matches the hand formula on one element") {
    nn::Tape<double> t;
    const int x = t.leaf(Tensor<double>({1, 1}, {2.0}));
    const int w = t.leaf(Tensor<double>({1, 1}, {3.0}));
    const int b = t.leaf(Tensor<double>({1}, {0.5}));
    const int y = t.add_bias(t.matmul(x, w), b);
    t.backward(t.mean_all(y));
    CHECK(t.grad(x).v[0] == doctest::Approx(3.0));
    CHECK(t.grad(w).v[0] == doctest::Approx(2.0));
    CHECK(t.grad(b).v[0] == doctest::Approx(1.0));
}

TEST_CASE("finite differences: matmul, bias, relu") {
    rng::Stream rs(101);
    for (int trial = 0; trial < 5; ++trial) {
        const int r = 1 + static_cast<int>(rs.below(4));
        const int k = 1 + static_cast<int>(rs.below(4));
        const int c = 1 + static_cast<int>(rs.below(4));
        auto w = random_weights(static_cast<long>(r) * c, rs);
        check_gradients(
            {random_tensor({r, k}, rs), random_tensor({k, c}, rs, true), random_tensor({c}, rs)},
            [w](nn::Tape<double>& t, const std::vector<int>& in) {
                return t.weighted_sum(t.relu(t.add_bias(t.matmul(in[0], in[1]), in[2])), w);
            });
    }
}

TEST_CASE("finite differences: conv1d") {
    rng::Stream rs(102);
    for (int trial = 0; trial < 4; ++trial) {
        const int b = 1 + static_cast<int>(rs.below(2));
        const int l = 3 + static_cast<int>(rs.below(5));
        const int cin = 1 + static_cast<int>(rs.below(3));
        const int cout = 1 + static_cast<int>(rs.below(3));
        const int f = 1 + static_cast<int>(rs.below(4));
        auto w = random_weights(static_cast<long>(b) * l * cout, rs);
        check_gradients({random_tensor({b, l, cin}, rs), random_tensor({f, cin, cout}, rs)},
                        [w](nn::Tape<double>& t, const std::vector<int>& in) {
                            return t.weighted_sum(t.conv1d(in[0], in[1]), w);
                        });
    }
}

TEST_CASE("conv1d with an identity impulse reproduces its input") {
    // Filter length 3, pad 1: the k=1 tap hits the current position.
    const int cin = 3;
    Tensor<float> w({3, cin, cin});
    for (int c = 0; c < cin; ++c) w.v[static_cast<std::size_t>((1 * cin + c) * cin + c)] = 1.0f;
    nn::Tape<float> t;
    rng::Stream rs(5);
    Tensor<float> x({2, 7, cin});
    for (auto& v : x.v) v = static_cast<float>(rs.uniform());
    const int y = t.conv1d(t.leaf(x), t.leaf(w));
    for (long i = 0; i < x.size(); ++i) CHECK(t.val(y).v[static_cast<std::size_t>(i)] == x.v[static_cast<std::size_t>(i)]);
}

TEST_CASE("finite differences: layernorm and softmax") {
    rng::Stream rs(103);
    for (int trial = 0; trial < 4; ++trial) {
        const int r = 1 + static_cast<int>(rs.below(3));
        const int c = 2 + static_cast<int>(rs.below(5));
        auto w = random_weights(static_cast<long>(r) * c, rs);
        check_gradients(
            {random_tensor({r, c}, rs), random_tensor({c}, rs), random_tensor({c}, rs)},
            [w](nn::Tape<double>& t, const std::vector<int>& in) {
                return t.weighted_sum(t.layernorm(in[0], in[1], in[2]), w);
            },
            2e-4);
        check_gradients({random_tensor({r, c}, rs)},
                        [w](nn::Tape<double>& t, const std::vector<int>& in) {
                            return t.weighted_sum(t.softmax_last(in[0]), w);
                        });
    }
}

TEST_CASE("softmax gradient rows are orthogonal to uniform upstream") {
    nn::Tape<double> t;
    rng::Stream rs(9);
    const int x = t.leaf(random_tensor({4, 6}, rs));
    const int y = t.softmax_last(x);
    t.backward(t.mean_all(y));  // uniform upstream gradient
    for (int r = 0; r < 4; ++r) {
        double s = 0.0;
        for (int c = 0; c < 6; ++c) s += t.grad(x).v[static_cast<std::size_t>(r * 6 + c)];
        CHECK(std::abs(s) < 1e-12);
    }
}

TEST_CASE("finite differences: batched attention pieces and gathers") {
    rng::Stream rs(104);
    for (int trial = 0; trial < 3; ++trial) {
        const int b = 1 + static_cast<int>(rs.below(2));
        const int n = 1 + static_cast<int>(rs.below(3));
        const int l = 1 + static_cast<int>(rs.below(4));
        const int d = 1 + static_cast<int>(rs.below(3));
        auto w = random_weights(static_cast<long>(b) * n * l, rs);
        check_gradients({random_tensor({b, n, d}, rs), random_tensor({b, l, d}, rs)},
                        [w](nn::Tape<double>& t, const std::vector<int>& in) {
                            return t.weighted_sum(t.bmm_nt(in[0], in[1]), w);
                        });
        auto w2 = random_weights(static_cast<long>(b) * n * d, rs);
        check_gradients({random_tensor({b, n, l}, rs), random_tensor({b, l, d}, rs)},
                        [w2](nn::Tape<double>& t, const std::vector<int>& in) {
                            return t.weighted_sum(t.bmm_nn(in[0], in[1]), w2);
                        });
        // full scaled-dot-product attention composite
        auto w3 = random_weights(static_cast<long>(b) * n * d, rs);
        check_gradients({random_tensor({b, n, d}, rs), random_tensor({b, l, d}, rs),
                         random_tensor({b, l, d}, rs)},
                        [w3, d](nn::Tape<double>& t, const std::vector<int>& in) {
                            int att = t.softmax_last(t.scale(t.bmm_nt(in[0], in[1]), 1.0 / std::sqrt(double(d))));
                            return t.weighted_sum(t.bmm_nn(att, in[2]), w3);
                        });
    }
}

TEST_CASE("attention with a single key is the value row") {
    nn::Tape<double> t;
    rng::Stream rs(6);
    const auto q = random_tensor({1, 3, 4}, rs);
    const auto k = random_tensor({1, 1, 4}, rs);
    const auto v = random_tensor({1, 1, 4}, rs);
    const int att = t.softmax_last(t.scale(t.bmm_nt(t.leaf(q), t.leaf(k)), 0.5));
    const int out = t.bmm_nn(att, t.leaf(v));
    for (int row = 0; row < 3; ++row)
        for (int c = 0; c < 4; ++c)
            CHECK(t.val(out).v[static_cast<std::size_t>(row * 4 + c)] == doctest::Approx(v.v[static_cast<std::size_t>(c)]));
}

TEST_CASE("finite differences: structural ops") {
    rng::Stream rs(105);
    auto w6 = random_weights(6, rs);
    check_gradients({random_tensor({2, 3}, rs), random_tensor({2, 3}, rs)},
                    [w6](nn::Tape<double>& t, const std::vector<int>& in) {
                        return t.weighted_sum(t.add(t.scale(in[0], 1.7), in[1]), w6);
                    });
    auto w12 = random_weights(12, rs);
    check_gradients({random_tensor({2, 3, 2}, rs), random_tensor({3, 2}, rs)},
                    [w12](nn::Tape<double>& t, const std::vector<int>& in) {
                        return t.weighted_sum(t.add_rows_broadcast(in[0], in[1]), w12);
                    });
    auto w10 = random_weights(10, rs);
    check_gradients({random_tensor({2, 3}, rs), random_tensor({2, 2}, rs)},
                    [w10](nn::Tape<double>& t, const std::vector<int>& in) {
                        return t.weighted_sum(t.concat_last({in[0], in[1]}), w10);
                    });
    auto w8 = random_weights(8, rs);
    check_gradients({random_tensor({4, 2}, rs)},
                    [w8](nn::Tape<double>& t, const std::vector<int>& in) {
                        return t.weighted_sum(t.tile_rows(in[0], 1), w8);
                    });
    auto w4 = random_weights(4, rs);
    check_gradients({random_tensor({4, 2}, rs)},
                    [w4](nn::Tape<double>& t, const std::vector<int>& in) {
                        return t.weighted_sum(t.slice_rows(in[0], 1, 3, {2, 2}), w4);
                    });
    // embedding lookup with repeated indices
    auto w62 = random_weights(6, rs);
    check_gradients({random_tensor({3, 2}, rs)},
                    [w62](nn::Tape<double>& t, const std::vector<int>& in) {
                        return t.weighted_sum(t.embedding_rows(in[0], {2, 0, 2}, {3, 2}), w62);
                    });
}

TEST_CASE("finite differences: segment sum and seq gather") {
    rng::Stream rs(106);
    auto w = random_weights(3 * 2 * 2, rs);
    check_gradients({random_tensor({4, 2, 2}, rs)},
                    [w](nn::Tape<double>& t, const std::vector<int>& in) {
                        return t.weighted_sum(
                            t.segment_scaled_sum(in[0], {0, 2, 2, 4}, {0.7071, 0.0, 0.5}), w);
                    });
    auto w2 = random_weights(3 * 2 * 2, rs);
    check_gradients({random_tensor({2, 4, 2}, rs)},
                    [w2](nn::Tape<double>& t, const std::vector<int>& in) {
                        return t.weighted_sum(t.gather_seq_major(in[0], {3, 0, 3}), w2);
                    });
}

TEST_CASE("finite differences: bce with logits") {
    rng::Stream rs(107);
    check_gradients({random_tensor({5}, rs)}, [](nn::Tape<double>& t, const std::vector<int>& in) {
        return t.mean_all(t.bce_logits(in[0], {1, 0, 1, 1, 0}));
    });
}

TEST_CASE("backward before forward throws") {
    nn::Tape<double> t;
    CHECK_THROWS(t.backward(0));
}

TEST_CASE("softmax and layernorm forward invariants") {
    rng::Stream rs(108);
    nn::Tape<float> t;
    const int rows = 32, cols = 16;
    Tensor<float> x({rows, cols});
    for (auto& v : x.v) v = static_cast<float>(4.0 * rs.uniform() - 2.0);
    const int sm = t.softmax_last(t.leaf(x));
    for (int r = 0; r < rows; ++r) {
        float s = 0;
        for (int c = 0; c < cols; ++c) {
            const float v = t.val(sm).v[static_cast<std::size_t>(r * cols + c)];
            CHECK(v >= 0.0f);
            s += v;
        }
        CHECK(std::abs(s - 1.0f) < 1e-6f);
    }

    Tensor<float> gamma({cols});
    Tensor<float> beta({cols});
    std::fill(gamma.v.begin(), gamma.v.end(), 1.0f);
    const int ln = t.layernorm(t.leaf(x), t.leaf(gamma), t.leaf(beta));
    for (int r = 0; r < rows; ++r) {
        double mean = 0, var = 0;
        for (int c = 0; c < cols; ++c) mean += t.val(ln).v[static_cast<std::size_t>(r * cols + c)];
        mean /= cols;
        for (int c = 0; c < cols; ++c) {
            const double dv = t.val(ln).v[static_cast<std::size_t>(r * cols + c)] - mean;
            var += dv * dv;
        }
        var /= cols;
        CHECK(std::abs(mean) < 1e-6);
        CHECK(std::abs(var - 1.0) < 1e-4);
    }
}

TEST_CASE("parallel kernels match the serial reference bit-for-bit") {
    rng::Stream rs(109);
    const int r = 37, k = 29, c = 31;
    std::vector<float> a(static_cast<std::size_t>(r) * k), b(static_cast<std::size_t>(k) * c),
        bt(static_cast<std::size_t>(c) * k);
    for (auto& v : a) v = static_cast<float>(rs.uniform() - 0.5);
    for (auto& v : b) v = static_cast<float>(rs.uniform() - 0.5);
    for (auto& v : bt) v = static_cast<float>(rs.uniform() - 0.5);

    std::vector<float> c1(static_cast<std::size_t>(r) * c), c2(static_cast<std::size_t>(r) * c);
    nn::kernels::matmul_nn_serial(a.data(), b.data(), c1.data(), r, k, c, false);
    nn::kernels::matmul_nn(a.data(), b.data(), c2.data(), r, k, c, false);
    CHECK(c1 == c2);

    std::vector<float> d1(static_cast<std::size_t>(r) * c), d2(static_cast<std::size_t>(r) * c);
    nn::kernels::matmul_nt_serial(a.data(), bt.data(), d1.data(), r, k, c, false);
    nn::kernels::matmul_nt(a.data(), bt.data(), d2.data(), r, k, c, false);
    CHECK(d1 == d2);

    const int batch = 3, len = 33, cin = 7, cout = 9, f = 5;
    std::vector<float> x(static_cast<std::size_t>(batch) * len * cin),
        w(static_cast<std::size_t>(f) * cin * cout);
    for (auto& v : x) v = static_cast<float>(rs.uniform() - 0.5);
    for (auto& v : w) v = static_cast<float>(rs.uniform() - 0.5);
    std::vector<float> y1(static_cast<std::size_t>(batch) * len * cout),
        y2(static_cast<std::size_t>(batch) * len * cout);
    nn::kernels::conv1d_fwd_serial(x.data(), w.data(), y1.data(), batch, len, cin, cout, f);
    nn::kernels::conv1d_fwd(x.data(), w.data(), y2.data(), batch, len, cin, cout, f);
    CHECK(y1 == y2);

    std::vector<float> s1(static_cast<std::size_t>(r) * c), s2(static_cast<std::size_t>(r) * c);
    std::vector<float> src(static_cast<std::size_t>(r) * c);
    for (auto& v : src) v = static_cast<float>(4.0 * rs.uniform() - 2.0);
    nn::kernels::softmax_rows_serial(src.data(), s1.data(), r, c);
    nn::kernels::softmax_rows(src.data(), s2.data(), r, c);
    CHECK(s1 == s2);
}

TEST_CASE("adam basics") {
    nn::ParamStore store;
    store.add("w", {4}, nn::Init::kZeros, rng::Stream(1));
    auto& p = store.at("w");
    p.value = {1.0f, -1.0f, 2.0f, 0.5f};
    nn::OptimizerState opt;

    // Zero gradient leaves parameters unchanged.
    const auto before = p.value;
    nn::adam_step(store, opt);
    CHECK(p.value == before);

    // A constant gradient drives the step size toward lr * sign(g).
    for (int s = 0; s < 500; ++s) {
        p.grad = {0.3f, -0.2f, 0.5f, -0.1f};
        nn::adam_step(store, opt);
    }
    auto prev = p.value;
    p.grad = {0.3f, -0.2f, 0.5f, -0.1f};
    nn::adam_step(store, opt);
    for (int i = 0; i < 4; ++i) {
        const double step = double(prev[static_cast<std::size_t>(i)]) - double(p.value[static_cast<std::size_t>(i)]);
        const double expect = opt.learning_rate * (p.grad[static_cast<std::size_t>(i)] > 0 ? 1.0 : -1.0);
        CHECK(step == doctest::Approx(expect).epsilon(0.05));
    }
}

TEST_CASE("adam minimizes a quadratic bowl") {
    nn::ParamStore store;
    store.add("w", {8}, nn::Init::kZeros, rng::Stream(1));
    auto& p = store.at("w");
    rng::Stream rs(2);
    for (auto& v : p.value) v = static_cast<float>(rs.normal());
    float norm0 = 0;
    for (auto v : p.value) norm0 += v * v;
    nn::OptimizerState opt;
    opt.learning_rate = 1e-2;
    for (int s = 0; s < 2000; ++s) {
        for (int i = 0; i < 8; ++i) p.grad[static_cast<std::size_t>(i)] = 2.0f * p.value[static_cast<std::size_t>(i)];
        nn::adam_step(store, opt);
    }
    float norm = 0;
    for (auto v : p.value) norm += v * v;
    CHECK(std::sqrt(norm) < 1e-3);
    CHECK(norm0 > 0.1f);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
    nn::ParamStore a;
    rng::Stream rs(77);
    a.add("layer.w", {3, 5}, nn::Init::kFanInUniform, rs.substream(0));
    a.add("layer.b", {5}, nn::Init::kNormal002, rs.substream(1));
    const auto j = nn::checkpoint_to_json(a, 77, {{"note", 1}});

    nn::ParamStore b;
    b.add("layer.w", {3, 5}, nn::Init::kZeros, rs.substream(2));
    b.add("layer.b", {5}, nn::Init::kZeros, rs.substream(3));
    nn::checkpoint_restore(b, j);
    CHECK(a.at("layer.w").value == b.at("layer.w").value);
    CHECK(a.at("layer.b").value == b.at("layer.b").value);
}
