#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "npdw/kernels.hpp"
#include "npdw/tensor.hpp"

namespace npdw::nn {

// Eager reverse-mode tape. Values are computed at op creation; each op
// records a closure that accumulates into the input gradients. Gradients are
// deterministic for any thread count because every parallel kernel assigns
// whole output elements to single threads.
template <class S>
class Tape {
public:
    struct Node {
        Tensor<S> val;
        Tensor<S> grad;
        std::function<void(Tape&)> back;  // empty for leaves/constants
    };

    std::vector<Node> nodes;

    void clear() { nodes.clear(); }
    long num_nodes() const { return static_cast<long>(nodes.size()); }

    const Tensor<S>& val(int id) const { return nodes[static_cast<std::size_t>(id)].val; }
    Tensor<S>& grad(int id) { return nodes[static_cast<std::size_t>(id)].grad; }

    int leaf(Tensor<S> t) {
        nodes.push_back(Node{std::move(t), {}, {}});
        Node& n = nodes.back();
        n.grad = Tensor<S>(n.val.shape);
        return static_cast<int>(nodes.size()) - 1;
    }

    // ------------------------------------------------------------------ ops

    // x[r,k] * w[k,c] with leading dims of x flattened into rows.
    int matmul(int x, int w) {
        const auto& xv = val(x);
        const auto& wv = val(w);
        if (wv.shape.size() != 2 || xv.last_dim() != wv.shape[0])
            throw std::invalid_argument("matmul: shape mismatch");
        const int k = wv.shape[0], c = wv.shape[1];
        const long r = xv.rows();
        std::vector<int> out_shape = xv.shape;
        out_shape.back() = c;
        Tensor<S> out(out_shape);
        kernels::matmul_nn(xv.data(), wv.data(), out.data(), static_cast<int>(r), k, c, false);
        return record(std::move(out), [x, w, r, k, c](Tape& t) {
            auto& gy = t.nodes[t.cursor_].grad;
            kernels::matmul_nt(gy.data(), t.val(w).data(), t.grad(x).data(), static_cast<int>(r), c, k, true);
            kernels::matmul_tn(t.val(x).data(), gy.data(), t.grad(w).data(), static_cast<int>(r), k, c, true);
        });
    }

    int add_bias(int x, int b) {
        const auto& xv = val(x);
        const auto& bv = val(b);
        if (bv.size() != xv.last_dim()) throw std::invalid_argument("add_bias: shape mismatch");
        Tensor<S> out(xv.shape);
        kernels::add_bias_rows(xv.data(), bv.data(), out.data(), xv.rows(), xv.last_dim());
        return record(std::move(out), [x, b](Tape& t) {
            auto& gy = t.nodes[t.cursor_].grad;
            const long rows = gy.rows();
            const int cols = gy.last_dim();
            auto& gx = t.grad(x);
            for (long i = 0; i < rows * cols; ++i) gx.v[static_cast<std::size_t>(i)] += gy.v[static_cast<std::size_t>(i)];
            kernels::reduce_bias_grad(gy.data(), t.grad(b).data(), rows, cols);
        });
    }

    int relu(int x) {
        const auto& xv = val(x);
        Tensor<S> out(xv.shape);
        kernels::relu_fwd(xv.data(), out.data(), xv.size());
        return record(std::move(out), [x](Tape& t) {
            auto& gy = t.nodes[t.cursor_].grad;
            kernels::relu_bwd(t.val(x).data(), gy.data(), t.grad(x).data(), gy.size());
        });
    }

    int conv1d(int x, int w) {
        const auto& xv = val(x);
        const auto& wv = val(w);
        if (xv.shape.size() != 3 || wv.shape.size() != 3 || xv.shape[2] != wv.shape[1])
            throw std::invalid_argument("conv1d: expects x[B,L,Cin], w[f,Cin,Cout]");
        const int batch = xv.shape[0], len = xv.shape[1], cin = xv.shape[2];
        const int f = wv.shape[0], cout = wv.shape[2];
        Tensor<S> out({batch, len, cout});
        kernels::conv1d_fwd(xv.data(), wv.data(), out.data(), batch, len, cin, cout, f);
        return record(std::move(out), [x, w, batch, len, cin, cout, f](Tape& t) {
            auto& gy = t.nodes[t.cursor_].grad;
            kernels::conv1d_bwd_input(gy.data(), t.val(w).data(), t.grad(x).data(), batch, len, cin, cout, f);
            kernels::conv1d_bwd_weight(t.val(x).data(), gy.data(), t.grad(w).data(), batch, len, cin, cout, f);
        });
    }

    int layernorm(int x, int gamma, int beta, S eps = S(1e-5)) {
        const auto& xv = val(x);
        const int cols = xv.last_dim();
        if (val(gamma).size() != cols || val(beta).size() != cols)
            throw std::invalid_argument("layernorm: scale/shift must match feature dim");
        Tensor<S> out(xv.shape);
        auto xhat = std::make_shared<Tensor<S>>(xv.shape);
        kernels::layernorm_fwd(xv.data(), val(gamma).data(), val(beta).data(), out.data(), xhat->data(),
                               xv.rows(), cols, eps);
        return record(std::move(out), [x, gamma, beta, eps, xhat, cols](Tape& t) {
            auto& gy = t.nodes[t.cursor_].grad;
            kernels::layernorm_bwd(t.val(x).data(), t.val(gamma).data(), xhat->data(), gy.data(),
                                   t.grad(x).data(), t.grad(gamma).data(), t.grad(beta).data(), gy.rows(),
                                   cols, eps);
        });
    }

    int softmax_last(int x) {
        const auto& xv = val(x);
        Tensor<S> out(xv.shape);
        kernels::softmax_rows(xv.data(), out.data(), xv.rows(), xv.last_dim());
        return record(std::move(out), [x](Tape& t) {
            auto& node = t.nodes[t.cursor_];
            kernels::softmax_bwd(node.val.data(), node.grad.data(), t.grad(x).data(), node.val.rows(),
                                 node.val.last_dim());
        });
    }

    // a[B,R,d] * b[B,L,d]^T -> [B,R,L]
    int bmm_nt(int a, int b) {
        const auto& av = val(a);
        const auto& bv = val(b);
        if (av.shape.size() != 3 || bv.shape.size() != 3 || av.shape[0] != bv.shape[0] ||
            av.shape[2] != bv.shape[2])
            throw std::invalid_argument("bmm_nt: shape mismatch");
        const int batch = av.shape[0], r = av.shape[1], d = av.shape[2], l = bv.shape[1];
        Tensor<S> out({batch, r, l});
        for (int i = 0; i < batch; ++i)
            kernels::matmul_nt(av.data() + static_cast<std::size_t>(i) * r * d,
                               bv.data() + static_cast<std::size_t>(i) * l * d,
                               out.data() + static_cast<std::size_t>(i) * r * l, r, d, l, false);
        return record(std::move(out), [a, b, batch, r, d, l](Tape& t) {
            auto& gy = t.nodes[t.cursor_].grad;
            for (int i = 0; i < batch; ++i) {
                // dA = dC * B ; dB = dC^T * A
                kernels::matmul_nn(gy.data() + static_cast<std::size_t>(i) * r * l,
                                   t.val(b).data() + static_cast<std::size_t>(i) * l * d,
                                   t.grad(a).data() + static_cast<std::size_t>(i) * r * d, r, l, d, true);
                kernels::matmul_tn(gy.data() + static_cast<std::size_t>(i) * r * l,
                                   t.val(a).data() + static_cast<std::size_t>(i) * r * d,
                                   t.grad(b).data() + static_cast<std::size_t>(i) * l * d, r, l, d, true);
            }
        });
    }

    // a[B,R,L] * b[B,L,d] -> [B,R,d]
    int bmm_nn(int a, int b) {
        const auto& av = val(a);
        const auto& bv = val(b);
        if (av.shape.size() != 3 || bv.shape.size() != 3 || av.shape[0] != bv.shape[0] ||
            av.shape[2] != bv.shape[1])
            throw std::invalid_argument("bmm_nn: shape mismatch");
        const int batch = av.shape[0], r = av.shape[1], l = av.shape[2], d = bv.shape[2];
        Tensor<S> out({batch, r, d});
        for (int i = 0; i < batch; ++i)
            kernels::matmul_nn(av.data() + static_cast<std::size_t>(i) * r * l,
                               bv.data() + static_cast<std::size_t>(i) * l * d,
                               out.data() + static_cast<std::size_t>(i) * r * d, r, l, d, false);
        return record(std::move(out), [a, b, batch, r, l, d](Tape& t) {
            auto& gy = t.nodes[t.cursor_].grad;
            for (int i = 0; i < batch; ++i) {
                kernels::matmul_nt(gy.data() + static_cast<std::size_t>(i) * r * d,
                                   t.val(b).data() + static_cast<std::size_t>(i) * l * d,
                                   t.grad(a).data() + static_cast<std::size_t>(i) * r * l, r, d, l, true);
                kernels::matmul_tn(t.val(a).data() + static_cast<std::size_t>(i) * r * l,
                                   gy.data() + static_cast<std::size_t>(i) * r * d,
                                   t.grad(b).data() + static_cast<std::size_t>(i) * l * d, r, l, d, true);
                // note: dB = A^T * dC with A as [r,l]
            }
        });
    }

    int scale(int x, double c) {
        const auto& xv = val(x);
        Tensor<S> out(xv.shape);
        for (long i = 0; i < xv.size(); ++i) out.v[static_cast<std::size_t>(i)] = static_cast<S>(xv.v[static_cast<std::size_t>(i)] * c);
        return record(std::move(out), [x, c](Tape& t) {
            auto& gy = t.nodes[t.cursor_].grad;
            auto& gx = t.grad(x);
            for (long i = 0; i < gy.size(); ++i) gx.v[static_cast<std::size_t>(i)] += static_cast<S>(gy.v[static_cast<std::size_t>(i)] * c);
        });
    }

    int add(int a, int b) {
        const auto& av = val(a);
        const auto& bv = val(b);
        if (av.shape != bv.shape) throw std::invalid_argument("add: shape mismatch");
        Tensor<S> out(av.shape);
        for (long i = 0; i < av.size(); ++i)
            out.v[static_cast<std::size_t>(i)] = av.v[static_cast<std::size_t>(i)] + bv.v[static_cast<std::size_t>(i)];
        return record(std::move(out), [a, b](Tape& t) {
            auto& gy = t.nodes[t.cursor_].grad;
            auto& ga = t.grad(a);
            auto& gb = t.grad(b);
            for (long i = 0; i < gy.size(); ++i) {
                ga.v[static_cast<std::size_t>(i)] += gy.v[static_cast<std::size_t>(i)];
                gb.v[static_cast<std::size_t>(i)] += gy.v[static_cast<std::size_t>(i)];
            }
        });
    }

    // x[B,L,d] + p[L,d] broadcast over the batch axis.
    int add_rows_broadcast(int x, int p) {
        const auto& xv = val(x);
        const auto& pv = val(p);
        if (xv.shape.size() != 3 || pv.shape.size() != 2 || xv.shape[1] != pv.shape[0] ||
            xv.shape[2] != pv.shape[1])
            throw std::invalid_argument("add_rows_broadcast: shape mismatch");
        const int batch = xv.shape[0];
        const long block = static_cast<long>(xv.shape[1]) * xv.shape[2];
        Tensor<S> out(xv.shape);
        for (int bb = 0; bb < batch; ++bb)
            for (long i = 0; i < block; ++i)
                out.v[static_cast<std::size_t>(bb) * block + i] =
                    xv.v[static_cast<std::size_t>(bb) * block + i] + pv.v[static_cast<std::size_t>(i)];
        return record(std::move(out), [x, p, batch, block](Tape& t) {
            auto& gy = t.nodes[t.cursor_].grad;
            auto& gx = t.grad(x);
            auto& gp = t.grad(p);
            for (int bb = 0; bb < batch; ++bb)
                for (long i = 0; i < block; ++i)
                    gx.v[static_cast<std::size_t>(bb) * block + i] += gy.v[static_cast<std::size_t>(bb) * block + i];
            for (long i = 0; i < block; ++i) {
                S s = 0;
                for (int bb = 0; bb < batch; ++bb) s += gy.v[static_cast<std::size_t>(bb) * block + i];
                gp.v[static_cast<std::size_t>(i)] += s;
            }
        });
    }

    int concat_last(const std::vector<int>& xs) {
        if (xs.empty()) throw std::invalid_argument("concat_last: no inputs");
        const long rows = val(xs[0]).rows();
        int total = 0;
        for (int x : xs) {
            if (val(x).rows() != rows) throw std::invalid_argument("concat_last: row mismatch");
            total += val(x).last_dim();
        }
        std::vector<int> shape = val(xs[0]).shape;
        shape.back() = total;
        Tensor<S> out(shape);
        long off = 0;
        for (int x : xs) {
            const auto& xv = val(x);
            const int c = xv.last_dim();
            for (long i = 0; i < rows; ++i)
                for (int j = 0; j < c; ++j)
                    out.v[static_cast<std::size_t>(i) * total + off + j] = xv.v[static_cast<std::size_t>(i) * c + j];
            off += c;
        }
        return record(std::move(out), [xs, rows, total](Tape& t) {
            auto& gy = t.nodes[t.cursor_].grad;
            long off2 = 0;
            for (int x : xs) {
                auto& gx = t.grad(x);
                const int c = t.val(x).last_dim();
                for (long i = 0; i < rows; ++i)
                    for (int j = 0; j < c; ++j)
                        gx.v[static_cast<std::size_t>(i) * c + j] += gy.v[static_cast<std::size_t>(i) * total + off2 + j];
                off2 += c;
            }
        });
    }

    // Row gather from a table: out[r, :] = table[idx[r], :].
    int embedding_rows(int table, std::vector<int> idx, std::vector<int> out_shape) {
        const auto& tv = val(table);
        if (tv.shape.size() != 2) throw std::invalid_argument("embedding_rows: table must be 2-D");
        const int d = tv.shape[1];
        if (Tensor<S>::count(out_shape) != static_cast<long>(idx.size()) * d)
            throw std::invalid_argument("embedding_rows: bad output shape");
        Tensor<S> out(out_shape);
        for (std::size_t r = 0; r < idx.size(); ++r) {
            if (idx[r] < 0 || idx[r] >= tv.shape[0]) throw std::invalid_argument("embedding_rows: index out of range");
            for (int j = 0; j < d; ++j)
                out.v[r * static_cast<std::size_t>(d) + j] = tv.v[static_cast<std::size_t>(idx[r]) * d + j];
        }
        auto idx_ptr = std::make_shared<std::vector<int>>(std::move(idx));
        return record(std::move(out), [table, idx_ptr, d](Tape& t) {
            auto& gy = t.nodes[t.cursor_].grad;
            auto& gt = t.grad(table);
            const int vocab = t.val(table).shape[0];
            // One pass per table row keeps accumulation order fixed.
            for (int vrow = 0; vrow < vocab; ++vrow)
                for (std::size_t r = 0; r < idx_ptr->size(); ++r)
                    if ((*idx_ptr)[r] == vrow)
                        for (int j = 0; j < d; ++j)
                            gt.v[static_cast<std::size_t>(vrow) * d + j] += gy.v[r * static_cast<std::size_t>(d) + j];
        });
    }

    // Stack `times` copies of x along the row axis.
    int tile_rows(int x, int times) {
        const auto& xv = val(x);
        std::vector<int> shape = xv.shape;
        shape.insert(shape.begin(), times);
        Tensor<S> out(shape);
        for (int k = 0; k < times; ++k)
            std::copy(xv.v.begin(), xv.v.end(), out.v.begin() + static_cast<long>(k) * xv.size());
        return record(std::move(out), [x, times](Tape& t) {
            auto& gy = t.nodes[t.cursor_].grad;
            auto& gx = t.grad(x);
            const long n = gx.size();
            for (int k = 0; k < times; ++k)
                for (long i = 0; i < n; ++i)
                    gx.v[static_cast<std::size_t>(i)] += gy.v[static_cast<std::size_t>(k) * n + i];
        });
    }

    // out[seg, :] = scale[seg] * sum of x rows in [starts[seg], starts[seg+1]).
    // Rows here are whole [R, d] blocks: x is [T, R, d], out is [B, R, d].
    int segment_scaled_sum(int x, std::vector<long> starts, std::vector<double> scales) {
        const auto& xv = val(x);
        if (xv.shape.size() != 3) throw std::invalid_argument("segment_scaled_sum: x must be [T,R,d]");
        const int nb = static_cast<int>(scales.size());
        if (starts.size() != scales.size() + 1 || starts.back() != xv.shape[0])
            throw std::invalid_argument("segment_scaled_sum: bad segmentation");
        const long block = static_cast<long>(xv.shape[1]) * xv.shape[2];
        Tensor<S> out({nb, xv.shape[1], xv.shape[2]});
        for (int s = 0; s < nb; ++s) {
            S* dst = out.data() + static_cast<std::size_t>(s) * block;
            for (long tr = starts[static_cast<std::size_t>(s)]; tr < starts[static_cast<std::size_t>(s) + 1]; ++tr) {
                const S* src = xv.data() + static_cast<std::size_t>(tr) * block;
                for (long i = 0; i < block; ++i) dst[i] += src[i];
            }
            const S sc = static_cast<S>(scales[static_cast<std::size_t>(s)]);
            for (long i = 0; i < block; ++i) dst[i] *= sc;
        }
        auto st = std::make_shared<std::vector<long>>(std::move(starts));
        auto sc = std::make_shared<std::vector<double>>(std::move(scales));
        return record(std::move(out), [x, st, sc, block, nb](Tape& t) {
            auto& gy = t.nodes[t.cursor_].grad;
            auto& gx = t.grad(x);
            for (int s = 0; s < nb; ++s) {
                const S scale_s = static_cast<S>((*sc)[static_cast<std::size_t>(s)]);
                const S* g = gy.data() + static_cast<std::size_t>(s) * block;
                for (long tr = (*st)[static_cast<std::size_t>(s)]; tr < (*st)[static_cast<std::size_t>(s) + 1]; ++tr) {
                    S* dst = gx.data() + static_cast<std::size_t>(tr) * block;
                    for (long i = 0; i < block; ++i) dst[i] += scale_s * g[i];
                }
            }
        });
    }

    // Contiguous row slice of a 2-D row view.
    int slice_rows(int x, long r0, long r1, std::vector<int> out_shape) {
        const auto& xv = val(x);
        const int d = xv.last_dim();
        if (r0 < 0 || r1 > xv.rows() || r0 > r1) throw std::invalid_argument("slice_rows: bad range");
        if (Tensor<S>::count(out_shape) != (r1 - r0) * d) throw std::invalid_argument("slice_rows: bad shape");
        Tensor<S> out(out_shape);
        std::copy(xv.v.begin() + r0 * d, xv.v.begin() + r1 * d, out.v.begin());
        return record(std::move(out), [x, r0, d](Tape& t) {
            auto& gy = t.nodes[t.cursor_].grad;
            auto& gx = t.grad(x);
            for (long i = 0; i < gy.size(); ++i) gx.v[static_cast<std::size_t>(r0 * d + i)] += gy.v[static_cast<std::size_t>(i)];
        });
    }

    // Gathers sequence positions with an index map while moving the batch
    // axis inside: x[B,N,d], perm of size M -> out[M,B,d], out[i,b] = x[b,perm[i]].
    int gather_seq_major(int x, std::vector<int> perm) {
        const auto& xv = val(x);
        if (xv.shape.size() != 3) throw std::invalid_argument("gather_seq_major: x must be [B,N,d]");
        const int batch = xv.shape[0], n = xv.shape[1], d = xv.shape[2];
        const int m = static_cast<int>(perm.size());
        Tensor<S> out({m, batch, d});
        for (int i = 0; i < m; ++i) {
            if (perm[static_cast<std::size_t>(i)] < 0 || perm[static_cast<std::size_t>(i)] >= n)
                throw std::invalid_argument("gather_seq_major: index out of range");
            for (int b = 0; b < batch; ++b)
                for (int j = 0; j < d; ++j)
                    out.v[(static_cast<std::size_t>(i) * batch + b) * d + j] =
                        xv.v[(static_cast<std::size_t>(b) * n + perm[static_cast<std::size_t>(i)]) * d + j];
        }
        auto pm = std::make_shared<std::vector<int>>(std::move(perm));
        return record(std::move(out), [x, pm, batch, n, d](Tape& t) {
            auto& gy = t.nodes[t.cursor_].grad;
            auto& gx = t.grad(x);
            const int m = static_cast<int>(pm->size());
            for (int i = 0; i < m; ++i)
                for (int b = 0; b < batch; ++b)
                    for (int j = 0; j < d; ++j)
                        gx.v[(static_cast<std::size_t>(b) * n + (*pm)[static_cast<std::size_t>(i)]) * d + j] +=
                            gy.v[(static_cast<std::size_t>(i) * batch + b) * d + j];
        });
    }

    // Per-element binary cross-entropy with logits, in nats:
    // loss = softplus((1-2*target) * z). Stable for large |z|.
    int bce_logits(int z, std::vector<std::uint8_t> targets) {
        const auto& zv = val(z);
        if (zv.size() != static_cast<long>(targets.size()))
            throw std::invalid_argument("bce_logits: target count mismatch");
        Tensor<S> out(zv.shape);
        for (long i = 0; i < zv.size(); ++i) {
            const double a = (targets[static_cast<std::size_t>(i)] ? -1.0 : 1.0) * double(zv.v[static_cast<std::size_t>(i)]);
            out.v[static_cast<std::size_t>(i)] = static_cast<S>(std::log1p(std::exp(-std::abs(a))) + (a > 0 ? a : 0));
        }
        auto tg = std::make_shared<std::vector<std::uint8_t>>(std::move(targets));
        return record(std::move(out), [z, tg](Tape& t) {
            auto& gy = t.nodes[t.cursor_].grad;
            auto& gx = t.grad(z);
            const auto& zv2 = t.val(z);
            for (long i = 0; i < zv2.size(); ++i) {
                // d loss / d z = sigmoid(z) - target
                const double sig = 1.0 / (1.0 + std::exp(-double(zv2.v[static_cast<std::size_t>(i)])));
                gx.v[static_cast<std::size_t>(i)] += static_cast<S>(gy.v[static_cast<std::size_t>(i)] * (sig - double((*tg)[static_cast<std::size_t>(i)])));
            }
        });
    }

    // Weighted sum reduction to a scalar; accumulation in double.
    int weighted_sum(int x, std::vector<double> weights) {
        const auto& xv = val(x);
        if (static_cast<long>(weights.size()) != xv.size())
            throw std::invalid_argument("weighted_sum: weight count mismatch");
        double s = 0.0;
        for (long i = 0; i < xv.size(); ++i) s += weights[static_cast<std::size_t>(i)] * double(xv.v[static_cast<std::size_t>(i)]);
        Tensor<S> out({1});
        out.v[0] = static_cast<S>(s);
        auto w = std::make_shared<std::vector<double>>(std::move(weights));
        return record(std::move(out), [x, w](Tape& t) {
            auto& gy = t.nodes[t.cursor_].grad;
            auto& gx = t.grad(x);
            for (long i = 0; i < gx.size(); ++i)
                gx.v[static_cast<std::size_t>(i)] += static_cast<S>(double(gy.v[0]) * (*w)[static_cast<std::size_t>(i)]);
        });
    }

    // Mean over all elements; accumulation in double.
    int mean_all(int x) {
        const auto& xv = val(x);
        double s = 0.0;
        for (long i = 0; i < xv.size(); ++i) s += double(xv.v[static_cast<std::size_t>(i)]);
        Tensor<S> out({1});
        out.v[0] = static_cast<S>(s / double(xv.size()));
        const double inv = 1.0 / double(xv.size());
        return record(std::move(out), [x, inv](Tape& t) {
            auto& gy = t.nodes[t.cursor_].grad;
            auto& gx = t.grad(x);
            const S g = static_cast<S>(double(gy.v[0]) * inv);
            for (long i = 0; i < gx.size(); ++i) gx.v[static_cast<std::size_t>(i)] += g;
        });
    }

    // ------------------------------------------------------------- backward

    void backward(int loss_id) {
        if (loss_id < 0 || loss_id >= num_nodes()) throw std::invalid_argument("backward: bad id");
        if (val(loss_id).size() != 1) throw std::invalid_argument("backward: loss must be scalar");
        if (nodes.empty()) throw std::logic_error("backward before forward");
        grad(loss_id).v[0] = S(1);
        for (int id = loss_id; id >= 0; --id) {
            auto& n = nodes[static_cast<std::size_t>(id)];
            if (!n.back) continue;
            cursor_ = id;
            n.back(*this);
        }
    }

private:
    int cursor_ = -1;

    int record(Tensor<S> out, std::function<void(Tape&)> back) {
        nodes.push_back(Node{std::move(out), {}, std::move(back)});
        Node& n = nodes.back();
        n.grad = Tensor<S>(n.val.shape);
        return static_cast<int>(nodes.size()) - 1;
    }
};

}  // namespace npdw::nn
