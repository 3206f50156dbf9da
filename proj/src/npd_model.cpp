#include "npdw/npd_model.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

#include "npdw/kernels.hpp"
#include "npdw/polar.hpp"

namespace npdw {

// ---------------------------------------------------------------------------
// Config

void NpdConfig::finalize() {
    if (!is_power_of_two(static_cast<std::size_t>(block_len)) || block_len < 2)
        throw std::invalid_argument("NpdConfig: block_len must be a power of two >= 2");
    if (alphabet_size != 2 && alphabet_size != 4)
        throw std::invalid_argument("NpdConfig: alphabet_size must be 2 or 4");
    if (alphabet_size == 4 && block_len % 2 != 0)
        throw std::invalid_argument("NpdConfig: quaternary mapping needs even block_len");
    if (embed_dim == 0) embed_dim = std::max(1, block_len / 2);
    if (hidden == 0) hidden = 2 * block_len;
    if (conv_filter_len == 0) conv_filter_len = std::max(block_len / 4, 4);
    if (l_max == 0) {
        l_max = embedding == Embedding::kCnn
                    ? symbols_per_block()
                    : static_cast<int>(std::ceil(1.1 * symbols_per_block()));
    }
    if (embedding == Embedding::kCnn) {
        if (alphabet_size != 2)
            throw std::invalid_argument("NpdConfig: the cnn embedding handles binary channels only");
        if (l_max != block_len)
            throw std::invalid_argument("NpdConfig: the cnn embedding requires l_max == block_len");
    }
    if (embed_dim < 1 || hidden < 1 || l_max < 1)
        throw std::invalid_argument("NpdConfig: dimensions must be positive");
}

nlohmann::json NpdConfig::to_json() const {
    return nlohmann::json{{"block_len", block_len},
                          {"embed_dim", embed_dim},
                          {"hidden", hidden},
                          {"conv_filter_len", conv_filter_len},
                          {"l_max", l_max},
                          {"alphabet_size", alphabet_size},
                          {"embedding", embedding == Embedding::kCnn ? "cnn" : "attention"}};
}

NpdConfig NpdConfig::from_json(const nlohmann::json& j) {
    NpdConfig c;
    c.block_len = j.at("block_len").get<int>();
    c.embed_dim = j.value("embed_dim", 0);
    c.hidden = j.value("hidden", 0);
    c.conv_filter_len = j.value("conv_filter_len", 0);
    c.l_max = j.value("l_max", 0);
    c.alphabet_size = j.value("alphabet_size", 2);
    const std::string e = j.value("embedding", "cnn");
    if (e == "cnn")
        c.embedding = Embedding::kCnn;
    else if (e == "attention")
        c.embedding = Embedding::kAttention;
    else
        throw std::invalid_argument("NpdConfig: unknown embedding variant " + e);
    c.finalize();
    return c;
}

// ---------------------------------------------------------------------------
// Free helpers

EmbeddingMatrix aggregate_traces(const std::vector<EmbeddingMatrix>& embeddings) {
    if (embeddings.empty())
        throw std::invalid_argument("aggregate_traces: need target dimensions for K=0; use the sized overload");
    EmbeddingMatrix out(embeddings[0].rows, embeddings[0].cols);
    for (const auto& e : embeddings) {
        if (e.rows != out.rows || e.cols != out.cols)
            throw std::invalid_argument("aggregate_traces: mixed shapes");
        for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += e.v[i];
    }
    const float s = static_cast<float>(1.0 / std::sqrt(double(embeddings.size())));
    for (auto& x : out.v) x *= s;
    return out;
}

// ---------------------------------------------------------------------------
// NeuralKernel

namespace {
inline void mlp2_rows(const float* in, int rows, int din, int h, int dout, const float* w1,
                      const float* b1, const float* w2, const float* b2, float* out,
                      std::vector<float>& hid) {
    hid.resize(static_cast<std::size_t>(rows) * h);
    nn::kernels::matmul_nn(in, w1, hid.data(), rows, din, h, false);
    for (int r = 0; r < rows; ++r)
        for (int j = 0; j < h; ++j) {
            float v = hid[static_cast<std::size_t>(r) * h + j] + b1[j];
            hid[static_cast<std::size_t>(r) * h + j] = v > 0.0f ? v : 0.0f;
        }
    nn::kernels::matmul_nn(hid.data(), w2, out, rows, h, dout, false);
    for (int r = 0; r < rows; ++r)
        for (int j = 0; j < dout; ++j) out[static_cast<std::size_t>(r) * dout + j] += b2[j];
}
}  // namespace

void NeuralKernel::check_node(const float* a, const float* b, float* out, int rows) const {
    thread_local std::vector<float> cat, hid;
    cat.resize(static_cast<std::size_t>(rows) * 2 * d);
    for (int r = 0; r < rows; ++r) {
        std::memcpy(cat.data() + static_cast<std::size_t>(r) * 2 * d, a + static_cast<std::size_t>(r) * d,
                    sizeof(float) * d);
        std::memcpy(cat.data() + static_cast<std::size_t>(r) * 2 * d + d, b + static_cast<std::size_t>(r) * d,
                    sizeof(float) * d);
    }
    mlp2_rows(cat.data(), rows, 2 * d, h, d, fw1, fb1, fw2, fb2, out, hid);
}

void NeuralKernel::bit_node(const float* a, const float* b, const std::uint8_t* bits, float* out,
                            int rows) const {
    thread_local std::vector<float> cat, hid;
    cat.resize(static_cast<std::size_t>(rows) * 3 * d);
    for (int r = 0; r < rows; ++r) {
        float* row = cat.data() + static_cast<std::size_t>(r) * 3 * d;
        std::memcpy(row, a + static_cast<std::size_t>(r) * d, sizeof(float) * d);
        std::memcpy(row + d, b + static_cast<std::size_t>(r) * d, sizeof(float) * d);
        std::memcpy(row + 2 * d, gbit + static_cast<std::size_t>(bits[r]) * d, sizeof(float) * d);
    }
    mlp2_rows(cat.data(), rows, 3 * d, h, d, gw1, gb1, gw2, gb2, out, hid);
}

void NeuralKernel::to_llr(const float* e, double* llr, int rows) const {
    thread_local std::vector<float> hid, out;
    out.resize(static_cast<std::size_t>(rows));
    mlp2_rows(e, rows, d, h, 1, hw1, hb1, hw2, hb2, out.data(), hid);
    for (int r = 0; r < rows; ++r) llr[r] = double(out[static_cast<std::size_t>(r)]);
}

// ---------------------------------------------------------------------------
// Model construction

NpdModel::NpdModel(NpdConfig config, std::uint64_t seed, bool with_twin) : cfg(config) {
    cfg.finalize();
    init_seed = seed;
    build_params(seed, with_twin);
}

void NpdModel::build_params(std::uint64_t seed, bool with_twin) {
    has_twin = with_twin;
    rng::Stream root(seed);
    std::uint64_t k = 0;
    auto next = [&]() { return root.substream(k++); };
    const int d = cfg.embed_dim, h = cfg.hidden, f = cfg.conv_filter_len;
    const int sym_rows = cfg.alphabet_size + 1;  // erasure row appended

    auto add_embed_group = [&](const std::string& pre) {
        store.add(pre + "sym", {sym_rows, d}, nn::Init::kNormal002, next());
        store.add(pre + "pos", {cfg.pos_rows(), d}, nn::Init::kNormal002, next());
        if (cfg.embedding == NpdConfig::Embedding::kCnn) {
            store.add(pre + "conv1.w", {f, d, h}, nn::Init::kFanInUniform, next());
            store.add(pre + "conv2.w", {f, h, h}, nn::Init::kFanInUniform, next());
            store.add(pre + "conv3.w", {f, h, h}, nn::Init::kFanInUniform, next());
            store.add(pre + "conv4.w", {f, h, h}, nn::Init::kFanInUniform, next());
            store.add(pre + "proj.w", {h, d}, nn::Init::kFanInUniform, next());
            store.add(pre + "proj.b", {d}, nn::Init::kZeros, next());
        } else {
            for (int layer = 1; layer <= 2; ++layer) {
                const std::string att = pre + "att" + std::to_string(layer) + ".";
                store.add(att + "wq", {d, d}, nn::Init::kFanInUniform, next());
                store.add(att + "wk", {d, d}, nn::Init::kFanInUniform, next());
                store.add(att + "wv", {d, d}, nn::Init::kFanInUniform, next());
                store.add(att + "wo", {d, d}, nn::Init::kFanInUniform, next());
                const std::string fc = pre + "fc" + std::to_string(layer) + ".";
                store.add(fc + "ln1.g", {d}, nn::Init::kOnes, next());
                store.add(fc + "ln1.b", {d}, nn::Init::kZeros, next());
                store.add(fc + "w1", {d, h}, nn::Init::kFanInUniform, next());
                store.add(fc + "b1", {h}, nn::Init::kZeros, next());
                store.add(fc + "w2", {h, d}, nn::Init::kFanInUniform, next());
                store.add(fc + "b2", {d}, nn::Init::kZeros, next());
                store.add(fc + "ln2.g", {d}, nn::Init::kOnes, next());
                store.add(fc + "ln2.b", {d}, nn::Init::kZeros, next());
            }
        }
    };

    add_embed_group("E.");
    if (with_twin) add_embed_group("Et.");

    store.add("F.w1", {2 * d, h}, nn::Init::kFanInUniform, next());
    store.add("F.b1", {h}, nn::Init::kZeros, next());
    store.add("F.w2", {h, d}, nn::Init::kFanInUniform, next());
    store.add("F.b2", {d}, nn::Init::kZeros, next());

    store.add("G.bit", {2, d}, nn::Init::kNormal002, next());
    store.add("G.w1", {3 * d, h}, nn::Init::kFanInUniform, next());
    store.add("G.b1", {h}, nn::Init::kZeros, next());
    store.add("G.w2", {h, d}, nn::Init::kFanInUniform, next());
    store.add("G.b2", {d}, nn::Init::kZeros, next());

    store.add("H.w1", {d, h}, nn::Init::kFanInUniform, next());
    store.add("H.b1", {h}, nn::Init::kZeros, next());
    store.add("H.w2", {h, 1}, nn::Init::kFanInUniform, next());
    store.add("H.b2", {1}, nn::Init::kZeros, next());
}

NeuralKernel NpdModel::kernel() const {
    NeuralKernel k;
    k.d = cfg.embed_dim;
    k.h = cfg.hidden;
    auto ptr = [&](const char* name) { return store.at(store.id(name)).value.data(); };
    k.fw1 = ptr("F.w1");
    k.fb1 = ptr("F.b1");
    k.fw2 = ptr("F.w2");
    k.fb2 = ptr("F.b2");
    k.gw1 = ptr("G.w1");
    k.gb1 = ptr("G.b1");
    k.gw2 = ptr("G.w2");
    k.gb2 = ptr("G.b2");
    k.gbit = ptr("G.bit");
    k.hw1 = ptr("H.w1");
    k.hb1 = ptr("H.b1");
    k.hw2 = ptr("H.w2");
    k.hb2 = ptr("H.b2");
    return k;
}

// ---------------------------------------------------------------------------
// Graph builders

int NpdModel::build_embed(nn::Tape<float>& t, nn::Binder<float>& bind,
                          const std::vector<const SymbolSequence*>& ys, bool twin) const {
    if (twin && !has_twin) throw std::logic_error("build_embed: model has no twin embedding");
    const std::string pre = twin ? "Et." : "E.";
    const int big_t = static_cast<int>(ys.size());
    const int lmax = cfg.l_max, d = cfg.embed_dim, n = cfg.block_len;

    std::vector<int> idx;
    idx.reserve(static_cast<std::size_t>(big_t) * lmax);
    for (const auto* y : ys) {
        if (y->alphabet_size != cfg.alphabet_size)
            throw std::invalid_argument("build_embed: trace alphabet does not match the model");
        if (static_cast<int>(y->size()) > lmax) {
            if (cfg.embedding == NpdConfig::Embedding::kCnn)
                throw std::invalid_argument("build_embed: cnn variant cannot shrink traces longer than N");
            throw TraceTooLong("trace of length " + std::to_string(y->size()) +
                               " exceeds l_max=" + std::to_string(lmax));
        }
        for (int pos = 0; pos < lmax; ++pos)
            idx.push_back(pos < static_cast<int>(y->size()) ? int(y->symbols[static_cast<std::size_t>(pos)])
                                                            : cfg.erasure_symbol());
    }

    int sym = t.embedding_rows(bind(pre + "sym"), std::move(idx), {big_t, lmax, d});
    const int postab = bind(pre + "pos");
    const int poskv = cfg.pos_rows() == lmax ? postab : t.slice_rows(postab, 0, lmax, {lmax, d});
    int x = t.add_rows_broadcast(sym, poskv);

    if (cfg.embedding == NpdConfig::Embedding::kCnn) {
        x = t.relu(t.conv1d(x, bind(pre + "conv1.w")));
        x = t.relu(t.conv1d(x, bind(pre + "conv2.w")));
        x = t.relu(t.conv1d(x, bind(pre + "conv3.w")));
        x = t.relu(t.conv1d(x, bind(pre + "conv4.w")));
        return t.add_bias(t.matmul(x, bind(pre + "proj.w")), bind(pre + "proj.b"));
    }

    const int pin = t.slice_rows(postab, 0, n, {n, d});
    int q = t.tile_rows(pin, big_t);  // [T, N, d]
    const double inv_sqrt_d = 1.0 / std::sqrt(double(d));
    for (int layer = 1; layer <= 2; ++layer) {
        const std::string att = pre + "att" + std::to_string(layer) + ".";
        const std::string fc = pre + "fc" + std::to_string(layer) + ".";
        int qp = t.matmul(q, bind(att + "wq"));
        int kp = t.matmul(x, bind(att + "wk"));
        int vp = t.matmul(x, bind(att + "wv"));
        int scores = t.scale(t.bmm_nt(qp, kp), inv_sqrt_d);
        int a = t.softmax_last(scores);
        int o = t.matmul(t.bmm_nn(a, vp), bind(att + "wo"));
        o = t.layernorm(o, bind(fc + "ln1.g"), bind(fc + "ln1.b"));
        o = nn::mlp2(t, o, bind(fc + "w1"), bind(fc + "b1"), bind(fc + "w2"), bind(fc + "b2"));
        o = t.layernorm(o, bind(fc + "ln2.g"), bind(fc + "ln2.b"));
        q = o;
    }
    return q;
}

int NpdModel::build_aggregate(nn::Tape<float>& t, nn::Binder<float>& bind,
                              const std::vector<std::vector<SymbolSequence>>& traces_per_sample,
                              bool twin) const {
    const int batch = static_cast<int>(traces_per_sample.size());
    const int n = cfg.block_len, d = cfg.embed_dim;

    if (twin) {
        static const SymbolSequence kEmptyBinary(2, {});
        static const SymbolSequence kEmptyQuaternary(4, {});
        const SymbolSequence& empty = cfg.alphabet_size == 4 ? kEmptyQuaternary : kEmptyBinary;
        int e = build_embed(t, bind, {&empty}, true);         // [1, N, d]
        int e2 = t.slice_rows(e, 0, n, {n, d});               // [N, d]
        return t.tile_rows(e2, batch);                        // [B, N, d]
    }

    std::vector<const SymbolSequence*> ys;
    std::vector<long> starts(static_cast<std::size_t>(batch) + 1, 0);
    std::vector<double> scales(static_cast<std::size_t>(batch), 0.0);
    for (int b = 0; b < batch; ++b) {
        starts[static_cast<std::size_t>(b)] = static_cast<long>(ys.size());
        for (const auto& tr : traces_per_sample[static_cast<std::size_t>(b)]) ys.push_back(&tr);
        const std::size_t k = traces_per_sample[static_cast<std::size_t>(b)].size();
        scales[static_cast<std::size_t>(b)] = k ? 1.0 / std::sqrt(double(k)) : 0.0;
    }
    starts[static_cast<std::size_t>(batch)] = static_cast<long>(ys.size());

    if (ys.empty()) return t.leaf(nn::Tensor<float>({batch, n, d}));  // no evidence at all
    int emb = build_embed(t, bind, ys, false);
    return t.segment_scaled_sum(emb, std::move(starts), std::move(scales));
}

int NpdModel::build_sc_loss(nn::Tape<float>& t, nn::Binder<float>& bind, int agg,
                            const std::vector<std::vector<std::uint8_t>>& u_per_sample) const {
    const int n = cfg.block_len, d = cfg.embed_dim;
    const int batch = static_cast<int>(u_per_sample.size());
    int log_n = 0;
    while ((1 << log_n) < n) ++log_n;
    const auto rev = bit_reversal_perm(log_n);
    std::vector<int> perm(rev.begin(), rev.end());
    int root = t.gather_seq_major(agg, std::move(perm));  // [N, B, d], machine order

    const int fw1 = bind("F.w1"), fb1 = bind("F.b1"), fw2 = bind("F.w2"), fb2 = bind("F.b2");
    const int gw1 = bind("G.w1"), gb1 = bind("G.b1"), gw2 = bind("G.w2"), gb2 = bind("G.b2");
    const int gbit = bind("G.bit");
    const int hw1 = bind("H.w1"), hb1 = bind("H.b1"), hw2 = bind("H.w2"), hb2 = bind("H.b2");

    std::vector<int> leaf_losses;
    leaf_losses.reserve(static_cast<std::size_t>(n));

    auto rec = [&](auto&& self, int emb, int m, int leaf_base) -> std::vector<std::uint8_t> {
        if (m == 1) {
            int z = nn::mlp2(t, emb, hw1, hb1, hw2, hb2);  // [B, 1]
            std::vector<std::uint8_t> bits(static_cast<std::size_t>(batch));
            for (int b = 0; b < batch; ++b)
                bits[static_cast<std::size_t>(b)] = u_per_sample[static_cast<std::size_t>(b)][static_cast<std::size_t>(leaf_base)];
            int lo = t.bce_logits(z, bits);
            for (float v : t.val(lo).v)
                if (!std::isfinite(v))
                    throw std::runtime_error("npd loss is not finite at leaf " + std::to_string(leaf_base));
            leaf_losses.push_back(lo);
            return bits;
        }
        const int half = m / 2;
        const long hb = static_cast<long>(half) * batch;
        int a = t.slice_rows(emb, 0, hb, {static_cast<int>(hb), d});
        int bb = t.slice_rows(emb, hb, 2 * hb, {static_cast<int>(hb), d});
        int fout = nn::mlp2(t, t.concat_last({a, bb}), fw1, fb1, fw2, fb2);
        auto wl = self(self, fout, half, leaf_base);

        std::vector<int> bidx(static_cast<std::size_t>(hb));
        for (long i = 0; i < hb; ++i) bidx[static_cast<std::size_t>(i)] = wl[static_cast<std::size_t>(i)];
        int bemb = t.embedding_rows(gbit, std::move(bidx), {static_cast<int>(hb), d});
        int gout = nn::mlp2(t, t.concat_last({a, bb, bemb}), gw1, gb1, gw2, gb2);
        auto wr = self(self, gout, half, leaf_base + half);

        std::vector<std::uint8_t> cw(static_cast<std::size_t>(m) * batch);
        for (long i = 0; i < hb; ++i) {
            cw[static_cast<std::size_t>(i)] =
                static_cast<std::uint8_t>(wl[static_cast<std::size_t>(i)] ^ wr[static_cast<std::size_t>(i)]);
            cw[static_cast<std::size_t>(hb + i)] = wr[static_cast<std::size_t>(i)];
        }
        return cw;
    };
    rec(rec, root, n, 0);

    int total = leaf_losses[0];
    for (std::size_t i = 1; i < leaf_losses.size(); ++i) total = t.add(total, leaf_losses[i]);
    return total;  // [B, 1], nats summed over leaves
}

// ---------------------------------------------------------------------------
// Inference embedding

std::vector<EmbeddingMatrix> NpdModel::embed_frames(const std::vector<std::vector<SymbolSequence>>& traces,
                                                    bool twin) {
    nn::Tape<float> t;
    nn::Binder<float> bind(t, store);
    const int agg = build_aggregate(t, bind, traces, twin);
    const auto& val = t.val(agg);
    const int n = cfg.block_len, d = cfg.embed_dim;
    std::vector<EmbeddingMatrix> out(traces.size());
    for (std::size_t b = 0; b < traces.size(); ++b) {
        out[b] = EmbeddingMatrix(n, d);
        std::copy(val.v.begin() + static_cast<long>(b) * n * d,
                  val.v.begin() + static_cast<long>(b + 1) * n * d, out[b].v.begin());
    }
    return out;
}

EmbeddingMatrix NpdModel::embed_traces_aggregated(const std::vector<SymbolSequence>& traces, bool twin) {
    return embed_frames({traces}, twin)[0];
}

EmbeddingMatrix NpdModel::embed_one(const SymbolSequence& y, bool twin) {
    return embed_traces_aggregated({y}, twin);
}

// ---------------------------------------------------------------------------
// Persistence

void NpdModel::save(const std::string& path) const {
    nlohmann::json config = cfg.to_json();
    config["has_twin"] = has_twin;
    nn::checkpoint_save(path, store, init_seed, config);
}

NpdModel NpdModel::load(const std::string& path) {
    const auto j = nn::checkpoint_load_json(path);
    const auto& config = j.at("config");
    NpdConfig cfg = NpdConfig::from_json(config);
    NpdModel m(cfg, j.value("seed", std::uint64_t(0)), config.value("has_twin", false));
    nn::checkpoint_restore(m.store, j);
    return m;
}

// ---------------------------------------------------------------------------
// Loss evaluation and training

namespace {
struct BuiltLosses {
    int w_bits = -1;     // [B,1] bits/bit
    int twin_bits = -1;  // [B,1] bits/bit or -1
};

BuiltLosses build_losses(NpdModel& model, nn::Tape<float>& t, nn::Binder<float>& bind,
                         const std::vector<Sample>& batch, bool twin_branch) {
    const int n = model.cfg.block_len;
    std::vector<std::vector<SymbolSequence>> traces;
    std::vector<std::vector<std::uint8_t>> us;
    traces.reserve(batch.size());
    us.reserve(batch.size());
    for (const auto& s : batch) {
        if (static_cast<int>(s.x.size()) != n)
            throw std::invalid_argument("npd loss: input length does not match block_len");
        traces.push_back(s.traces);
        us.push_back(polar_transform(s.x));
    }
    const double to_bits = 1.0 / (double(n) * std::log(2.0));
    BuiltLosses out;
    out.w_bits = t.scale(model.build_sc_loss(t, bind, model.build_aggregate(t, bind, traces, false), us),
                         to_bits);
    if (twin_branch)
        out.twin_bits = t.scale(
            model.build_sc_loss(t, bind, model.build_aggregate(t, bind, traces, true), us), to_bits);
    return out;
}
}  // namespace

BatchLosses eval_losses(NpdModel& model, const std::vector<Sample>& batch, bool twin_branch) {
    nn::Tape<float> t;
    nn::Binder<float> bind(t, model.store);
    const auto built = build_losses(model, t, bind, batch, twin_branch);
    BatchLosses r;
    for (float v : t.val(built.w_bits).v) r.w_bits.push_back(double(v));
    if (twin_branch)
        for (float v : t.val(built.twin_bits).v) r.twin_bits.push_back(double(v));
    return r;
}

double npd_loss_bits(NpdModel& model, const std::vector<std::uint8_t>& x,
                     const std::vector<SymbolSequence>& traces) {
    return eval_losses(model, {Sample{x, traces}}, false).w_bits[0];
}

nlohmann::json TrainSchedule::to_json() const {
    return nlohmann::json{{"steps", steps},     {"batch", batch},
                          {"lr", lr},           {"warmup_steps", warmup_steps},
                          {"divergence_bits", divergence_bits}};
}

TrainSchedule TrainSchedule::from_json(const nlohmann::json& j) {
    TrainSchedule s;
    s.steps = j.value("steps", s.steps);
    s.batch = j.value("batch", s.batch);
    s.lr = j.value("lr", s.lr);
    s.warmup_steps = j.value("warmup_steps", s.warmup_steps);
    s.divergence_bits = j.value("divergence_bits", s.divergence_bits);
    return s;
}

TrainResult train_npd(NpdModel& model, const Sampler& sampler, const TrainSchedule& schedule,
                      rng::Stream& rs, bool twin_mode) {
    if (twin_mode && !model.has_twin) throw std::logic_error("train_npd: twin mode needs a twin model");
    nn::OptimizerState opt;
    opt.learning_rate = schedule.lr;
    TrainResult res;
    res.loss_curve.reserve(static_cast<std::size_t>(schedule.steps));

    std::vector<Sample> batch(static_cast<std::size_t>(schedule.batch));
    for (long step = 0; step < schedule.steps; ++step) {
        rng::Stream srs = rs.substream(static_cast<std::uint64_t>(step));
        for (int b = 0; b < schedule.batch; ++b) {
            rng::Stream brs = srs.substream(static_cast<std::uint64_t>(b));
            batch[static_cast<std::size_t>(b)] = sampler(brs);
        }

        nn::Tape<float> t;
        nn::Binder<float> bind(t, model.store);
        const auto built = build_losses(model, t, bind, batch, twin_mode);
        int loss = t.mean_all(built.w_bits);
        const double w_val = double(t.val(loss).v[0]);
        double tw_val = 0.0;
        if (twin_mode) {
            int tw = t.mean_all(built.twin_bits);
            tw_val = double(t.val(tw).v[0]);
            loss = t.add(loss, tw);
        }

        model.store.zero_grad();
        t.backward(loss);
        bind.read_grads();
        nn::adam_step(model.store, opt);

        res.loss_curve.push_back(static_cast<float>(w_val));
        if (twin_mode) res.twin_loss_curve.push_back(static_cast<float>(tw_val));

        if (step >= schedule.warmup_steps && w_val > schedule.divergence_bits)
            throw TrainingDiverged("loss " + std::to_string(w_val) + " bits/bit at step " +
                                   std::to_string(step));
        if (schedule.log_every > 0 && step % schedule.log_every == 0)
            std::fprintf(stderr, "[train] step %ld loss %.4f%s\n", step, w_val,
                         twin_mode ? (" twin " + std::to_string(tw_val)).c_str() : "");
        if (schedule.ckpt_every > 0 && !schedule.ckpt_path.empty() &&
            (step + 1) % schedule.ckpt_every == 0)
            model.save(schedule.ckpt_path);
    }
    if (!schedule.ckpt_path.empty()) model.save(schedule.ckpt_path);
    return res;
}

MiEstimate estimate_mi(NpdModel& model, const Sampler& sampler, long num_samples, int batch,
                       rng::Stream& rs) {
    if (!model.has_twin) throw std::logic_error("estimate_mi: twin model required");
    if (num_samples < 100)
        std::fprintf(stderr, "[estimate_mi] warning: %ld samples gives a high-variance estimate\n",
                     num_samples);
    MiEstimate est;
    double sum = 0.0, sumsq = 0.0, hu = 0.0, huy = 0.0;
    long done = 0;
    std::uint64_t step = 0;
    std::vector<Sample> chunk;
    while (done < num_samples) {
        const int b = static_cast<int>(std::min<long>(batch, num_samples - done));
        chunk.resize(static_cast<std::size_t>(b));
        rng::Stream srs = rs.substream(0xE57 + step++);
        for (int i = 0; i < b; ++i) {
            rng::Stream brs = srs.substream(static_cast<std::uint64_t>(i));
            chunk[static_cast<std::size_t>(i)] = sampler(brs);
        }
        const auto losses = eval_losses(model, chunk, true);
        for (int i = 0; i < b; ++i) {
            const double r = losses.twin_bits[static_cast<std::size_t>(i)] - losses.w_bits[static_cast<std::size_t>(i)];
            sum += r;
            sumsq += r * r;
            hu += losses.twin_bits[static_cast<std::size_t>(i)];
            huy += losses.w_bits[static_cast<std::size_t>(i)];
        }
        done += b;
    }
    est.samples = num_samples;
    est.value = sum / double(num_samples);
    est.h_u = hu / double(num_samples);
    est.h_u_given_y = huy / double(num_samples);
    if (num_samples > 1) {
        const double var = (sumsq - double(num_samples) * est.value * est.value) / double(num_samples - 1);
        est.stderr_ = std::sqrt(std::max(var, 0.0) / double(num_samples));
    }
    return est;
}

}  // namespace npdw
