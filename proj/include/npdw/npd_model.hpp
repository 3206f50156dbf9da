#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "npdw/nn.hpp"
#include "npdw/rng.hpp"
#include "npdw/sequence.hpp"
#include "npdw/vendor_json.hpp"

namespace npdw {

struct NpdConfig {
    enum class Embedding { kCnn, kAttention };

    int block_len = 0;        // N, binary
    int embed_dim = 0;        // d; defaults to N/2
    int hidden = 0;           // h; defaults to 2N
    int conv_filter_len = 0;  // f; defaults to max(N/4, 4)
    int l_max = 0;            // defaults: cnn -> symbol count; attention -> ceil(1.1 * symbol count)
    int alphabet_size = 2;    // channel output alphabet (2 or 4)
    Embedding embedding = Embedding::kCnn;

    // Number of channel symbols carrying one codeword: N for binary, N/2 for
    // the bit-pair quaternary mapping.
    int symbols_per_block() const { return alphabet_size == 4 ? block_len / 2 : block_len; }
    int erasure_symbol() const { return alphabet_size; }
    // The positional table must cover both key positions (l_max) and the N
    // query rows of the attention variant.
    int pos_rows() const { return std::max(l_max, block_len); }

    void finalize();  // fill defaulted fields, then validate
    nlohmann::json to_json() const;
    static NpdConfig from_json(const nlohmann::json& j);
};

struct EmbeddingMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<float> v;

    EmbeddingMatrix() = default;
    EmbeddingMatrix(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0f) {}
    float* row(int i) { return v.data() + static_cast<std::size_t>(i) * cols; }
    const float* row(int i) const { return v.data() + static_cast<std::size_t>(i) * cols; }
};

// (1/sqrt(K)) * sum of per-trace embeddings; K = 0 gives the all-zeros matrix.
EmbeddingMatrix aggregate_traces(const std::vector<EmbeddingMatrix>& embeddings);

struct TraceTooLong : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct TrainingDiverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Inference-side view of the learned F/G/H networks, pluggable into
// sc_decode / scl_decode. Holds raw pointers into the owning ParamStore.
struct NeuralKernel {
    using Scalar = float;

    int d = 0, h = 0;
    const float *fw1 = nullptr, *fb1 = nullptr, *fw2 = nullptr, *fb2 = nullptr;
    const float *gw1 = nullptr, *gb1 = nullptr, *gw2 = nullptr, *gb2 = nullptr, *gbit = nullptr;
    const float *hw1 = nullptr, *hb1 = nullptr, *hw2 = nullptr, *hb2 = nullptr;

    int dim() const { return d; }
    void check_node(const float* a, const float* b, float* out, int rows) const;
    void bit_node(const float* a, const float* b, const std::uint8_t* bits, float* out, int rows) const;
    void to_llr(const float* e, double* llr, int rows) const;
};

class NpdModel {
public:
    NpdConfig cfg;
    nn::ParamStore store;
    bool has_twin = false;
    std::uint64_t init_seed = 0;

    NpdModel(NpdConfig config, std::uint64_t seed, bool with_twin);

    NeuralKernel kernel() const;

    // ---- graph builders (shared by training and inference) ----------------

    // Embeds T padded sequences; returns tape id of a [T, N, d] tensor.
    int build_embed(nn::Tape<float>& tape, nn::Binder<float>& bind,
                    const std::vector<const SymbolSequence*>& ys, bool twin) const;

    // Aggregated multi-trace embedding per sample: [B, N, d].
    int build_aggregate(nn::Tape<float>& tape, nn::Binder<float>& bind,
                        const std::vector<std::vector<SymbolSequence>>& traces_per_sample,
                        bool twin) const;

    // Teacher-forced SC loss over a [B, N, d] embedding tensor; returns the
    // per-sample summed leaf loss in nats, shape [B, 1].
    int build_sc_loss(nn::Tape<float>& tape, nn::Binder<float>& bind, int agg,
                      const std::vector<std::vector<std::uint8_t>>& u_per_sample) const;

    // ---- inference ---------------------------------------------------------

    EmbeddingMatrix embed_one(const SymbolSequence& y, bool twin = false);
    // Aggregated embedding per frame, batched across frames for throughput.
    std::vector<EmbeddingMatrix> embed_frames(const std::vector<std::vector<SymbolSequence>>& traces,
                                              bool twin = false);
    EmbeddingMatrix embed_traces_aggregated(const std::vector<SymbolSequence>& traces, bool twin = false);

    // ---- persistence -------------------------------------------------------

    void save(const std::string& path) const;
    static NpdModel load(const std::string& path);

private:
    void build_params(std::uint64_t seed, bool with_twin);
};

// ---- training ---------------------------------------------------------------

struct Sample {
    std::vector<std::uint8_t> x;          // binary channel input, length N
    std::vector<SymbolSequence> traces;   // >= 0 traces in the channel alphabet
};
using Sampler = std::function<Sample(rng::Stream&)>;

struct TrainSchedule {
    long steps = 3000;
    int batch = 64;
    double lr = 1e-3;
    long warmup_steps = 300;        // divergence detector grace period
    double divergence_bits = 2.0;
    int log_every = 0;              // 0 = quiet
    std::string ckpt_path;
    long ckpt_every = 0;

    nlohmann::json to_json() const;
    static TrainSchedule from_json(const nlohmann::json& j);
};

struct TrainResult {
    std::vector<float> loss_curve;       // W-branch bits/bit per step
    std::vector<float> twin_loss_curve;  // W~ branch, empty unless twin mode
};

struct BatchLosses {
    std::vector<double> w_bits;     // l(x, y; theta_W) per sample, bits/bit
    std::vector<double> twin_bits;  // l(x, 0; theta_W~) per sample
};

// Evaluates per-sample losses without touching gradients. twin_branch adds
// the independent-channel decoder (requires a twin model).
BatchLosses eval_losses(NpdModel& model, const std::vector<Sample>& batch, bool twin_branch);

// Convenience single-sample loss in bits per bit.
double npd_loss_bits(NpdModel& model, const std::vector<std::uint8_t>& x,
                     const std::vector<SymbolSequence>& traces);

// Minimizes the teacher-forced cross-entropy (joint with the twin branch when
// twin_mode). Throws TrainingDiverged if the loss exceeds the divergence
// threshold after warmup.
TrainResult train_npd(NpdModel& model, const Sampler& sampler, const TrainSchedule& schedule,
                      rng::Stream& rs, bool twin_mode = false);

struct MiEstimate {
    double value = 0.0;  // bits per input bit
    long samples = 0;
    double h_u = 0.0;          // estimated H(U)/N
    double h_u_given_y = 0.0;  // estimated H(U|Y)/N
    double stderr_ = 0.0;
};

// Averages l(x,0;W~) - l(x,y;W) over fresh samples. Warns to stderr when the
// sample count is below 100.
MiEstimate estimate_mi(NpdModel& model, const Sampler& sampler, long num_samples, int batch,
                       rng::Stream& rs);

}  // namespace npdw
