#pragma once

#include <string>
#include <utility>
#include <vector>

#include "npdw/channel.hpp"
#include "npdw/design.hpp"
#include "npdw/npd_model.hpp"
#include "npdw/polar.hpp"
#include "npdw/rng.hpp"
#include "npdw/vendor_json.hpp"

namespace npdw::harness {

inline constexpr const char* kToolVersion = "npdw 0.1.0";

// ---------------------------------------------------------------------------
// Channel configuration shared by all experiment kinds.

struct ChannelConfig {
    enum class Type { kDeletion, kIds, kDna };
    Type type = Type::kDeletion;
    IdsParams ids;           // deletion reads ids.delete_prob only
    double trace_rate = 5.0; // dna: Poisson mean; <= 0 C with fixed_k only

    int alphabet() const { return type == Type::kDna ? 4 : 2; }
    // Traces for one frame of binary input bits. fixed_k >= 0 pins the trace
    // count for dna channels instead of Poisson sampling.
    std::vector<SymbolSequence> sample(const std::vector<std::uint8_t>& x_bits, rng::Stream& rs,
                                       int fixed_k = -1) const;

    nlohmann::json to_json() const;
    static ChannelConfig from_json(const nlohmann::json& j);
};

// ---------------------------------------------------------------------------
// Records and reporting.

struct ExperimentRecord {
    std::string kind;
    std::string config_hash;
    std::uint64_t seed = 0;
    nlohmann::json config;   // semantic fields echoed for reproducibility
    nlohmann::json metrics;  // metric -> value or {value, ci_lo, ci_hi, stderr, frames}
    long frames = 0;
    double wall_ms = 0.0;
    std::string tool_version = kToolVersion;

    nlohmann::json to_json() const;
    static ExperimentRecord from_json(const nlohmann::json& j);
    void save(const std::string& path) const;
    static ExperimentRecord load(const std::string& path);
};

// FNV-1a over the canonical dump with non-semantic keys (out, workers,
// log_every) removed.
std::string config_hash(const nlohmann::json& cfg);

// Plot-ready long-format CSV; one row per metric. FER/BER values are
// validated into [0,1] on write. Reference bound columns are filled from the
// bundled tables when the channel matches a tabulated point.
void write_csv(const std::string& path, const std::vector<ExperimentRecord>& records);
nlohmann::json summarize(const std::vector<ExperimentRecord>& records);

// ---------------------------------------------------------------------------
// Monte Carlo error-rate runs.

struct FerOptions {
    long frames_max = 10000;
    long min_error_events = 100;  // stop early once reached
    int list_size = 1;            // 1 = SC
    int fixed_k = -1;             // dna only
    int n_strands = 1;            // > 1 switches to hybrid multistrand decoding
    int block_frames = 64;        // embedding batch size
};

struct FerStats {
    long frames = 0;
    long frame_errors = 0;
    long bit_errors = 0;
    long info_bits = 0;
    double fer = 0.0, fer_lo = 0.0, fer_hi = 0.0;
    double ber = 0.0, ber_lo = 0.0, ber_hi = 0.0;

    nlohmann::json to_json() const;
};

// Samples info bits, encodes, pushes frames through the channel, decodes with
// SC/SCL (n_strands == 1) or the hybrid multistrand decoder, and counts frame
// and info-bit errors. Deterministic for a given seed and options.
FerStats run_fer_mc(NpdModel& model, const CodeSpec& code, const ChannelConfig& channel,
                    const FerOptions& opt, rng::Stream& rs);

// Genie posterior evaluators for design_code.
GenieFn make_npd_genie(NpdModel& model, const ChannelConfig& channel, int fixed_k = -1);
GenieFn make_hybrid_genie(NpdModel& model, const ChannelConfig& channel, int n_strands, int fixed_k = -1);

// ---------------------------------------------------------------------------
// Read-cluster ingestion (real or synthetic DNA data).

struct ClusterRecord {
    std::string id;
    SymbolSequence original;             // 4-ary written sequence
    std::vector<SymbolSequence> reads;   // variable-length 4-ary reads
};

struct IngestStats {
    long lines = 0;
    long records = 0;
    long errors = 0;
};

// One record per line: "id TAB original TAB read1 TAB read2 ...", A/C/G/T
// alphabet. Malformed lines are reported with their line number to stderr;
// parsing hard-fails once more than error_budget lines are bad.
std::vector<ClusterRecord> ingest_clusters(const std::string& path, int error_budget,
                                           IngestStats* stats = nullptr);
void write_clusters(const std::string& path, const std::vector<ClusterRecord>& records);

// Seeded exact-fraction split (first = round(fraction * n) records).
std::pair<std::vector<ClusterRecord>, std::vector<ClusterRecord>> split_clusters(
    std::vector<ClusterRecord> records, double fraction, rng::Stream& rs);

std::vector<ClusterRecord> make_synthetic_clusters(int count, int len_symbols, const IdsParams& profile,
                                                   double lambda, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Fine-tuning on read clusters (code reconstruction by random padding).

struct FinetuneOptions {
    double lambda = 5.0;      // per-sample trace budget k_b ~ Poisson(lambda)
    int pad_bits = 36;        // untransmitted random bits appended to the data
    long steps = 500;
    int batch = 16;
    double lr = 1e-3;
    std::uint64_t pad_seed = 0x9AD;  // pad bits derive from (pad_seed, record index)
    bool truncate_long_reads = true; // false drops them instead
};

struct FinetuneResult {
    long samples_used = 0;
    long skipped_empty = 0;   // clusters with zero reads
    long truncated_reads = 0;
    long dropped_reads = 0;
    std::vector<float> loss_curve;
};

// Reconstructed codeword for a record: binarized original plus pad_bits
// seeded-random bits (total must equal the model block length).
std::vector<std::uint8_t> padded_codeword(const ClusterRecord& rec, int total_bits, int pad_bits,
                                          std::uint64_t pad_seed, std::uint64_t record_index);

FinetuneResult run_finetune_protocol(NpdModel& model, const std::vector<ClusterRecord>& clusters,
                                     const FinetuneOptions& opt, rng::Stream& rs);

}  // namespace npdw::harness
