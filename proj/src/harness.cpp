#include "npdw/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "npdw/hybrid.hpp"
#include "npdw/reference_tables.hpp"
#include "npdw/sc.hpp"
#include "npdw/sequence.hpp"

namespace npdw::reference {

bool deletion_iid_bounds(double d, double& lb, double& ub) {
    bool got_lb = false, got_ub = false;
    for (const auto& p : kDeletionIidLowerBound)
        if (std::abs(p.d - d) < 1e-9) {
            lb = p.value;
            got_lb = true;
        }
    for (const auto& p : kDeletionIidUpperBound)
        if (std::abs(p.d - d) < 1e-9) {
            ub = p.value;
            got_ub = true;
        }
    return got_lb && got_ub;
}

bool ids_capacity_bounds(double ins, double del, double sub, double& lb, double& ub) {
    for (const auto& r : kIdsCapacityBounds)
        if (std::abs(r.i - ins) < 1e-9 && std::abs(r.d - del) < 1e-9 && std::abs(r.s - sub) < 1e-9) {
            lb = r.lb;
            ub = r.ub;
            return true;
        }
    return false;
}

}  // namespace npdw::reference

namespace npdw::harness {

// ---------------------------------------------------------------------------
// ChannelConfig

std::vector<SymbolSequence> ChannelConfig::sample(const std::vector<std::uint8_t>& x_bits,
                                                  rng::Stream& rs, int fixed_k) const {
    SymbolSequence x(2, x_bits);
    switch (type) {
        case Type::kDeletion:
            return {apply_deletion(x, ids.delete_prob, rs)};
        case Type::kIds:
            return {apply_ids(x, ids, rs)};
        case Type::kDna: {
            const SymbolSequence q = bits_to_quaternary(x);
            int k;
            if (fixed_k >= 0) {
                k = fixed_k;
            } else {
                DnaChannelParams p{ids, trace_rate};
                p.validate();
                k = rs.poisson(trace_rate);
            }
            std::vector<SymbolSequence> traces;
            traces.reserve(static_cast<std::size_t>(k));
            for (int i = 0; i < k; ++i) traces.push_back(apply_ids(q, ids, rs));
            return traces;
        }
    }
    throw std::logic_error("ChannelConfig: bad type");
}

nlohmann::json ChannelConfig::to_json() const {
    const char* t = type == Type::kDeletion ? "deletion" : type == Type::kIds ? "ids" : "dna";
    nlohmann::json j{{"type", t},
                     {"insert_prob", ids.insert_prob},
                     {"delete_prob", ids.delete_prob},
                     {"subst_prob", ids.subst_prob}};
    if (type == Type::kDna) j["trace_rate"] = trace_rate;
    return j;
}

ChannelConfig ChannelConfig::from_json(const nlohmann::json& j) {
    ChannelConfig c;
    const std::string t = j.at("type").get<std::string>();
    if (t == "deletion")
        c.type = Type::kDeletion;
    else if (t == "ids")
        c.type = Type::kIds;
    else if (t == "dna")
        c.type = Type::kDna;
    else
        throw std::invalid_argument("ChannelConfig: unknown type " + t);
    c.ids.insert_prob = j.value("insert_prob", 0.0);
    c.ids.delete_prob = j.value("delete_prob", 0.0);
    c.ids.subst_prob = j.value("subst_prob", 0.0);
    c.trace_rate = j.value("trace_rate", 5.0);
    c.ids.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Records, hashing, reporting

nlohmann::json ExperimentRecord::to_json() const {
    return nlohmann::json{{"kind", kind},       {"config_hash", config_hash}, {"seed", seed},
                          {"config", config},   {"metrics", metrics},         {"frames", frames},
                          {"wall_ms", wall_ms}, {"tool_version", tool_version}};
}

ExperimentRecord ExperimentRecord::from_json(const nlohmann::json& j) {
    ExperimentRecord r;
    r.kind = j.at("kind").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.config = j.value("config", nlohmann::json::object());
    r.metrics = j.at("metrics");
    r.frames = j.value("frames", 0L);
    r.wall_ms = j.value("wall_ms", 0.0);
    r.tool_version = j.value("tool_version", "");
    return r;
}

void ExperimentRecord::save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("ExperimentRecord: cannot open " + path);
    f << to_json().dump(2) << "\n";
}

ExperimentRecord ExperimentRecord::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("ExperimentRecord: cannot open " + path);
    nlohmann::json j;
    f >> j;
    return from_json(j);
}

std::string config_hash(const nlohmann::json& cfg) {
    nlohmann::json c = cfg;
    for (const char* k : {"out", "workers", "log_every"}) c.erase(k);
    const std::string dump = c.dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : dump) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

namespace {

std::string fmt_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return std::string(buf);
}

std::string json_num_or_empty(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return "";
    return fmt_num(j.at(key).get<double>());
}

bool is_rate_metric(const std::string& name) {
    return name == "fer" || name == "ber" || name == "fer_lo" || name == "fer_hi" || name == "ber_lo" ||
           name == "ber_hi";
}

}  // namespace

void write_csv(const std::string& path, const std::vector<ExperimentRecord>& records) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_csv: cannot open " + path);
    f << "# npdw-report v1\n";
    f << "kind,config_hash,seed,N,N0,L,K,lambda,ins,del,sub,rate,metric,value,ci_lo,ci_hi,stderr,frames,"
         "ref_lb,ref_ub\n";
    for (const auto& r : records) {
        const auto& cfg = r.config;
        const std::string n = json_num_or_empty(cfg, "block_len");
        const std::string n0 = json_num_or_empty(cfg, "n_strands");
        const std::string list = json_num_or_empty(cfg, "list_size");
        const std::string k = json_num_or_empty(cfg, "fixed_k");
        std::string lambda, ins, del, sub, chan_type;
        if (cfg.contains("channel")) {
            const auto& ch = cfg.at("channel");
            chan_type = ch.value("type", "");
            lambda = json_num_or_empty(ch, "trace_rate");
            ins = json_num_or_empty(ch, "insert_prob");
            del = json_num_or_empty(ch, "delete_prob");
            sub = json_num_or_empty(ch, "subst_prob");
        }
        const std::string rate = json_num_or_empty(cfg, "rate");

        for (auto it = r.metrics.begin(); it != r.metrics.end(); ++it) {
            const std::string& name = it.key();
            double value = 0.0;
            std::string ci_lo, ci_hi, se, frames;
            if (it.value().is_object()) {
                value = it.value().at("value").get<double>();
                ci_lo = json_num_or_empty(it.value(), "ci_lo");
                ci_hi = json_num_or_empty(it.value(), "ci_hi");
                se = json_num_or_empty(it.value(), "stderr");
                frames = json_num_or_empty(it.value(), "frames");
            } else {
                value = it.value().get<double>();
            }
            if (is_rate_metric(name) && (value < 0.0 || value > 1.0))
                throw std::runtime_error("write_csv: metric " + name + " outside [0,1]");
            if (frames.empty() && r.frames > 0) frames = fmt_num(double(r.frames));

            std::string ref_lb, ref_ub;
            if (name == "mi" && cfg.contains("channel")) {
                double lb = 0, ub = 0;
                const double dd = cfg.at("channel").value("delete_prob", 0.0);
                const double ii = cfg.at("channel").value("insert_prob", 0.0);
                const double ss = cfg.at("channel").value("subst_prob", 0.0);
                if (chan_type == "deletion" && reference::deletion_iid_bounds(dd, lb, ub)) {
                    ref_lb = fmt_num(lb);
                    ref_ub = fmt_num(ub);
                } else if (chan_type == "ids" && reference::ids_capacity_bounds(ii, dd, ss, lb, ub)) {
                    ref_lb = fmt_num(lb);
                    ref_ub = fmt_num(ub);
                }
            }

            f << r.kind << ',' << r.config_hash << ',' << r.seed << ',' << n << ',' << n0 << ',' << list
              << ',' << k << ',' << lambda << ',' << ins << ',' << del << ',' << sub << ',' << rate << ','
              << name << ',' << fmt_num(value) << ',' << ci_lo << ',' << ci_hi << ',' << se << ','
              << frames << ',' << ref_lb << ',' << ref_ub << '\n';
        }
    }
}

nlohmann::json summarize(const std::vector<ExperimentRecord>& records) {
    nlohmann::json out;
    out["tool_version"] = kToolVersion;
    out["records"] = nlohmann::json::array();
    for (const auto& r : records) out["records"].push_back(r.to_json());
    return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo FER

namespace {
void normal_ci(long errors, long trials, double& p, double& lo, double& hi) {
    p = trials ? double(errors) / double(trials) : 0.0;
    const double se = trials ? std::sqrt(std::max(p * (1.0 - p), 0.0) / double(trials)) : 0.0;
    lo = std::max(0.0, p - 1.96 * se);
    hi = std::min(1.0, p + 1.96 * se);
}
}  // namespace

nlohmann::json FerStats::to_json() const {
    return nlohmann::json{
        {"fer", {{"value", fer}, {"ci_lo", fer_lo}, {"ci_hi", fer_hi}, {"frames", frames}}},
        {"ber", {{"value", ber}, {"ci_lo", ber_lo}, {"ci_hi", ber_hi}, {"frames", frames}}}};
}

FerStats run_fer_mc(NpdModel& model, const CodeSpec& code, const ChannelConfig& channel,
                    const FerOptions& opt, rng::Stream& rs) {
    const int n0 = opt.n_strands;
    const int n = model.cfg.block_len;
    if (code.block_len != n * n0) throw std::invalid_argument("run_fer_mc: code length mismatch");
    if (n0 > 1 && opt.list_size > 1)
        throw std::invalid_argument("run_fer_mc: multistrand decoding supports SC only");
    code.validate();

    const NeuralKernel kern = model.kernel();
    FerStats st;
    long frame_idx = 0;

    std::vector<std::vector<std::uint8_t>> us(static_cast<std::size_t>(opt.block_frames));
    std::vector<std::vector<std::vector<SymbolSequence>>> unit_traces;  // frame x strand
    std::vector<long> frame_err(static_cast<std::size_t>(opt.block_frames));
    std::vector<long> bit_err(static_cast<std::size_t>(opt.block_frames));

    while (st.frames < opt.frames_max && st.frame_errors < opt.min_error_events) {
        const int bf = static_cast<int>(std::min<long>(opt.block_frames, opt.frames_max - st.frames));
        us.resize(static_cast<std::size_t>(bf));
        unit_traces.assign(static_cast<std::size_t>(bf), {});

        for (int fidx = 0; fidx < bf; ++fidx) {
            rng::Stream frs = rs.substream(static_cast<std::uint64_t>(frame_idx + fidx));
            std::vector<std::uint8_t> info(code.info_set.size());
            for (auto& b : info) b = static_cast<std::uint8_t>(frs.next_u64() & 1u);
            us[static_cast<std::size_t>(fidx)] = code.assemble_u(info);
            const auto x = polar_transform(us[static_cast<std::size_t>(fidx)]);
            const auto strands = split_strands(x, n0);
            auto& units = unit_traces[static_cast<std::size_t>(fidx)];
            units.resize(static_cast<std::size_t>(n0));
            for (int a = 0; a < n0; ++a)
                units[static_cast<std::size_t>(a)] = channel.sample(strands[static_cast<std::size_t>(a)], frs, opt.fixed_k);
        }

        // Batched embedding across all frame-strand units.
        std::vector<std::vector<SymbolSequence>> flat;
        flat.reserve(static_cast<std::size_t>(bf) * n0);
        for (int fidx = 0; fidx < bf; ++fidx)
            for (int a = 0; a < n0; ++a) flat.push_back(unit_traces[static_cast<std::size_t>(fidx)][static_cast<std::size_t>(a)]);
        const auto embs = model.embed_frames(flat);

#pragma omp parallel for schedule(dynamic)
        for (int fidx = 0; fidx < bf; ++fidx) {
            std::vector<std::uint8_t> u_hat;
            if (n0 == 1) {
                const auto& e = embs[static_cast<std::size_t>(fidx)];
                if (opt.list_size <= 1) {
                    u_hat = sc_decode(kern, e.v.data(), code).u_hat;
                } else {
                    u_hat = scl_decode(kern, e.v.data(), code, opt.list_size).u_hat;
                }
            } else {
                std::vector<EmbeddingMatrix> strand_embs(embs.begin() + static_cast<long>(fidx) * n0,
                                                         embs.begin() + static_cast<long>(fidx + 1) * n0);
                u_hat = hybrid_sc_decode(model, strand_embs, code).u_hat;
            }
            long bits = 0;
            for (auto i : code.info_set)
                if (u_hat[i] != us[static_cast<std::size_t>(fidx)][i]) ++bits;
            bit_err[static_cast<std::size_t>(fidx)] = bits;
            frame_err[static_cast<std::size_t>(fidx)] = bits > 0 ? 1 : 0;
        }

        for (int fidx = 0; fidx < bf; ++fidx) {
            st.frame_errors += frame_err[static_cast<std::size_t>(fidx)];
            st.bit_errors += bit_err[static_cast<std::size_t>(fidx)];
        }
        st.frames += bf;
        st.info_bits += static_cast<long>(code.info_set.size()) * bf;
        frame_idx += bf;
    }

    normal_ci(st.frame_errors, st.frames, st.fer, st.fer_lo, st.fer_hi);
    normal_ci(st.bit_errors, st.info_bits, st.ber, st.ber_lo, st.ber_hi);
    return st;
}

GenieFn make_npd_genie(NpdModel& model, const ChannelConfig& channel, int fixed_k) {
    return make_hybrid_genie(model, channel, 1, fixed_k);
}

GenieFn make_hybrid_genie(NpdModel& model, const ChannelConfig& channel, int n_strands, int fixed_k) {
    NpdModel* m = &model;
    return [m, channel, n_strands, fixed_k](const std::vector<std::uint8_t>& u,
                                            rng::Stream& frs) -> std::vector<double> {
        const auto x = polar_transform(u);
        const auto strands = split_strands(x, n_strands);
        std::vector<std::vector<SymbolSequence>> units(static_cast<std::size_t>(n_strands));
        for (int a = 0; a < n_strands; ++a)
            units[static_cast<std::size_t>(a)] = channel.sample(strands[static_cast<std::size_t>(a)], frs, fixed_k);
        auto embs = m->embed_frames(units);
        if (n_strands == 1) {
            const NeuralKernel kern = m->kernel();
            return sc_forced_llrs(kern, embs[0].v.data(), m->cfg.block_len, u.data());
        }
        return hybrid_forced_llrs(*m, embs, u);
    };
}

// ---------------------------------------------------------------------------
// Clusters

namespace {
int base_to_symbol(char c) {
    switch (c) {
        case 'A':
        case 'a':
            return 0;
        case 'C':
        case 'c':
            return 1;
        case 'G':
        case 'g':
            return 2;
        case 'T':
        case 't':
            return 3;
        default:
            return -1;
    }
}

char symbol_to_base(std::uint8_t s) { return "ACGT"[s]; }

bool parse_bases(const std::string& s, SymbolSequence& out) {
    out.alphabet_size = 4;
    out.symbols.clear();
    out.symbols.reserve(s.size());
    for (char c : s) {
        const int v = base_to_symbol(c);
        if (v < 0) return false;
        out.symbols.push_back(static_cast<std::uint8_t>(v));
    }
    return true;
}
}  // namespace

std::vector<ClusterRecord> ingest_clusters(const std::string& path, int error_budget, IngestStats* stats) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("ingest_clusters: cannot open " + path);
    std::vector<ClusterRecord> out;
    std::string line;
    long line_no = 0, errors = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, '\t')) fields.push_back(field);

        auto bad = [&](const char* why) {
            ++errors;
            std::fprintf(stderr, "[ingest] line %ld: %s\n", line_no, why);
            if (errors > error_budget)
                throw std::runtime_error("ingest_clusters: error budget exceeded at line " +
                                         std::to_string(line_no));
        };

        if (fields.size() < 2) {
            bad("expected at least id and original sequence");
            continue;
        }
        ClusterRecord rec;
        rec.id = fields[0];
        if (rec.id.empty() || !parse_bases(fields[1], rec.original) || rec.original.empty()) {
            bad("malformed id or original sequence");
            continue;
        }
        bool ok = true;
        for (std::size_t i = 2; i < fields.size(); ++i) {
            SymbolSequence read;
            if (fields[i].empty() || !parse_bases(fields[i], read)) {
                bad("malformed read");
                ok = false;
                break;
            }
            rec.reads.push_back(std::move(read));
        }
        if (ok) out.push_back(std::move(rec));
    }
    if (stats) {
        stats->lines = line_no;
        stats->records = static_cast<long>(out.size());
        stats->errors = errors;
    }
    if (out.empty()) std::fprintf(stderr, "[ingest] warning: %s produced no records\n", path.c_str());
    return out;
}

void write_clusters(const std::string& path, const std::vector<ClusterRecord>& records) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_clusters: cannot open " + path);
    for (const auto& r : records) {
        f << r.id << '\t';
        for (auto s : r.original.symbols) f << symbol_to_base(s);
        for (const auto& read : r.reads) {
            f << '\t';
            for (auto s : read.symbols) f << symbol_to_base(s);
        }
        f << '\n';
    }
}

std::pair<std::vector<ClusterRecord>, std::vector<ClusterRecord>> split_clusters(
    std::vector<ClusterRecord> records, double fraction, rng::Stream& rs) {
    if (fraction < 0.0 || fraction > 1.0) throw std::invalid_argument("split_clusters: bad fraction");
    for (std::size_t i = records.size(); i > 1; --i) {
        const std::size_t j = rs.below(static_cast<std::uint32_t>(i));
        std::swap(records[i - 1], records[j]);
    }
    const std::size_t cut = static_cast<std::size_t>(std::llround(fraction * double(records.size())));
    std::vector<ClusterRecord> first(records.begin(), records.begin() + static_cast<long>(cut));
    std::vector<ClusterRecord> second(records.begin() + static_cast<long>(cut), records.end());
    return {std::move(first), std::move(second)};
}

std::vector<ClusterRecord> make_synthetic_clusters(int count, int len_symbols, const IdsParams& profile,
                                                   double lambda, std::uint64_t seed) {
    rng::Stream root(seed);
    std::vector<ClusterRecord> out(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        rng::Stream rrs = root.substream(static_cast<std::uint64_t>(i));
        auto& rec = out[static_cast<std::size_t>(i)];
        rec.id = "synth" + std::to_string(i);
        rec.original.alphabet_size = 4;
        rec.original.symbols.resize(static_cast<std::size_t>(len_symbols));
        for (auto& s : rec.original.symbols) s = static_cast<std::uint8_t>(rrs.below(4));
        const int k = rrs.poisson(lambda);
        for (int t = 0; t < k; ++t) rec.reads.push_back(apply_ids(rec.original, profile, rrs));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Fine-tuning protocol

std::vector<std::uint8_t> padded_codeword(const ClusterRecord& rec, int total_bits, int pad_bits,
                                          std::uint64_t pad_seed, std::uint64_t record_index) {
    const auto data = quaternary_to_bits(rec.original);
    if (static_cast<int>(data.size()) + pad_bits != total_bits)
        throw std::invalid_argument("padded_codeword: data + pad does not match block length");
    std::vector<std::uint8_t> x(data.symbols.begin(), data.symbols.end());
    rng::Stream ps = rng::Stream(pad_seed).substream(record_index);
    for (int i = 0; i < pad_bits; ++i) x.push_back(static_cast<std::uint8_t>(ps.next_u64() & 1u));
    return x;
}

FinetuneResult run_finetune_protocol(NpdModel& model, const std::vector<ClusterRecord>& clusters,
                                     const FinetuneOptions& opt, rng::Stream& rs) {
    if (clusters.empty()) throw std::invalid_argument("run_finetune_protocol: no clusters");
    if (model.cfg.alphabet_size != 4)
        throw std::invalid_argument("run_finetune_protocol: model must use the quaternary alphabet");
    const int n = model.cfg.block_len;
    const int lmax = model.cfg.l_max;

    FinetuneResult res;
    nn::OptimizerState adam;
    adam.learning_rate = opt.lr;

    for (long step = 0; step < opt.steps; ++step) {
        rng::Stream srs = rs.substream(static_cast<std::uint64_t>(step));
        std::vector<Sample> batch;
        batch.reserve(static_cast<std::size_t>(opt.batch));
        for (int b = 0; b < opt.batch; ++b) {
            rng::Stream brs = srs.substream(static_cast<std::uint64_t>(b));
            const std::uint32_t ridx = brs.below(static_cast<std::uint32_t>(clusters.size()));
            const ClusterRecord& rec = clusters[ridx];
            if (rec.reads.empty()) {
                ++res.skipped_empty;
                continue;
            }
            const int kb = brs.poisson(opt.lambda);
            const int keep = std::min<int>(static_cast<int>(rec.reads.size()), kb);

            // Seeded subsample without replacement.
            std::vector<std::uint32_t> order(rec.reads.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::uint32_t>(i);
            for (std::size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[brs.below(static_cast<std::uint32_t>(i))]);

            Sample s;
            s.x = padded_codeword(rec, n, opt.pad_bits, opt.pad_seed, ridx);
            for (int t = 0; t < keep; ++t) {
                SymbolSequence read = rec.reads[order[static_cast<std::size_t>(t)]];
                if (static_cast<int>(read.size()) > lmax) {
                    if (opt.truncate_long_reads) {
                        read.symbols.resize(static_cast<std::size_t>(lmax));
                        ++res.truncated_reads;
                    } else {
                        ++res.dropped_reads;
                        continue;
                    }
                }
                s.traces.push_back(std::move(read));
            }
            batch.push_back(std::move(s));
        }
        if (batch.empty()) continue;

        nn::Tape<float> t;
        nn::Binder<float> bind(t, model.store);
        std::vector<std::vector<SymbolSequence>> traces;
        std::vector<std::vector<std::uint8_t>> us;
        for (const auto& s : batch) {
            traces.push_back(s.traces);
            us.push_back(polar_transform(s.x));
        }
        const double to_bits = 1.0 / (double(n) * std::log(2.0));
        int per = t.scale(model.build_sc_loss(t, bind, model.build_aggregate(t, bind, traces, false), us),
                          to_bits);
        int loss = t.mean_all(per);
        model.store.zero_grad();
        t.backward(loss);
        bind.read_grads();
        nn::adam_step(model.store, adam);

        res.loss_curve.push_back(t.val(loss).v[0]);
        res.samples_used += static_cast<long>(batch.size());
    }
    return res;
}

}  // namespace npdw::harness
