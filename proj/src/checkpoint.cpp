#include "npnet/checkpoint.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "npnet/common.hpp"

namespace npnet {

namespace {

constexpr char kMagic[4] = {'N', 'P', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void save_vec_of_vec(BinWriter& w, const std::vector<std::vector<double>>& v) {
    w.u64(v.size());
    for (const auto& inner : v) w.f64_vec(inner);
}

std::vector<std::vector<double>> load_vec_of_vec(BinReader& r) {
    std::vector<std::vector<double>> v(r.u64());
    for (auto& inner : v) inner = r.f64_vec();
    return v;
}

void save_rng(BinWriter& w, const Rng& rng) {
    for (std::uint64_t word : rng.state()) w.u64(word);
}

Rng load_rng(BinReader& r) {
    std::array<std::uint64_t, 4> s;
    for (auto& word : s) word = r.u64();
    Rng rng;
    rng.set_state(s);
    return rng;
}

void save_state(BinWriter& w, const TrainerState& st) {
    save_params(w, st.params);
    st.opt->save(w);
    save_rng(w, st.rng);
    w.u64(st.t);
    st.ledger.save(w);
}

TrainerState load_state(BinReader& r) {
    TrainerState st;
    st.params = load_params(r);
    st.opt = load_opt_state(r);
    st.rng = load_rng(r);
    st.t = r.u64();
    st.ledger = UnitLedger::load(r);
    return st;
}

void save_log(BinWriter& w, const MetricsLog& log) {
    w.u64(log.size());
    for (const MetricsRow& row : log) {
        w.i64(row.epoch);
        w.str(row.phase);
        w.f64(row.train_ce);
        w.f64(row.train_err);
        w.f64(row.valid_ce);
        w.f64(row.valid_err);
        w.u64(row.hidden_dims.size());
        for (std::size_t d : row.hidden_dims) w.u64(d);
        w.f64(row.alpha_phi);
        w.f64(row.lambda);
    }
}

MetricsLog load_log(BinReader& r) {
    MetricsLog log(r.u64());
    for (MetricsRow& row : log) {
        row.epoch = r.i64();
        row.phase = r.str();
        row.train_ce = r.f64();
        row.train_err = r.f64();
        row.valid_ce = r.f64();
        row.valid_err = r.f64();
        row.hidden_dims.resize(r.u64());
        for (auto& d : row.hidden_dims) d = r.u64();
        row.alpha_phi = r.f64();
        row.lambda = r.f64();
    }
    return log;
}

void save_sched(BinWriter& w, const ScheduleState& s) {
    w.u8(static_cast<std::uint8_t>(s.phase));
    w.i64(s.anneal_index);
    w.f64(s.alpha_phi_cur);
    w.f64(s.alpha_cur);
    w.f64(s.lambda_cur);
    w.i64(s.stale);
    w.i64(s.noelim);
    w.i64(s.const_run);
    w.i64(s.prev_vce);
    w.i64(s.best_vce);
}

ScheduleState load_sched(BinReader& r) {
    ScheduleState s;
    s.phase = static_cast<Phase>(r.u8());
    s.anneal_index = static_cast<int>(r.i64());
    s.alpha_phi_cur = r.f64();
    s.alpha_cur = r.f64();
    s.lambda_cur = r.f64();
    s.stale = r.i64();
    s.noelim = r.i64();
    s.const_run = r.i64();
    s.prev_vce = r.i64();
    s.best_vce = r.i64();
    return s;
}

std::vector<char> read_all(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open checkpoint file: " + path);
    return std::vector<char>((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
}

void write_atomic(const std::string& path, const std::vector<char>& bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write file: " + tmp);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error("short write: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error("cannot rename " + tmp + " to " + path + ": " + ec.message());
}

} // namespace

Checkpoint::Checkpoint(const Checkpoint& o)
    : config_hash(o.config_hash),
      norm_mode(o.norm_mode),
      current(o.current.clone()),
      has_best(o.has_best),
      best(o.has_best ? o.best.clone() : TrainerState{}),
      sched(o.sched),
      epoch(o.epoch),
      log(o.log) {}

Checkpoint& Checkpoint::operator=(const Checkpoint& o) {
    if (this == &o) return *this;
    Checkpoint tmp(o);
    *this = std::move(tmp);
    return *this;
}

void save_params(BinWriter& w, const NetworkParams& params) {
    w.u64(params.dims.size());
    for (std::size_t d : params.dims) w.u64(d);
    for (const Matrix& m : params.weights) w.matrix(m);
    save_vec_of_vec(w, params.run_mean);
    save_vec_of_vec(w, params.run_div);
    w.u8(params.bn_scale.empty() ? 0 : 1);
    if (!params.bn_scale.empty()) {
        save_vec_of_vec(w, params.bn_scale);
        save_vec_of_vec(w, params.bn_shift);
    }
}

NetworkParams load_params(BinReader& r) {
    NetworkParams p;
    p.dims.resize(r.u64());
    for (auto& d : p.dims) d = r.u64();
    if (p.dims.size() < 2) throw Error("checkpoint: bad dims vector");
    for (std::size_t l = 0; l + 1 < p.dims.size(); ++l) {
        Matrix m = r.matrix();
        if (m.rows() != p.dims[l] || m.cols() != p.dims[l + 1])
            throw Error("checkpoint: weight matrix " + std::to_string(l + 1) +
                        " does not match stored dims");
        p.weights.push_back(std::move(m));
    }
    p.run_mean = load_vec_of_vec(r);
    p.run_div = load_vec_of_vec(r);
    if (r.u8()) {
        p.bn_scale = load_vec_of_vec(r);
        p.bn_shift = load_vec_of_vec(r);
    }
    return p;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    BinWriter w;
    for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
    w.u32(kVersion);
    w.u64(ck.config_hash);
    w.u8(ck.norm_mode);
    save_state(w, ck.current);
    w.u8(ck.has_best ? 1 : 0);
    if (ck.has_best) save_state(w, ck.best);
    save_sched(w, ck.sched);
    w.i64(ck.epoch);
    save_log(w, ck.log);
    write_atomic(path, w.bytes());
}

Checkpoint restore_checkpoint(const std::string& path, std::uint64_t expected_config_hash) {
    const std::vector<char> bytes = read_all(path);
    BinReader r(bytes);
    for (char c : kMagic)
        if (r.u8() != static_cast<std::uint8_t>(c))
            throw Error(path + ": not a checkpoint file (bad magic)");
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        throw Error(path + ": unsupported checkpoint version " + std::to_string(version));
    Checkpoint ck;
    ck.config_hash = r.u64();
    if (expected_config_hash != 0 && ck.config_hash != expected_config_hash)
        throw Error(path + ": config hash mismatch (checkpoint was produced by a different "
                           "configuration)");
    ck.norm_mode = r.u8();
    ck.current = load_state(r);
    ck.has_best = r.u8() != 0;
    if (ck.has_best) ck.best = load_state(r);
    ck.sched = load_sched(r);
    ck.epoch = r.i64();
    ck.log = load_log(r);
    if (!r.exhausted()) throw Error(path + ": trailing bytes after checkpoint payload");
    return ck;
}

Checkpoint Trainer::make_checkpoint(std::uint64_t config_hash) const {
    Checkpoint ck;
    ck.config_hash = config_hash;
    ck.norm_mode = static_cast<std::uint8_t>(config_.model.norm);
    ck.current = state_.clone();
    ck.has_best = best_.has_value();
    if (best_) ck.best = best_->clone();
    ck.sched = sched_;
    ck.epoch = epoch_;
    ck.log = log_;
    return ck;
}

void Trainer::restore(const Checkpoint& ck) {
    if (static_cast<NormMode>(ck.norm_mode) != config_.model.norm)
        throw Error("checkpoint: normalization mode does not match the configuration");
    state_ = ck.current.clone();
    state_.params.check_consistent(config_.model);
    best_.reset();
    if (ck.has_best) best_ = ck.best.clone();
    sched_ = ck.sched;
    epoch_ = ck.epoch;
    log_ = ck.log;
}

void save_model(const NetworkParams& params, NormMode norm, std::uint64_t config_hash,
                const std::string& path) {
    BinWriter w;
    const char magic[4] = {'N', 'P', 'M', 'D'};
    for (char c : magic) w.u8(static_cast<std::uint8_t>(c));
    w.u32(kVersion);
    w.u64(config_hash);
    w.u8(static_cast<std::uint8_t>(norm));
    save_params(w, params);
    write_atomic(path, w.bytes());
}

LoadedModel load_model(const std::string& path) {
    const std::vector<char> bytes = read_all(path);
    BinReader r(bytes);
    const char magic[4] = {'N', 'P', 'M', 'D'};
    for (char c : magic)
        if (r.u8() != static_cast<std::uint8_t>(c))
            throw Error(path + ": not a model file (bad magic)");
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        throw Error(path + ": unsupported model version " + std::to_string(version));
    LoadedModel m;
    m.config_hash = r.u64();
    m.config.norm = static_cast<NormMode>(r.u8());
    m.params = load_params(r);
    if (!r.exhausted()) throw Error(path + ": trailing bytes after model payload");
    m.config.num_layers = m.params.layer_count();
    m.config.input_dim = m.params.dims.front();
    m.config.output_dim = m.params.dims.back();
    return m;
}

} // namespace npnet
