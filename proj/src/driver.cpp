#include "npnet/driver.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "npnet/common.hpp"

namespace npnet {

namespace {

std::string fmt_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write file: " + path);
    out << text;
}

} // namespace

Dataset load_dataset(const RunConfig& cfg) {
    if (cfg.dataset == "idx") return load_idx(cfg.data_images, cfg.data_labels);
    if (cfg.dataset == "csv")
        return load_csv(cfg.data_path, static_cast<int>(cfg.label_column), cfg.csv_has_header);
    if (cfg.dataset == "amat") return load_amat(cfg.data_path);
    SyntheticSpec spec;
    spec.kind = cfg.synthetic_kind == "gaussian_blobs" ? SyntheticSpec::Kind::GaussianBlobs
                                                       : SyntheticSpec::Kind::XorQuadrants;
    spec.n = static_cast<std::size_t>(cfg.synthetic_n);
    spec.d0 = static_cast<std::size_t>(cfg.synthetic_d0);
    spec.classes = static_cast<int>(cfg.synthetic_classes);
    spec.noise = cfg.synthetic_noise;
    return gen_synthetic(spec, static_cast<std::uint64_t>(cfg.seed));
}

SplitData prepare_data(const RunConfig& cfg) {
    Dataset all = load_dataset(cfg);
    const std::uint64_t fp = fingerprint(all);

    const std::size_t n = all.size();
    std::size_t valid_n = cfg.valid_count > 0 ? static_cast<std::size_t>(cfg.valid_count)
                                              : std::max<std::size_t>(1, n / 6);
    const std::size_t test_n = static_cast<std::size_t>(cfg.test_count);
    if (valid_n + test_n >= n)
        throw ConfigError("config key 'valid_count': split leaves no training data");
    const std::size_t train_n = n - valid_n - test_n;

    std::vector<std::size_t> sizes = {train_n, valid_n};
    if (test_n > 0) sizes.push_back(test_n);
    std::vector<Dataset> parts =
        split(all, sizes, mix_seed(static_cast<std::uint64_t>(cfg.seed), 0x5B117));

    SplitData out;
    out.source_fingerprint = fp;
    out.train = std::move(parts[0]);
    out.valid = std::move(parts[1]);
    if (test_n > 0) out.test = std::move(parts[2]);

    // Standardization is fitted on the train split only.
    if (cfg.standardize && (cfg.dataset == "csv" || cfg.dataset == "amat")) {
        const Scaler scaler = Scaler::fit(out.train);
        scaler.apply(out.train);
        scaler.apply(out.valid);
        if (out.test) scaler.apply(*out.test);
    }
    return out;
}

std::string metrics_csv_header(std::size_t hidden_layers) {
    std::string h = "epoch,phase,train_ce,train_err,valid_ce,valid_err";
    for (std::size_t i = 1; i <= hidden_layers; ++i) h += ",d_" + std::to_string(i);
    h += ",alpha_phi,lambda";
    return h;
}

std::string metrics_csv_row(const MetricsRow& row) {
    std::string s = std::to_string(row.epoch) + "," + row.phase + "," + fmt_double(row.train_ce) +
                    "," + fmt_double(row.train_err) + "," + fmt_double(row.valid_ce) + "," +
                    fmt_double(row.valid_err);
    for (std::size_t d : row.hidden_dims) s += "," + std::to_string(d);
    s += "," + fmt_double(row.alpha_phi) + "," + fmt_double(row.lambda);
    return s;
}

namespace {

void write_manifest(const RunConfig& cfg, const SplitData& data, const std::string& out_dir) {
    nlohmann::json m;
    m["tool"] = "npnet";
    m["version"] = version_string();
    m["seed"] = cfg.seed;
    char hash_buf[32];
    std::snprintf(hash_buf, sizeof hash_buf, "%016llx",
                  static_cast<unsigned long long>(cfg.hash()));
    m["config_hash"] = std::string(hash_buf);
    m["config_file"] = "config.resolved.toml";

    const auto describe = [](const Dataset& d, const char* role) {
        nlohmann::json j;
        j["role"] = role;
        j["rows"] = d.size();
        j["features"] = d.feature_count();
        j["classes"] = d.num_classes;
        char fp[32];
        std::snprintf(fp, sizeof fp, "%016llx", static_cast<unsigned long long>(fingerprint(d)));
        j["fingerprint"] = std::string(fp);
        return j;
    };
    m["datasets"] = nlohmann::json::array();
    m["datasets"].push_back(describe(data.train, "train"));
    m["datasets"].push_back(describe(data.valid, "valid"));
    if (data.test) m["datasets"].push_back(describe(*data.test, "test"));
    char src_fp[32];
    std::snprintf(src_fp, sizeof src_fp, "%016llx",
                  static_cast<unsigned long long>(data.source_fingerprint));
    m["source_fingerprint"] = std::string(src_fp);

    m["outputs"] = {{"metrics", "metrics.csv"},
                    {"units", "units.csv"},
                    {"model", "model.npck"},
                    {"checkpoint_best", "checkpoint_best.npck"},
                    {"checkpoint_last", "checkpoint_last.npck"}};
    if (cfg.metrics_norms) m["outputs"]["norms"] = "norms.csv";

    write_text(out_dir + "/manifest.json", m.dump(2) + "\n");
}

void append_norms(std::ofstream& norms, const Trainer& trainer) {
    const NetworkParams& p = trainer.params();
    const UnitLedger& ledger = trainer.ledger();
    std::vector<double> col;
    for (std::size_t layer = 1; layer + 1 < p.dims.size(); ++layer) {
        const Matrix& fan_in = p.weights[layer - 1];
        const Matrix& fan_out = p.weights[layer];
        for (std::size_t j = 0; j < p.dims[layer]; ++j) {
            fan_in.get_col(j, col);
            const double in_norm = vec_norm2(col);
            const double out_norm = vec_norm2(fan_out.row_span(j));
            norms << trainer.epoch() << ',' << layer << ',' << ledger.id_at(layer, j) << ','
                  << fmt_double(in_norm) << ',' << fmt_double(out_norm) << '\n';
        }
    }
}

void write_units_csv(const UnitLedger& ledger, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write file: " + path);
    out << "unit_id,layer,birth_epoch,death_epoch\n";
    for (std::size_t id = 0; id < ledger.records().size(); ++id) {
        const auto& rec = ledger.records()[id];
        out << id << ',' << rec.layer << ',' << rec.birth_epoch << ',' << rec.death_epoch << '\n';
    }
}

} // namespace

RunOutcome run_training(const RunConfig& cfg, const std::string& out_dir,
                        const std::string& resume_path) {
    cfg.validate();
    SplitData data = prepare_data(cfg);
    TrainConfig tc = TrainConfig::from_run_config(cfg, data.train.feature_count(),
                                                  static_cast<std::size_t>(data.train.num_classes));
    Trainer trainer(tc, &data.train, &data.valid);
    const std::uint64_t config_hash = cfg.hash();

    if (!resume_path.empty()) trainer.restore(restore_checkpoint(resume_path, config_hash));

    const bool with_files = !out_dir.empty();
    std::ofstream metrics, norms;
    if (with_files) {
        std::filesystem::create_directories(out_dir);
        write_text(out_dir + "/config.resolved.toml", cfg.serialize());
        write_manifest(cfg, data, out_dir);
        metrics.open(out_dir + "/metrics.csv", std::ios::trunc);
        if (!metrics) throw Error("cannot write file: " + out_dir + "/metrics.csv");
        metrics << metrics_csv_header(trainer.params().hidden_layer_count()) << '\n';
        // On resume, replay the stored rows so the file matches an
        // uninterrupted run.
        for (const MetricsRow& row : trainer.log()) metrics << metrics_csv_row(row) << '\n';
        metrics.flush();
        if (cfg.metrics_norms) {
            norms.open(out_dir + "/norms.csv", std::ios::trunc);
            if (!norms) throw Error("cannot write file: " + out_dir + "/norms.csv");
            norms << "epoch,layer,unit_id,fanin_norm,fanout_norm\n";
        }
    }

    std::int64_t best_seen = -1;
    trainer.train([&](const MetricsRow& row, const Trainer& t) {
        if (!with_files) return;
        metrics << metrics_csv_row(row) << '\n';
        metrics.flush();
        if (norms.is_open()) {
            append_norms(norms, t);
            norms.flush();
        }
        if (t.epoch() % std::max<std::int64_t>(1, cfg.checkpoint_every) == 0)
            save_checkpoint(t.make_checkpoint(config_hash), out_dir + "/checkpoint_last.npck");
        if (t.best_vce_count() != best_seen) {
            best_seen = t.best_vce_count();
            save_checkpoint(t.make_checkpoint(config_hash), out_dir + "/checkpoint_best.npck");
        }
    });

    RunOutcome outcome;
    outcome.model = trainer.params();
    outcome.model_config = tc.model;
    outcome.log = trainer.log();
    outcome.valid_result = evaluate(outcome.model, tc.model, data.valid);
    if (data.test) outcome.test_result = evaluate(outcome.model, tc.model, *data.test);
    outcome.epochs = trainer.epoch();

    if (with_files) {
        save_checkpoint(trainer.make_checkpoint(config_hash), out_dir + "/checkpoint_last.npck");
        save_model(outcome.model, tc.model.norm, config_hash, out_dir + "/model.npck");
        write_units_csv(trainer.ledger(), out_dir + "/units.csv");
    }
    return outcome;
}

double gradcheck_run(const RunConfig& cfg, int trials) {
    if (trials <= 0) throw ConfigError("gradcheck: trials must be >= 1");
    cfg.validate();
    ModelConfig mc;
    mc.num_layers = static_cast<std::size_t>(cfg.layers);
    mc.input_dim = cfg.dataset == "synthetic" ? static_cast<std::size_t>(cfg.synthetic_d0) : 4;
    mc.output_dim = std::max<std::size_t>(2, static_cast<std::size_t>(cfg.synthetic_classes));
    mc.norm = cfg.norm_mode();

    std::vector<std::size_t> hidden(cfg.hidden_units.begin(), cfg.hidden_units.end());
    for (auto& h : hidden) h = std::min<std::size_t>(h, 8); // keep the oracle cheap

    double worst = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
        Rng rng(mix_seed(static_cast<std::uint64_t>(cfg.seed), 0x6C + trial));
        NetworkParams params = NetworkParams::init(mc, hidden, rng);
        const std::size_t batch = 8;
        Matrix X(batch, mc.input_dim);
        for (double& v : X.flat()) v = rng.normal();
        std::vector<int> labels(batch);
        for (auto& y : labels)
            y = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(mc.output_dim)));

        const ForwardCache cache = forward(params, mc, X, RunMode::Train);
        Gradients analytic = backward(params, mc, cache, labels, 1.0);
        if (std::getenv("NPNET_GRADCHECK_BREAK")) analytic.w[0](0, 0) += 1e-3;
        const Gradients numeric = numeric_gradient(params, mc, X, labels, 1.0, 1e-5);
        for (std::size_t l = 0; l < analytic.w.size(); ++l) {
            for (std::size_t i = 0; i < analytic.w[l].rows(); ++i) {
                for (std::size_t j = 0; j < analytic.w[l].cols(); ++j) {
                    const double a = analytic.w[l](i, j);
                    const double n = numeric.w[l](i, j);
                    const double rel =
                        std::fabs(a - n) / std::max({1.0, std::fabs(a), std::fabs(n)});
                    worst = std::max(worst, rel);
                }
            }
        }
    }
    return worst;
}

} // namespace npnet
