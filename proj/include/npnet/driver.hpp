#pragma once

#include <optional>
#include <string>

#include "npnet/checkpoint.hpp"
#include "npnet/config.hpp"
#include "npnet/dataset.hpp"
#include "npnet/trainer.hpp"

namespace npnet {

/// Dataset loading + per-seed train/valid(/test) split as the run config
/// prescribes.
struct SplitData {
    Dataset train, valid;
    std::optional<Dataset> test;
    std::uint64_t source_fingerprint = 0;
};
Dataset load_dataset(const RunConfig& cfg);
SplitData prepare_data(const RunConfig& cfg);

struct RunOutcome {
    NetworkParams model;
    ModelConfig model_config;
    MetricsLog log;
    EvalResult valid_result;
    std::optional<EvalResult> test_result;
    std::int64_t epochs = 0;
};

/// Full training run: writes manifest.json, config.resolved.toml, metrics.csv,
/// units.csv, optional norms.csv, rolling checkpoints, and model.npck into
/// out_dir; resumes from resume_path when given. out_dir may be empty to skip
/// all file output (library use).
RunOutcome run_training(const RunConfig& cfg, const std::string& out_dir,
                        const std::string& resume_path = {});

/// Compares analytic and central-difference gradients on `trials` random
/// networks shaped by the config. Returns the max relative error observed.
double gradcheck_run(const RunConfig& cfg, int trials);

/// metrics.csv header for the current hidden layer count.
std::string metrics_csv_header(std::size_t hidden_layers);
std::string metrics_csv_row(const MetricsRow& row);

} // namespace npnet
