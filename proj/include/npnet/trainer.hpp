#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "npnet/config.hpp"
#include "npnet/dataset.hpp"
#include "npnet/model.hpp"
#include "npnet/optimizer.hpp"
#include "npnet/regularizer.hpp"
#include "npnet/topology.hpp"

namespace npnet {

struct Batch {
    std::vector<std::size_t> indices;
    double fraction; // |batch| / |D|
};

/// Seeded permutation of the dataset cut into consecutive batches (last one
/// possibly smaller). Every element appears exactly once per epoch.
std::vector<Batch> minibatches(std::size_t dataset_size, std::size_t batch_size,
                               std::uint64_t epoch_seed);

struct MetricsRow {
    std::int64_t epoch = 0;
    std::string phase;
    double train_ce = 0.0;
    double train_err = 0.0;
    double valid_ce = 0.0;
    double valid_err = 0.0;
    std::vector<std::size_t> hidden_dims;
    double alpha_phi = 0.0; // current angular (or baseline) step size
    double lambda = 0.0;    // current regularization strength

    bool operator==(const MetricsRow&) const = default;
};
using MetricsLog = std::vector<MetricsRow>;

struct EvalResult {
    double ce = 0.0;
    double err_rate = 0.0;
    std::size_t err_count = 0;
};

/// Deterministic eval-mode pass over a whole dataset.
EvalResult evaluate(const NetworkParams& params, const ModelConfig& config, const Dataset& data);

/// Training schedule phases. Nonparametric runs go grow -> settle -> polish ->
/// anneal; parametric baselines go initial -> anneal.
enum class Phase : std::uint8_t { Grow = 0, Settle, Polish, Anneal, Initial, Done };
std::string phase_label(Phase phase, int anneal_index);

struct TrainConfig {
    ModelConfig model;
    std::vector<std::size_t> hidden0 = {10, 10};
    OptimizerKind opt = OptimizerKind::AdaRad;
    AdaRadHyper hyper;              // nu_freq is derived from additions_per_epoch
    std::int64_t additions_per_epoch = 1;
    double alpha = 1.0;             // sgd / rmsprop step size
    bool sgd_shrink = true;
    std::size_t batch_size = 1000;
    std::int64_t patience_grow = 100;
    std::int64_t patience_shrink = 100;
    double patience_anneal = 5.0;
    double anneal_factor = 3.0;
    std::int64_t max_anneals = 12;
    std::int64_t max_epochs = 0;
    double eval_stats_momentum = 0.01;
    std::uint64_t seed = 1;

    /// Model dims come from the dataset; everything else from the run config.
    static TrainConfig from_run_config(const RunConfig& rc, std::size_t input_dim,
                                       std::size_t output_dim);
};

/// Everything a rewind restores: weights, optimizer state, the rng stream that
/// feeds unit additions, the iteration counter, and the unit ledger.
struct TrainerState {
    NetworkParams params;
    std::unique_ptr<OptimizerState> opt;
    Rng rng;
    std::uint64_t t = 0;
    UnitLedger ledger;

    TrainerState clone() const;
};

struct ScheduleState {
    Phase phase = Phase::Grow;
    int anneal_index = 0;
    double alpha_phi_cur = 0.0;
    double alpha_cur = 0.0;
    double lambda_cur = 0.0;
    std::int64_t stale = 0;     // epochs since the global best improved
    std::int64_t noelim = 0;    // epochs since a unit was eliminated
    std::int64_t const_run = 0; // consecutive epochs with unchanged VCE
    std::int64_t prev_vce = -1;
    std::int64_t best_vce = -1; // -1 = none yet

    bool operator==(const ScheduleState&) const = default;
};

struct EpochReport {
    double train_ce = 0.0;
    std::size_t train_errors = 0;
    std::size_t units_added = 0;
    std::size_t units_removed = 0;
};

struct Checkpoint; // checkpoint.hpp

class Trainer {
public:
    Trainer(TrainConfig config, const Dataset* train, const Dataset* valid);

    /// One pass over all mini-batches: forward, backward with the batch
    /// fraction as gradient scale, optimizer step. Additions fire only in
    /// phases that allow them.
    EpochReport run_epoch();

    /// Runs the staged schedule to completion, leaving the best-VCE model in
    /// place. Calls on_epoch after every validation evaluation.
    void train(const std::function<void(const MetricsRow&, const Trainer&)>& on_epoch = {});

    /// One schedule step: epoch + validation + bookkeeping + transitions.
    /// Returns false once the schedule has finished.
    bool step(const std::function<void(const MetricsRow&, const Trainer&)>& on_epoch = {});

    const TrainConfig& config() const { return config_; }
    const NetworkParams& params() const { return state_.params; }
    NetworkParams& mutable_params() { return state_.params; }
    const TrainerState& state() const { return state_; }
    const ScheduleState& schedule() const { return sched_; }
    const MetricsLog& log() const { return log_; }
    const UnitLedger& ledger() const { return state_.ledger; }
    std::int64_t epoch() const { return epoch_; }
    std::size_t steps_per_epoch() const { return steps_per_epoch_; }
    std::int64_t best_vce_count() const { return sched_.best_vce; }

    EvalResult evaluate_valid() const;

    /// Restores the best-VCE snapshot into the live state.
    void rewind_to_best();

    Checkpoint make_checkpoint(std::uint64_t config_hash) const;
    void restore(const Checkpoint& ck);

private:
    friend struct Checkpoint;

    void snapshot_best();
    void enter_phase(Phase phase);
    std::uint64_t epoch_seed(std::int64_t epoch) const;
    bool additions_allowed() const;
    void optimizer_step(const Gradients& grads, double fraction, EpochReport& report);

    TrainConfig config_;
    const Dataset* train_ = nullptr;
    const Dataset* valid_ = nullptr;

    TrainerState state_;
    std::optional<TrainerState> best_;
    ScheduleState sched_;
    MetricsLog log_;
    std::int64_t epoch_ = 0;
    std::size_t steps_per_epoch_ = 1;
    std::uint64_t nu_freq_ = 1;
    std::int64_t eff_patience_anneal_ = 1;
};

} // namespace npnet
