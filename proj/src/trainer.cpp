#include "npnet/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "npnet/checkpoint.hpp"
#include "npnet/common.hpp"

namespace npnet {

std::vector<Batch> minibatches(std::size_t dataset_size, std::size_t batch_size,
                               std::uint64_t epoch_seed) {
    if (dataset_size == 0) throw Error("minibatches: empty dataset");
    if (batch_size == 0 || batch_size > dataset_size)
        throw Error("minibatches: batch size must be in [1, |D|]");
    const std::vector<std::size_t> perm = permutation(dataset_size, epoch_seed);
    std::vector<Batch> out;
    for (std::size_t start = 0; start < dataset_size; start += batch_size) {
        const std::size_t end = std::min(dataset_size, start + batch_size);
        Batch b;
        b.indices.assign(perm.begin() + static_cast<std::ptrdiff_t>(start),
                         perm.begin() + static_cast<std::ptrdiff_t>(end));
        b.fraction = static_cast<double>(end - start) / static_cast<double>(dataset_size);
        out.push_back(std::move(b));
    }
    return out;
}

EvalResult evaluate(const NetworkParams& params, const ModelConfig& config, const Dataset& data) {
    if (data.size() == 0) throw Error("evaluate: empty dataset");
    const std::size_t chunk = 4096;
    double ce_sum = 0.0;
    std::size_t errors = 0;
    std::vector<int> labels;
    for (std::size_t start = 0; start < data.size(); start += chunk) {
        const std::size_t end = std::min(data.size(), start + chunk);
        Matrix X(end - start, data.X.cols());
        labels.assign(data.y.begin() + static_cast<std::ptrdiff_t>(start),
                      data.y.begin() + static_cast<std::ptrdiff_t>(end));
        for (std::size_t i = start; i < end; ++i)
            for (std::size_t c = 0; c < data.X.cols(); ++c) X(i - start, c) = data.X(i, c);
        const ForwardCache cache = forward(params, config, X, RunMode::Eval);
        const auto [ce, err] = loss_and_error(cache, labels);
        ce_sum += ce * static_cast<double>(end - start);
        errors += err;
    }
    EvalResult r;
    r.ce = ce_sum / static_cast<double>(data.size());
    r.err_count = errors;
    r.err_rate = static_cast<double>(errors) / static_cast<double>(data.size());
    return r;
}

std::string phase_label(Phase phase, int anneal_index) {
    switch (phase) {
        case Phase::Grow: return "grow";
        case Phase::Settle: return "settle";
        case Phase::Polish: return "polish";
        case Phase::Anneal: return "anneal" + std::to_string(anneal_index);
        case Phase::Initial: return "initial";
        case Phase::Done: return "done";
    }
    return "?";
}

TrainConfig TrainConfig::from_run_config(const RunConfig& rc, std::size_t input_dim,
                                         std::size_t output_dim) {
    TrainConfig tc;
    tc.model.num_layers = static_cast<std::size_t>(rc.layers);
    tc.model.input_dim = input_dim;
    tc.model.output_dim = output_dim;
    tc.model.norm = rc.norm_mode();
    tc.hidden0.assign(rc.hidden_units.begin(), rc.hidden_units.end());
    tc.opt = rc.optimizer_kind();
    tc.hyper.alpha_phi = rc.alpha_phi;
    tc.hyper.lambda = rc.lambda;
    tc.hyper.beta_quad = rc.beta_quad;
    tc.hyper.beta_arith = rc.beta_arith;
    tc.hyper.epsilon = rc.epsilon;
    tc.hyper.nu = static_cast<std::uint64_t>(rc.nu);
    if (rc.nonparametric()) tc.hyper.alpha_r = rc.resolved_alpha_r();
    tc.additions_per_epoch = rc.additions_per_epoch;
    tc.alpha = rc.alpha;
    tc.sgd_shrink = rc.sgd_shrink;
    tc.batch_size = static_cast<std::size_t>(rc.batch_size);
    tc.patience_grow = rc.patience_grow;
    tc.patience_shrink = rc.patience_shrink;
    tc.patience_anneal = rc.patience_anneal;
    tc.anneal_factor = rc.anneal_factor;
    tc.max_anneals = rc.max_anneals;
    tc.max_epochs = rc.max_epochs;
    tc.eval_stats_momentum = rc.eval_stats_momentum;
    tc.seed = static_cast<std::uint64_t>(rc.seed);
    return tc;
}

TrainerState TrainerState::clone() const {
    TrainerState c;
    c.params = params;
    c.opt = opt ? opt->clone() : nullptr;
    c.rng = rng;
    c.t = t;
    c.ledger = ledger;
    return c;
}

namespace {

struct SgdState : OptimizerState {
    void on_unit_added(const NetworkParams&, std::size_t) override {}
    void on_unit_removed(const NetworkParams&, std::size_t, std::size_t) override {}
    std::unique_ptr<OptimizerState> clone() const override {
        return std::make_unique<SgdState>();
    }
    void save(BinWriter& w) const override {
        w.u8(static_cast<std::uint8_t>(OptimizerKind::Sgd));
    }
};

std::unique_ptr<OptimizerState> make_opt_state(OptimizerKind kind, const NetworkParams& params,
                                               const AdaRadHyper& hyper) {
    switch (kind) {
        case OptimizerKind::AdaRad:
            return std::make_unique<AdaRadState>(AdaRadState::make(params));
        case OptimizerKind::AdaRadM:
            return std::make_unique<AdaRadMState>(AdaRadMState::make(params));
        case OptimizerKind::RmsProp:
            return std::make_unique<RmsPropState>(
                RmsPropState::make(params, hyper.beta_quad, hyper.epsilon));
        case OptimizerKind::Sgd: return std::make_unique<SgdState>();
    }
    throw Error("unknown optimizer kind");
}

} // namespace

std::unique_ptr<OptimizerState> load_opt_state(BinReader& r) {
    const auto kind = static_cast<OptimizerKind>(r.u8());
    switch (kind) {
        case OptimizerKind::AdaRad:
            return std::make_unique<AdaRadState>(AdaRadState::load(r));
        case OptimizerKind::AdaRadM:
            return std::make_unique<AdaRadMState>(AdaRadMState::load(r));
        case OptimizerKind::RmsProp:
            return std::make_unique<RmsPropState>(RmsPropState::load(r));
        case OptimizerKind::Sgd: return std::make_unique<SgdState>();
    }
    throw Error("checkpoint: unknown optimizer kind tag");
}

Trainer::Trainer(TrainConfig config, const Dataset* train, const Dataset* valid)
    : config_(std::move(config)), train_(train), valid_(valid) {
    if (!train_ || train_->size() == 0) throw Error("trainer: empty training set");
    if (!valid_ || valid_->size() == 0) throw Error("trainer: empty validation set");
    if (train_->feature_count() != config_.model.input_dim)
        throw Error("trainer: dataset width does not match model input_dim");

    config_.batch_size = std::min(config_.batch_size, train_->size());
    steps_per_epoch_ = (train_->size() + config_.batch_size - 1) / config_.batch_size;
    const auto ape = static_cast<std::uint64_t>(std::max<std::int64_t>(1, config_.additions_per_epoch));
    nu_freq_ = std::max<std::uint64_t>(1, steps_per_epoch_ / ape);
    config_.hyper.nu_freq = nu_freq_;
    eff_patience_anneal_ = std::max<std::int64_t>(1, std::llround(config_.patience_anneal));

    Rng init_rng(mix_seed(config_.seed, 0x1217));
    state_.params = NetworkParams::init(config_.model, config_.hidden0, init_rng);
    state_.opt = make_opt_state(config_.opt, state_.params, config_.hyper);
    state_.rng = Rng(mix_seed(config_.seed, 0xADD5));
    state_.t = 0;
    state_.ledger.init_existing(state_.params, 0);

    sched_.phase = (config_.opt == OptimizerKind::AdaRad || config_.opt == OptimizerKind::AdaRadM)
                       ? Phase::Grow
                       : Phase::Initial;
    sched_.alpha_phi_cur = config_.hyper.alpha_phi;
    sched_.alpha_cur = config_.alpha;
    sched_.lambda_cur = config_.hyper.lambda;
}

std::uint64_t Trainer::epoch_seed(std::int64_t epoch) const {
    return mix_seed(config_.seed ^ 0xB10CB10Cull, static_cast<std::uint64_t>(epoch));
}

bool Trainer::additions_allowed() const { return sched_.phase == Phase::Grow; }

void Trainer::optimizer_step(const Gradients& grads, double fraction, EpochReport& report) {
    AdaRadHyper hyper = config_.hyper;
    hyper.lambda = sched_.lambda_cur;
    hyper.alpha_phi = sched_.alpha_phi_cur;
    switch (config_.opt) {
        case OptimizerKind::AdaRad: {
            auto& st = dynamic_cast<AdaRadState&>(*state_.opt);
            const StepReport r =
                adarad_step(state_.params, config_.model, st, grads, hyper, fraction, state_.t,
                            state_.rng, additions_allowed(), &state_.ledger, epoch_);
            report.units_added += r.units_added;
            report.units_removed += r.units_removed;
            break;
        }
        case OptimizerKind::AdaRadM: {
            auto& st = dynamic_cast<AdaRadMState&>(*state_.opt);
            const StepReport r =
                adaradm_step(state_.params, config_.model, st, grads, hyper, fraction, state_.t,
                             state_.rng, additions_allowed(), &state_.ledger, epoch_);
            report.units_added += r.units_added;
            report.units_removed += r.units_removed;
            break;
        }
        case OptimizerKind::Sgd: {
            const double shrink_amount =
                config_.sgd_shrink ? sched_.alpha_cur * sched_.lambda_cur * fraction : 0.0;
            sgd_step(state_.params, grads, sched_.alpha_cur, shrink_amount);
            break;
        }
        case OptimizerKind::RmsProp: {
            auto& st = dynamic_cast<RmsPropState&>(*state_.opt);
            rmsprop_step(state_.params, st, grads, sched_.alpha_cur);
            break;
        }
    }
}

EpochReport Trainer::run_epoch() {
    const std::vector<Batch> batches =
        minibatches(train_->size(), config_.batch_size, epoch_seed(epoch_));
    EpochReport report;
    double ce_weighted = 0.0;
    std::vector<int> labels;
    for (const Batch& batch : batches) {
        Matrix X(batch.indices.size(), train_->X.cols());
        labels.resize(batch.indices.size());
        for (std::size_t i = 0; i < batch.indices.size(); ++i) {
            const std::size_t src = batch.indices[i];
            const double* from = train_->X.row(src);
            double* to = X.row(i);
            for (std::size_t c = 0; c < train_->X.cols(); ++c) to[c] = from[c];
            labels[i] = train_->y[src];
        }
        ForwardCache cache = forward(state_.params, config_.model, X, RunMode::Train);
        if (!norm_is_none(config_.model.norm))
            update_running_stats(state_.params, cache, config_.eval_stats_momentum);
        const auto [ce, err] = loss_and_error(cache, labels);
        ce_weighted += ce * static_cast<double>(batch.indices.size());
        report.train_errors += err;
        const Gradients grads =
            backward(state_.params, config_.model, cache, labels, batch.fraction);
        ++state_.t;
        optimizer_step(grads, batch.fraction, report);
    }
    report.train_ce = ce_weighted / static_cast<double>(train_->size());
    return report;
}

EvalResult Trainer::evaluate_valid() const {
    return evaluate(state_.params, config_.model, *valid_);
}

void Trainer::snapshot_best() { best_ = state_.clone(); }

void Trainer::rewind_to_best() {
    if (!best_) return;
    state_ = best_->clone();
}

void Trainer::enter_phase(Phase phase) {
    sched_.phase = phase;
    sched_.stale = 0;
    sched_.noelim = 0;
    sched_.const_run = 0;
    sched_.prev_vce = -1;
}

bool Trainer::step(const std::function<void(const MetricsRow&, const Trainer&)>& on_epoch) {
    if (sched_.phase == Phase::Done) return false;

    ++epoch_;
    const EpochReport report = run_epoch();
    const EvalResult val = evaluate_valid();
    const auto vce = static_cast<std::int64_t>(val.err_count);

    MetricsRow row;
    row.epoch = epoch_;
    row.phase = phase_label(sched_.phase, sched_.anneal_index);
    row.train_ce = report.train_ce;
    row.train_err =
        static_cast<double>(report.train_errors) / static_cast<double>(train_->size());
    row.valid_ce = val.ce;
    row.valid_err = val.err_rate;
    row.hidden_dims.assign(state_.params.dims.begin() + 1, state_.params.dims.end() - 1);
    row.alpha_phi = (config_.opt == OptimizerKind::Sgd || config_.opt == OptimizerKind::RmsProp)
                        ? sched_.alpha_cur
                        : sched_.alpha_phi_cur;
    row.lambda = sched_.lambda_cur;
    log_.push_back(row);

    const bool improved = sched_.best_vce < 0 || vce < sched_.best_vce;
    if (improved) {
        sched_.best_vce = vce;
        snapshot_best();
        sched_.stale = 0;
    } else {
        ++sched_.stale;
    }
    sched_.noelim = report.units_removed > 0 ? 0 : sched_.noelim + 1;
    if (sched_.prev_vce >= 0 && vce == sched_.prev_vce)
        ++sched_.const_run;
    else
        sched_.const_run = 0;
    sched_.prev_vce = vce;

    switch (sched_.phase) {
        case Phase::Grow:
            if (sched_.stale >= config_.patience_grow) {
                rewind_to_best();
                enter_phase(Phase::Settle);
            }
            break;
        case Phase::Settle:
            if (sched_.stale >= config_.patience_shrink &&
                sched_.noelim >= config_.patience_shrink) {
                sched_.lambda_cur = 0.0;
                rewind_to_best();
                enter_phase(Phase::Polish);
            }
            break;
        case Phase::Polish:
            if (sched_.stale >= config_.patience_shrink) {
                rewind_to_best();
                sched_.anneal_index = 1;
                sched_.alpha_phi_cur /= config_.anneal_factor;
                sched_.alpha_cur /= config_.anneal_factor;
                enter_phase(Phase::Anneal);
            }
            break;
        case Phase::Initial:
            if (sched_.stale >= config_.patience_grow) {
                rewind_to_best();
                sched_.anneal_index = 1;
                sched_.alpha_phi_cur /= config_.anneal_factor;
                sched_.alpha_cur /= config_.anneal_factor;
                enter_phase(Phase::Anneal);
            }
            break;
        case Phase::Anneal:
            if (sched_.const_run >= eff_patience_anneal_) {
                // The annealed step no longer changes the validation error.
                rewind_to_best();
                sched_.phase = Phase::Done;
            } else if (sched_.stale >= eff_patience_anneal_) {
                rewind_to_best();
                if (sched_.anneal_index >= config_.max_anneals) {
                    sched_.phase = Phase::Done;
                } else {
                    ++sched_.anneal_index;
                    sched_.alpha_phi_cur /= config_.anneal_factor;
                    sched_.alpha_cur /= config_.anneal_factor;
                    enter_phase(Phase::Anneal);
                }
            }
            break;
        case Phase::Done: break;
    }

    if (config_.max_epochs > 0 && epoch_ >= config_.max_epochs && sched_.phase != Phase::Done) {
        rewind_to_best();
        sched_.phase = Phase::Done;
    }

    if (on_epoch) on_epoch(row, *this);
    return sched_.phase != Phase::Done;
}

void Trainer::train(const std::function<void(const MetricsRow&, const Trainer&)>& on_epoch) {
    while (step(on_epoch)) {
    }
}

} // namespace npnet
