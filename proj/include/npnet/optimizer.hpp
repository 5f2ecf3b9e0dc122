#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "npnet/topology.hpp"

namespace npnet {

enum class OptimizerKind : std::uint8_t { AdaRad = 0, AdaRadM = 1, Sgd = 2, RmsProp = 3 };

struct AdaRadHyper {
    double alpha_r = 1.0;    // radial step size
    double alpha_phi = 30.0; // angular step size
    double lambda = 0.0;     // regularization strength
    double beta_quad = 0.005;
    double beta_arith = 0.1; // AdaRad-M only
    double epsilon = 1e-8;
    std::uint64_t nu = 1;       // units added per firing, per hidden layer
    std::uint64_t nu_freq = 1;  // fire when t % nu_freq == 0
};

/// Per-fan-in quadratic running average of the angular gradient component plus
/// the global maxima used to normalize it. One entry per unit of every layer,
/// including the output layer.
struct AdaRadState : OptimizerState {
    std::vector<std::vector<double>> phi_bar; // per layer l (0-based), size dims[l+1]
    std::vector<std::vector<double>> cap;
    double phi_max = 0.0;
    double c_max = 0.0;

    static AdaRadState make(const NetworkParams& params);

    void on_unit_added(const NetworkParams& params, std::size_t layer) override;
    void on_unit_removed(const NetworkParams& params, std::size_t layer,
                         std::size_t index) override;
    std::unique_ptr<OptimizerState> clone() const override;
    void save(BinWriter& w) const override;
    static AdaRadState load(BinReader& r);
    bool operator==(const AdaRadState&) const;
};

/// AdaRad plus an arithmetic (momentum) running average of the angular
/// component, kept orthogonal to its fan-in at all times.
struct AdaRadMState : AdaRadState {
    std::vector<Matrix> phi_tilde;              // same shapes as weights
    std::vector<std::vector<double>> arith_cap; // per layer, size dims[l+1]

    static AdaRadMState make(const NetworkParams& params);

    void on_unit_added(const NetworkParams& params, std::size_t layer) override;
    void on_unit_removed(const NetworkParams& params, std::size_t layer,
                         std::size_t index) override;
    std::unique_ptr<OptimizerState> clone() const override;
    void save(BinWriter& w) const override;
    static AdaRadMState load(BinReader& r);
    bool operator==(const AdaRadMState&) const;
};

struct RmsPropState : OptimizerState {
    std::vector<Matrix> cache; // running average of squared gradients
    std::vector<std::vector<double>> cache_scale, cache_shift;
    double beta_quad = 0.005;
    double epsilon = 1e-8;

    static RmsPropState make(const NetworkParams& params, double beta_quad, double epsilon);

    void on_unit_added(const NetworkParams& params, std::size_t layer) override;
    void on_unit_removed(const NetworkParams& params, std::size_t layer,
                         std::size_t index) override;
    std::unique_ptr<OptimizerState> clone() const override;
    void save(BinWriter& w) const override;
    static RmsPropState load(BinReader& r);
    bool operator==(const RmsPropState&) const;
};

struct SgdConfig {
    double alpha = 0.1;
    double shrink_amount = 0.0; // per-fan-in group shrink after the step
};

struct StepReport {
    std::size_t units_added = 0;
    std::size_t units_removed = 0;
};

/// Splits g into r parallel to w and phi orthogonal to it, g = r + phi.
/// A zero w gives r = 0, phi = g.
void decompose_radial_angular(std::span<const double> w, std::span<const double> g,
                              std::span<double> r, std::span<double> phi);

/// In-plane rotation w' = cos(angle) w + sin(angle) ||w|| direction, which
/// preserves ||w||. direction must be unit length and orthogonal to w;
/// violating orthogonality beyond 1e-8 relative is a hard error. Rotating a
/// zero vector is a no-op.
void rotate(std::span<double> w, std::span<const double> direction, double angle);

/// One AdaRad iteration over every layer (descending) and every fan-in column
/// (descending): decompose, update running averages, radial move, normalized
/// angular rotation, group shrink, removal of zeroed hidden units, and
/// (when t % nu_freq == 0 and additions are allowed) nu new units per hidden
/// layer. grads must carry scale = batch_fraction.
StepReport adarad_step(NetworkParams& params, const ModelConfig& config, AdaRadState& state,
                       const Gradients& grads, const AdaRadHyper& hyper, double batch_fraction,
                       std::uint64_t t, Rng& rng, bool allow_additions = true,
                       UnitLedger* ledger = nullptr, std::int64_t epoch = 0);

StepReport adaradm_step(NetworkParams& params, const ModelConfig& config, AdaRadMState& state,
                        const Gradients& grads, const AdaRadHyper& hyper, double batch_fraction,
                        std::uint64_t t, Rng& rng, bool allow_additions = true,
                        UnitLedger* ledger = nullptr, std::int64_t epoch = 0);

/// Plain gradient step, optionally followed by a group shrink of every fan-in.
void sgd_step(NetworkParams& params, const Gradients& grads, double alpha, double shrink_amount);

/// Classic per-weight normalization: w -= alpha * g / (sqrt(cache) + eps).
/// Affine normalization parameters update the same way.
void rmsprop_step(NetworkParams& params, RmsPropState& state, const Gradients& grads,
                  double alpha);

} // namespace npnet
