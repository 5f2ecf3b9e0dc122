#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "npnet/model.hpp"
#include "npnet/serialize.hpp"

namespace npnet {

/// Lifetime bookkeeping for every hidden unit ever created. Units get stable
/// ids so metrics can report (birth, death) pairs after columns shift around.
class UnitLedger {
public:
    struct Record {
        std::size_t layer = 0; // 1-based hidden layer
        std::int64_t birth_epoch = 0;
        std::int64_t death_epoch = -1; // -1 = alive
    };

    void init_existing(const NetworkParams& params, std::int64_t epoch = 0);
    std::size_t on_added(std::size_t layer, std::int64_t epoch);
    void on_removed(std::size_t layer, std::size_t index, std::int64_t epoch);

    const std::vector<Record>& records() const { return records_; }
    /// Stable id of the unit currently at (layer, index).
    std::size_t id_at(std::size_t layer, std::size_t index) const;
    bool empty() const { return records_.empty(); }

    void save(BinWriter& w) const;
    static UnitLedger load(BinReader& r);
    bool operator==(const UnitLedger&) const = default;

private:
    std::vector<Record> records_;
    std::vector<std::vector<std::size_t>> live_; // per hidden layer: column -> id
};

inline bool operator==(const UnitLedger::Record& a, const UnitLedger::Record& b) {
    return a.layer == b.layer && a.birth_epoch == b.birth_epoch && a.death_epoch == b.death_epoch;
}

/// Optimizer state that must stay shape-congruent with the network. Topology
/// mutations notify it after params have been resized.
class OptimizerState {
public:
    virtual ~OptimizerState() = default;
    virtual void on_unit_added(const NetworkParams& params, std::size_t layer) = 0;
    virtual void on_unit_removed(const NetworkParams& params, std::size_t layer,
                                 std::size_t index) = 0;
    virtual std::unique_ptr<OptimizerState> clone() const = 0;
    virtual void save(BinWriter& w) const = 0;
};

/// Appends one unit to hidden layer `layer` (1-based, 1..L-1): a random fan-in
/// column with expected squared length 1 and a zero fan-out row. Returns the
/// new unit's column index.
std::size_t add_unit(NetworkParams& params, const ModelConfig& config, std::size_t layer,
                     Rng& rng, OptimizerState* state = nullptr, UnitLedger* ledger = nullptr,
                     std::int64_t epoch = 0);

/// Removes unit `index` from hidden layer `layer`: drops the fan-in column,
/// the fan-out row, and all per-unit state.
void remove_unit(NetworkParams& params, const ModelConfig& config, std::size_t layer,
                 std::size_t index, OptimizerState* state = nullptr, UnitLedger* ledger = nullptr,
                 std::int64_t epoch = 0);

/// Hidden units whose fan-in is exactly the zero vector, as (layer, index).
std::vector<std::pair<std::size_t, std::size_t>> find_zero_fanin_units(
    const NetworkParams& params);

/// Widths after conceptually stripping hidden units with a zero fan-in or a
/// zero fan-out (or both). Does not mutate.
std::vector<std::size_t> proper_dimensionality(const NetworkParams& params);

/// True iff forward outputs on the probe batch agree to within tol.
bool f_equivalent(const NetworkParams& a, const NetworkParams& b, const ModelConfig& config,
                  const Matrix& probe, double tol);

/// Rescales W_l by lambda_l / geometric_mean(lambda), turning a per-layer
/// regularization weighting into a single one without changing the function
/// (exactly so for self-similar nonlinearities without normalization).
NetworkParams rescale_layers(const NetworkParams& params, std::span<const double> lambdas);

} // namespace npnet
