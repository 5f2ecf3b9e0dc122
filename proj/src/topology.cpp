#include "npnet/topology.hpp"

#include <cmath>
#include <string>

#include "npnet/common.hpp"

namespace npnet {

void UnitLedger::init_existing(const NetworkParams& params, std::int64_t epoch) {
    records_.clear();
    live_.assign(params.hidden_layer_count(), {});
    for (std::size_t layer = 1; layer + 1 < params.dims.size(); ++layer) {
        for (std::size_t j = 0; j < params.dims[layer]; ++j) {
            live_[layer - 1].push_back(records_.size());
            records_.push_back(Record{layer, epoch, -1});
        }
    }
}

std::size_t UnitLedger::on_added(std::size_t layer, std::int64_t epoch) {
    if (layer == 0 || layer > live_.size()) throw Error("ledger: bad hidden layer index");
    const std::size_t id = records_.size();
    records_.push_back(Record{layer, epoch, -1});
    live_[layer - 1].push_back(id);
    return id;
}

void UnitLedger::on_removed(std::size_t layer, std::size_t index, std::int64_t epoch) {
    if (layer == 0 || layer > live_.size()) throw Error("ledger: bad hidden layer index");
    auto& row = live_[layer - 1];
    if (index >= row.size()) throw Error("ledger: bad unit index");
    records_[row[index]].death_epoch = epoch;
    row.erase(row.begin() + static_cast<std::ptrdiff_t>(index));
}

std::size_t UnitLedger::id_at(std::size_t layer, std::size_t index) const {
    if (layer == 0 || layer > live_.size() || index >= live_[layer - 1].size())
        throw Error("ledger: no unit at that position");
    return live_[layer - 1][index];
}

void UnitLedger::save(BinWriter& w) const {
    w.u64(records_.size());
    for (const Record& r : records_) {
        w.u64(r.layer);
        w.i64(r.birth_epoch);
        w.i64(r.death_epoch);
    }
    w.u64(live_.size());
    for (const auto& row : live_) {
        w.u64(row.size());
        for (std::size_t id : row) w.u64(id);
    }
}

UnitLedger UnitLedger::load(BinReader& r) {
    UnitLedger ledger;
    const std::uint64_t n = r.u64();
    ledger.records_.resize(n);
    for (auto& rec : ledger.records_) {
        rec.layer = r.u64();
        rec.birth_epoch = r.i64();
        rec.death_epoch = r.i64();
    }
    const std::uint64_t layers = r.u64();
    ledger.live_.resize(layers);
    for (auto& row : ledger.live_) {
        row.resize(r.u64());
        for (auto& id : row) id = r.u64();
    }
    return ledger;
}

namespace {

void check_hidden_layer(const NetworkParams& params, std::size_t layer) {
    if (layer == 0 || layer + 1 >= params.dims.size())
        throw Error("topology: layer " + std::to_string(layer) +
                    " is not a hidden layer (input/output widths are fixed)");
}

} // namespace

std::size_t add_unit(NetworkParams& params, const ModelConfig& config, std::size_t layer,
                     Rng& rng, OptimizerState* state, UnitLedger* ledger, std::int64_t epoch) {
    check_hidden_layer(params, layer);
    const std::size_t fan_rows = params.dims[layer - 1];
    std::vector<double> fan_in(fan_rows);
    const double stddev = 1.0 / std::sqrt(static_cast<double>(fan_rows));
    for (double& v : fan_in) v = rng.normal(0.0, stddev);

    params.weights[layer - 1].add_col(fan_in);
    params.weights[layer].add_row();
    params.run_mean[layer - 1].push_back(0.0);
    params.run_div[layer - 1].push_back(1.0);
    if (norm_has_affine(config.norm)) {
        params.bn_scale[layer - 1].push_back(1.0);
        params.bn_shift[layer - 1].push_back(0.0);
    }
    params.dims[layer] += 1;

    if (state) state->on_unit_added(params, layer);
    if (ledger) ledger->on_added(layer, epoch);
    return params.dims[layer] - 1;
}

void remove_unit(NetworkParams& params, const ModelConfig& config, std::size_t layer,
                 std::size_t index, OptimizerState* state, UnitLedger* ledger,
                 std::int64_t epoch) {
    check_hidden_layer(params, layer);
    if (index >= params.dims[layer])
        throw Error("topology: unit index " + std::to_string(index) + " out of range");

    params.weights[layer - 1].remove_col(index);
    params.weights[layer].remove_row(index);
    auto& mean = params.run_mean[layer - 1];
    auto& div = params.run_div[layer - 1];
    mean.erase(mean.begin() + static_cast<std::ptrdiff_t>(index));
    div.erase(div.begin() + static_cast<std::ptrdiff_t>(index));
    if (norm_has_affine(config.norm)) {
        auto& sc = params.bn_scale[layer - 1];
        auto& sh = params.bn_shift[layer - 1];
        sc.erase(sc.begin() + static_cast<std::ptrdiff_t>(index));
        sh.erase(sh.begin() + static_cast<std::ptrdiff_t>(index));
    }
    params.dims[layer] -= 1;

    if (state) state->on_unit_removed(params, layer, index);
    if (ledger) ledger->on_removed(layer, index, epoch);
}

std::vector<std::pair<std::size_t, std::size_t>> find_zero_fanin_units(
    const NetworkParams& params) {
    std::vector<std::pair<std::size_t, std::size_t>> found;
    for (std::size_t layer = 1; layer + 1 < params.dims.size(); ++layer) {
        const Matrix& w = params.weights[layer - 1];
        for (std::size_t j = 0; j < w.cols(); ++j)
            if (w.col_is_zero(j)) found.emplace_back(layer, j);
    }
    return found;
}

std::vector<std::size_t> proper_dimensionality(const NetworkParams& params) {
    std::vector<std::size_t> dims = params.dims;
    for (std::size_t layer = 1; layer + 1 < params.dims.size(); ++layer) {
        const Matrix& fan_in = params.weights[layer - 1];
        const Matrix& fan_out = params.weights[layer];
        std::size_t keep = 0;
        for (std::size_t j = 0; j < params.dims[layer]; ++j)
            if (!fan_in.col_is_zero(j) && !fan_out.row_is_zero(j)) ++keep;
        dims[layer] = keep;
    }
    return dims;
}

bool f_equivalent(const NetworkParams& a, const NetworkParams& b, const ModelConfig& config,
                  const Matrix& probe, double tol) {
    if (a.dims.front() != b.dims.front() || a.dims.back() != b.dims.back())
        throw Error("f_equivalent: input/output widths differ");
    ModelConfig ca = config;
    ca.num_layers = a.layer_count();
    ModelConfig cb = config;
    cb.num_layers = b.layer_count();
    const ForwardCache fa = forward(a, ca, probe, RunMode::Train);
    const ForwardCache fb = forward(b, cb, probe, RunMode::Train);
    if (!fa.probs.same_shape(fb.probs)) return false;
    for (std::size_t i = 0; i < fa.probs.rows(); ++i)
        for (std::size_t j = 0; j < fa.probs.cols(); ++j)
            if (std::fabs(fa.probs(i, j) - fb.probs(i, j)) > tol) return false;
    return true;
}

NetworkParams rescale_layers(const NetworkParams& params, std::span<const double> lambdas) {
    if (lambdas.size() != params.weights.size())
        throw Error("rescale_layers: need one lambda per layer");
    double log_sum = 0.0;
    for (double l : lambdas) {
        if (!(l > 0.0)) throw Error("rescale_layers: lambdas must be positive");
        log_sum += std::log(l);
    }
    const double geo_mean = std::exp(log_sum / static_cast<double>(lambdas.size()));
    NetworkParams out = params;
    for (std::size_t l = 0; l < out.weights.size(); ++l) {
        const double factor = lambdas[l] / geo_mean;
        for (double& x : out.weights[l].flat()) x *= factor;
    }
    return out;
}

} // namespace npnet
