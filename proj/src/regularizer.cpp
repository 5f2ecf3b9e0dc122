#include "npnet/regularizer.hpp"

#include <cmath>
#include <vector>

#include "npnet/common.hpp"

namespace npnet {

namespace {

double group_norm(std::span<const double> v, int p) {
    if (p == 1) {
        double acc = 0.0;
        for (double x : v) acc += std::fabs(x);
        return acc;
    }
    return vec_norm2(v);
}

double omega_layer(const Matrix& w, int p, RegMode mode, std::vector<double>& scratch) {
    double acc = 0.0;
    if (mode == RegMode::FanIn) {
        for (std::size_t j = 0; j < w.cols(); ++j) {
            w.get_col(j, scratch);
            acc += group_norm(scratch, p);
        }
    } else {
        for (std::size_t i = 0; i < w.rows(); ++i) acc += group_norm(w.row_span(i), p);
    }
    return acc;
}

} // namespace

double omega(const NetworkParams& params, const RegConfig& reg) {
    if (reg.p != 1 && reg.p != 2) throw Error("omega: p must be 1 or 2");
    std::vector<double> scratch;
    double acc = 0.0;
    for (const Matrix& w : params.weights) acc += omega_layer(w, reg.p, reg.mode, scratch);
    return reg.lambda * acc;
}

double omega(const NetworkParams& params, std::span<const double> per_layer_lambda, int p,
             RegMode mode) {
    if (p != 1 && p != 2) throw Error("omega: p must be 1 or 2");
    if (per_layer_lambda.size() != params.weights.size())
        throw Error("omega: need one lambda per layer");
    std::vector<double> scratch;
    double acc = 0.0;
    for (std::size_t l = 0; l < params.weights.size(); ++l)
        acc += per_layer_lambda[l] * omega_layer(params.weights[l], p, mode, scratch);
    return acc;
}

double objective(const NetworkParams& params, const ModelConfig& config, const RegConfig& reg,
                 const Matrix& X, std::span<const int> labels) {
    if (X.rows() == 0) throw Error("objective: dataset is empty");
    ForwardCache cache = forward(params, config, X, RunMode::Train);
    const double loss = loss_and_error(cache, labels).first;
    return loss + omega(params, reg);
}

void shrink(std::span<double> v, double s) {
    if (s < 0.0) throw Error("shrink: amount must be nonnegative");
    const double norm = vec_norm2(v);
    if (norm <= s) {
        for (double& x : v) x = 0.0;
        return;
    }
    const double factor = 1.0 - s / norm;
    for (double& x : v) x *= factor;
}

} // namespace npnet
