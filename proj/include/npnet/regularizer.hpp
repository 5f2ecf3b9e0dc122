#pragma once

#include <span>

#include "npnet/model.hpp"

namespace npnet {

enum class RegMode { FanIn, FanOut };

struct RegConfig {
    double lambda = 0.0;
    int p = 2; // 1 or 2
    RegMode mode = RegMode::FanIn;
};

/// lambda * sum over layers and units of the p-norm of each fan-in column
/// (FanIn) or fan-out row (FanOut). Affine parameters are never regularized.
double omega(const NetworkParams& params, const RegConfig& reg);

/// Same with one lambda per layer (used to check the single-lambda reduction).
double omega(const NetworkParams& params, std::span<const double> per_layer_lambda, int p,
             RegMode mode);

/// Full objective: mean loss over the whole dataset (train-mode statistics
/// computed over the full set in one pass) plus omega.
double objective(const NetworkParams& params, const ModelConfig& config, const RegConfig& reg,
                 const Matrix& X, std::span<const int> labels);

/// Group shrinkage: v -> 0 when ||v|| <= s, else v scaled so its length drops
/// by exactly s. In-place; produces exact zeros.
void shrink(std::span<double> v, double s);

} // namespace npnet
