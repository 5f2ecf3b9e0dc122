#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "npnet/matrix.hpp"
#include "npnet/rng.hpp"

namespace npnet {

enum class NormMode { CapNorm, BatchNorm, BatchNormAffine, None };
enum class RunMode { Train, Eval };

inline bool norm_has_affine(NormMode m) { return m == NormMode::BatchNormAffine; }
inline bool norm_is_none(NormMode m) { return m == NormMode::None; }

/// Fixed architecture choices: `num_layers` weight matrices, ReLU on hidden
/// layers, a normalizer on hidden pre-activations, and a softmax +
/// cross-entropy head. There are no bias vectors; mean subtraction inside the
/// normalizer plays that role.
struct ModelConfig {
    std::size_t num_layers = 3; // L >= 1
    std::size_t input_dim = 1;
    std::size_t output_dim = 2;
    NormMode norm = NormMode::CapNorm;
};

/// The trainable state (d, W): per-layer widths plus dense weight matrices.
/// dims has L+1 entries; dims[0] and dims[L] never change, hidden entries do.
/// Running normalization statistics (used by eval-mode forward passes) and the
/// optional batch-norm affine parameters live here as well so that topology
/// mutations and checkpoints keep everything in one place.
struct NetworkParams {
    std::vector<std::size_t> dims;
    std::vector<Matrix> weights; // weights[l] is dims[l] x dims[l+1]

    // Per hidden layer h (0-based h = 0..L-2): one entry per unit.
    std::vector<std::vector<double>> run_mean; // eval-mode mean, starts at 0
    std::vector<std::vector<double>> run_div;  // eval-mode divisor, starts at 1

    // BatchNormAffine only: per-unit scale (init 1) and shift (init 0).
    std::vector<std::vector<double>> bn_scale;
    std::vector<std::vector<double>> bn_shift;

    std::size_t layer_count() const { return weights.size(); }
    std::size_t hidden_layer_count() const { return dims.size() >= 2 ? dims.size() - 2 : 0; }
    std::size_t total_hidden_units() const;

    /// Random init: entries of W_l drawn N(0, 1/sqrt(dims[l-1])) so every
    /// fan-in has expected squared length 1.
    static NetworkParams init(const ModelConfig& config, std::span<const std::size_t> hidden_dims,
                              Rng& rng);

    /// Hard-errors when shapes drifted out of sync with dims or the config.
    void check_consistent(const ModelConfig& config) const;

    bool operator==(const NetworkParams& o) const = default;
};

/// Per-unit normalization statistics for one mini-batch.
struct NormStats {
    double mean = 0.0;
    double sigma = 0.0;   // population standard deviation of the raw column
    double divisor = 1.0; // CapNorm: max(sigma, 1); BatchNorm: sqrt(var + eps)
};

/// Everything the backward pass needs from one forward pass.
struct ForwardCache {
    RunMode mode = RunMode::Train;
    std::size_t batch = 0;
    std::vector<Matrix> z;  // pre-activations per layer, z[l] is batch x dims[l+1]
    std::vector<Matrix> zn; // normalized pre-activations, hidden layers only
    std::vector<Matrix> x;  // x[0] = input, x[l] = activations of layer l
    std::vector<std::vector<NormStats>> stats; // per hidden layer, per unit
    Matrix probs; // batch x dims[L] softmax probabilities
};

struct Gradients {
    std::vector<Matrix> w;
    std::vector<std::vector<double>> bn_scale;
    std::vector<std::vector<double>> bn_shift;
};

/// Divisor floor inside the plain batch-norm variant.
inline constexpr double kBatchNormEps = 1e-5;

/// Full forward pass. Train mode computes statistics over the given batch;
/// eval mode uses the running statistics stored in params. Train mode with a
/// normalizer requires batch size >= 2.
ForwardCache forward(const NetworkParams& params, const ModelConfig& config, const Matrix& X,
                     RunMode mode);

/// Mean cross-entropy over the batch plus the misclassification count
/// (argmax ties resolve to the lowest class index).
std::pair<double, std::size_t> loss_and_error(const ForwardCache& cache,
                                              std::span<const int> labels);

/// Gradient of scale * (batch mean cross-entropy) with respect to every weight
/// (and affine parameter). Requires a train-mode cache for the same params.
Gradients backward(const NetworkParams& params, const ModelConfig& config,
                   const ForwardCache& cache, std::span<const int> labels, double scale);

/// y = (z - mean) / max(sigma, 1) over one batch column.
NormStats capnorm_forward(std::span<const double> z, std::span<double> y);

/// Backward of capnorm_forward. sigma <= 1 takes the constant-divisor branch,
/// sigma > 1 the full normalization Jacobian.
void capnorm_backward(std::span<const double> dy, const NormStats& stats,
                      std::span<const double> z, std::span<double> dz);

/// Central-difference gradient of the scaled batch loss, h per weight. Loss
/// term only; the regularizer is outside this function. Serves as the
/// independent oracle for backward().
Gradients numeric_gradient(const NetworkParams& params, const ModelConfig& config,
                           const Matrix& X, std::span<const int> labels, double scale, double h);

/// Folds one train-mode batch's statistics into the running eval statistics.
void update_running_stats(NetworkParams& params, const ForwardCache& cache, double momentum);

Gradients zero_gradients_like(const NetworkParams& params);

} // namespace npnet
