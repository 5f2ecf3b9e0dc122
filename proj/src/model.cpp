#include "npnet/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "npnet/common.hpp"

namespace npnet {

namespace {

std::string shape_str(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

NormStats batchnorm_forward_col(std::span<const double> z, std::span<double> y) {
    const std::size_t n = z.size();
    double mean = 0.0;
    for (double v : z) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : z) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    NormStats s;
    s.mean = mean;
    s.sigma = std::sqrt(var);
    s.divisor = std::sqrt(var + kBatchNormEps);
    for (std::size_t i = 0; i < n; ++i) y[i] = (z[i] - mean) / s.divisor;
    return s;
}

// Shared Jacobian of y = (z - mean)/div for a divisor that scales with the
// column: dz = (1/div) * (dy - mean(dy) - yhat * mean(dy .* yhat)).
void norm_backward_full(std::span<const double> dy, double mean, double div,
                        std::span<const double> z, std::span<double> dz) {
    const std::size_t n = dy.size();
    double dy_mean = 0.0;
    double dyy_mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double yhat = (z[i] - mean) / div;
        dy_mean += dy[i];
        dyy_mean += dy[i] * yhat;
    }
    dy_mean /= static_cast<double>(n);
    dyy_mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double yhat = (z[i] - mean) / div;
        dz[i] = (dy[i] - dy_mean - yhat * dyy_mean) / div;
    }
}

} // namespace

std::size_t NetworkParams::total_hidden_units() const {
    std::size_t total = 0;
    for (std::size_t h = 1; h + 1 < dims.size(); ++h) total += dims[h];
    return total;
}

NetworkParams NetworkParams::init(const ModelConfig& config,
                                  std::span<const std::size_t> hidden_dims, Rng& rng) {
    if (config.num_layers < 1) throw Error("init: num_layers must be >= 1");
    if (config.input_dim < 1 || config.output_dim < 1)
        throw Error("init: input_dim and output_dim must be >= 1");
    if (hidden_dims.size() != config.num_layers - 1)
        throw Error("init: expected " + std::to_string(config.num_layers - 1) +
                    " hidden widths, got " + std::to_string(hidden_dims.size()));

    NetworkParams p;
    p.dims.push_back(config.input_dim);
    for (std::size_t h : hidden_dims) p.dims.push_back(h);
    p.dims.push_back(config.output_dim);

    for (std::size_t l = 0; l < config.num_layers; ++l) {
        Matrix w(p.dims[l], p.dims[l + 1]);
        const double stddev = 1.0 / std::sqrt(static_cast<double>(p.dims[l]));
        for (std::size_t i = 0; i < w.rows(); ++i)
            for (std::size_t j = 0; j < w.cols(); ++j) w(i, j) = rng.normal(0.0, stddev);
        p.weights.push_back(std::move(w));
    }
    for (std::size_t h = 1; h + 1 < p.dims.size(); ++h) {
        p.run_mean.emplace_back(p.dims[h], 0.0);
        p.run_div.emplace_back(p.dims[h], 1.0);
        if (norm_has_affine(config.norm)) {
            p.bn_scale.emplace_back(p.dims[h], 1.0);
            p.bn_shift.emplace_back(p.dims[h], 0.0);
        }
    }
    return p;
}

void NetworkParams::check_consistent(const ModelConfig& config) const {
    if (dims.size() != config.num_layers + 1) throw Error("params: dims/num_layers mismatch");
    if (weights.size() != config.num_layers) throw Error("params: weights/num_layers mismatch");
    if (dims.front() != config.input_dim || dims.back() != config.output_dim)
        throw Error("params: fixed input/output widths changed");
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (weights[l].rows() != dims[l] || weights[l].cols() != dims[l + 1])
            throw Error("params: W_" + std::to_string(l + 1) + " has shape " +
                        shape_str(weights[l]) + ", dims want " + std::to_string(dims[l]) + "x" +
                        std::to_string(dims[l + 1]));
    }
    const std::size_t hidden = hidden_layer_count();
    if (run_mean.size() != hidden || run_div.size() != hidden)
        throw Error("params: running statistics out of sync");
    for (std::size_t h = 0; h < hidden; ++h)
        if (run_mean[h].size() != dims[h + 1] || run_div[h].size() != dims[h + 1])
            throw Error("params: running statistics width mismatch at hidden layer " +
                        std::to_string(h + 1));
    if (norm_has_affine(config.norm)) {
        if (bn_scale.size() != hidden || bn_shift.size() != hidden)
            throw Error("params: affine parameters out of sync");
        for (std::size_t h = 0; h < hidden; ++h)
            if (bn_scale[h].size() != dims[h + 1] || bn_shift[h].size() != dims[h + 1])
                throw Error("params: affine width mismatch at hidden layer " +
                            std::to_string(h + 1));
    }
}

NormStats capnorm_forward(std::span<const double> z, std::span<double> y) {
    const std::size_t n = z.size();
    double mean = 0.0;
    for (double v : z) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : z) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    NormStats s;
    s.mean = mean;
    s.sigma = std::sqrt(var);
    s.divisor = std::max(s.sigma, 1.0);
    for (std::size_t i = 0; i < n; ++i) y[i] = (z[i] - mean) / s.divisor;
    return s;
}

void capnorm_backward(std::span<const double> dy, const NormStats& stats,
                      std::span<const double> z, std::span<double> dz) {
    const std::size_t n = dy.size();
    if (stats.sigma <= 1.0) {
        // Divisor pinned at 1: only the mean subtraction has a Jacobian.
        double dy_mean = 0.0;
        for (double v : dy) dy_mean += v;
        dy_mean /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) dz[i] = dy[i] - dy_mean;
        return;
    }
    norm_backward_full(dy, stats.mean, stats.divisor, z, dz);
}

ForwardCache forward(const NetworkParams& params, const ModelConfig& config, const Matrix& X,
                     RunMode mode) {
    params.check_consistent(config);
    if (X.rows() == 0) throw Error("forward: empty batch");
    if (X.cols() != config.input_dim)
        throw Error("forward: batch has " + std::to_string(X.cols()) + " features, model wants " +
                    std::to_string(config.input_dim));
    const bool normalizing = !norm_is_none(config.norm);
    if (mode == RunMode::Train && normalizing && X.rows() < 2)
        throw Error("forward: train-mode normalization needs batch size >= 2");

    const std::size_t L = config.num_layers;
    const std::size_t batch = X.rows();
    ForwardCache cache;
    cache.mode = mode;
    cache.batch = batch;
    cache.x.resize(L + 1);
    cache.z.resize(L);
    cache.zn.resize(L >= 1 ? L - 1 : 0);
    cache.stats.resize(L >= 1 ? L - 1 : 0);
    cache.x[0] = X;

    std::vector<double> zcol, ycol;
    for (std::size_t l = 0; l < L; ++l) {
        matmul(cache.x[l], params.weights[l], cache.z[l]);
        if (l + 1 == L) break; // output layer feeds softmax directly

        const std::size_t width = params.dims[l + 1];
        cache.stats[l].resize(width);
        Matrix& norm_out = cache.zn[l];
        if (!normalizing) {
            norm_out = cache.z[l];
        } else if (mode == RunMode::Train) {
            norm_out = Matrix(batch, width);
            zcol.resize(batch);
            ycol.resize(batch);
            for (std::size_t j = 0; j < width; ++j) {
                for (std::size_t b = 0; b < batch; ++b) zcol[b] = cache.z[l](b, j);
                NormStats s = (config.norm == NormMode::CapNorm)
                                  ? capnorm_forward(zcol, ycol)
                                  : batchnorm_forward_col(zcol, ycol);
                cache.stats[l][j] = s;
                for (std::size_t b = 0; b < batch; ++b) norm_out(b, j) = ycol[b];
            }
        } else {
            norm_out = Matrix(batch, width);
            for (std::size_t j = 0; j < width; ++j) {
                const double mean = params.run_mean[l][j];
                const double div = params.run_div[l][j];
                cache.stats[l][j] = NormStats{mean, -1.0, div};
                for (std::size_t b = 0; b < batch; ++b)
                    norm_out(b, j) = (cache.z[l](b, j) - mean) / div;
            }
        }
        if (norm_has_affine(config.norm)) {
            for (std::size_t j = 0; j < width; ++j) {
                const double g = params.bn_scale[l][j];
                const double s = params.bn_shift[l][j];
                for (std::size_t b = 0; b < batch; ++b)
                    norm_out(b, j) = g * norm_out(b, j) + s;
            }
        }
        // ReLU
        cache.x[l + 1] = Matrix(batch, width);
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t j = 0; j < width; ++j)
                cache.x[l + 1](b, j) = norm_out(b, j) > 0.0 ? norm_out(b, j) : 0.0;
    }

    // Softmax with max subtraction.
    const Matrix& zl = cache.z[L - 1];
    cache.probs = Matrix(batch, config.output_dim);
    cache.x[L] = Matrix(batch, config.output_dim);
    for (std::size_t b = 0; b < batch; ++b) {
        double m = zl(b, 0);
        for (std::size_t j = 1; j < zl.cols(); ++j) m = std::max(m, zl(b, j));
        double sum = 0.0;
        for (std::size_t j = 0; j < zl.cols(); ++j) {
            const double e = std::exp(zl(b, j) - m);
            cache.probs(b, j) = e;
            sum += e;
        }
        for (std::size_t j = 0; j < zl.cols(); ++j) {
            cache.probs(b, j) /= sum;
            cache.x[L](b, j) = cache.probs(b, j);
        }
    }
    return cache;
}

std::pair<double, std::size_t> loss_and_error(const ForwardCache& cache,
                                              std::span<const int> labels) {
    if (labels.size() != cache.batch) throw Error("loss_and_error: label count != batch size");
    const std::size_t classes = cache.probs.cols();
    double ce = 0.0;
    std::size_t errors = 0;
    for (std::size_t b = 0; b < cache.batch; ++b) {
        const int y = labels[b];
        if (y < 0 || static_cast<std::size_t>(y) >= classes)
            throw Error("loss_and_error: label " + std::to_string(y) + " outside [0, " +
                        std::to_string(classes) + ") at row " + std::to_string(b));
        ce -= std::log(cache.probs(b, static_cast<std::size_t>(y)));
        std::size_t best = 0;
        for (std::size_t j = 1; j < classes; ++j)
            if (cache.probs(b, j) > cache.probs(b, best)) best = j;
        if (best != static_cast<std::size_t>(y)) ++errors;
    }
    ce /= static_cast<double>(cache.batch);
    return {ce, errors};
}

Gradients zero_gradients_like(const NetworkParams& params) {
    Gradients g;
    for (const auto& w : params.weights) g.w.emplace_back(w.rows(), w.cols());
    for (const auto& v : params.bn_scale) g.bn_scale.emplace_back(v.size(), 0.0);
    for (const auto& v : params.bn_shift) g.bn_shift.emplace_back(v.size(), 0.0);
    return g;
}

Gradients backward(const NetworkParams& params, const ModelConfig& config,
                   const ForwardCache& cache, std::span<const int> labels, double scale) {
    params.check_consistent(config);
    if (cache.mode != RunMode::Train) throw Error("backward: cache must come from a train-mode forward");
    if (cache.x.empty() || cache.x[0].cols() != config.input_dim ||
        cache.x[0].rows() != cache.batch || cache.z.size() != config.num_layers)
        throw Error("backward: cache shape drift");
    for (std::size_t l = 0; l < config.num_layers; ++l)
        if (cache.z[l].cols() != params.dims[l + 1])
            throw Error("backward: cache width drift at layer " + std::to_string(l + 1));
    if (labels.size() != cache.batch) throw Error("backward: label count != batch size");

    const std::size_t L = config.num_layers;
    const std::size_t batch = cache.batch;
    const double coeff = scale / static_cast<double>(batch);
    Gradients grads = zero_gradients_like(params);

    // dE/dz for the output layer: scale/B * (softmax - onehot).
    Matrix h(batch, config.output_dim);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t j = 0; j < config.output_dim; ++j)
            h(b, j) = coeff * cache.probs(b, j);
        h(b, static_cast<std::size_t>(labels[b])) -= coeff;
    }

    std::vector<double> dycol(batch), dzcol(batch), zcol(batch);
    for (std::size_t l = L; l-- > 0;) {
        matmul_at_b(cache.x[l], h, grads.w[l]);
        if (l == 0) break;
        Matrix g;
        matmul_a_bt(h, params.weights[l], g); // dE/dx_l

        // Through ReLU: subgradient 0 at 0.
        const Matrix& zn = cache.zn[l - 1];
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t j = 0; j < g.cols(); ++j)
                if (!(zn(b, j) > 0.0)) g(b, j) = 0.0;

        if (norm_is_none(config.norm)) {
            h = std::move(g);
            continue;
        }

        const std::size_t width = params.dims[l];
        const bool affine = norm_has_affine(config.norm);
        h = Matrix(batch, width);
        for (std::size_t j = 0; j < width; ++j) {
            const NormStats& s = cache.stats[l - 1][j];
            for (std::size_t b = 0; b < batch; ++b) {
                dycol[b] = g(b, j);
                zcol[b] = cache.z[l - 1](b, j);
            }
            if (affine) {
                double dscale = 0.0, dshift = 0.0;
                const double gamma = params.bn_scale[l - 1][j];
                for (std::size_t b = 0; b < batch; ++b) {
                    const double yhat = (zcol[b] - s.mean) / s.divisor;
                    dscale += dycol[b] * yhat;
                    dshift += dycol[b];
                    dycol[b] *= gamma;
                }
                grads.bn_scale[l - 1][j] = dscale;
                grads.bn_shift[l - 1][j] = dshift;
            }
            if (config.norm == NormMode::CapNorm)
                capnorm_backward(dycol, s, zcol, dzcol);
            else
                norm_backward_full(dycol, s.mean, s.divisor, zcol, dzcol);
            for (std::size_t b = 0; b < batch; ++b) h(b, j) = dzcol[b];
        }
    }
    return grads;
}

Gradients numeric_gradient(const NetworkParams& params, const ModelConfig& config,
                           const Matrix& X, std::span<const int> labels, double scale, double h) {
    if (h <= 0.0) throw Error("numeric_gradient: h must be positive");
    NetworkParams work = params;
    const auto eval = [&]() {
        ForwardCache cache = forward(work, config, X, RunMode::Train);
        return scale * loss_and_error(cache, labels).first;
    };
    Gradients grads = zero_gradients_like(params);
    for (std::size_t l = 0; l < work.weights.size(); ++l) {
        Matrix& w = work.weights[l];
        for (std::size_t i = 0; i < w.rows(); ++i) {
            for (std::size_t j = 0; j < w.cols(); ++j) {
                const double orig = w(i, j);
                w(i, j) = orig + h;
                const double up = eval();
                w(i, j) = orig - h;
                const double down = eval();
                w(i, j) = orig;
                grads.w[l](i, j) = (up - down) / (2.0 * h);
            }
        }
    }
    for (std::size_t hl = 0; hl < work.bn_scale.size(); ++hl) {
        for (std::size_t j = 0; j < work.bn_scale[hl].size(); ++j) {
            double& v = work.bn_scale[hl][j];
            const double orig = v;
            v = orig + h;
            const double up = eval();
            v = orig - h;
            const double down = eval();
            v = orig;
            grads.bn_scale[hl][j] = (up - down) / (2.0 * h);
        }
        for (std::size_t j = 0; j < work.bn_shift[hl].size(); ++j) {
            double& v = work.bn_shift[hl][j];
            const double orig = v;
            v = orig + h;
            const double up = eval();
            v = orig - h;
            const double down = eval();
            v = orig;
            grads.bn_shift[hl][j] = (up - down) / (2.0 * h);
        }
    }
    return grads;
}

void update_running_stats(NetworkParams& params, const ForwardCache& cache, double momentum) {
    if (cache.mode != RunMode::Train)
        throw Error("update_running_stats: needs a train-mode cache");
    for (std::size_t hl = 0; hl < params.run_mean.size(); ++hl) {
        if (hl >= cache.stats.size() || cache.stats[hl].size() != params.run_mean[hl].size())
            throw Error("update_running_stats: cache/params width mismatch");
        for (std::size_t j = 0; j < params.run_mean[hl].size(); ++j) {
            const NormStats& s = cache.stats[hl][j];
            params.run_mean[hl][j] = (1.0 - momentum) * params.run_mean[hl][j] + momentum * s.mean;
            params.run_div[hl][j] = (1.0 - momentum) * params.run_div[hl][j] + momentum * s.divisor;
        }
    }
}

} // namespace npnet
