#include "npnet/optimizer.hpp"

#include <cmath>
#include <string>

#include "npnet/common.hpp"
#include "npnet/regularizer.hpp"

namespace npnet {

// ---------------------------------------------------------------------------
// AdaRadState

AdaRadState AdaRadState::make(const NetworkParams& params) {
    AdaRadState s;
    for (std::size_t l = 0; l + 1 < params.dims.size(); ++l) {
        s.phi_bar.emplace_back(params.dims[l + 1], 0.0);
        s.cap.emplace_back(params.dims[l + 1], 0.0);
    }
    return s;
}

void AdaRadState::on_unit_added(const NetworkParams&, std::size_t layer) {
    phi_bar[layer - 1].push_back(0.0);
    cap[layer - 1].push_back(0.0);
}

void AdaRadState::on_unit_removed(const NetworkParams&, std::size_t layer, std::size_t index) {
    auto& pb = phi_bar[layer - 1];
    auto& c = cap[layer - 1];
    pb.erase(pb.begin() + static_cast<std::ptrdiff_t>(index));
    c.erase(c.begin() + static_cast<std::ptrdiff_t>(index));
}

std::unique_ptr<OptimizerState> AdaRadState::clone() const {
    return std::make_unique<AdaRadState>(*this);
}

void AdaRadState::save(BinWriter& w) const {
    w.u8(static_cast<std::uint8_t>(OptimizerKind::AdaRad));
    w.f64(phi_max);
    w.f64(c_max);
    w.u64(phi_bar.size());
    for (std::size_t l = 0; l < phi_bar.size(); ++l) {
        w.f64_vec(phi_bar[l]);
        w.f64_vec(cap[l]);
    }
}

AdaRadState AdaRadState::load(BinReader& r) {
    AdaRadState s;
    s.phi_max = r.f64();
    s.c_max = r.f64();
    const std::uint64_t layers = r.u64();
    for (std::uint64_t l = 0; l < layers; ++l) {
        s.phi_bar.push_back(r.f64_vec());
        s.cap.push_back(r.f64_vec());
    }
    return s;
}

bool AdaRadState::operator==(const AdaRadState& o) const {
    return phi_bar == o.phi_bar && cap == o.cap && phi_max == o.phi_max && c_max == o.c_max;
}

// ---------------------------------------------------------------------------
// AdaRadMState

AdaRadMState AdaRadMState::make(const NetworkParams& params) {
    AdaRadMState s;
    static_cast<AdaRadState&>(s) = AdaRadState::make(params);
    for (std::size_t l = 0; l + 1 < params.dims.size(); ++l) {
        s.phi_tilde.emplace_back(params.dims[l], params.dims[l + 1]);
        s.arith_cap.emplace_back(params.dims[l + 1], 0.0);
    }
    return s;
}

void AdaRadMState::on_unit_added(const NetworkParams& params, std::size_t layer) {
    AdaRadState::on_unit_added(params, layer);
    arith_cap[layer - 1].push_back(0.0);
    phi_tilde[layer - 1].add_col();
    phi_tilde[layer].add_row();
}

void AdaRadMState::on_unit_removed(const NetworkParams& params, std::size_t layer,
                                   std::size_t index) {
    AdaRadState::on_unit_removed(params, layer, index);
    auto& a = arith_cap[layer - 1];
    a.erase(a.begin() + static_cast<std::ptrdiff_t>(index));
    phi_tilde[layer - 1].remove_col(index);
    phi_tilde[layer].remove_row(index);

    // Dropping a row of the downstream matrices breaks the orthogonality of
    // the remaining momentum columns; re-orthogonalize them against the
    // current fan-ins (Gram-Schmidt).
    const Matrix& w = params.weights[layer];
    Matrix& pt = phi_tilde[layer];
    std::vector<double> wcol, pcol;
    for (std::size_t j = 0; j < w.cols(); ++j) {
        w.get_col(j, wcol);
        const double ww = vec_dot(wcol, wcol);
        if (ww == 0.0) continue;
        pt.get_col(j, pcol);
        const double c = vec_dot(pcol, wcol) / ww;
        for (std::size_t i = 0; i < pcol.size(); ++i) pcol[i] -= c * wcol[i];
        pt.set_col(j, pcol);
    }
}

std::unique_ptr<OptimizerState> AdaRadMState::clone() const {
    return std::make_unique<AdaRadMState>(*this);
}

void AdaRadMState::save(BinWriter& w) const {
    w.u8(static_cast<std::uint8_t>(OptimizerKind::AdaRadM));
    w.f64(phi_max);
    w.f64(c_max);
    w.u64(phi_bar.size());
    for (std::size_t l = 0; l < phi_bar.size(); ++l) {
        w.f64_vec(phi_bar[l]);
        w.f64_vec(cap[l]);
        w.f64_vec(arith_cap[l]);
        w.matrix(phi_tilde[l]);
    }
}

AdaRadMState AdaRadMState::load(BinReader& r) {
    AdaRadMState s;
    s.phi_max = r.f64();
    s.c_max = r.f64();
    const std::uint64_t layers = r.u64();
    for (std::uint64_t l = 0; l < layers; ++l) {
        s.phi_bar.push_back(r.f64_vec());
        s.cap.push_back(r.f64_vec());
        s.arith_cap.push_back(r.f64_vec());
        s.phi_tilde.push_back(r.matrix());
    }
    return s;
}

bool AdaRadMState::operator==(const AdaRadMState& o) const {
    return AdaRadState::operator==(o) && phi_tilde == o.phi_tilde && arith_cap == o.arith_cap;
}

// ---------------------------------------------------------------------------
// RmsPropState

RmsPropState RmsPropState::make(const NetworkParams& params, double beta_quad, double epsilon) {
    RmsPropState s;
    s.beta_quad = beta_quad;
    s.epsilon = epsilon;
    for (const Matrix& w : params.weights) s.cache.emplace_back(w.rows(), w.cols());
    for (const auto& v : params.bn_scale) s.cache_scale.emplace_back(v.size(), 0.0);
    for (const auto& v : params.bn_shift) s.cache_shift.emplace_back(v.size(), 0.0);
    return s;
}

void RmsPropState::on_unit_added(const NetworkParams&, std::size_t layer) {
    cache[layer - 1].add_col();
    cache[layer].add_row();
    if (!cache_scale.empty()) {
        cache_scale[layer - 1].push_back(0.0);
        cache_shift[layer - 1].push_back(0.0);
    }
}

void RmsPropState::on_unit_removed(const NetworkParams&, std::size_t layer, std::size_t index) {
    cache[layer - 1].remove_col(index);
    cache[layer].remove_row(index);
    if (!cache_scale.empty()) {
        auto& cs = cache_scale[layer - 1];
        auto& ch = cache_shift[layer - 1];
        cs.erase(cs.begin() + static_cast<std::ptrdiff_t>(index));
        ch.erase(ch.begin() + static_cast<std::ptrdiff_t>(index));
    }
}

std::unique_ptr<OptimizerState> RmsPropState::clone() const {
    return std::make_unique<RmsPropState>(*this);
}

void RmsPropState::save(BinWriter& w) const {
    w.u8(static_cast<std::uint8_t>(OptimizerKind::RmsProp));
    w.f64(beta_quad);
    w.f64(epsilon);
    w.u64(cache.size());
    for (const Matrix& m : cache) w.matrix(m);
    w.u64(cache_scale.size());
    for (std::size_t l = 0; l < cache_scale.size(); ++l) {
        w.f64_vec(cache_scale[l]);
        w.f64_vec(cache_shift[l]);
    }
}

RmsPropState RmsPropState::load(BinReader& r) {
    RmsPropState s;
    s.beta_quad = r.f64();
    s.epsilon = r.f64();
    const std::uint64_t layers = r.u64();
    for (std::uint64_t l = 0; l < layers; ++l) s.cache.push_back(r.matrix());
    const std::uint64_t affine = r.u64();
    for (std::uint64_t l = 0; l < affine; ++l) {
        s.cache_scale.push_back(r.f64_vec());
        s.cache_shift.push_back(r.f64_vec());
    }
    return s;
}

bool RmsPropState::operator==(const RmsPropState& o) const {
    return cache == o.cache && cache_scale == o.cache_scale && cache_shift == o.cache_shift &&
           beta_quad == o.beta_quad && epsilon == o.epsilon;
}

// ---------------------------------------------------------------------------
// Geometry primitives

void decompose_radial_angular(std::span<const double> w, std::span<const double> g,
                              std::span<double> r, std::span<double> phi) {
    if (w.size() != g.size() || r.size() != g.size() || phi.size() != g.size())
        throw Error("decompose: size mismatch");
    const double ww = vec_dot(w, w);
    if (ww == 0.0) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            r[i] = 0.0;
            phi[i] = g[i];
        }
        return;
    }
    const double coef = vec_dot(g, w) / ww;
    for (std::size_t i = 0; i < g.size(); ++i) {
        r[i] = coef * w[i];
        phi[i] = g[i] - r[i];
    }
}

void rotate(std::span<double> w, std::span<const double> direction, double angle) {
    if (w.size() != direction.size()) throw Error("rotate: size mismatch");
    const double wnorm = vec_norm2(w);
    if (wnorm == 0.0) return;
    const double dnorm = vec_norm2(direction);
    const double inner = vec_dot(w, direction);
    if (std::fabs(inner) > 1e-8 * wnorm * dnorm)
        throw Error("rotate: direction not orthogonal to the vector (ratio " +
                    std::to_string(std::fabs(inner) / (wnorm * dnorm)) + ")");
    if (angle == 0.0) return;
    const double c = std::cos(angle);
    const double s = std::sin(angle) * wnorm;
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = c * w[i] + s * direction[i];
}

// ---------------------------------------------------------------------------
// AdaRad / AdaRad-M steps

namespace {

struct ColumnScratch {
    std::vector<double> w, g, r, phi, phi_adj, dir, w_hat, phi_t;
    void resize(std::size_t n) {
        w.resize(n);
        g.resize(n);
        r.resize(n);
        phi.resize(n);
        phi_adj.resize(n);
        dir.resize(n);
        w_hat.resize(n);
        phi_t.resize(n);
    }
};

void check_grads_match(const NetworkParams& params, const Gradients& grads) {
    if (grads.w.size() != params.weights.size())
        throw Error("step: gradient layer count mismatch");
    for (std::size_t l = 0; l < grads.w.size(); ++l)
        if (!grads.w[l].same_shape(params.weights[l]))
            throw Error("step: gradient shape drift at layer " + std::to_string(l + 1));
}

// Shared body of adarad_step and adaradm_step; `momentum` selects the variant.
StepReport radial_angular_step(NetworkParams& params, const ModelConfig& config,
                               AdaRadState& state, AdaRadMState* momentum, const Gradients& grads,
                               const AdaRadHyper& hyper, double batch_fraction, std::uint64_t t,
                               Rng& rng, bool allow_additions, UnitLedger* ledger,
                               std::int64_t epoch) {
    params.check_consistent(config);
    check_grads_match(params, grads);
    if (hyper.nu_freq == 0) throw Error("step: nu_freq must be >= 1");
    const std::size_t L = params.layer_count();
    const double shrink_amount = hyper.alpha_r * hyper.lambda * batch_fraction;
    StepReport report;
    ColumnScratch scratch;

    for (std::size_t l = L; l >= 1; --l) {
        Matrix& w_mat = params.weights[l - 1];
        const Matrix& g_mat = grads.w[l - 1];
        for (std::size_t jj = w_mat.cols(); jj-- > 0;) {
            const std::size_t j = jj;
            const std::size_t n = w_mat.rows();
            scratch.resize(n);
            auto& w = scratch.w;
            auto& g = scratch.g;
            w_mat.get_col(j, w);
            g_mat.get_col(j, g);

            decompose_radial_angular(w, g, scratch.r, scratch.phi);

            double& pb = state.phi_bar[l - 1][j];
            double& c = state.cap[l - 1][j];
            const double phi_sq = vec_dot(scratch.phi, scratch.phi);
            pb = (1.0 - hyper.beta_quad) * pb + hyper.beta_quad * phi_sq;
            c = (1.0 - hyper.beta_quad) * c + hyper.beta_quad;
            state.phi_max = std::max(state.phi_max, pb);
            state.c_max = std::max(state.c_max, c);

            const double target = std::sqrt(state.phi_max / state.c_max);
            const double own = std::sqrt(pb / c);
            const double coef = target / (own + hyper.epsilon);

            if (momentum) {
                Matrix& pt_mat = momentum->phi_tilde[l - 1];
                pt_mat.get_col(j, scratch.phi_t);
                double& a = momentum->arith_cap[l - 1][j];
                for (std::size_t i = 0; i < n; ++i)
                    scratch.phi_t[i] =
                        (1.0 - hyper.beta_arith) * scratch.phi_t[i] + hyper.beta_arith * scratch.phi[i];
                a = (1.0 - hyper.beta_arith) * a + hyper.beta_arith;
                for (std::size_t i = 0; i < n; ++i)
                    scratch.phi_adj[i] = coef * (scratch.phi_t[i] / a);
            } else {
                for (std::size_t i = 0; i < n; ++i) scratch.phi_adj[i] = coef * scratch.phi[i];
            }

            // Radial shift: no normalization, preserves the direction of w.
            for (std::size_t i = 0; i < n; ++i) w[i] -= hyper.alpha_r * scratch.r[i];

            const double adj_norm = vec_norm2(scratch.phi_adj);
            const double w_norm = vec_norm2(w);
            if (adj_norm > 0.0 && w_norm > 0.0) {
                // Pre-rotation unit direction of w. Exactly in this frame the
                // angular component has no w-part; scrub the floating-point
                // residue off the rotation direction so the rotation stays
                // norm-preserving even when phi is cancellation noise (a
                // one-dimensional fan-in is the extreme case: nothing
                // orthogonal survives and the rotation is skipped).
                for (std::size_t i = 0; i < n; ++i) scratch.w_hat[i] = w[i] / w_norm;
                for (std::size_t i = 0; i < n; ++i) scratch.dir[i] = -scratch.phi_adj[i] / adj_norm;
                const double par = vec_dot(scratch.dir, scratch.w_hat);
                for (std::size_t i = 0; i < n; ++i) scratch.dir[i] -= par * scratch.w_hat[i];
                const double dir_norm = vec_norm2(scratch.dir);
                if (dir_norm > 1e-6) {
                    for (std::size_t i = 0; i < n; ++i) scratch.dir[i] /= dir_norm;
                    const double theta = hyper.alpha_phi * adj_norm;
                    rotate(w, scratch.dir, theta);
                    if (momentum) {
                        // Rotating the momentum column around the pre-rotation
                        // direction by the same angle keeps it orthogonal to
                        // the rotated fan-in.
                        rotate(scratch.phi_t, scratch.w_hat, theta);
                    }
                }
            }
            if (momentum) {
                // Scrub floating-point drift off the momentum column against
                // the current (post-rotation) fan-in; in exact arithmetic it
                // is already orthogonal.
                const double wn = vec_norm2(w);
                if (wn > 0.0) {
                    for (std::size_t i = 0; i < n; ++i) scratch.w_hat[i] = w[i] / wn;
                    for (int pass = 0; pass < 2; ++pass) {
                        const double par = vec_dot(scratch.phi_t, scratch.w_hat);
                        for (std::size_t i = 0; i < n; ++i)
                            scratch.phi_t[i] -= par * scratch.w_hat[i];
                    }
                }
            }

            shrink(std::span<double>(w), shrink_amount);
            w_mat.set_col(j, w);
            if (momentum) momentum->phi_tilde[l - 1].set_col(j, scratch.phi_t);

            bool zero = true;
            for (double v : w)
                if (v != 0.0) {
                    zero = false;
                    break;
                }
            if (l < L && zero) {
                remove_unit(params, config, l, j, &state, ledger, epoch);
                ++report.units_removed;
            }
        }

        if (allow_additions && l < L && hyper.nu > 0 && t % hyper.nu_freq == 0) {
            for (std::uint64_t k = 0; k < hyper.nu; ++k) {
                add_unit(params, config, l, rng, &state, ledger, epoch);
                ++report.units_added;
            }
        }
    }
    return report;
}

} // namespace

StepReport adarad_step(NetworkParams& params, const ModelConfig& config, AdaRadState& state,
                       const Gradients& grads, const AdaRadHyper& hyper, double batch_fraction,
                       std::uint64_t t, Rng& rng, bool allow_additions, UnitLedger* ledger,
                       std::int64_t epoch) {
    if (norm_has_affine(config.norm))
        throw Error("adarad_step: affine normalization parameters are not supported");
    return radial_angular_step(params, config, state, nullptr, grads, hyper, batch_fraction, t,
                               rng, allow_additions, ledger, epoch);
}

StepReport adaradm_step(NetworkParams& params, const ModelConfig& config, AdaRadMState& state,
                        const Gradients& grads, const AdaRadHyper& hyper, double batch_fraction,
                        std::uint64_t t, Rng& rng, bool allow_additions, UnitLedger* ledger,
                        std::int64_t epoch) {
    if (norm_has_affine(config.norm))
        throw Error("adaradm_step: affine normalization parameters are not supported");
    return radial_angular_step(params, config, state, &state, grads, hyper, batch_fraction, t,
                               rng, allow_additions, ledger, epoch);
}

void sgd_step(NetworkParams& params, const Gradients& grads, double alpha, double shrink_amount) {
    check_grads_match(params, grads);
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        auto w = params.weights[l].flat();
        auto g = grads.w[l].flat();
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= alpha * g[i];
    }
    for (std::size_t hl = 0; hl < params.bn_scale.size(); ++hl) {
        for (std::size_t j = 0; j < params.bn_scale[hl].size(); ++j) {
            params.bn_scale[hl][j] -= alpha * grads.bn_scale[hl][j];
            params.bn_shift[hl][j] -= alpha * grads.bn_shift[hl][j];
        }
    }
    if (shrink_amount > 0.0) {
        std::vector<double> col;
        for (Matrix& w : params.weights) {
            for (std::size_t j = 0; j < w.cols(); ++j) {
                w.get_col(j, col);
                shrink(col, shrink_amount);
                w.set_col(j, col);
            }
        }
    }
}

void rmsprop_step(NetworkParams& params, RmsPropState& state, const Gradients& grads,
                  double alpha) {
    check_grads_match(params, grads);
    const double b = state.beta_quad;
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        auto w = params.weights[l].flat();
        auto g = grads.w[l].flat();
        auto c = state.cache[l].flat();
        for (std::size_t i = 0; i < w.size(); ++i) {
            c[i] = (1.0 - b) * c[i] + b * g[i] * g[i];
            w[i] -= alpha * g[i] / (std::sqrt(c[i]) + state.epsilon);
        }
    }
    for (std::size_t hl = 0; hl < params.bn_scale.size(); ++hl) {
        for (std::size_t j = 0; j < params.bn_scale[hl].size(); ++j) {
            double& cs = state.cache_scale[hl][j];
            double& ch = state.cache_shift[hl][j];
            const double gs = grads.bn_scale[hl][j];
            const double gh = grads.bn_shift[hl][j];
            cs = (1.0 - b) * cs + b * gs * gs;
            ch = (1.0 - b) * ch + b * gh * gh;
            params.bn_scale[hl][j] -= alpha * gs / (std::sqrt(cs) + state.epsilon);
            params.bn_shift[hl][j] -= alpha * gh / (std::sqrt(ch) + state.epsilon);
        }
    }
}

} // namespace npnet
