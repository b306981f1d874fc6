#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "volnmf/linalg.hpp"
#include "volnmf/matrix.hpp"
#include "volnmf/models.hpp"
#include "volnmf/rng.hpp"

namespace volnmf {

enum class SolveStatus { ok, numeric_failure };

enum class SolverKind { adgrad2, admm, admm_adgrad, mm };

inline const char* solver_name(SolverKind k) {
    switch (k) {
        case SolverKind::adgrad2: return "adgrad2";
        case SolverKind::admm: return "admm";
        case SolverKind::admm_adgrad: return "admm-adgrad";
        case SolverKind::mm: return "mm";
    }
    return "?";
}

inline SolverKind solver_from_string(const std::string& s) {
    if (s == "adgrad2") return SolverKind::adgrad2;
    if (s == "admm") return SolverKind::admm;
    if (s == "admm-adgrad") return SolverKind::admm_adgrad;
    if (s == "mm") return SolverKind::mm;
    throw std::invalid_argument("unknown solver \"" + s +
                                "\" (expected adgrad2|admm|admm-adgrad|mm)");
}

// adgrad2 handles the penalties that live on H; mm majorizes the W penalty;
// the ADMM split exists only for the column-stochastic MaxVol model.
inline bool solver_supports(SolverKind solver, Variant variant) {
    switch (solver) {
        case SolverKind::adgrad2:
            return variant == Variant::MaxVol || variant == Variant::NMaxVol;
        case SolverKind::admm:
        case SolverKind::admm_adgrad:
            return variant == Variant::MaxVol;
        case SolverKind::mm:
            return variant == Variant::MinVol;
    }
    return false;
}

struct SolveConfig {
    Variant variant = Variant::MaxVol;
    ModelParams params;
    double rho = 0.01;
    std::size_t outer_iters = 500;
    std::size_t inner_iters = 20;
    double fixed_point_eps = 1e-6;
    std::size_t fixed_point_max = 100;
    double tol_rel_obj = 0.0;  // 0 disables the relative-objective stop
    std::uint64_t seed = 0;
    bool lambda_autotune = false;
    double lambda_max_step = 0.1;

    void validate() const {
        params.validate();
        if (rho <= 0.0) throw std::invalid_argument("SolveConfig: rho must be > 0");
        if (outer_iters < 1) throw std::invalid_argument("SolveConfig: outer_iters must be >= 1");
        if (inner_iters < 1) throw std::invalid_argument("SolveConfig: inner_iters must be >= 1");
        if (fixed_point_eps <= 0.0)
            throw std::invalid_argument("SolveConfig: fixed_point_eps must be > 0");
        if (fixed_point_max < 1)
            throw std::invalid_argument("SolveConfig: fixed_point_max must be >= 1");
        if (tol_rel_obj < 0.0) throw std::invalid_argument("SolveConfig: tol_rel_obj must be >= 0");
        if (lambda_max_step <= 0.0 || lambda_max_step >= 1.0)
            throw std::invalid_argument("SolveConfig: lambda_max_step must be in (0, 1)");
    }
};

// Auto-tuning declares convergence once the relative objective change between
// successive outer iterates drops below this.
inline constexpr double kAutotuneConvergenceTol = 1e-4;
inline constexpr double kLambdaTargetRatio = 1.0;

struct TraceRecord {
    std::size_t iter = 0;       // 1-based outer iteration
    double seconds = 0.0;       // wall clock since solve start
    double rel_fidelity = 0.0;  // ||X - WH||_F^2 / ||X||_F^2
    double penalty = 0.0;       // variant penalty term, lambda included
    double objective = 0.0;
    std::optional<double> lagrangian;  // augmented Lagrangian / ||X||_F^2, ADMM only
};

struct ConvergenceTrace {
    std::vector<TraceRecord> records;
    bool converged = false;              // relative-objective stop fired
    bool fixed_point_saturated = false;  // some Bregman fixed point hit its cap
};

// Split-variable state of the ADMM formulation.
struct AdmmState {
    Matrix W;
    Matrix H;
    Matrix Y;
    Matrix Lambda;
};

struct SolveResult {
    Factorization factors;
    ConvergenceTrace trace;
    SolveStatus status = SolveStatus::ok;
    double final_lambda = 0.0;
    std::optional<AdmmState> admm_state;  // populated by admm_solve
};

// ---------------------------------------------------------------------------
// Adaptive accelerated projected gradient (per-block machinery)
// ---------------------------------------------------------------------------

// Per-block state for the adaptive extrapolated scheme: step estimate gamma,
// curvature estimate Gamma, their growth ratios theta/Theta, and the points
// needed to form the next difference quotients.
struct AdaptiveState {
    double gamma = 1.0;
    double Gamma = 1.0;
    double theta = 1e9;
    double Theta = 1e9;
    Matrix current;
    Matrix prev_point;
    Matrix extrap;
    Matrix prev_extrap;
    Matrix prev_grad;
};

// Projection callables receive the proposed point and the pre-step iterate
// (used by the NMaxVol row guard).
inline Matrix proj_nonnegative(Matrix m, const Matrix&) {
    clamp_nonnegative(m);
    return m;
}

inline Matrix proj_simplex_columns(Matrix m, const Matrix&) {
    project_columns_simplex_inplace(m);
    return m;
}

// Nonnegative projection that restores any (near-)vanished row from the
// pre-step iterate, keeping the row normalization of NMaxVol well defined.
inline Matrix proj_nonnegative_keep_rows(Matrix m, const Matrix& prev) {
    clamp_nonnegative(m);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double s = 0.0;
        const double* mi = m.row(i);
        for (std::size_t j = 0; j < m.cols(); ++j) s += mi[j] * mi[j];
        if (std::sqrt(s) < 1e-12) {
            const double* pi = prev.row(i);
            double* ti = m.row(i);
            for (std::size_t j = 0; j < m.cols(); ++j) ti[j] = pi[j];
        }
    }
    return m;
}

// State initialization for one block: curvature seeded from a spectral norm,
// huge theta/Theta so the first growth candidates are inactive, and a first
// point taken as a tiny projected gradient step from the start.
template <typename GradFn, typename ProjFn>
AdaptiveState adgrad_init(const Matrix& start, double curvature, GradFn&& grad, ProjFn&& project) {
    AdaptiveState st;
    st.Gamma = std::max(curvature, 1e-12);
    st.gamma = 1.0 / st.Gamma;
    st.theta = 1e9;
    st.Theta = 1e9;
    st.prev_extrap = start;
    st.prev_grad = grad(start);
    Matrix first = start;
    add_scaled(first, -1e-6, st.prev_grad);
    st.current = project(std::move(first), start);
    st.extrap = st.current;
    st.prev_point = start;
    return st;
}

// One adaptive extrapolated projected-gradient step. The step and curvature
// estimates take the min of a growth term and a difference-quotient term;
// when the quotient is 0/0 (no movement) only the growth term is kept.
template <typename GradFn, typename ProjFn>
void adgrad2_block_step(AdaptiveState& st, GradFn&& grad, ProjFn&& project) {
    const Matrix g = grad(st.extrap);
    const double num = frobenius_distance(st.extrap, st.prev_extrap);
    const double den = frobenius_distance(g, st.prev_grad);

    double gamma = st.gamma * std::sqrt(1.0 + 0.5 * st.theta);
    double curv = st.Gamma * std::sqrt(1.0 + 0.5 * st.Theta);
    if (num > 0.0 && den > 0.0) {
        gamma = std::min(gamma, num / (2.0 * den));
        curv = std::min(curv, den / (2.0 * num));
    }

    Matrix proposal = st.extrap;
    add_scaled(proposal, -gamma, g);
    Matrix next = project(std::move(proposal), st.current);

    st.theta = gamma / st.gamma;
    st.Theta = curv / st.Gamma;
    st.prev_extrap = st.extrap;
    st.prev_grad = g;

    const double mix = std::sqrt(gamma * curv);
    const double momentum = (1.0 - mix) / (1.0 + mix);
    Matrix extrap = next;
    extrap *= (1.0 + momentum);
    add_scaled(extrap, -momentum, st.current);

    st.prev_point = st.current;
    st.current = std::move(next);
    st.extrap = std::move(extrap);
    st.gamma = gamma;
    st.Gamma = curv;
}

namespace detail {

// Runs one block's inner loop: at most `iters` steps, stopping early when the
// iterate stalls. The stored gradient at the previous extrapolation point is
// refreshed first since the other block changed the objective in between.
template <typename GradFn, typename ProjFn>
void adgrad_run_block(AdaptiveState& st, std::size_t iters, GradFn&& grad, ProjFn&& project) {
    st.prev_grad = grad(st.prev_extrap);
    for (std::size_t i = 0; i < iters; ++i) {
        const Matrix before = st.current;
        adgrad2_block_step(st, grad, project);
        const double moved = frobenius_distance(st.current, before);
        if (moved <= 1e-9 * std::max(frobenius_norm(before), 1e-12)) break;
    }
}

inline void validate_start(const Matrix& x, const Matrix& w0, const Matrix& h0, Variant variant,
                           std::size_t rank) {
    if (w0.rows() != x.rows() || h0.cols() != x.cols() || w0.cols() != h0.rows())
        throw std::invalid_argument("solver: dimension mismatch between X, W0 and H0");
    if (w0.cols() != rank)
        throw std::invalid_argument("solver: W0/H0 rank does not match config rank");
    x.require_finite();
    w0.require_finite();
    h0.require_finite();
    for (std::size_t i = 0; i < w0.size(); ++i)
        if (w0.data()[i] < -1e-9)
            throw std::invalid_argument("solver: W0 has negative entries");
    for (std::size_t i = 0; i < h0.size(); ++i)
        if (h0.data()[i] < -1e-9)
            throw std::invalid_argument("solver: H0 has negative entries");
    if (variant != Variant::NMaxVol) {
        for (std::size_t j = 0; j < h0.cols(); ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < h0.rows(); ++i) s += h0(i, j);
            if (std::abs(s - 1.0) > 1e-6)
                throw std::invalid_argument("solver: H0 columns must sum to 1 for this variant");
        }
    }
}

// NMaxVol gradient with row norms clamped from below; extrapolated points may
// graze zero rows even though iterates are guarded.
inline Matrix grad_H_nmaxvol_guarded(const Matrix& gram_w, const Matrix& wtx, const Matrix& h,
                                     double lambda, double delta) {
    Matrix g = matmul(gram_w, h);
    g -= wtx;
    if (lambda == 0.0) return g;

    const std::size_t r = h.rows();
    const std::size_t n = h.cols();
    std::vector<double> norms(r);
    Matrix ht = h;
    for (std::size_t i = 0; i < r; ++i) {
        double s = 0.0;
        const double* hi = h.row(i);
        for (std::size_t j = 0; j < n; ++j) s += hi[j] * hi[j];
        norms[i] = std::max(std::sqrt(s), 1e-12);
        double* ti = ht.row(i);
        for (std::size_t j = 0; j < n; ++j) ti[j] /= norms[i];
    }
    Matrix gram = matmul_transB(ht, ht);
    Matrix shifted = gram;
    add_diagonal(shifted, delta);
    const Matrix inv = spd_inverse(shifted);
    Matrix coeff = inv;
    const Matrix inv_gram = matmul(inv, gram);
    for (std::size_t i = 0; i < r; ++i) coeff(i, i) -= inv_gram(i, i);
    Matrix pen = matmul(coeff, ht);
    for (std::size_t i = 0; i < r; ++i) {
        const double c = -2.0 * lambda / norms[i];
        const double* pi = pen.row(i);
        double* gi = g.row(i);
        for (std::size_t j = 0; j < n; ++j) gi[j] += c * pi[j];
    }
    return g;
}

class SolveClock {
public:
    SolveClock() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Lambda auto-tuning stand-in
// ---------------------------------------------------------------------------

// Rescales lambda toward target_ratio * fidelity / penalty, capped to a
// +/- max_step relative move per call. Leaves lambda alone when the penalty
// magnitude vanishes.
inline double autotune_lambda(double fidelity_term, double penalty_magnitude,
                              double current_lambda, double target_ratio = kLambdaTargetRatio,
                              double max_step = 0.1) {
    if (target_ratio <= 0.0)
        throw std::invalid_argument("autotune_lambda: target_ratio must be > 0");
    if (!(penalty_magnitude > 0.0)) return current_lambda;
    double factor = target_ratio * fidelity_term / penalty_magnitude;
    factor = std::min(std::max(factor, 1.0 - max_step), 1.0 + max_step);
    return current_lambda * factor;
}

namespace detail {

struct OuterLoopBookkeeping {
    double prev_objective = 0.0;
    bool have_prev = false;

    // Returns true when the relative-objective stopping rule fires.
    bool update(double objective, const SolveConfig& config) {
        bool stop = false;
        if (have_prev) {
            const double rel = std::abs(objective - prev_objective) /
                               std::max(std::abs(prev_objective), 1e-300);
            if (config.tol_rel_obj > 0.0 && rel < config.tol_rel_obj) stop = true;
            if (config.lambda_autotune && rel < kAutotuneConvergenceTol) stop = true;
        }
        prev_objective = objective;
        have_prev = true;
        return stop;
    }
};

inline void apply_autotune(const SolveConfig& config, Variant variant, const Matrix& w,
                           const Matrix& h, double fid, double target_ratio, double& lambda) {
    if (!config.lambda_autotune) return;
    ModelParams unit = config.params;
    unit.lambda = 1.0;
    const double pen_mag = std::abs(penalty_value(variant, w, h, unit));
    const double fid_term = variant == Variant::MinVol ? fid : 0.5 * fid;
    lambda = autotune_lambda(fid_term, pen_mag, lambda, target_ratio, config.lambda_max_step);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Adgrad2: adaptive two-block scheme for MaxVol and NMaxVol
// ---------------------------------------------------------------------------

inline SolveResult adgrad2_solve(const Matrix& x, const Matrix& w0, const Matrix& h0,
                                 const SolveConfig& config,
                                 double lambda_target_ratio = kLambdaTargetRatio) {
    config.validate();
    if (config.variant != Variant::MaxVol && config.variant != Variant::NMaxVol)
        throw std::invalid_argument("adgrad2_solve: supports maxvol and nmaxvol only");
    detail::validate_start(x, w0, h0, config.variant, config.params.rank);
    const bool maxvol = config.variant == Variant::MaxVol;

    Matrix w = w0;
    clamp_nonnegative(w);
    Matrix h = h0;
    if (maxvol)
        project_columns_simplex_inplace(h);
    else
        clamp_nonnegative(h);

    double lambda = config.params.lambda;
    const double delta = config.params.delta;
    const double normx2 = std::max(frobenius_norm_sq(x), 1e-300);

    // Precomputed per-block quantities; the closures see updates through the
    // captured references.
    Matrix gram_h = matmul_transB(h, h);
    Matrix xht = matmul_transB(x, h);
    Matrix gram_w = matmul_transA(w, w);
    Matrix wtx = matmul_transA(w, x);

    auto grad_w_fn = [&](const Matrix& wp) {
        Matrix g = matmul(wp, gram_h);
        g -= xht;
        return g;
    };
    auto grad_h_fn = [&](const Matrix& hp) {
        if (maxvol) {
            Matrix g = matmul(gram_w, hp);
            g -= wtx;
            if (lambda != 0.0) {
                Matrix gram = matmul_transB(hp, hp);
                add_diagonal(gram, delta);
                const Matrix sol = cholesky_solve(cholesky(gram), hp);
                add_scaled(g, -2.0 * lambda, sol);
            }
            return g;
        }
        return detail::grad_H_nmaxvol_guarded(gram_w, wtx, hp, lambda, delta);
    };
    auto proj_h = [&](Matrix m, const Matrix& prev) {
        return maxvol ? proj_simplex_columns(std::move(m), prev)
                      : proj_nonnegative_keep_rows(std::move(m), prev);
    };

    detail::SolveClock clock;
    AdaptiveState st_w = adgrad_init(w, spectral_norm(gram_h), grad_w_fn, proj_nonnegative);
    AdaptiveState st_h = adgrad_init(h, spectral_norm(gram_w), grad_h_fn, proj_h);
    w = st_w.current;
    h = st_h.current;

    SolveResult result;
    result.status = SolveStatus::ok;
    Matrix last_w = w, last_h = h;
    detail::OuterLoopBookkeeping book;

    for (std::size_t k = 1; k <= config.outer_iters; ++k) {
        // Numeric breakdowns (non-finite iterates, collapsed pivots at
        // extreme lambda) end the run gracefully with the last finite
        // iterate instead of escaping.
        try {
            gram_h = matmul_transB(h, h);
            xht = matmul_transB(x, h);
            detail::adgrad_run_block(st_w, config.inner_iters, grad_w_fn, proj_nonnegative);
            w = st_w.current;

            gram_w = matmul_transA(w, w);
            wtx = matmul_transA(w, x);
            detail::adgrad_run_block(st_h, config.inner_iters, grad_h_fn, proj_h);
            h = st_h.current;

            if (!w.is_finite() || !h.is_finite()) {
                result.status = SolveStatus::numeric_failure;
                break;
            }

            const double fid = fidelity_norm_sq(x, w, h);
            ModelParams prm = config.params;
            prm.lambda = lambda;
            const double pen = penalty_value(config.variant, w, h, prm);
            TraceRecord rec;
            rec.iter = k;
            rec.seconds = clock.seconds();
            rec.rel_fidelity = fid / normx2;
            rec.penalty = pen;
            rec.objective = 0.5 * fid + pen;
            result.trace.records.push_back(rec);

            if (!std::isfinite(rec.objective)) {
                result.status = SolveStatus::numeric_failure;
                break;
            }
            last_w = w;
            last_h = h;

            detail::apply_autotune(config, config.variant, w, h, fid, lambda_target_ratio,
                                   lambda);
            if (book.update(rec.objective, config)) {
                result.trace.converged = true;
                break;
            }
        } catch (const std::exception&) {
            result.status = SolveStatus::numeric_failure;
            break;
        }
    }

    result.factors = Factorization{std::move(last_w), std::move(last_h)};
    result.final_lambda = lambda;
    return result;
}

// ---------------------------------------------------------------------------
// TITAN W-update (extrapolated projected gradient, Nesterov alpha-sequence)
// ---------------------------------------------------------------------------

inline void titan_update_W(const Matrix& x, const Matrix& h, Matrix& w, Matrix& w_prev,
                           double& alpha1, std::size_t iters, double tol = 1e-9) {
    const Matrix gram = matmul_transB(h, h);
    const Matrix b = matmul_transB(x, h);
    const double lw = std::max(spectral_norm(gram), 1e-12);
    for (std::size_t i = 0; i < iters; ++i) {
        const double a0 = alpha1;
        alpha1 = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * a0 * a0));
        const double beta = (a0 - 1.0) / alpha1;

        Matrix wbar = w;
        wbar *= (1.0 + beta);
        add_scaled(wbar, -beta, w_prev);
        w_prev = w;

        Matrix step = b - matmul(wbar, gram);
        w = std::move(wbar);
        add_scaled(w, 1.0 / lw, step);
        clamp_nonnegative(w);

        const double moved = frobenius_distance(w, w_prev);
        if (moved <= tol * std::max(frobenius_norm(w_prev), 1e-12)) break;
    }
}

// ---------------------------------------------------------------------------
// Bregman surrogate H-update (quartic kernel) and its fixed point
// ---------------------------------------------------------------------------

struct BregmanResult {
    Matrix H;
    std::size_t passes = 0;
    bool converged = false;
};

// Minimizes the Bregman surrogate of the augmented Lagrangian over the
// column-stochastic set. The solution has the form
//   H = [Q - e nu^T]_+ / (alpha_t ||H||_F^2 + sigma_t),
// so ||H||_F^2 is resolved by a fixed point: each pass recomputes the
// column thresholds nu for the current scale. Q is sorted once up front.
inline BregmanResult bregman_update_H(const Matrix& x, const Matrix& w, const Matrix& h,
                                      const Matrix& y, const Matrix& multipliers, double rho,
                                      double eps = 1e-6, std::size_t max_passes = 100) {
    if (rho <= 0.0) throw std::invalid_argument("bregman_update_H: rho must be > 0");
    const std::size_t r = h.rows();
    const std::size_t n = h.cols();

    const double sigma = 2.0 * spectral_norm(y);
    const double alpha = 6.0;
    const double alpha_t = rho * alpha;
    const Matrix wtw = matmul_transA(w, w);
    const double sigma_t = rho * sigma + spectral_norm(wtw - transpose(2.0 * multipliers));

    // grad of the surrogate's smooth part at h
    Matrix grad_u = matmul_transA(w, matmul(w, h) - x);
    const Matrix msym = multipliers + transpose(multipliers);
    add_scaled(grad_u, -1.0, matmul(msym, h));
    Matrix gg = matmul_transB(h, h);
    gg -= y;
    add_scaled(grad_u, 2.0 * rho, matmul(gg, h));

    Matrix q = h;
    q *= alpha_t * frobenius_norm_sq(h) + sigma_t;
    q -= grad_u;

    // one sort per column, reused by every fixed-point pass
    std::vector<std::vector<double>> sorted(n, std::vector<double>(r));
    std::vector<std::vector<double>> prefix(n, std::vector<double>(r));
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < r; ++i) sorted[j][i] = q(i, j);
        std::stable_sort(sorted[j].begin(), sorted[j].end(), std::greater<double>());
        std::partial_sum(sorted[j].begin(), sorted[j].end(), prefix[j].begin());
    }

    double s = frobenius_norm_sq(h);
    std::vector<double> nu(n, 0.0);
    double c_used = alpha_t * s + sigma_t;
    BregmanResult out;
    for (std::size_t pass = 1; pass <= max_passes; ++pass) {
        out.passes = pass;
        const double c = alpha_t * s + sigma_t;
        for (std::size_t j = 0; j < n; ++j)
            nu[j] = simplex_threshold_sorted(sorted[j], prefix[j], c);
        c_used = c;
        double sum_sq = 0.0;
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const double v = std::max(q(i, j) - nu[j], 0.0);
                sum_sq += v * v;
            }
        const double s_new = sum_sq / (c * c);
        const double rel = std::abs(s_new - s) / std::max(s, 1e-300);
        s = s_new;
        if (rel <= eps) {
            out.converged = true;
            break;
        }
    }

    out.H = Matrix(r, n);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out.H(i, j) = std::max(q(i, j) - nu[j], 0.0) / c_used;
    return out;
}

// ---------------------------------------------------------------------------
// ADMM Y-update: spectral prox of -lambda logdet(. + delta I)
// ---------------------------------------------------------------------------

inline Matrix admm_update_Y(const Matrix& h, const Matrix& multipliers, double lambda,
                            double delta, double rho) {
    if (rho <= 0.0) throw std::invalid_argument("admm_update_Y: rho must be > 0");
    if (delta < 0.0) throw std::invalid_argument("admm_update_Y: delta must be >= 0");
    if (lambda < 0.0) throw std::invalid_argument("admm_update_Y: lambda must be >= 0");

    Matrix m = matmul_transB(h, h);
    add_diagonal(m, delta);
    add_scaled(m, -1.0 / rho, multipliers);
    symmetrize(m);

    if (lambda > 0.0) {
        Matrix y = phi_plus_matrix(m, lambda / rho);
        add_diagonal(y, -delta);
        return y;
    }
    // lambda = 0 turns the prox into the identity; valid only while it keeps
    // Y + delta I positive semidefinite.
    const SymEig eig = sym_eig(m);
    const double top = std::max(std::abs(eig.eigenvalues.front()), 1.0);
    if (eig.eigenvalues.back() < -1e-12 * top)
        throw std::invalid_argument(
            "admm_update_Y: lambda = 0 leaves Y + delta I indefinite; use adgrad2 or mm instead");
    Matrix y = m;
    add_diagonal(y, -delta);
    return y;
}

// ---------------------------------------------------------------------------
// ADMM solve (MaxVol only)
// ---------------------------------------------------------------------------

enum class AdmmHUpdate { bregman, adgrad };

inline SolveResult admm_solve(const Matrix& x, const Matrix& w0, const Matrix& h0,
                              const SolveConfig& config,
                              AdmmHUpdate h_update = AdmmHUpdate::bregman,
                              double lambda_target_ratio = kLambdaTargetRatio) {
    config.validate();
    if (config.variant != Variant::MaxVol)
        throw std::invalid_argument("admm_solve: supports maxvol only");
    detail::validate_start(x, w0, h0, config.variant, config.params.rank);

    const std::size_t r = config.params.rank;
    Matrix w = w0;
    clamp_nonnegative(w);
    Matrix h = h0;
    project_columns_simplex_inplace(h);

    double lambda = config.params.lambda;
    const double delta = config.params.delta;
    const double rho = config.rho;
    const double normx2 = std::max(frobenius_norm_sq(x), 1e-300);

    Matrix y = matmul_transB(h, h);
    Matrix mult(r, r);
    Matrix w_prev = w;
    double alpha1 = 1.0;

    detail::SolveClock clock;
    SolveResult result;
    result.status = SolveStatus::ok;
    Matrix last_w = w, last_h = h;
    detail::OuterLoopBookkeeping book;

    for (std::size_t k = 1; k <= config.outer_iters; ++k) {
        try {
            titan_update_W(x, h, w, w_prev, alpha1, config.inner_iters);

            if (h_update == AdmmHUpdate::bregman) {
                for (std::size_t i = 0; i < config.inner_iters; ++i) {
                    BregmanResult br = bregman_update_H(x, w, h, y, mult, rho,
                                                        config.fixed_point_eps,
                                                        config.fixed_point_max);
                    h = std::move(br.H);
                    if (!br.converged) result.trace.fixed_point_saturated = true;
                }
            } else {
                const Matrix gram_w = matmul_transA(w, w);
                const Matrix wtx = matmul_transA(w, x);
                const Matrix msym = mult + transpose(mult);
                auto grad = [&](const Matrix& hp) {
                    Matrix g = matmul(gram_w, hp);
                    g -= wtx;
                    add_scaled(g, -1.0, matmul(msym, hp));
                    Matrix gg = matmul_transB(hp, hp);
                    gg -= y;
                    add_scaled(g, 2.0 * rho, matmul(gg, hp));
                    return g;
                };
                AdaptiveState st = adgrad_init(h, spectral_norm(gram_w), grad,
                                               proj_simplex_columns);
                detail::adgrad_run_block(st, config.inner_iters, grad, proj_simplex_columns);
                h = st.current;
            }

            if (!w.is_finite() || !h.is_finite()) {
                result.status = SolveStatus::numeric_failure;
                break;
            }

            y = admm_update_Y(h, mult, lambda, delta, rho);
            Matrix resid = y - matmul_transB(h, h);
            add_scaled(mult, rho, resid);

            if (!y.is_finite() || !mult.is_finite()) {
                result.status = SolveStatus::numeric_failure;
                break;
            }

            const double fid = fidelity_norm_sq(x, w, h);
            ModelParams prm = config.params;
            prm.lambda = lambda;
            const double pen = penalty_value(Variant::MaxVol, w, h, prm);
            Matrix y_shift = y;
            add_diagonal(y_shift, delta);
            const double pen_y = -lambda * logdet_spd(y_shift);
            const double lagr = 0.5 * fid + pen_y + dot(resid, mult) +
                                0.5 * rho * frobenius_norm_sq(resid);

            TraceRecord rec;
            rec.iter = k;
            rec.seconds = clock.seconds();
            rec.rel_fidelity = fid / normx2;
            rec.penalty = pen;
            rec.objective = 0.5 * fid + pen;
            rec.lagrangian = lagr / normx2;
            result.trace.records.push_back(rec);

            if (!std::isfinite(rec.objective)) {
                result.status = SolveStatus::numeric_failure;
                break;
            }
            last_w = w;
            last_h = h;
            result.admm_state = AdmmState{w, h, y, mult};

            detail::apply_autotune(config, Variant::MaxVol, w, h, fid, lambda_target_ratio,
                                   lambda);
            if (book.update(rec.objective, config)) {
                result.trace.converged = true;
                break;
            }
        } catch (const std::exception&) {
            result.status = SolveStatus::numeric_failure;
            break;
        }
    }

    result.factors = Factorization{std::move(last_w), std::move(last_h)};
    result.final_lambda = lambda;
    return result;
}

// ---------------------------------------------------------------------------
// MinVol majorization-minimization
// ---------------------------------------------------------------------------

// Linearizes logdet(W^T W + delta I) at the current iterate and minimizes the
// resulting quadratic by projected gradient; every step decreases the true
// objective, so the trace is monotone.
inline SolveResult minvol_solve(const Matrix& x, const Matrix& w0, const Matrix& h0,
                                const SolveConfig& config,
                                double lambda_target_ratio = kLambdaTargetRatio) {
    config.validate();
    if (config.variant != Variant::MinVol)
        throw std::invalid_argument("minvol_solve: supports minvol only");
    detail::validate_start(x, w0, h0, config.variant, config.params.rank);

    Matrix w = w0;
    clamp_nonnegative(w);
    Matrix h = h0;
    project_columns_simplex_inplace(h);

    double lambda = config.params.lambda;
    const double delta = config.params.delta;
    const double normx2 = std::max(frobenius_norm_sq(x), 1e-300);

    detail::SolveClock clock;
    SolveResult result;
    result.status = SolveStatus::ok;
    Matrix last_w = w, last_h = h;
    detail::OuterLoopBookkeeping book;

    for (std::size_t k = 1; k <= config.outer_iters; ++k) {
        try {
            // W block on the majorized objective
            Matrix gram_w = matmul_transA(w, w);
            add_diagonal(gram_w, delta);
            const Matrix a = spd_inverse(gram_w);
            const double na = spectral_norm(a);
            const Matrix gram_h = matmul_transB(h, h);
            const double ngh = spectral_norm(gram_h);
            const Matrix b = matmul_transB(x, h);
            const double step_w = 1.0 / std::max(ngh + lambda * na, 1e-12);
            for (std::size_t i = 0; i < config.inner_iters; ++i) {
                Matrix grad = matmul(w, gram_h);
                grad -= b;
                add_scaled(grad, lambda, matmul(w, a));
                Matrix w_new = w;
                add_scaled(w_new, -step_w, grad);
                clamp_nonnegative(w_new);
                const double moved = frobenius_distance(w_new, w);
                w = std::move(w_new);
                if (moved <= 1e-9 * std::max(frobenius_norm(w), 1e-12)) break;
            }

            // H block: plain simplex-projected gradient on the fit term
            const Matrix gw = matmul_transA(w, w);
            const double ngw = spectral_norm(gw);
            if (ngw > 1e-300) {
                const Matrix c = matmul_transA(w, x);
                const double step_h = 1.0 / ngw;
                for (std::size_t i = 0; i < config.inner_iters; ++i) {
                    Matrix grad = matmul(gw, h);
                    grad -= c;
                    Matrix h_new = h;
                    add_scaled(h_new, -step_h, grad);
                    project_columns_simplex_inplace(h_new);
                    const double moved = frobenius_distance(h_new, h);
                    h = std::move(h_new);
                    if (moved <= 1e-9 * std::max(frobenius_norm(h), 1e-12)) break;
                }
            }

            if (!w.is_finite() || !h.is_finite()) {
                result.status = SolveStatus::numeric_failure;
                break;
            }

            const double fid = fidelity_norm_sq(x, w, h);
            ModelParams prm = config.params;
            prm.lambda = lambda;
            const double pen = penalty_value(Variant::MinVol, w, h, prm);
            TraceRecord rec;
            rec.iter = k;
            rec.seconds = clock.seconds();
            rec.rel_fidelity = fid / normx2;
            rec.penalty = pen;
            rec.objective = fid + pen;
            result.trace.records.push_back(rec);

            if (!std::isfinite(rec.objective)) {
                result.status = SolveStatus::numeric_failure;
                break;
            }
            last_w = w;
            last_h = h;

            detail::apply_autotune(config, Variant::MinVol, w, h, fid, lambda_target_ratio,
                                   lambda);
            if (book.update(rec.objective, config)) {
                result.trace.converged = true;
                break;
            }
        } catch (const std::exception&) {
            result.status = SolveStatus::numeric_failure;
            break;
        }
    }

    result.factors = Factorization{std::move(last_w), std::move(last_h)};
    result.final_lambda = lambda;
    return result;
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

// W0 takes r columns of X chosen by furthest-point selection (seeded first
// pick, then greedy max-min distance, ties to the lowest index); H0 projects
// a uniform random matrix onto the variant's feasible set.
inline std::pair<Matrix, Matrix> initialize(const Matrix& x, std::size_t r, std::uint64_t seed,
                                            Variant variant) {
    const std::size_t m = x.rows();
    const std::size_t n = x.cols();
    if (r < 1 || r > std::min(m, n))
        throw std::invalid_argument("initialize: rank must satisfy 1 <= r <= min(m, n)");
    x.require_finite();

    Rng rng(seed);
    std::vector<std::size_t> chosen;
    chosen.reserve(r);
    chosen.push_back(static_cast<std::size_t>(rng.uniform01() * static_cast<double>(n)) % n);

    std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
    auto account = [&](std::size_t c) {
        for (std::size_t j = 0; j < n; ++j) {
            double d = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                const double diff = x(i, j) - x(i, c);
                d += diff * diff;
            }
            min_dist[j] = std::min(min_dist[j], d);
        }
    };
    account(chosen[0]);
    while (chosen.size() < r) {
        std::size_t best = 0;
        double best_d = -1.0;
        for (std::size_t j = 0; j < n; ++j)
            if (min_dist[j] > best_d) {
                best_d = min_dist[j];
                best = j;
            }
        chosen.push_back(best);
        account(best);
    }

    Matrix w0(m, r);
    for (std::size_t k = 0; k < r; ++k)
        for (std::size_t i = 0; i < m; ++i) w0(i, k) = x(i, chosen[k]);
    clamp_nonnegative(w0);  // noisy data can dip below zero

    Matrix h0(r, n);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < n; ++j) h0(i, j) = rng.uniform01();
    if (variant == Variant::NMaxVol)
        clamp_nonnegative(h0);
    else
        project_columns_simplex_inplace(h0);
    return {std::move(w0), std::move(h0)};
}

// Successive-projection column selection: repeatedly takes the column with
// the largest residual norm after projecting out the span of the columns
// chosen so far. Scale-aware, so weak endmembers surface once the strong
// directions are removed. Deterministic.
inline std::vector<std::size_t> select_columns_spa(const Matrix& x, std::size_t r) {
    const std::size_t m = x.rows();
    const std::size_t n = x.cols();
    if (r < 1 || r > std::min(m, n))
        throw std::invalid_argument("select_columns_spa: rank must satisfy 1 <= r <= min(m, n)");
    Matrix resid = x;
    std::vector<std::size_t> chosen;
    chosen.reserve(r);
    std::vector<double> u(m);
    for (std::size_t k = 0; k < r; ++k) {
        std::size_t best = 0;
        double best_norm = -1.0;
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < m; ++i) s += resid(i, j) * resid(i, j);
            if (s > best_norm) {
                best_norm = s;
                best = j;
            }
        }
        chosen.push_back(best);
        double norm = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            u[i] = resid(i, best);
            norm += u[i] * u[i];
        }
        norm = std::sqrt(std::max(norm, 1e-300));
        for (std::size_t i = 0; i < m; ++i) u[i] /= norm;
        for (std::size_t j = 0; j < n; ++j) {
            double d = 0.0;
            for (std::size_t i = 0; i < m; ++i) d += u[i] * resid(i, j);
            for (std::size_t i = 0; i < m; ++i) resid(i, j) -= d * u[i];
        }
    }
    return chosen;
}

// W0 from successive-projection columns (clamped), H0 warm-started by a few
// projected NNLS steps against W0. Without the warm start the first W block
// fits the random H0 and wipes out whatever the column selection found.
inline std::pair<Matrix, Matrix> initialize_spa(const Matrix& x, std::size_t r,
                                                std::uint64_t seed, Variant variant,
                                                std::size_t warm_steps = 30) {
    auto [w0, h0] = initialize(x, r, seed, variant);
    const std::vector<std::size_t> chosen = select_columns_spa(x, r);
    for (std::size_t k = 0; k < r; ++k)
        for (std::size_t i = 0; i < x.rows(); ++i) w0(i, k) = x(i, chosen[k]);
    clamp_nonnegative(w0);

    const Matrix gram = matmul_transA(w0, w0);
    const Matrix wtx = matmul_transA(w0, x);
    const double lip = std::max(spectral_norm(gram), 1e-12);
    for (std::size_t it = 0; it < warm_steps; ++it) {
        Matrix grad = matmul(gram, h0);
        grad -= wtx;
        Matrix next = h0;
        add_scaled(next, -1.0 / lip, grad);
        if (variant == Variant::NMaxVol)
            next = proj_nonnegative_keep_rows(std::move(next), h0);
        else
            project_columns_simplex_inplace(next);
        h0 = std::move(next);
    }
    return {std::move(w0), std::move(h0)};
}

// Dispatch used by the CLI and the benchmark protocols.
inline SolveResult run_solver(SolverKind solver, const Matrix& x, const Matrix& w0,
                              const Matrix& h0, const SolveConfig& config,
                              double lambda_target_ratio = kLambdaTargetRatio) {
    if (!solver_supports(solver, config.variant))
        throw std::invalid_argument(std::string("solver ") + solver_name(solver) +
                                    " does not support variant " +
                                    variant_name(config.variant));
    switch (solver) {
        case SolverKind::adgrad2:
            return adgrad2_solve(x, w0, h0, config, lambda_target_ratio);
        case SolverKind::admm:
            return admm_solve(x, w0, h0, config, AdmmHUpdate::bregman, lambda_target_ratio);
        case SolverKind::admm_adgrad:
            return admm_solve(x, w0, h0, config, AdmmHUpdate::adgrad, lambda_target_ratio);
        case SolverKind::mm:
            return minvol_solve(x, w0, h0, config, lambda_target_ratio);
    }
    throw std::logic_error("run_solver: unreachable");
}

}  // namespace volnmf
