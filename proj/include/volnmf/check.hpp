#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "volnmf/linalg.hpp"
#include "volnmf/matrix.hpp"
#include "volnmf/models.hpp"
#include "volnmf/rng.hpp"
#include "volnmf/solvers.hpp"

namespace volnmf {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

namespace checkdetail {

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

inline Matrix random_matrix(Rng& rng, std::size_t m, std::size_t n, double lo, double hi) {
    Matrix a(m, n);
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] = rng.uniform(lo, hi);
    return a;
}

// Refining grid search for min ||x - q||^2 over {x >= 0, sum x = s}, r in
// {2, 3}. Purely enumerative; independent of the sort-based projector.
inline std::vector<double> grid_project(const std::vector<double>& q, double s) {
    const std::size_t r = q.size();
    auto objective = [&](const std::vector<double>& x) {
        double v = 0.0;
        for (std::size_t i = 0; i < r; ++i) v += (x[i] - q[i]) * (x[i] - q[i]);
        return v;
    };
    const int cells = 64;
    double lo0 = 0.0, hi0 = s, lo1 = 0.0, hi1 = s;
    std::vector<double> best(r, 0.0);
    for (int round = 0; round < 10; ++round) {
        double best_val = std::numeric_limits<double>::infinity();
        double b0 = lo0, b1 = lo1;
        for (int i = 0; i <= cells; ++i) {
            const double x0 = lo0 + (hi0 - lo0) * i / cells;
            if (r == 2) {
                const double x1 = s - x0;
                if (x1 < 0.0) continue;
                const std::vector<double> x{x0, x1};
                const double v = objective(x);
                if (v < best_val) {
                    best_val = v;
                    b0 = x0;
                    best = x;
                }
            } else {
                for (int j = 0; j <= cells; ++j) {
                    const double x1 = lo1 + (hi1 - lo1) * j / cells;
                    const double x2 = s - x0 - x1;
                    if (x2 < 0.0) continue;
                    const std::vector<double> x{x0, x1, x2};
                    const double v = objective(x);
                    if (v < best_val) {
                        best_val = v;
                        b0 = x0;
                        b1 = x1;
                        best = x;
                    }
                }
            }
        }
        const double w0 = (hi0 - lo0) / cells;
        lo0 = std::max(0.0, b0 - 2 * w0);
        hi0 = std::min(s, b0 + 2 * w0);
        if (r == 3) {
            const double w1 = (hi1 - lo1) / cells;
            lo1 = std::max(0.0, b1 - 2 * w1);
            hi1 = std::min(s, b1 + 2 * w1);
        }
    }
    return best;
}

// Central finite differences over all entries of `at`.
template <typename F>
Matrix numeric_grad(F&& f, const Matrix& at) {
    Matrix g(at.rows(), at.cols());
    Matrix work = at;
    for (std::size_t i = 0; i < at.size(); ++i) {
        const double v = at.data()[i];
        const double h = 1e-6 * std::max(1.0, std::abs(v));
        work.data()[i] = v + h;
        const double fp = f(work);
        work.data()[i] = v - h;
        const double fm = f(work);
        work.data()[i] = v;
        g.data()[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

}  // namespace checkdetail

// ---------------------------------------------------------------------------
// Multi-start driver for the high-lambda clustering oracles. At lambda = 1e4
// the landscape is combinatorial: single runs of a first-order method settle
// in near-balanced clusterings one or two columns off the optimum, so the
// oracle solves from several deterministic starts and keeps the best final
// objective (the model objective separates the optimum by ~lambda/n, so it
// ranks candidates reliably).
// ---------------------------------------------------------------------------

inline SolveResult solve_multistart(SolverKind solver, const Matrix& x, const SolveConfig& config,
                                    std::size_t restarts, std::uint64_t seed = 0) {
    SolveResult best;
    double best_obj = std::numeric_limits<double>::infinity();
    bool have = false;
    const std::size_t r = config.params.rank;
    for (std::size_t s = 0; s < restarts; ++s) {
        auto [w0, h0] = initialize(x, r, seed + s, config.variant);
        if (config.variant == Variant::MaxVol) {
            // jittered uniform start keeps the early flow near-symmetric
            Rng rng(seed * 1315423911ULL + s);
            Matrix h(r, x.cols(), 1.0 / static_cast<double>(r));
            for (std::size_t i = 0; i < h.size(); ++i)
                h.data()[i] += 0.1 * rng.uniform(-1.0, 1.0);
            project_columns_simplex_inplace(h);
            h0 = std::move(h);
        }
        SolveResult res = run_solver(solver, x, w0, h0, config);
        if (res.status != SolveStatus::ok || res.trace.records.empty()) continue;
        const double obj = res.trace.records.back().objective;
        if (!have || obj < best_obj) {
            best = std::move(res);
            best_obj = obj;
            have = true;
        }
    }
    if (!have) throw std::runtime_error("solve_multistart: every restart failed");
    return best;
}

// ---------------------------------------------------------------------------
// Suites
// ---------------------------------------------------------------------------

inline std::vector<CheckResult> check_projections(std::uint64_t seed = 0) {
    std::vector<CheckResult> out;
    Rng rng(seed + 101);

    {
        // Position agreement bottoms out near sqrt(eps) because the QP is
        // flat at its minimum, so the oracle also checks that the projector
        // is at least as optimal as the best grid point.
        double worst_pos = 0.0;
        double worst_gap = -1e300;
        for (int trial = 0; trial < 24; ++trial) {
            const std::size_t r = trial % 2 == 0 ? 2 : 3;
            const double s = 0.5 + 2.0 * rng.uniform01();
            std::vector<double> q(r);
            for (auto& v : q) v = rng.uniform(-2.0, 2.0);
            const auto p = project_scaled_simplex(q, s);
            const auto g = checkdetail::grid_project(q, s);
            double f_proj = 0.0, f_grid = 0.0;
            for (std::size_t i = 0; i < r; ++i) {
                worst_pos = std::max(worst_pos, std::abs(p.x[i] - g[i]));
                f_proj += (p.x[i] - q[i]) * (p.x[i] - q[i]);
                f_grid += (g[i] - q[i]) * (g[i] - q[i]);
            }
            worst_gap = std::max(worst_gap, f_proj - f_grid);
        }
        out.push_back({"projection grid-QP agreement (r=2,3)",
                       worst_pos <= 1e-6 && worst_gap <= 1e-12,
                       "max position deviation " + checkdetail::fmt(worst_pos) +
                           ", objective gap " + checkdetail::fmt(worst_gap)});
    }

    {
        double worst_sum = 0.0;
        bool slack_ok = true, nonneg_ok = true;
        for (int trial = 0; trial < 200; ++trial) {
            const std::size_t r = 1 + static_cast<std::size_t>(rng.uniform01() * 50);
            const double s = 0.1 + 5.0 * rng.uniform01();
            std::vector<double> q(r);
            for (auto& v : q) v = rng.uniform(-3.0, 3.0);
            const auto p = project_scaled_simplex(q, s);
            double sum = 0.0;
            for (std::size_t i = 0; i < r; ++i) {
                if (p.x[i] < 0.0) nonneg_ok = false;
                if (p.x[i] > 0.0 && p.x[i] != q[i] - p.nu) slack_ok = false;
                sum += p.x[i];
            }
            worst_sum = std::max(worst_sum, std::abs(sum - s) / s);
        }
        out.push_back({"scaled-simplex KKT residuals (r<=50)",
                       worst_sum <= 1e-10 && slack_ok && nonneg_ok,
                       "max relative sum error " + checkdetail::fmt(worst_sum)});
    }

    {
        double worst_cols = 0.0, worst_identity = 0.0;
        for (int trial = 0; trial < 50; ++trial) {
            const std::size_t m = 4 + static_cast<std::size_t>(rng.uniform01() * 5);
            const std::size_t n = 4 + static_cast<std::size_t>(rng.uniform01() * 8);
            const std::size_t r = 2 + static_cast<std::size_t>(rng.uniform01() * 3);
            const Matrix x = checkdetail::random_matrix(rng, m, n, 0.0, 1.0);
            const Matrix w = checkdetail::random_matrix(rng, m, r, 0.0, 1.0);
            Matrix h = checkdetail::random_matrix(rng, r, n, 0.0, 1.0);
            project_columns_simplex_inplace(h);
            Matrix y = matmul_transB(h, h);
            Matrix noise = checkdetail::random_matrix(rng, r, r, -0.2, 0.2);
            symmetrize(noise);
            y += noise;
            Matrix mult = checkdetail::random_matrix(rng, r, r, -0.5, 0.5);
            symmetrize(mult);
            const double rho = 0.05 + rng.uniform01();

            const BregmanResult br = bregman_update_H(x, w, h, y, mult, rho, 1e-10, 400);
            for (std::size_t j = 0; j < n; ++j) {
                double sum = 0.0;
                for (std::size_t i = 0; i < r; ++i) sum += br.H(i, j);
                worst_cols = std::max(worst_cols, std::abs(sum - 1.0));
            }

            const double sigma = 2.0 * spectral_norm(y);
            const double alpha_t = rho * 6.0;
            const Matrix wtw = matmul_transA(w, w);
            const double sigma_t = rho * sigma + spectral_norm(wtw - transpose(2.0 * mult));
            Matrix grad_u = matmul_transA(w, matmul(w, h) - x);
            const Matrix msym = mult + transpose(mult);
            add_scaled(grad_u, -1.0, matmul(msym, h));
            Matrix gg = matmul_transB(h, h);
            gg -= y;
            add_scaled(grad_u, 2.0 * rho, matmul(gg, h));
            Matrix q = h;
            q *= alpha_t * frobenius_norm_sq(h) + sigma_t;
            q -= grad_u;

            const double c = alpha_t * frobenius_norm_sq(br.H) + sigma_t;
            Matrix rebuilt(r, n);
            std::vector<double> col(r), prefix(r);
            for (std::size_t j = 0; j < n; ++j) {
                for (std::size_t i = 0; i < r; ++i) col[i] = q(i, j);
                std::vector<double> sorted = col;
                std::stable_sort(sorted.begin(), sorted.end(), std::greater<double>());
                std::partial_sum(sorted.begin(), sorted.end(), prefix.begin());
                const double nu = simplex_threshold_sorted(sorted, prefix, c);
                for (std::size_t i = 0; i < r; ++i)
                    rebuilt(i, j) = std::max(col[i] - nu, 0.0) / c;
            }
            worst_identity = std::max(worst_identity,
                                      frobenius_distance(br.H, rebuilt) /
                                          std::max(frobenius_norm(br.H), 1e-12));
        }
        out.push_back({"Bregman H-update stochasticity + structural identity",
                       worst_cols <= 1e-8 && worst_identity <= 1e-6,
                       "col-sum " + checkdetail::fmt(worst_cols) + ", identity " +
                           checkdetail::fmt(worst_identity)});
    }

    {
        double worst = 0.0;
        for (int i = 0; i < 500; ++i) {
            const double x = rng.uniform(-10.0, 10.0);
            const double gamma = rng.uniform(1e-3, 10.0);
            const double z = phi_plus(x, gamma);
            worst = std::max(worst, std::abs(z * (z - x) - gamma) / std::max(1.0, gamma));
        }
        out.push_back({"phi_plus root identity", worst <= 1e-12,
                       "max residual " + checkdetail::fmt(worst)});
    }
    return out;
}

inline std::vector<CheckResult> check_gradients(std::uint64_t seed = 0) {
    std::vector<CheckResult> out;
    Rng rng(seed + 202);
    auto run_variant = [&](Variant variant, const std::string& label) {
        double worst = 0.0;
        for (int trial = 0; trial < 20; ++trial) {
            const std::size_t m = 4 + static_cast<std::size_t>(rng.uniform01() * 9);
            const std::size_t n = 4 + static_cast<std::size_t>(rng.uniform01() * 9);
            const std::size_t r = 2 + static_cast<std::size_t>(rng.uniform01() * 4);
            const Matrix x = checkdetail::random_matrix(rng, m, n, 0.0, 1.0);
            const Matrix w = checkdetail::random_matrix(rng, m, r, 0.05, 1.0);
            const Matrix h = checkdetail::random_matrix(rng, r, n, 0.1, 1.1);
            ModelParams p{0.3 + rng.uniform01(), 0.4 + rng.uniform01(), r};

            Matrix gw, gh;
            switch (variant) {
                case Variant::MinVol:
                    gw = grad_W_minvol(x, w, h, p);
                    gh = grad_H_minvol(x, w, h);
                    break;
                case Variant::MaxVol:
                    gw = grad_W(x, w, h);
                    gh = grad_H_maxvol(x, w, h, p);
                    break;
                case Variant::NMaxVol:
                    gw = grad_W(x, w, h);
                    gh = grad_H_nmaxvol(x, w, h, p);
                    break;
            }
            const Matrix fdw = checkdetail::numeric_grad(
                [&](const Matrix& wp) { return objective(variant, x, wp, h, p); }, w);
            const Matrix fdh = checkdetail::numeric_grad(
                [&](const Matrix& hp) { return objective(variant, x, w, hp, p); }, h);
            worst = std::max(worst, frobenius_distance(gw, fdw) /
                                        std::max(frobenius_norm(fdw), 1e-12));
            worst = std::max(worst,
                             frobenius_distance(gh, fdh) / std::max(frobenius_norm(fdh), 1e-12));
        }
        out.push_back({label + " analytic vs central differences", worst <= 1e-5,
                       "max relative deviation " + checkdetail::fmt(worst)});
    };
    run_variant(Variant::MinVol, "minvol");
    run_variant(Variant::MaxVol, "maxvol");
    run_variant(Variant::NMaxVol, "nmaxvol");
    return out;
}

inline std::vector<CheckResult> check_oracles(std::uint64_t seed = 0) {
    std::vector<CheckResult> out;
    Rng rng(seed + 303);

    {
        double margin_lo = std::numeric_limits<double>::infinity();
        double margin_hi = std::numeric_limits<double>::infinity();
        bool ok = true;
        const double deltas[] = {0.1, 0.5, 1.0};
        for (int trial = 0; trial < 1000; ++trial) {
            const std::size_t r = 2 + static_cast<std::size_t>(rng.uniform01() * 9);
            const std::size_t n = r + static_cast<std::size_t>(rng.uniform01() * 20);
            const double delta = deltas[trial % 3];
            Matrix h(r, n);
            for (std::size_t i = 0; i < h.size(); ++i) h.data()[i] = rng.uniform01();
            const RowNormalization rn = row_normalize(h);
            Matrix gram = matmul_transB(rn.Htilde, rn.Htilde);
            add_diagonal(gram, delta);
            const double v = logdet_spd(gram);
            const LogdetRange range = logdet_volume_range(r, delta);
            if (v < range.lo - 1e-9 || v > range.hi + 1e-9) ok = false;
            margin_lo = std::min(margin_lo, v - range.lo);
            margin_hi = std::min(margin_hi, range.hi - v);
        }
        out.push_back({"normalized logdet range (1000 trials)", ok,
                       "min margins " + checkdetail::fmt(margin_lo) + " / " +
                           checkdetail::fmt(margin_hi)});
    }

    // Shared clustering instance: lambda = 1e4, r = 3, n = 30, random X.
    const std::size_t m = 20, n = 30, r = 3;
    const Matrix x = checkdetail::random_matrix(rng, m, n, 0.0, 1.0);
    const double d = static_cast<double>(n) / static_cast<double>(r);
    Matrix balanced_gram(r, r);
    for (std::size_t i = 0; i < r; ++i) balanced_gram(i, i) = d;

    auto appendix_a = [&](SolverKind solver, double rho, std::size_t restarts,
                          const std::string& label) {
        SolveConfig cfg;
        cfg.variant = Variant::MaxVol;
        cfg.params = ModelParams{1e4, 1.0, r};
        cfg.outer_iters = 300;
        cfg.inner_iters = 20;
        cfg.rho = rho;
        const SolveResult res = solve_multistart(solver, x, cfg, restarts, seed);
        const Matrix gram = matmul_transB(res.factors.H, res.factors.H);
        const double rel = frobenius_distance(gram, balanced_gram) / frobenius_norm(balanced_gram);
        std::size_t near_binary = 0;
        for (std::size_t i = 0; i < res.factors.H.size(); ++i) {
            const double v = res.factors.H.data()[i];
            if (std::abs(v) <= 0.05 || std::abs(v - 1.0) <= 0.05) ++near_binary;
        }
        const double binary_frac =
            static_cast<double>(near_binary) / static_cast<double>(res.factors.H.size());
        out.push_back({label, rel <= 0.05 && binary_frac >= 0.95,
                       "||HH^T - (n/r)I|| rel " + checkdetail::fmt(rel) + ", binary frac " +
                           checkdetail::fmt(binary_frac)});
    };
    appendix_a(SolverKind::adgrad2, 0.01, 40, "high-lambda MaxVol reaches (n/r)I (adgrad2)");
    appendix_a(SolverKind::admm, 1000.0, 12, "high-lambda MaxVol reaches (n/r)I (admm)");

    {
        SolveConfig cfg;
        cfg.variant = Variant::NMaxVol;
        cfg.params = ModelParams{1e4, 1.0, r};
        cfg.outer_iters = 400;
        cfg.inner_iters = 20;
        auto [w0, h0] = initialize(x, r, seed, Variant::NMaxVol);
        const SolveResult res = adgrad2_solve(x, w0, h0, cfg);
        bool ok = res.status == SolveStatus::ok;
        double dist = std::numeric_limits<double>::infinity();
        if (ok) {
            const RowNormalization rn = row_normalize(res.factors.H);
            const Matrix gram = matmul_transB(rn.Htilde, rn.Htilde);
            dist = frobenius_distance(gram, Matrix::identity(r));
            ok = dist <= 0.05 * std::sqrt(static_cast<double>(r));
        }
        out.push_back({"high-lambda NMaxVol reaches identity normalized gram", ok,
                       "||HtHt^T - I|| " + checkdetail::fmt(dist)});
    }

    {
        double worst = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
            const std::size_t rr = 2 + static_cast<std::size_t>(rng.uniform01() * 4);
            const std::size_t nn = rr + 3;
            Matrix hh = checkdetail::random_matrix(rng, rr, nn, 0.0, 1.0);
            project_columns_simplex_inplace(hh);
            Matrix mult(rr, rr);
            for (std::size_t i = 0; i < rr; ++i)
                for (std::size_t j = i; j < rr; ++j) {
                    const double v = rng.uniform(-0.5, 0.5);
                    mult(i, j) = v;
                    mult(j, i) = v;
                }
            const double lambda = 0.1 + 2.0 * rng.uniform01();
            const double delta = 0.2 + rng.uniform01();
            const double rho = 0.1 + rng.uniform01();
            const Matrix y = admm_update_Y(hh, mult, lambda, delta, rho);
            Matrix shifted = y;
            add_diagonal(shifted, delta);
            Matrix resid = -lambda * spd_inverse(shifted);
            resid += mult;
            Matrix diff = y - matmul_transB(hh, hh);
            add_scaled(resid, rho, diff);
            worst = std::max(worst, frobenius_norm(resid));
        }
        out.push_back({"ADMM Y-update stationarity (100 trials)", worst <= 1e-8,
                       "max residual " + checkdetail::fmt(worst)});
    }
    return out;
}

inline std::vector<CheckResult> run_check_suite(const std::string& which, std::uint64_t seed = 0) {
    std::vector<CheckResult> out;
    const bool all = which == "all";
    if (all || which == "projections") {
        auto v = check_projections(seed);
        out.insert(out.end(), v.begin(), v.end());
    }
    if (all || which == "gradients") {
        auto v = check_gradients(seed);
        out.insert(out.end(), v.begin(), v.end());
    }
    if (all || which == "oracles") {
        auto v = check_oracles(seed);
        out.insert(out.end(), v.begin(), v.end());
    }
    if (out.empty())
        throw std::invalid_argument("unknown check suite \"" + which +
                                    "\" (expected oracles|gradients|projections|all)");
    return out;
}

}  // namespace volnmf
