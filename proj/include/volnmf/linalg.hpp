#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "volnmf/matrix.hpp"

namespace volnmf {

class not_positive_definite : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Simplex projections (sort-based)
// ---------------------------------------------------------------------------

// Threshold nu such that sum_i max(u_i - nu, 0) = target, for a column already
// sorted in descending order with inclusive prefix sums. O(r) once sorted,
// which lets callers sort once and re-evaluate nu for many targets.
inline double simplex_threshold_sorted(const std::vector<double>& sorted_desc,
                                       const std::vector<double>& prefix,
                                       double target) {
    const std::size_t r = sorted_desc.size();
    double nu = (prefix[r - 1] - target) / static_cast<double>(r);
    for (std::size_t k = 1; k <= r; ++k) {
        const double t = (prefix[k - 1] - target) / static_cast<double>(k);
        if (sorted_desc[k - 1] - t > 0.0)
            nu = t;
        else
            break;
    }
    return nu;
}

struct ScaledSimplexProjection {
    std::vector<double> x;
    double nu = 0.0;
};

// Euclidean projection of q onto {x >= 0, sum(x) = s}. Returns the projection
// and the threshold nu with x = max(q - nu, 0). Stable sort keeps ties in
// input order so results are identical across platforms.
inline ScaledSimplexProjection project_scaled_simplex(const std::vector<double>& q, double s) {
    if (s <= 0.0)
        throw std::invalid_argument("project_scaled_simplex: scale must be positive");
    if (q.empty())
        throw std::invalid_argument("project_scaled_simplex: empty input");
    for (double v : q)
        if (!std::isfinite(v))
            throw std::invalid_argument("project_scaled_simplex: non-finite input");

    std::vector<double> u(q);
    std::stable_sort(u.begin(), u.end(), std::greater<double>());
    std::vector<double> prefix(u.size());
    std::partial_sum(u.begin(), u.end(), prefix.begin());

    ScaledSimplexProjection out;
    out.nu = simplex_threshold_sorted(u, prefix, s);
    out.x.resize(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) out.x[i] = std::max(q[i] - out.nu, 0.0);
    return out;
}

// Projects every column of M onto the probability simplex, in place.
inline void project_columns_simplex_inplace(Matrix& m) {
    const std::size_t r = m.rows();
    const std::size_t n = m.cols();
    if (r == 0 || n == 0)
        throw std::invalid_argument("project_columns_simplex: empty matrix");
    m.require_finite();

    std::vector<double> col(r), prefix(r);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < r; ++i) col[i] = m(i, j);
        std::stable_sort(col.begin(), col.end(), std::greater<double>());
        std::partial_sum(col.begin(), col.end(), prefix.begin());
        const double nu = simplex_threshold_sorted(col, prefix, 1.0);
        for (std::size_t i = 0; i < r; ++i) m(i, j) = std::max(m(i, j) - nu, 0.0);
    }
}

inline Matrix project_columns_simplex(Matrix m) {
    project_columns_simplex_inplace(m);
    return m;
}

// ---------------------------------------------------------------------------
// Symmetric eigendecomposition (cyclic Jacobi)
// ---------------------------------------------------------------------------

struct SymEig {
    std::vector<double> eigenvalues;  // descending
    Matrix eigenvectors;              // orthonormal columns, A = P diag(d) P^T
};

namespace detail {

inline double offdiag_norm(const Matrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
}

}  // namespace detail

// Cyclic Jacobi rotations; fine for the small symmetric matrices (r x r with
// r up to a few hundred) this project works with.
inline SymEig sym_eig(const Matrix& a) {
    const std::size_t n = a.rows();
    if (n == 0 || a.cols() != n)
        throw std::invalid_argument("sym_eig: matrix must be square and non-empty");
    a.require_finite();
    const double scale = std::max(1.0, max_abs(a));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(a(i, j) - a(j, i)) > 1e-12 * scale)
                throw std::invalid_argument("sym_eig: matrix is not symmetric");

    Matrix b = a;
    symmetrize(b);
    Matrix v = Matrix::identity(n);
    const double norm = frobenius_norm(b);
    const double tol = 1e-12 * norm;

    if (norm > 0.0) {
        for (int sweep = 0; sweep < 100; ++sweep) {
            if (detail::offdiag_norm(b) < tol) break;
            for (std::size_t p = 0; p + 1 < n; ++p) {
                for (std::size_t q = p + 1; q < n; ++q) {
                    const double apq = b(p, q);
                    if (std::abs(apq) <= 1e-300) continue;
                    const double theta = (b(q, q) - b(p, p)) / (2.0 * apq);
                    const double sgn = theta >= 0.0 ? 1.0 : -1.0;
                    const double t = sgn / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                    const double c = 1.0 / std::sqrt(t * t + 1.0);
                    const double s = t * c;
                    const double tau = s / (1.0 + c);

                    const double app = b(p, p), aqq = b(q, q);
                    b(p, p) = app - t * apq;
                    b(q, q) = aqq + t * apq;
                    b(p, q) = 0.0;
                    b(q, p) = 0.0;
                    for (std::size_t k = 0; k < n; ++k) {
                        if (k != p && k != q) {
                            const double akp = b(k, p), akq = b(k, q);
                            b(k, p) = akp - s * (akq + tau * akp);
                            b(p, k) = b(k, p);
                            b(k, q) = akq + s * (akp - tau * akq);
                            b(q, k) = b(k, q);
                        }
                        const double vkp = v(k, p), vkq = v(k, q);
                        v(k, p) = vkp - s * (vkq + tau * vkp);
                        v(k, q) = vkq + s * (vkp - tau * vkq);
                    }
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return b(i, i) > b(j, j); });

    SymEig out;
    out.eigenvalues.resize(n);
    out.eigenvectors = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        out.eigenvalues[j] = b(order[j], order[j]);
        for (std::size_t i = 0; i < n; ++i) out.eigenvectors(i, j) = v(i, order[j]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Phi_gamma^+ : positive root of z^2 - x z - gamma = 0
// ---------------------------------------------------------------------------

inline double phi_plus(double x, double gamma) {
    if (gamma <= 0.0)
        throw std::invalid_argument("phi_plus: gamma must be positive");
    const double root = std::sqrt(x * x + 4.0 * gamma);
    // For x < 0 the direct form cancels; use the conjugate expression.
    return x >= 0.0 ? 0.5 * (root + x) : 2.0 * gamma / (root - x);
}

// Spectral application: A = P diag(d) P^T  ->  P diag(phi_plus(d)) P^T.
// Output is symmetric positive definite for any symmetric A.
inline Matrix phi_plus_matrix(const Matrix& a, double gamma) {
    if (gamma <= 0.0)
        throw std::invalid_argument("phi_plus_matrix: gamma must be positive");
    const SymEig eig = sym_eig(a);
    const std::size_t n = a.rows();
    Matrix scaled = eig.eigenvectors;
    for (std::size_t j = 0; j < n; ++j) {
        const double f = phi_plus(eig.eigenvalues[j], gamma);
        for (std::size_t i = 0; i < n; ++i) scaled(i, j) *= f;
    }
    Matrix out = matmul_transB(scaled, eig.eigenvectors);
    symmetrize(out);
    return out;
}

// ---------------------------------------------------------------------------
// Cholesky, logdet, SPD solves
// ---------------------------------------------------------------------------

// Lower-triangular factor L with A = L L^T. Throws not_positive_definite when
// a pivot collapses.
inline Matrix cholesky(const Matrix& a) {
    const std::size_t n = a.rows();
    if (n == 0 || a.cols() != n)
        throw std::invalid_argument("cholesky: matrix must be square and non-empty");
    Matrix l(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            if (i == j) {
                if (!(s > 0.0))
                    throw not_positive_definite("cholesky: matrix is not positive definite");
                l(i, i) = std::sqrt(s);
            } else {
                l(i, j) = s / l(j, j);
            }
        }
    }
    return l;
}

inline double logdet_spd(const Matrix& a) {
    const Matrix l = cholesky(a);
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) s += std::log(l(i, i));
    return 2.0 * s;
}

// Solves A X = B for SPD A given its Cholesky factor.
inline Matrix cholesky_solve(const Matrix& l, const Matrix& b) {
    const std::size_t n = l.rows();
    if (b.rows() != n)
        throw std::invalid_argument("cholesky_solve: dimension mismatch");
    Matrix x = b;
    // forward: L y = b
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < i; ++k)
            for (std::size_t j = 0; j < x.cols(); ++j) x(i, j) -= l(i, k) * x(k, j);
        const double inv = 1.0 / l(i, i);
        for (std::size_t j = 0; j < x.cols(); ++j) x(i, j) *= inv;
    }
    // backward: L^T x = y
    for (std::size_t ii = n; ii-- > 0;) {
        for (std::size_t k = ii + 1; k < n; ++k)
            for (std::size_t j = 0; j < x.cols(); ++j) x(ii, j) -= l(k, ii) * x(k, j);
        const double inv = 1.0 / l(ii, ii);
        for (std::size_t j = 0; j < x.cols(); ++j) x(ii, j) *= inv;
    }
    return x;
}

inline Matrix spd_solve(Matrix a, const Matrix& b) {
    symmetrize(a);
    return cholesky_solve(cholesky(a), b);
}

inline Matrix spd_inverse(const Matrix& a) {
    return spd_solve(a, Matrix::identity(a.rows()));
}

// ---------------------------------------------------------------------------
// Spectral norm (power iteration on A^T A)
// ---------------------------------------------------------------------------

// Largest singular value. Deterministic start e/sqrt(n), 1000-iteration cap,
// relative-change tolerance 1e-10. If the start vector happens to annihilate
// A (possible for sign-mixed rows), it is nudged deterministically once.
inline double spectral_norm(const Matrix& a) {
    a.require_finite();
    if (a.size() == 0) return 0.0;
    const std::size_t n = a.cols();
    std::vector<double> v(n, 1.0 / std::sqrt(static_cast<double>(n)));
    std::vector<double> av(a.rows()), w(n);

    double sigma = 0.0;
    bool nudged = false;
    for (int iter = 0; iter < 1000; ++iter) {
        // av = A v
        for (std::size_t i = 0; i < a.rows(); ++i) {
            const double* ai = a.row(i);
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += ai[j] * v[j];
            av[i] = s;
        }
        double norm_av = 0.0;
        for (double x : av) norm_av += x * x;
        norm_av = std::sqrt(norm_av);
        if (norm_av == 0.0) {
            if (max_abs(a) == 0.0) return 0.0;
            if (nudged) return 0.0;
            for (std::size_t j = 0; j < n; ++j) v[j] += 1e-8 * static_cast<double>(j + 1);
            double nv = 0.0;
            for (double x : v) nv += x * x;
            nv = std::sqrt(nv);
            for (double& x : v) x /= nv;
            nudged = true;
            continue;
        }
        const double sigma_new = norm_av;
        // w = A^T av
        for (std::size_t j = 0; j < n; ++j) w[j] = 0.0;
        for (std::size_t i = 0; i < a.rows(); ++i) {
            const double* ai = a.row(i);
            const double avi = av[i];
            for (std::size_t j = 0; j < n; ++j) w[j] += ai[j] * avi;
        }
        double norm_w = 0.0;
        for (double x : w) norm_w += x * x;
        norm_w = std::sqrt(norm_w);
        if (norm_w == 0.0) return sigma_new;
        for (std::size_t j = 0; j < n; ++j) v[j] = w[j] / norm_w;

        if (std::abs(sigma_new - sigma) <= 1e-10 * std::max(sigma_new, 1e-300)) {
            return sigma_new;
        }
        sigma = sigma_new;
    }
    return sigma;
}

}  // namespace volnmf
