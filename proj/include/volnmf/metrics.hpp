#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "volnmf/matrix.hpp"

namespace volnmf {

inline constexpr double kRadToDeg = 57.29577951308232;

// Angle between two spectra in degrees; the cosine is clamped to [-1, 1]
// before acos so collinear vectors never produce NaN.
inline double spectral_angle_deg(const std::vector<double>& u, const std::vector<double>& v) {
    if (u.size() != v.size())
        throw std::invalid_argument("spectral_angle: length mismatch");
    double uu = 0.0, vv = 0.0, uv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        uu += u[i] * u[i];
        vv += v[i] * v[i];
        uv += u[i] * v[i];
    }
    if (uu == 0.0 || vv == 0.0)
        throw std::invalid_argument("spectral_angle: zero vector");
    double c = uv / (std::sqrt(uu) * std::sqrt(vv));
    c = std::min(1.0, std::max(-1.0, c));
    return std::acos(c) * kRadToDeg;
}

inline double spectral_angle_deg(const Matrix& a, std::size_t col_a, const Matrix& b,
                                 std::size_t col_b) {
    double uu = 0.0, vv = 0.0, uv = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double x = a(i, col_a);
        const double y = b(i, col_b);
        uu += x * x;
        vv += y * y;
        uv += x * y;
    }
    if (uu == 0.0 || vv == 0.0)
        throw std::invalid_argument("spectral_angle: zero column");
    double c = uv / (std::sqrt(uu) * std::sqrt(vv));
    c = std::min(1.0, std::max(-1.0, c));
    return std::acos(c) * kRadToDeg;
}

// Exact min-cost assignment (Hungarian algorithm with potentials, O(n^3)).
// cost is square, cost[i][j] >= anything finite; returns row -> column.
inline std::vector<std::size_t> min_cost_assignment(const std::vector<std::vector<double>>& cost) {
    const std::size_t n = cost.size();
    for (const auto& row : cost)
        if (row.size() != n)
            throw std::invalid_argument("min_cost_assignment: cost matrix must be square");
    const double inf = std::numeric_limits<double>::infinity();

    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<std::size_t> assignment(n, 0);
    for (std::size_t j = 1; j <= n; ++j)
        if (p[j] != 0) assignment[p[j] - 1] = j - 1;
    return assignment;
}

struct MatchResult {
    // assignment[i] = estimated column matched to true column i
    std::vector<std::size_t> assignment;
    std::vector<double> angles_deg;
    double max_angle_deg = 0.0;
};

// Matches estimated endmembers to the ground truth by minimizing the total
// spectral angle with an exact assignment solve, then reports the worst
// matched angle.
inline MatchResult match_endmembers(const Matrix& w_true, const Matrix& w_est) {
    if (w_true.cols() != w_est.cols())
        throw std::invalid_argument("match_endmembers: column counts differ");
    if (w_true.rows() != w_est.rows())
        throw std::invalid_argument("match_endmembers: row counts differ");
    const std::size_t r = w_true.cols();
    std::vector<std::vector<double>> cost(r, std::vector<double>(r, 0.0));
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < r; ++j)
            cost[i][j] = spectral_angle_deg(w_true, i, w_est, j);

    MatchResult out;
    out.assignment = min_cost_assignment(cost);
    out.angles_deg.resize(r);
    for (std::size_t i = 0; i < r; ++i) {
        out.angles_deg[i] = cost[i][out.assignment[i]];
        out.max_angle_deg = std::max(out.max_angle_deg, out.angles_deg[i]);
    }
    return out;
}

inline double relative_error(const Matrix& x, const Matrix& w, const Matrix& h) {
    const double nx2 = frobenius_norm_sq(x);
    if (nx2 == 0.0)
        throw std::invalid_argument("relative_error: X has zero norm");
    return frobenius_norm_sq(x - matmul(w, h)) / nx2;
}

struct ClusterDiagnostics {
    bool is_binary = false;
    std::vector<std::size_t> row_support_sizes;
    double gram_offdiag_max = 0.0;
};

// Reports how close H is to a hard clustering: whether every entry is within
// tol of {0,1}, the per-row support counts, and the largest off-diagonal of
// H H^T.
inline ClusterDiagnostics cluster_diagnostics(const Matrix& h, double tol) {
    ClusterDiagnostics out;
    out.is_binary = true;
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double v = h.data()[i];
        if (std::abs(v) > tol && std::abs(v - 1.0) > tol) out.is_binary = false;
    }
    out.row_support_sizes.resize(h.rows());
    for (std::size_t i = 0; i < h.rows(); ++i) {
        std::size_t c = 0;
        for (std::size_t j = 0; j < h.cols(); ++j)
            if (h(i, j) > 0.5) ++c;
        out.row_support_sizes[i] = c;
    }
    const Matrix gram = matmul_transB(h, h);
    for (std::size_t i = 0; i < gram.rows(); ++i)
        for (std::size_t j = 0; j < gram.cols(); ++j)
            if (i != j) out.gram_offdiag_max = std::max(out.gram_offdiag_max, std::abs(gram(i, j)));
    return out;
}

// Quantile with linear interpolation on the sorted sample.
inline double quantile(std::vector<double> values, double q) {
    if (values.empty())
        throw std::invalid_argument("quantile: empty sample");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

inline double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

}  // namespace volnmf
