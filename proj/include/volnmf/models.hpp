#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "volnmf/linalg.hpp"
#include "volnmf/matrix.hpp"

namespace volnmf {

enum class Variant { MinVol, MaxVol, NMaxVol };

inline const char* variant_name(Variant v) {
    switch (v) {
        case Variant::MinVol: return "minvol";
        case Variant::MaxVol: return "maxvol";
        case Variant::NMaxVol: return "nmaxvol";
    }
    return "?";
}

inline Variant variant_from_string(const std::string& s) {
    if (s == "minvol") return Variant::MinVol;
    if (s == "maxvol") return Variant::MaxVol;
    if (s == "nmaxvol") return Variant::NMaxVol;
    throw std::invalid_argument("unknown variant \"" + s + "\" (expected minvol|maxvol|nmaxvol)");
}

struct ModelParams {
    double lambda = 1.0;  // penalty weight, >= 0
    double delta = 1.0;   // logdet shift, > 0
    std::size_t rank = 1;

    void validate() const {
        if (lambda < 0.0) throw std::invalid_argument("ModelParams: lambda must be >= 0");
        if (delta <= 0.0) throw std::invalid_argument("ModelParams: delta must be > 0");
        if (rank < 1) throw std::invalid_argument("ModelParams: rank must be >= 1");
    }
};

struct Factorization {
    Matrix W;  // m x r, nonnegative
    Matrix H;  // r x n, nonnegative; column-stochastic for MinVol/MaxVol
};

class degenerate_row_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Row l2 norms of H and the row-normalized Htilde = S^{-1} H.
struct RowNormalization {
    std::vector<double> row_norms;  // diagonal of S
    Matrix Htilde;
};

inline RowNormalization row_normalize(const Matrix& h) {
    RowNormalization out;
    out.row_norms.resize(h.rows());
    out.Htilde = h;
    for (std::size_t i = 0; i < h.rows(); ++i) {
        double s = 0.0;
        const double* hi = h.row(i);
        for (std::size_t j = 0; j < h.cols(); ++j) s += hi[j] * hi[j];
        const double norm = std::sqrt(s);
        if (norm < 1e-12)
            throw degenerate_row_error("row " + std::to_string(i) + " of H has (near-)zero norm");
        out.row_norms[i] = norm;
        double* ti = out.Htilde.row(i);
        for (std::size_t j = 0; j < h.cols(); ++j) ti[j] /= norm;
    }
    return out;
}

inline double fidelity_norm_sq(const Matrix& x, const Matrix& w, const Matrix& h) {
    return frobenius_norm_sq(x - matmul(w, h));
}

// Penalty term of each variant's objective, including the sign and lambda.
inline double penalty_value(Variant variant, const Matrix& w, const Matrix& h,
                            const ModelParams& params) {
    switch (variant) {
        case Variant::MinVol: {
            Matrix g = matmul_transA(w, w);
            add_diagonal(g, params.delta);
            return params.lambda * logdet_spd(g);
        }
        case Variant::MaxVol: {
            Matrix g = matmul_transB(h, h);
            add_diagonal(g, params.delta);
            return -params.lambda * logdet_spd(g);
        }
        case Variant::NMaxVol: {
            const RowNormalization rn = row_normalize(h);
            Matrix g = matmul_transB(rn.Htilde, rn.Htilde);
            add_diagonal(g, params.delta);
            return -params.lambda * logdet_spd(g);
        }
    }
    return 0.0;
}

// Full objective. MinVol carries the fidelity without the 1/2 factor,
// MaxVol/NMaxVol with it.
inline double objective(Variant variant, const Matrix& x, const Matrix& w, const Matrix& h,
                        const ModelParams& params) {
    const double fid = fidelity_norm_sq(x, w, h);
    const double pen = penalty_value(variant, w, h, params);
    return variant == Variant::MinVol ? fid + pen : 0.5 * fid + pen;
}

// Gradient of 1/2 ||X - WH||_F^2 with respect to W: (WH - X) H^T. The volume
// penalty never touches W for MaxVol/NMaxVol.
inline Matrix grad_W(const Matrix& x, const Matrix& w, const Matrix& h) {
    return matmul_transB(matmul(w, h) - x, h);
}

// W^T (WH - X) - 2 lambda (H H^T + delta I)^{-1} H
inline Matrix grad_H_maxvol(const Matrix& x, const Matrix& w, const Matrix& h,
                            const ModelParams& params) {
    Matrix g = matmul_transA(w, matmul(w, h) - x);
    if (params.lambda != 0.0) {
        Matrix gram = matmul_transB(h, h);
        add_diagonal(gram, params.delta);
        const Matrix sol = cholesky_solve(cholesky(gram), h);
        add_scaled(g, -2.0 * params.lambda, sol);
    }
    return g;
}

// W^T (WH - X) - 2 lambda S^{-1} [ (Ht Ht^T + delta I)^{-1} - Dt ] Ht
// with Ht = S^{-1} H and Dt = diag((Ht Ht^T + delta I)^{-1} Ht Ht^T).
inline Matrix grad_H_nmaxvol(const Matrix& x, const Matrix& w, const Matrix& h,
                             const ModelParams& params) {
    Matrix g = matmul_transA(w, matmul(w, h) - x);
    if (params.lambda != 0.0) {
        const RowNormalization rn = row_normalize(h);
        const std::size_t r = h.rows();
        Matrix gram = matmul_transB(rn.Htilde, rn.Htilde);
        Matrix shifted = gram;
        add_diagonal(shifted, params.delta);
        const Matrix inv = spd_inverse(shifted);
        Matrix coeff = inv;
        const Matrix inv_gram = matmul(inv, gram);
        for (std::size_t i = 0; i < r; ++i) coeff(i, i) -= inv_gram(i, i);
        Matrix pen = matmul(coeff, rn.Htilde);
        for (std::size_t i = 0; i < r; ++i) {
            const double c = -2.0 * params.lambda / rn.row_norms[i];
            double* pi = pen.row(i);
            for (std::size_t j = 0; j < h.cols(); ++j) g(i, j) += c * pi[j];
        }
    }
    return g;
}

// Analytic gradients of the full MinVol objective (fidelity without 1/2):
// dW = 2 (WH - X) H^T + 2 lambda W (W^T W + delta I)^{-1}
inline Matrix grad_W_minvol(const Matrix& x, const Matrix& w, const Matrix& h,
                            const ModelParams& params) {
    Matrix g = matmul_transB(matmul(w, h) - x, h);
    g *= 2.0;
    if (params.lambda != 0.0) {
        Matrix gram = matmul_transA(w, w);
        add_diagonal(gram, params.delta);
        const Matrix winv = matmul(w, spd_inverse(gram));
        add_scaled(g, 2.0 * params.lambda, winv);
    }
    return g;
}

inline Matrix grad_H_minvol(const Matrix& x, const Matrix& w, const Matrix& h) {
    Matrix g = matmul_transA(w, matmul(w, h) - x);
    g *= 2.0;
    return g;
}

struct LogdetRange {
    double lo = 0.0;
    double hi = 0.0;
};

// Attainable range of logdet(Ht Ht^T + delta I) over nonnegative H with unit
// l2 rows: [log((r + delta) delta^{r-1}), r log(1 + delta)].
inline LogdetRange logdet_volume_range(std::size_t r, double delta) {
    if (r < 1) throw std::invalid_argument("logdet_volume_range: r must be >= 1");
    if (delta <= 0.0) throw std::invalid_argument("logdet_volume_range: delta must be > 0");
    LogdetRange out;
    out.lo = std::log(static_cast<double>(r) + delta) +
             (static_cast<double>(r) - 1.0) * std::log(delta);
    out.hi = static_cast<double>(r) * std::log1p(delta);
    return out;
}

}  // namespace volnmf
