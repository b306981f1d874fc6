#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "volnmf/matrix.hpp"
#include "volnmf/rng.hpp"

namespace volnmf {

struct SynthSpec {
    std::size_t m = 224;  // spectral bands
    std::size_t n = 1000; // pixels
    std::size_t r = 5;    // endmembers
    double dirichlet_alpha = 0.1;
    double clip_threshold = 0.05;
    bool well_conditioned = true;
    bool stochastic_H = true;
    std::optional<double> snr_db;  // no value = noiseless
    std::uint64_t seed = 0;

    void validate() const {
        if (m < 1) throw std::invalid_argument("SynthSpec: m must be >= 1");
        if (n < 1) throw std::invalid_argument("SynthSpec: n must be >= 1");
        if (r < 1) throw std::invalid_argument("SynthSpec: r must be >= 1");
        if (r > m) throw std::invalid_argument("SynthSpec: r must be <= m");
        if (dirichlet_alpha <= 0.0)
            throw std::invalid_argument("SynthSpec: dirichlet_alpha must be > 0");
        if (clip_threshold < 0.0)
            throw std::invalid_argument("SynthSpec: clip_threshold must be >= 0");
    }
};

struct GroundTruth {
    Matrix W_true;
    Matrix H_true;
    Matrix X_clean;
    Matrix X_noisy;
};

// One abundance column: normalized Gamma draws.
inline std::vector<double> dirichlet_column(double alpha, std::size_t r, Rng& rng) {
    return rng.dirichlet(alpha, r);
}

// A deterministic stand-in endmember library: six smooth reflectance-like
// spectra over 224 bands built from Gaussian bumps and sigmoid ramps, each
// rescaled to peak at 0.95. Pairwise spectral angles stay above 10 degrees
// (checked by the fixture test).
inline Matrix bundled_endmembers() {
    constexpr std::size_t bands = 224;
    constexpr std::size_t count = 6;
    auto bump = [](double x, double mu, double s) {
        const double d = (x - mu) / s;
        return std::exp(-0.5 * d * d);
    };
    auto ramp = [](double x, double mu, double rate) {
        return 1.0 / (1.0 + std::exp(-rate * (x - mu)));
    };

    Matrix lib(bands, count);
    for (std::size_t b = 0; b < bands; ++b) {
        const double x = static_cast<double>(b) / static_cast<double>(bands - 1);
        double raw[count];
        raw[0] = 0.90 * bump(x, 0.15, 0.08) + 0.35 * bump(x, 0.55, 0.25) + 0.05;
        raw[1] = 0.85 * bump(x, 0.45, 0.07) + 0.30 * bump(x, 0.80, 0.12) + 0.08;
        raw[2] = 0.05 + 0.90 * ramp(x, 0.50, 12.0);
        raw[3] = 0.05 + 0.90 * ramp(x, 0.35, -12.0);
        raw[4] = 0.80 * bump(x, 0.75, 0.06) + 0.25 * bump(x, 0.25, 0.10) + 0.10;
        raw[5] = 0.60 * bump(x, 0.50, 0.35) + 0.15 * bump(x, 0.05, 0.04) + 0.12;
        for (std::size_t k = 0; k < count; ++k) lib(b, k) = raw[k];
    }
    for (std::size_t k = 0; k < count; ++k) {
        double peak = 0.0;
        for (std::size_t b = 0; b < bands; ++b) peak = std::max(peak, lib(b, k));
        const double scale = 0.95 / peak;
        for (std::size_t b = 0; b < bands; ++b) lib(b, k) *= scale;
    }
    return lib;
}

namespace detail {

// Ill-conditioned arm: columns are normalized to unit l2 norm first so the
// linear 0.05..1 scales pin the column-norm ratio at exactly 20.
inline void condition_columns(Matrix& w, bool well_conditioned) {
    const std::size_t r = w.cols();
    if (well_conditioned) return;
    for (std::size_t k = 0; k < r; ++k) {
        double norm = 0.0;
        for (std::size_t i = 0; i < w.rows(); ++i) norm += w(i, k) * w(i, k);
        norm = std::sqrt(norm);
        const double frac = r > 1 ? static_cast<double>(k) / static_cast<double>(r - 1) : 1.0;
        const double scale = (0.05 + 0.95 * frac) / norm;
        for (std::size_t i = 0; i < w.rows(); ++i) w(i, k) *= scale;
    }
}

}  // namespace detail

// Draws a ground-truth instance: W from the library (optionally ill
// conditioned), H columns Dirichlet(alpha) with clipping below the threshold,
// renormalized to sum one, optionally de-stochasticized with truncated
// N(1, 0.2^2) column scales; Gaussian noise scaled to hit the requested SNR
// exactly. Pure in (spec, library): same seed, same bytes.
inline GroundTruth generate(const SynthSpec& spec, const Matrix& library) {
    spec.validate();
    if (library.rows() != spec.m)
        throw std::invalid_argument("generate: library band count does not match spec.m");
    if (library.cols() < spec.r)
        throw std::invalid_argument("generate: library has fewer columns than spec.r");
    for (std::size_t i = 0; i < library.size(); ++i)
        if (library.data()[i] < 0.0)
            throw std::invalid_argument("generate: library must be nonnegative");

    GroundTruth gt;
    gt.W_true = Matrix(spec.m, spec.r);
    for (std::size_t k = 0; k < spec.r; ++k)
        for (std::size_t i = 0; i < spec.m; ++i) gt.W_true(i, k) = library(i, k);
    detail::condition_columns(gt.W_true, spec.well_conditioned);

    Rng base(spec.seed);
    gt.H_true = Matrix(spec.r, spec.n);
    for (std::size_t j = 0; j < spec.n; ++j) {
        // one sub-stream per pixel column
        Rng col_rng = base.split(j);
        std::vector<double> col;
        double total = 0.0;
        for (int attempt = 0; attempt < 64; ++attempt) {
            col = dirichlet_column(spec.dirichlet_alpha, spec.r, col_rng);
            total = 0.0;
            for (double& v : col) {
                if (v < spec.clip_threshold) v = 0.0;
                total += v;
            }
            if (total > 0.0) break;
        }
        if (total <= 0.0)
            throw std::runtime_error("generate: could not draw a nonzero abundance column");
        for (double& v : col) v /= total;
        if (!spec.stochastic_H) {
            double scale;
            do {
                scale = col_rng.normal(1.0, 0.2);
            } while (scale < 1e-3);
            for (double& v : col) v *= scale;
        }
        for (std::size_t i = 0; i < spec.r; ++i) gt.H_true(i, j) = col[i];
    }

    gt.X_clean = matmul(gt.W_true, gt.H_true);
    if (!spec.snr_db) {
        gt.X_noisy = gt.X_clean;
        return gt;
    }

    Rng noise_rng = base.split(0x6E6F697365ULL);  // dedicated noise stream
    Matrix noise(spec.m, spec.n);
    for (std::size_t i = 0; i < spec.m; ++i)
        for (std::size_t j = 0; j < spec.n; ++j) noise(i, j) = noise_rng.normal();
    const double signal = frobenius_norm(gt.X_clean);
    const double raw = frobenius_norm(noise);
    if (raw > 0.0 && signal > 0.0) {
        const double scale = signal / (raw * std::pow(10.0, *spec.snr_db / 20.0));
        noise *= scale;
    }
    gt.X_noisy = gt.X_clean + noise;
    return gt;
}

}  // namespace volnmf
