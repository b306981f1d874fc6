#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "volnmf/matrix.hpp"
#include "volnmf/metrics.hpp"
#include "volnmf/rng.hpp"
#include "volnmf/synth.hpp"

using namespace volnmf;

TEST_CASE("bundled endmembers: shape, range, pairwise angles") {
    const Matrix lib = bundled_endmembers();
    CHECK(lib.rows() == 224);
    CHECK(lib.cols() >= 5);
    for (std::size_t i = 0; i < lib.size(); ++i) {
        CHECK(lib.data()[i] >= 0.0);
        CHECK(lib.data()[i] <= 1.0);
    }
    for (std::size_t a = 0; a < lib.cols(); ++a)
        for (std::size_t b = a + 1; b < lib.cols(); ++b)
            CHECK(spectral_angle_deg(lib, a, lib, b) >= 10.0);
}

TEST_CASE("generate: determinism and exact clean product") {
    SynthSpec spec;
    spec.m = 224;
    spec.n = 50;
    spec.r = 5;
    spec.seed = 42;
    spec.snr_db = 20.0;
    const Matrix lib = bundled_endmembers();
    const GroundTruth a = generate(spec, lib);
    const GroundTruth b = generate(spec, lib);
    CHECK(frobenius_distance(a.X_noisy, b.X_noisy) == 0.0);
    CHECK(frobenius_distance(a.H_true, b.H_true) == 0.0);
    CHECK(frobenius_distance(a.X_clean, matmul(a.W_true, a.H_true)) == 0.0);
}

TEST_CASE("generate: no noise means X_noisy equals X_clean") {
    SynthSpec spec;
    spec.n = 30;
    spec.seed = 7;
    spec.snr_db.reset();
    const GroundTruth gt = generate(spec, bundled_endmembers());
    CHECK(frobenius_distance(gt.X_noisy, gt.X_clean) == 0.0);
}

TEST_CASE("generate: realized SNR is exact") {
    const Matrix lib = bundled_endmembers();
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SynthSpec spec;
        spec.n = 40;
        spec.seed = seed;
        spec.snr_db = 20.0;
        const GroundTruth gt = generate(spec, lib);
        const double signal = frobenius_norm_sq(gt.X_clean);
        const double noise = frobenius_norm_sq(gt.X_noisy - gt.X_clean);
        const double realized = 10.0 * std::log10(signal / noise);
        CHECK(realized == doctest::Approx(20.0).epsilon(1e-9));
    }
}

TEST_CASE("generate: stochastic arm has unit column sums and clipped entries") {
    SynthSpec spec;
    spec.n = 200;
    spec.seed = 3;
    spec.stochastic_H = true;
    const GroundTruth gt = generate(spec, bundled_endmembers());
    for (std::size_t j = 0; j < gt.H_true.cols(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < gt.H_true.rows(); ++i) {
            const double v = gt.H_true(i, j);
            s += v;
            // clipping: nothing survives strictly inside (0, threshold)
            if (v > 0.0) CHECK(v >= spec.clip_threshold);
        }
        CHECK(std::abs(s - 1.0) <= 1e-12);
    }
}

TEST_CASE("generate: non-stochastic arm scales whole columns") {
    SynthSpec spec;
    spec.n = 200;
    spec.seed = 3;
    spec.stochastic_H = false;
    const GroundTruth gt = generate(spec, bundled_endmembers());
    std::size_t off_one = 0;
    for (std::size_t j = 0; j < gt.H_true.cols(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < gt.H_true.rows(); ++i) s += gt.H_true(i, j);
        CHECK(s > 0.0);
        if (std::abs(s - 1.0) > 1e-6) ++off_one;
    }
    CHECK(off_one > gt.H_true.cols() / 2);  // the N(1, 0.2^2) scales moved most sums off 1
}

TEST_CASE("generate: ill-conditioned arm pins the column-norm ratio at 20") {
    SynthSpec spec;
    spec.n = 20;
    spec.seed = 5;
    spec.well_conditioned = false;
    const GroundTruth gt = generate(spec, bundled_endmembers());
    double lo = 1e300, hi = 0.0;
    for (std::size_t k = 0; k < gt.W_true.cols(); ++k) {
        double norm = 0.0;
        for (std::size_t i = 0; i < gt.W_true.rows(); ++i)
            norm += gt.W_true(i, k) * gt.W_true(i, k);
        norm = std::sqrt(norm);
        lo = std::min(lo, norm);
        hi = std::max(hi, norm);
    }
    CHECK(hi / lo == doctest::Approx(20.0).epsilon(1e-9));
}

TEST_CASE("generate: library validation") {
    SynthSpec spec;
    spec.r = 7;
    CHECK_THROWS_AS(generate(spec, bundled_endmembers()), std::invalid_argument);  // 6 columns
    SynthSpec bad;
    bad.dirichlet_alpha = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("dirichlet_column: sums, reproducibility, sparsity vs alpha") {
    Rng rng(11);
    for (int i = 0; i < 100; ++i) {
        const auto v = dirichlet_column(0.1, 5, rng);
        double s = 0.0;
        for (double x : v) {
            CHECK(x >= 0.0);
            s += x;
        }
        CHECK(std::abs(s - 1.0) <= 1e-12);
    }

    Rng a(5), b(5);
    const auto va = dirichlet_column(0.3, 4, a);
    const auto vb = dirichlet_column(0.3, 4, b);
    for (std::size_t i = 0; i < 4; ++i) CHECK(va[i] == vb[i]);

    // alpha = 0.1 draws are sparser than alpha = 1 draws
    Rng r1(77), r2(78);
    std::size_t small_01 = 0, small_1 = 0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        for (double x : dirichlet_column(0.1, 5, r1))
            if (x < 0.05) ++small_01;
        for (double x : dirichlet_column(1.0, 5, r2))
            if (x < 0.05) ++small_1;
    }
    CHECK(small_01 > small_1);
}
