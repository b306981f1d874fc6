#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "volnmf/linalg.hpp"
#include "volnmf/matrix.hpp"
#include "volnmf/models.hpp"
#include "volnmf/rng.hpp"

using namespace volnmf;

namespace {

Matrix random_matrix(Rng& rng, std::size_t m, std::size_t n, double lo = 0.0, double hi = 1.0) {
    Matrix a(m, n);
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] = rng.uniform(lo, hi);
    return a;
}

// Central finite differences of f at `at`.
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

double rel_dist(const Matrix& a, const Matrix& b) {
    return frobenius_distance(a, b) / std::max(frobenius_norm(b), 1e-12);
}

}  // namespace

TEST_CASE("objective: exact fit with lambda 0 is zero") {
    Rng rng(1);
    const Matrix w = random_matrix(rng, 6, 3);
    Matrix h = random_matrix(rng, 3, 9);
    project_columns_simplex_inplace(h);
    const Matrix x = matmul(w, h);
    ModelParams p{0.0, 1.0, 3};
    CHECK(objective(Variant::MaxVol, x, w, h, p) == doctest::Approx(0.0));
}

TEST_CASE("objective: MaxVol hand value at W = 0, H = I") {
    Rng rng(2);
    const Matrix x = random_matrix(rng, 2, 2);
    const Matrix w(2, 2);
    const Matrix h = Matrix::identity(2);
    ModelParams p{1.0, 1.0, 2};
    const double expected = 0.5 * frobenius_norm_sq(x) - 2.0 * std::log(2.0);
    CHECK(objective(Variant::MaxVol, x, w, h, p) == doctest::Approx(expected));
}

TEST_CASE("objective: NMaxVol penalty at orthonormal rows is -r log(1+delta)") {
    const Matrix h = Matrix::from_rows({{2.0, 0.0, 0.0}, {0.0, 5.0, 0.0}});
    ModelParams p{1.0, 1.0, 2};
    CHECK(penalty_value(Variant::NMaxVol, Matrix(4, 2), h, p) ==
          doctest::Approx(-2.0 * std::log(2.0)));
}

TEST_CASE("objective: MinVol uses the unhalved fidelity") {
    Rng rng(3);
    const Matrix x = random_matrix(rng, 4, 5);
    const Matrix w = random_matrix(rng, 4, 2);
    Matrix h = random_matrix(rng, 2, 5);
    project_columns_simplex_inplace(h);
    ModelParams p{0.5, 1.0, 2};
    Matrix gram = matmul_transA(w, w);
    add_diagonal(gram, p.delta);
    const double expected = fidelity_norm_sq(x, w, h) + p.lambda * logdet_spd(gram);
    CHECK(objective(Variant::MinVol, x, w, h, p) == doctest::Approx(expected));
}

TEST_CASE("objective is affine in lambda with slope -logdet for MaxVol") {
    Rng rng(4);
    const Matrix x = random_matrix(rng, 5, 7);
    const Matrix w = random_matrix(rng, 5, 3);
    Matrix h = random_matrix(rng, 3, 7);
    project_columns_simplex_inplace(h);
    Matrix gram = matmul_transB(h, h);
    add_diagonal(gram, 1.0);
    const double ld = logdet_spd(gram);
    ModelParams p1{0.7, 1.0, 3};
    ModelParams p2{2.9, 1.0, 3};
    const double o1 = objective(Variant::MaxVol, x, w, h, p1);
    const double o2 = objective(Variant::MaxVol, x, w, h, p2);
    CHECK(o2 - o1 == doctest::Approx(-(p2.lambda - p1.lambda) * ld));
}

TEST_CASE("grad_W: zero residual and W = 0 cases") {
    Rng rng(5);
    const Matrix w = random_matrix(rng, 4, 2);
    const Matrix h = random_matrix(rng, 2, 6);
    const Matrix x = matmul(w, h);
    CHECK(frobenius_norm(grad_W(x, w, h)) <= 1e-12);

    const Matrix zero(4, 2);
    const Matrix expected = -1.0 * matmul_transB(x, h);
    CHECK(frobenius_distance(grad_W(x, zero, h), expected) <= 1e-12);
}

TEST_CASE("grad_W matches finite differences of the halved fidelity") {
    Rng rng(6);
    for (int trial = 0; trial < 5; ++trial) {
        const Matrix x = random_matrix(rng, 5, 6);
        const Matrix w = random_matrix(rng, 5, 3);
        const Matrix h = random_matrix(rng, 3, 6);
        const Matrix g = grad_W(x, w, h);
        const Matrix fd = numeric_grad(
            [&](const Matrix& wp) { return 0.5 * fidelity_norm_sq(x, wp, h); }, w);
        CHECK(rel_dist(g, fd) <= 1e-6);
    }
}

TEST_CASE("grad_H_maxvol: lambda 0 reduces to the fit term; hand case") {
    Rng rng(7);
    const Matrix x = random_matrix(rng, 4, 5);
    const Matrix w = random_matrix(rng, 4, 2);
    const Matrix h = random_matrix(rng, 2, 5);
    ModelParams p0{0.0, 1.0, 2};
    const Matrix expected = matmul_transA(w, matmul(w, h) - x);
    CHECK(frobenius_distance(grad_H_maxvol(x, w, h, p0), expected) <= 1e-12);

    // W = 0, X = 0, H = I, delta = 1, lambda = 1: gradient is -I
    ModelParams p1{1.0, 1.0, 2};
    const Matrix g = grad_H_maxvol(Matrix(3, 2), Matrix(3, 2), Matrix::identity(2), p1);
    CHECK(frobenius_distance(g, -1.0 * Matrix::identity(2)) <= 1e-12);
}

TEST_CASE("grad_H_maxvol matches finite differences of the MaxVol objective") {
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t m = 3 + static_cast<std::size_t>(rng.uniform01() * 8);
        const std::size_t n = 3 + static_cast<std::size_t>(rng.uniform01() * 8);
        const std::size_t r = 2 + static_cast<std::size_t>(rng.uniform01() * 3);
        const Matrix x = random_matrix(rng, m, n);
        const Matrix w = random_matrix(rng, m, r);
        const Matrix h = random_matrix(rng, r, n, 0.05, 1.0);
        ModelParams p{0.3 + rng.uniform01(), 0.4 + rng.uniform01(), r};
        const Matrix g = grad_H_maxvol(x, w, h, p);
        const Matrix fd = numeric_grad(
            [&](const Matrix& hp) { return objective(Variant::MaxVol, x, w, hp, p); }, h);
        CHECK(rel_dist(g, fd) <= 1e-5);
    }
}

TEST_CASE("grad_H_nmaxvol: lambda 0, vanishing penalty at orthonormal rows, degenerate rows") {
    Rng rng(9);
    const Matrix x = random_matrix(rng, 4, 5);
    const Matrix w = random_matrix(rng, 4, 2);
    const Matrix h = random_matrix(rng, 2, 5, 0.1, 1.0);
    ModelParams p0{0.0, 1.0, 2};
    const Matrix expected = matmul_transA(w, matmul(w, h) - x);
    CHECK(frobenius_distance(grad_H_nmaxvol(x, w, h, p0), expected) <= 1e-12);

    // orthogonal rows: penalty gradient vanishes
    const Matrix ortho = Matrix::from_rows({{3.0, 0.0, 0.0}, {0.0, 0.0, 7.0}});
    ModelParams p1{2.0, 0.8, 2};
    const Matrix g = grad_H_nmaxvol(Matrix(3, 3), Matrix(3, 2), ortho, p1);
    CHECK(frobenius_norm(g) <= 1e-12);

    Matrix degenerate = Matrix::from_rows({{1.0, 1.0}, {0.0, 0.0}});
    CHECK_THROWS_AS(grad_H_nmaxvol(Matrix(3, 2), Matrix(3, 2), degenerate, p1),
                    degenerate_row_error);
}

TEST_CASE("grad_H_nmaxvol matches finite differences of the NMaxVol objective") {
    Rng rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t m = 3 + static_cast<std::size_t>(rng.uniform01() * 8);
        const std::size_t n = 3 + static_cast<std::size_t>(rng.uniform01() * 8);
        const std::size_t r = 2 + static_cast<std::size_t>(rng.uniform01() * 3);
        const Matrix x = random_matrix(rng, m, n);
        const Matrix w = random_matrix(rng, m, r);
        const Matrix h = random_matrix(rng, r, n, 0.1, 1.1);
        ModelParams p{0.3 + rng.uniform01(), 0.4 + rng.uniform01(), r};
        const Matrix g = grad_H_nmaxvol(x, w, h, p);
        const Matrix fd = numeric_grad(
            [&](const Matrix& hp) { return objective(Variant::NMaxVol, x, w, hp, p); }, h);
        CHECK(rel_dist(g, fd) <= 1e-5);
    }
}

TEST_CASE("MinVol gradients match finite differences of the MinVol objective") {
    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix x = random_matrix(rng, 6, 7);
        const Matrix w = random_matrix(rng, 6, 3, 0.05, 1.0);
        const Matrix h = random_matrix(rng, 3, 7, 0.05, 1.0);
        ModelParams p{0.3 + rng.uniform01(), 0.4 + rng.uniform01(), 3};
        const Matrix gw = grad_W_minvol(x, w, h, p);
        const Matrix fdw = numeric_grad(
            [&](const Matrix& wp) { return objective(Variant::MinVol, x, wp, h, p); }, w);
        CHECK(rel_dist(gw, fdw) <= 1e-5);

        const Matrix gh = grad_H_minvol(x, w, h);
        const Matrix fdh = numeric_grad(
            [&](const Matrix& hp) { return objective(Variant::MinVol, x, w, hp, p); }, h);
        CHECK(rel_dist(gh, fdh) <= 1e-5);
    }
}

TEST_CASE("NMaxVol penalty gradient scales as D^{-1} under row scaling") {
    Rng rng(12);
    const std::size_t r = 3, n = 6;
    const Matrix h = random_matrix(rng, r, n, 0.1, 1.0);
    ModelParams p{1.7, 0.9, r};
    const Matrix zero_w(2, r);
    const Matrix zero_x(2, n);
    const Matrix g = grad_H_nmaxvol(zero_x, zero_w, h, p);  // penalty part only

    std::vector<double> d{0.5, 2.0, 3.7};
    Matrix hd = h;
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < n; ++j) hd(i, j) *= d[i];
    const Matrix gd = grad_H_nmaxvol(zero_x, zero_w, hd, p);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < n; ++j)
            CHECK(gd(i, j) == doctest::Approx(g(i, j) / d[i]).epsilon(1e-12));
}

TEST_CASE("logdet_volume_range: endpoints and formula") {
    const LogdetRange a = logdet_volume_range(2, 1.0);
    CHECK(a.lo == doctest::Approx(std::log(3.0)));
    CHECK(a.hi == doctest::Approx(2.0 * std::log(2.0)));

    const LogdetRange b = logdet_volume_range(1, 1.0);
    CHECK(b.lo == doctest::Approx(std::log(2.0)));
    CHECK(b.hi == doctest::Approx(std::log(2.0)));

    const LogdetRange c = logdet_volume_range(3, 0.5);
    CHECK(c.lo == doctest::Approx(std::log(3.5 * 0.25)));
    CHECK(c.hi == doctest::Approx(3.0 * std::log(1.5)));

    // endpoints realized at Ht Ht^T = J (identical rows) and = I (orthonormal rows)
    for (std::size_t r : {2u, 3u, 5u}) {
        for (double delta : {0.1, 0.5, 1.0}) {
            const LogdetRange range = logdet_volume_range(r, delta);
            Matrix j(r, r, 1.0);
            add_diagonal(j, delta);
            CHECK(logdet_spd(j) == doctest::Approx(range.lo));
            Matrix i = Matrix::identity(r);
            add_diagonal(i, delta);
            CHECK(logdet_spd(i) == doctest::Approx(range.hi));
        }
    }

    CHECK_THROWS_AS(logdet_volume_range(0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(logdet_volume_range(3, 0.0), std::invalid_argument);
}

TEST_CASE("logdet of normalized gram stays inside the advertised range") {
    Rng rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t r = 2 + static_cast<std::size_t>(rng.uniform01() * 9);
        const std::size_t n = r + static_cast<std::size_t>(rng.uniform01() * 20);
        const double delta = 0.1 + rng.uniform01();
        Matrix h(r, n);
        for (std::size_t i = 0; i < h.size(); ++i) h.data()[i] = rng.uniform01();
        const RowNormalization rn = row_normalize(h);
        Matrix gram = matmul_transB(rn.Htilde, rn.Htilde);
        add_diagonal(gram, delta);
        const double v = logdet_spd(gram);
        const LogdetRange range = logdet_volume_range(r, delta);
        CHECK(v >= range.lo - 1e-9);
        CHECK(v <= range.hi + 1e-9);
    }
}

TEST_CASE("row_normalize produces unit rows") {
    Rng rng(14);
    const Matrix h = random_matrix(rng, 4, 9, 0.01, 2.0);
    const RowNormalization rn = row_normalize(h);
    for (std::size_t i = 0; i < 4; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < 9; ++j) s += rn.Htilde(i, j) * rn.Htilde(i, j);
        CHECK(std::sqrt(s) == doctest::Approx(1.0).epsilon(1e-10));
    }
}
