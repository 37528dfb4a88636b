#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "nmfrank/likelihood.hpp"
#include "nmfrank/nmf.hpp"
#include "nmfrank/parallel.hpp"
#include "nmfrank/rng.hpp"

using namespace nmfrank;

namespace {

double kl_divergence(const Matrix& X, const Matrix& M) {
    double acc = 0.0;
    for (Index j = 0; j < X.cols(); ++j)
        for (Index i = 0; i < X.rows(); ++i) {
            const double x = X(i, j);
            const double m = M(i, j);
            acc += m;
            if (x > 0) acc += x * std::log(x / m) - x;
        }
    return acc;
}

DataMatrix integer_rank1(Index p, Index n) {
    Vector t(p), w(n);
    for (Index i = 0; i < p; ++i) t[i] = static_cast<double>(i + 1);
    for (Index j = 0; j < n; ++j) w[j] = static_cast<double>(2 * j + 1);
    DataMatrix X;
    X.values = t * w.transpose();
    return X;
}

DataMatrix random_poisson_data(Index p, Index n, int k, Rng& rng, double scale = 20.0) {
    Matrix T(p, k), W(k, n);
    for (Index i = 0; i < p; ++i)
        for (Index j = 0; j < k; ++j) T(i, j) = rng.uniform(0.05, 1.0);
    for (Index i = 0; i < k; ++i)
        for (Index j = 0; j < n; ++j) W(i, j) = rng.uniform(0.05, 1.0) * scale;
    const Matrix mean = T * W;
    DataMatrix X;
    X.values.resize(p, n);
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < p; ++i) X.values(i, j) = rng.poisson(mean(i, j));
    for (Index i = 0; i < p; ++i)
        if (X.values.row(i).sum() == 0.0) X.values(i, 0) = 1.0;
    return X;
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    return std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

}  // namespace

TEST_CASE("exact rank-1 matrix is fit to tiny KL divergence") {
    const DataMatrix X = integer_rank1(5, 4);
    FitOptions opts;
    opts.max_iter = 10000;
    opts.rel_tol = 1e-13;
    const Factorization fit = fit_nmf(X, 1, Family::poisson, 42, opts);
    CHECK(kl_divergence(X.values, fit.mean()) <= 1e-6);
    CHECK((fit.features.array() >= 0.0).all());
    CHECK((fit.weights.array() >= 0.0).all());
}

TEST_CASE("exact rank-1 matrix under squared error") {
    const DataMatrix X = integer_rank1(5, 4);
    FitOptions opts;
    opts.max_iter = 20000;
    opts.rel_tol = 1e-14;
    const Factorization fit = fit_nmf(X, 1, Family::gaussian, 42, opts);
    CHECK((X.values - fit.mean()).squaredNorm() <= 1e-6);
}

TEST_CASE("diagonal counts at full rank reach KL <= 1e-4") {
    DataMatrix X;
    X.values = Matrix::Zero(4, 4);
    X.values.diagonal() << 5, 6, 7, 8;
    FitOptions opts;
    opts.max_iter = 200000;
    opts.rel_tol = 1e-15;
    const Factorization fit = fit_nmf(X, 4, Family::poisson, 3, opts);
    CHECK(kl_divergence(X.values, fit.mean()) <= 1e-4);
}

TEST_CASE("objective is monotone non-increasing per sweep") {
    Rng rng(91);
    FitOptions opts;
    opts.max_iter = 300;
    opts.rel_tol = 1e-12;
    opts.track_objective = true;
    for (int rep = 0; rep < 15; ++rep) {
        const Index p = 4 + static_cast<Index>(rng.next_u64() % 12);
        const Index n = 4 + static_cast<Index>(rng.next_u64() % 12);
        const int k = 1 + static_cast<int>(rng.next_u64() % 3);
        const Family family = rep % 2 == 0 ? Family::poisson : Family::gaussian;
        DataMatrix X = random_poisson_data(p, n, k + 1, rng);
        const Factorization fit = fit_nmf(X, k, family, 1000 + rep, opts);
        REQUIRE(fit.objective_trace.size() >= 2);
        for (std::size_t t = 1; t < fit.objective_trace.size(); ++t) {
            const double prev = fit.objective_trace[t - 1];
            const double next = fit.objective_trace[t];
            CHECK(next <= prev + 1e-8 * std::abs(prev));
        }
    }
}

TEST_CASE("multi-start with m=1 equals the single derived fit") {
    Rng rng(5);
    const DataMatrix X = random_poisson_data(8, 6, 2, rng);
    const std::uint64_t master = 777;
    const MultiStartResult ms = multi_start_fit(X, 2, Family::poisson, 1, master);
    const Factorization single =
        fit_nmf(X, 2, Family::poisson, derive_seed(master, kStreamInit, 2, std::size_t{0}));
    CHECK(ms.best.loglik == single.loglik);
    CHECK(bitwise_equal(ms.best.features, single.features));
    CHECK(bitwise_equal(ms.best.weights, single.weights));
}

TEST_CASE("multi-start returns the best loglik and is deterministic") {
    Rng rng(6);
    const DataMatrix X = random_poisson_data(10, 8, 3, rng);
    const MultiStartResult a = multi_start_fit(X, 2, Family::poisson, 5, 99);
    for (double ll : a.all_logliks) CHECK(a.best.loglik >= ll);
    CHECK(a.all_logliks.size() == 5);

    const MultiStartResult b = multi_start_fit(X, 2, Family::poisson, 5, 99);
    REQUIRE(b.all_logliks.size() == a.all_logliks.size());
    for (std::size_t i = 0; i < a.all_logliks.size(); ++i)
        CHECK(std::memcmp(&a.all_logliks[i], &b.all_logliks[i], sizeof(double)) == 0);
}

TEST_CASE("multi-start result is independent of thread count") {
    Rng rng(8);
    const DataMatrix X = random_poisson_data(9, 7, 2, rng);
    parallel::set_max_threads(1);
    const MultiStartResult serial = multi_start_fit(X, 2, Family::poisson, 6, 4242);
    parallel::set_max_threads(4);
    const MultiStartResult threaded = multi_start_fit(X, 2, Family::poisson, 6, 4242);
    parallel::set_max_threads(0);
    for (std::size_t i = 0; i < serial.all_logliks.size(); ++i)
        CHECK(std::memcmp(&serial.all_logliks[i], &threaded.all_logliks[i], sizeof(double)) == 0);
    CHECK(bitwise_equal(serial.best.features, threaded.best.features));
}

TEST_CASE("an all-true mask reproduces the unmasked fit bit for bit") {
    Rng rng(7);
    const DataMatrix X = random_poisson_data(8, 6, 2, rng);
    const MaskMatrix mask = MaskMatrix::Constant(8, 6, true);
    for (Family family : {Family::poisson, Family::gaussian}) {
        const Factorization plain = fit_nmf(X, 2, family, 31);
        const Factorization masked = fit_nmf_masked(X, mask, 2, family, 31);
        CHECK(bitwise_equal(plain.features, masked.features));
        CHECK(bitwise_equal(plain.weights, masked.weights));
        CHECK(plain.loglik == masked.loglik);
    }
}

TEST_CASE("masked entries have no influence on the fit") {
    Rng rng(9);
    DataMatrix X = random_poisson_data(8, 6, 2, rng);
    MaskMatrix mask = MaskMatrix::Constant(8, 6, true);
    mask(1, 2) = false;
    mask(4, 0) = false;
    const Factorization before = fit_nmf_masked(X, mask, 2, Family::poisson, 13);

    DataMatrix X2 = X;
    X2.values(1, 2) = 1e6;
    X2.values(4, 0) = 123456.0;
    const Factorization after = fit_nmf_masked(X2, mask, 2, Family::poisson, 13);
    CHECK(bitwise_equal(before.features, after.features));
    CHECK(bitwise_equal(before.weights, after.weights));
}

TEST_CASE("random masks never let held-out cells leak into the fit") {
    Rng rng(10);
    for (int rep = 0; rep < 5; ++rep) {
        DataMatrix X = random_poisson_data(7, 6, 2, rng);
        MaskMatrix mask = MaskMatrix::Constant(7, 6, true);
        for (Index j = 0; j < 6; ++j)
            for (Index i = 0; i < 7; ++i)
                if (rng.uniform() < 0.25 && i != j) mask(i, j) = false;
        DataMatrix X2 = X;
        for (Index j = 0; j < 6; ++j)
            for (Index i = 0; i < 7; ++i)
                if (!mask(i, j)) X2.values(i, j) = std::floor(rng.uniform(0, 1e5));
        const Factorization a = fit_nmf_masked(X, mask, 2, Family::poisson, 100 + rep);
        const Factorization b = fit_nmf_masked(X2, mask, 2, Family::poisson, 100 + rep);
        CHECK(bitwise_equal(a.features, b.features));
        CHECK(bitwise_equal(a.weights, b.weights));
    }
}

TEST_CASE("30% masked rank-1 data is imputed within 5% relative error") {
    const DataMatrix X = integer_rank1(10, 8);
    Rng rng(21);
    MaskMatrix mask = MaskMatrix::Constant(10, 8, true);
    int masked = 0;
    while (masked < 24) {
        const Index i = static_cast<Index>(rng.next_u64() % 10);
        const Index j = static_cast<Index>(rng.next_u64() % 8);
        if (!mask(i, j)) continue;
        mask(i, j) = false;
        ++masked;
    }
    for (Index i = 0; i < 10; ++i) REQUIRE(mask.row(i).any());
    for (Index j = 0; j < 8; ++j) REQUIRE(mask.col(j).any());

    FitOptions opts;
    opts.max_iter = 20000;
    opts.rel_tol = 1e-13;
    const Factorization fit = fit_nmf_masked(X, mask, 1, Family::poisson, 77, opts);
    const Matrix imputed = fit.mean();
    for (Index j = 0; j < 8; ++j)
        for (Index i = 0; i < 10; ++i)
            if (!mask(i, j))
                CHECK(std::abs(imputed(i, j) - X.values(i, j)) <= 0.05 * X.values(i, j));
}

TEST_CASE("rescaling a feature column and weight row leaves the loglik unchanged") {
    Rng rng(12);
    const DataMatrix X = random_poisson_data(8, 6, 2, rng);
    Factorization fit = fit_nmf(X, 2, Family::poisson, 55);
    const double base = fit.loglik;
    fit.features.col(1) *= 3.7;
    fit.weights.row(1) /= 3.7;
    const double rescaled = poisson_loglik(X.values, fit.mean());
    CHECK(rescaled == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("errors: bad rank, fully masked row or column") {
    Rng rng(13);
    const DataMatrix X = random_poisson_data(5, 4, 1, rng);
    CHECK_THROWS_AS(fit_nmf(X, 0, Family::poisson, 1), std::invalid_argument);
    CHECK_THROWS_AS(fit_nmf(X, 9, Family::poisson, 1), std::invalid_argument);

    MaskMatrix mask = MaskMatrix::Constant(5, 4, true);
    mask.row(2).setConstant(false);
    CHECK_THROWS_AS(fit_nmf_masked(X, mask, 1, Family::poisson, 1), DataError);
    mask.row(2).setConstant(true);
    mask.col(1).setConstant(false);
    CHECK_THROWS_AS(fit_nmf_masked(X, mask, 1, Family::poisson, 1), DataError);
}

TEST_CASE("warm start from an exact factorization stays there") {
    const DataMatrix X = integer_rank1(6, 5);
    Vector t(6), w(5);
    for (Index i = 0; i < 6; ++i) t[i] = static_cast<double>(i + 1);
    for (Index j = 0; j < 5; ++j) w[j] = static_cast<double>(2 * j + 1);
    const Factorization fit = fit_nmf_warm(X, t, w.transpose(), Family::poisson);
    CHECK(kl_divergence(X.values, fit.mean()) <= 1e-8);
}
