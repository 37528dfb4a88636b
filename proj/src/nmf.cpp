#include "nmfrank/nmf.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "nmfrank/likelihood.hpp"
#include "nmfrank/parallel.hpp"
#include "nmfrank/rng.hpp"

namespace nmfrank {

namespace {

// All fits, masked or not, go through the same observed-entry formulas with
// a 0/1 weight matrix; fit_nmf passes an all-ones mask, which keeps the two
// entry points bit-identical.
double masked_objective(Family family, const Matrix& Xobs, const Matrix& A, const Matrix& MU) {
    if (family == Family::gaussian) {
        return (Xobs - A.cwiseProduct(MU)).squaredNorm();
    }
    // Generalized KL over observed cells; the entry floor on the factors
    // keeps MU strictly positive.
    double total = 0.0;
    for (Index j = 0; j < Xobs.cols(); ++j) {
        for (Index i = 0; i < Xobs.rows(); ++i) {
            const double x = Xobs(i, j);
            const double mu = MU(i, j);
            total += A(i, j) * mu;
            if (x > 0.0) total += x * std::log(x / mu) - x;
        }
    }
    return total;
}

Factorization run_updates(const DataMatrix& X, const Matrix& A, Matrix T, Matrix W, Family model,
                          std::uint64_t seed, const FitOptions& opts) {
    const Index p = X.rows();
    const Index n = X.cols();
    const int k = static_cast<int>(T.cols());

    const Matrix Xobs = A.cwiseProduct(X.values);

    Factorization fit;
    fit.rank = k;
    fit.model.kind = model;
    fit.seed = seed;

    Matrix MU = T * W;
    double obj = masked_objective(model, Xobs, A, MU);
    if (!std::isfinite(obj)) throw NumericalError("non-finite objective at initialization");
    if (opts.track_objective) fit.objective_trace.push_back(obj);

    Matrix ratio(p, n), num, den;
    int iter = 0;
    for (; iter < opts.max_iter; ++iter) {
        if (model == Family::poisson) {
            ratio = Xobs.cwiseQuotient(MU);
            num.noalias() = ratio * W.transpose();
            den.noalias() = A * W.transpose();
            T = (T.array() * num.array() / (den.array() + kUpdateEps)).max(kUpdateEps).matrix();
            MU.noalias() = T * W;

            ratio = Xobs.cwiseQuotient(MU);
            num.noalias() = T.transpose() * ratio;
            den.noalias() = T.transpose() * A;
            W = (W.array() * num.array() / (den.array() + kUpdateEps)).max(kUpdateEps).matrix();
        } else {
            num.noalias() = Xobs * W.transpose();
            den.noalias() = A.cwiseProduct(MU) * W.transpose();
            T = (T.array() * num.array() / (den.array() + kUpdateEps)).max(kUpdateEps).matrix();
            MU.noalias() = T * W;

            num.noalias() = T.transpose() * Xobs;
            den.noalias() = T.transpose() * A.cwiseProduct(MU);
            W = (W.array() * num.array() / (den.array() + kUpdateEps)).max(kUpdateEps).matrix();
        }
        MU.noalias() = T * W;

        const double next = masked_objective(model, Xobs, A, MU);
        if (!std::isfinite(next))
            throw NumericalError("non-finite objective at iteration " + std::to_string(iter + 1));
        if (opts.track_objective) fit.objective_trace.push_back(next);

        const double rel = std::abs(obj - next) / std::max(std::abs(obj), 1e-300);
        obj = next;
        if (rel < opts.rel_tol) {
            fit.converged = true;
            ++iter;
            break;
        }
    }

    fit.iterations = iter;
    fit.features = std::move(T);
    fit.weights = std::move(W);

    if (model == Family::poisson) {
        fit.loglik = poisson_loglik(X.values, fit.mean());
    } else {
        fit.model.variance = estimate_variance(X.values, fit.features, fit.weights);
        fit.loglik = gaussian_loglik(X.values, fit.mean(), fit.model.variance);
    }
    return fit;
}

std::pair<Matrix, Matrix> random_init(const DataMatrix& X, const Matrix& A, int k,
                                      std::uint64_t seed, const FitOptions& opts) {
    const Index p = X.rows();
    const Index n = X.cols();
    Rng rng(seed);

    Matrix T(p, k), W(k, n);
    for (Index i = 0; i < p; ++i)
        for (Index j = 0; j < k; ++j) T(i, j) = rng.uniform(0.1, 1.1);

    // Only observed entries may influence the fit, so the gross scale is
    // matched against the observed mean.
    const double observed_mean = A.cwiseProduct(X.values).sum() / A.sum();
    const double scale =
        opts.init_scale * observed_mean * static_cast<double>(p) / static_cast<double>(k);
    for (Index i = 0; i < k; ++i)
        for (Index j = 0; j < n; ++j) W(i, j) = rng.uniform(0.1, 1.1) * scale;

    T = T.array().max(kUpdateEps).matrix();
    W = W.array().max(kUpdateEps).matrix();
    return {std::move(T), std::move(W)};
}

void check_rank(const DataMatrix& X, int k) {
    if (k < 1 || k > std::min(X.rows(), X.cols()))
        throw std::invalid_argument("rank " + std::to_string(k) + " out of range for a " +
                                    std::to_string(X.rows()) + "x" + std::to_string(X.cols()) +
                                    " matrix");
}

}  // namespace

Factorization fit_nmf(const DataMatrix& X, int k, Family model, std::uint64_t seed,
                      const FitOptions& opts) {
    check_rank(X, k);
    const Matrix A = Matrix::Ones(X.rows(), X.cols());
    auto [T, W] = random_init(X, A, k, seed, opts);
    return run_updates(X, A, std::move(T), std::move(W), model, seed, opts);
}

Factorization fit_nmf_warm(const DataMatrix& X, Matrix features0, Matrix weights0, Family model,
                           const FitOptions& opts) {
    if (features0.rows() != X.rows() || weights0.cols() != X.cols() ||
        features0.cols() != weights0.rows())
        throw std::invalid_argument("warm-start factors do not conform to the data");
    check_rank(X, static_cast<int>(features0.cols()));
    const Matrix A = Matrix::Ones(X.rows(), X.cols());
    Matrix T = features0.array().max(kUpdateEps).matrix();
    Matrix W = weights0.array().max(kUpdateEps).matrix();
    return run_updates(X, A, std::move(T), std::move(W), model, 0, opts);
}

Factorization fit_nmf_masked(const DataMatrix& X, const MaskMatrix& mask, int k, Family model,
                             std::uint64_t seed, const FitOptions& opts) {
    check_rank(X, k);
    if (mask.rows() != X.rows() || mask.cols() != X.cols())
        throw std::invalid_argument("mask shape does not match the data");
    for (Index i = 0; i < mask.rows(); ++i)
        if (!mask.row(i).any()) throw DataError("row " + std::to_string(i + 1) + " fully masked");
    for (Index j = 0; j < mask.cols(); ++j)
        if (!mask.col(j).any())
            throw DataError("column " + std::to_string(j + 1) + " fully masked");

    const Matrix A = mask.cast<double>();
    auto [T, W] = random_init(X, A, k, seed, opts);
    return run_updates(X, A, std::move(T), std::move(W), model, seed, opts);
}

MultiStartResult multi_start_fit(const DataMatrix& X, int k, Family model, int m,
                                 std::uint64_t master_seed, const FitOptions& opts) {
    if (m < 1) throw std::invalid_argument("multi-start requires m >= 1");
    check_rank(X, k);

    std::vector<Factorization> fits(m);
    parallel::parallel_for(static_cast<std::size_t>(m), [&](std::size_t i) {
        const std::uint64_t seed = derive_seed(master_seed, kStreamInit, k, i);
        try {
            fits[i] = fit_nmf(X, k, model, seed, opts);
        } catch (const NumericalError& e) {
            throw NumericalError(std::string(e.what()) + " (start " + std::to_string(i) + ")");
        }
    });

    MultiStartResult result;
    result.all_logliks.reserve(m);
    std::size_t best = 0;
    for (std::size_t i = 0; i < fits.size(); ++i) {
        result.all_logliks.push_back(fits[i].loglik);
        if (model == Family::gaussian) result.all_variances.push_back(fits[i].model.variance);
        if (fits[i].loglik > fits[best].loglik) best = i;
    }
    result.best = std::move(fits[best]);
    return result;
}

}  // namespace nmfrank
