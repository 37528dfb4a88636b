#include "nmfrank/likelihood.hpp"

#include <cmath>
#include <string>

namespace nmfrank {

namespace {

void check_shapes(const Matrix& X, const Matrix& M) {
    if (X.rows() != M.rows() || X.cols() != M.cols())
        throw std::invalid_argument("shape mismatch: data is " + std::to_string(X.rows()) + "x" +
                                    std::to_string(X.cols()) + ", mean is " +
                                    std::to_string(M.rows()) + "x" + std::to_string(M.cols()));
}

}  // namespace

double poisson_loglik(const Matrix& X, const Matrix& M) {
    check_shapes(X, M);
    double total = 0.0;
    for (Index j = 0; j < X.cols(); ++j) {
        for (Index i = 0; i < X.rows(); ++i) {
            const double raw = X(i, j);
            const double x = std::round(raw);
            if (std::abs(raw - x) > 1e-9 || x < 0.0)
                throw DataError("Poisson data must be non-negative integers; found " +
                                std::to_string(raw) + " at (" + std::to_string(i + 1) + "," +
                                std::to_string(j + 1) + ")");
            const double m = M(i, j);
            total -= m;
            if (x > 0.0) total += x * std::log(std::max(m, kPoissonMeanFloor)) - std::lgamma(x + 1.0);
        }
    }
    return total;
}

double gaussian_loglik(const Matrix& X, const Matrix& M, double variance) {
    check_shapes(X, M);
    if (variance < kVarianceFloor)
        throw std::invalid_argument("variance " + std::to_string(variance) +
                                    " below floor " + std::to_string(kVarianceFloor));
    const double np = static_cast<double>(X.size());
    const double sse = (X - M).squaredNorm();
    return -0.5 * np * std::log(2.0 * M_PI * variance) - sse / (2.0 * variance);
}

double estimate_variance(const Matrix& X, const Matrix& features, const Matrix& weights) {
    if (features.rows() != X.rows() || weights.cols() != X.cols() ||
        features.cols() != weights.rows())
        throw std::invalid_argument("factor shapes do not conform to the data");
    const double sse = (X - features * weights).squaredNorm();
    return std::max(sse / static_cast<double>(X.size()), kVarianceFloor);
}

double average_variance(const std::vector<double>& per_run_variances) {
    if (per_run_variances.empty()) throw std::invalid_argument("empty variance list");
    double sum = 0.0;
    for (double v : per_run_variances) sum += v;
    return std::max(sum / static_cast<double>(per_run_variances.size()), kVarianceFloor);
}

double model_loglik(const Matrix& X, const Matrix& M, const ModelFamily& family) {
    if (family.kind == Family::poisson) return poisson_loglik(X, M);
    double variance = family.variance;
    if (variance <= 0.0)
        variance = std::max((X - M).squaredNorm() / static_cast<double>(X.size()), kVarianceFloor);
    return gaussian_loglik(X, M, variance);
}

LRStatistic lr_statistic(double loglik_k, double loglik_k1, int k) {
    if (!std::isfinite(loglik_k) || !std::isfinite(loglik_k1))
        throw NumericalError("non-finite log-likelihood in LR statistic");
    return LRStatistic{-2.0 * (loglik_k - loglik_k1), k, loglik_k, loglik_k1};
}

}  // namespace nmfrank
