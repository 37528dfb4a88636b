#ifndef NMFRANK_LIKELIHOOD_HPP
#define NMFRANK_LIKELIHOOD_HPP

#include <vector>

#include "nmfrank/types.hpp"

namespace nmfrank {

// Exact Poisson log-likelihood of X under entrywise means M, with the
// 0*ln(0) = 0 convention. Mean entries are floored at kPoissonMeanFloor
// inside the logarithm. X entries must be integral within 1e-9.
double poisson_loglik(const Matrix& X, const Matrix& M);

// Exact Gaussian log-likelihood with a common per-entry variance, constants
// included so values are comparable across ranks.
double gaussian_loglik(const Matrix& X, const Matrix& M, double variance);

// Mean squared residual of X against features*weights, floored at
// kVarianceFloor.
double estimate_variance(const Matrix& X, const Matrix& features, const Matrix& weights);

// Arithmetic mean of per-run variance estimates, floored.
double average_variance(const std::vector<double>& per_run_variances);

// Log-likelihood of X under the given family with mean matrix M. Gaussian
// uses the profile variance (the mean squared residual) unless an explicit
// variance is supplied.
double model_loglik(const Matrix& X, const Matrix& M, const ModelFamily& family);

struct LRStatistic {
    double value = 0.0;  // -2*(loglik_k - loglik_k1)
    int k = 0;           // null rank
    double loglik_k = 0.0;
    double loglik_k1 = 0.0;
};

// May be negative when either optimum is not global; that slack is exactly
// the convergence error the deconvolution step removes.
LRStatistic lr_statistic(double loglik_k, double loglik_k1, int k);

}  // namespace nmfrank

#endif  // NMFRANK_LIKELIHOOD_HPP
