#ifndef NMFRANK_NMF_HPP
#define NMFRANK_NMF_HPP

#include <cstdint>

#include "nmfrank/types.hpp"

namespace nmfrank {

using MaskMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct MultiStartResult {
    Factorization best;
    std::vector<double> all_logliks;    // one per start, in start order
    std::vector<double> all_variances;  // per-run residual variances (Gaussian fits)
};

// Fits rank-k NMF by multiplicative updates: generalized KL divergence for
// the Poisson family, squared error for the Gaussian one. The objective is
// non-increasing across sweeps; the returned loglik is evaluated on the
// final mean matrix (Gaussian: at the fit's own residual variance).
// Deterministic in (X, k, model, seed, opts).
Factorization fit_nmf(const DataMatrix& X, int k, Family model, std::uint64_t seed,
                      const FitOptions& opts = {});

// Same updates from caller-supplied starting factors (used for nested-model
// checks and warm starts).
Factorization fit_nmf_warm(const DataMatrix& X, Matrix features0, Matrix weights0, Family model,
                           const FitOptions& opts = {});

// Multiplicative updates restricted to observed entries (mask true =
// observed); masked entries never influence the fit, its initialization
// included. An all-true mask reproduces fit_nmf bit for bit.
Factorization fit_nmf_masked(const DataMatrix& X, const MaskMatrix& mask, int k, Family model,
                             std::uint64_t seed, const FitOptions& opts = {});

// Runs fit_nmf with m per-start seeds derived from master_seed; returns the
// best fit by loglik, ties broken by the lowest start index. Starts may run
// concurrently; the result is independent of execution order.
MultiStartResult multi_start_fit(const DataMatrix& X, int k, Family model, int m,
                                 std::uint64_t master_seed, const FitOptions& opts = {});

}  // namespace nmfrank

#endif  // NMFRANK_NMF_HPP
