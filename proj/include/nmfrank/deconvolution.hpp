#ifndef NMFRANK_DECONVOLUTION_HPP
#define NMFRANK_DECONVOLUTION_HPP

#include <cstdint>
#include <vector>

#include "nmfrank/bootstrap.hpp"

namespace nmfrank {

struct DeconOptions {
    int grid_size = 128;     // G support points
    double penalty = 1.0;    // tau on squared second differences of the weights
    double bandwidth = 0.0;  // kernel h; 0 derives 1.5x the grid spacing
    // Adjacent kernels overlap heavily, so the likelihood has near-flat
    // ridges; the tight tolerance lets the penalty settle them, which keeps
    // p-values stable under half-spacing grid shifts.
    int max_iter = 20000;
    double tol = 1e-11;  // relative objective change
    // Shifts the support by this fraction of one spacing (stability checks).
    double grid_offset = 0.0;
    bool track_objective = false;
};

// A Gaussian kernel mixture on a fixed grid: f(x) = sum_g w_g K_h(x - grid_g).
struct DeconDensity {
    std::vector<double> grid;     // strictly increasing support points
    std::vector<double> weights;  // non-negative, sum to 1
    double bandwidth = 0.0;       // h
    double penalty = 0.0;         // tau used
    bool converged = false;
    int iterations = 0;
    double objective = 0.0;  // penalized loglik at return
    std::vector<double> objective_trace;

    double pdf(double x) const;
    double cdf(double x) const;
    double survival(double x) const;  // exact tail: sum of Gaussian survivals
    double mean() const;
    double sd() const;
    double quantile(double q) const;
};

// Estimates the error-free density of the LR statistic from the contaminated
// sample (lambda* = lambda0* + e) and a pure error sample, by maximizing the
// kernel-mixture log-likelihood of the data minus tau * ||second differences
// of the weights||^2 over the probability simplex. Ascent is monotone; on
// hitting max_iter the best iterate is returned with converged = false.
// Throws DataError when all lambda* - e coincide (degenerate support).
DeconDensity deconvolve(const std::vector<double>& contaminated, const std::vector<double>& errors,
                        const DeconOptions& opts = {});
DeconDensity deconvolve(const LRSample& contaminated, const ErrorSample& errors,
                        const DeconOptions& opts = {});

// Upper-tail probability of the deconvolved density at lambda_obs.
double pvalue_decon(const DeconDensity& density, double lambda_obs);

// Add-one empirical p-value (1 + #{values >= lambda_obs}) / (B + 1).
double pvalue_empirical(const std::vector<double>& sample, double lambda_obs);
double pvalue_empirical(const LRSample& sample, double lambda_obs);

// 5-fold cross-validated choice of tau by held-out contaminated-sample
// log-likelihood; ties go to the smoother (larger) candidate.
double select_penalty_cv(const std::vector<double>& contaminated,
                         const std::vector<double>& errors, const DeconOptions& opts,
                         std::uint64_t seed,
                         const std::vector<double>& candidates = {1e-2, 1e-1, 1.0, 10.0, 100.0});

}  // namespace nmfrank

#endif  // NMFRANK_DECONVOLUTION_HPP
