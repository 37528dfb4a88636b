#ifndef NMFRANK_BOOTSTRAP_HPP
#define NMFRANK_BOOTSTRAP_HPP

#include <cstdint>
#include <vector>

#include "nmfrank/nmf.hpp"
#include "nmfrank/types.hpp"

namespace nmfrank {

// The fitted null used for parametric bootstrap draws: entrywise means from
// the best rank-k fit, plus the (averaged) variance for the Gaussian family.
struct NullModel {
    Matrix mean;  // p x n, entries >= 0
    ModelFamily family;
};

// Bootstrap draws of the LR statistic at null rank k.
struct LRSample {
    std::vector<double> values;  // B values of lambda*
    int k = 0;
    std::vector<std::uint64_t> per_sample_seeds;  // dataset seed per replicate
    // Raw per-start logliks behind each lambda*, kept for audits and for the
    // best-of-m vs single-start identity.
    std::vector<std::vector<double>> logliks_k;
    std::vector<std::vector<double>> logliks_k1;
};

// The pure optimization-error sample: the additive error contaminating a
// single-start LR draw, 2(e_i(k) - e_j(k+1)) in terms of the non-negative
// shortfalls e_i = max loglik - loglik_i, over all start pairs on one extra
// bootstrap dataset.
struct ErrorSample {
    std::vector<double> values;  // m^2 values, i-major order
    int starts = 0;              // m
    std::vector<double> logliks_k;   // per-start logliks on the extra dataset
    std::vector<double> logliks_k1;
};

// Draws one dataset from the null: Poisson(mean_ij), or Normal(mean_ij,
// variance) with negatives replaced by 0. Same dimensions as the original
// data; deterministic in seed.
DataMatrix sample_null_dataset(const NullModel& null, std::uint64_t seed);

// For each of B datasets, fits ranks k and k+1 with m starts each and
// records lambda* from the two best logliks. Replicates may run in
// parallel; results are identical to serial execution.
LRSample boot_lr_sample_bestofm(const NullModel& null, int k, int B, int m,
                                std::uint64_t master_seed, const FitOptions& opts = {});

// The single-start variant used by the deconvolved test; equals
// boot_lr_sample_bestofm with m = 1 bit for bit. Values may be negative.
LRSample boot_lr_sample_single(const NullModel& null, int k, int B, std::uint64_t master_seed,
                               const FitOptions& opts = {});

// Fits ranks k and k+1 with m starts each on ONE additional bootstrap
// dataset (a reserved seed stream) and returns all m^2 pair differences.
ErrorSample pure_error_sample(const NullModel& null, int k, int m, std::uint64_t master_seed,
                              const FitOptions& opts = {});

// Pair enumeration behind pure_error_sample: e_i = max(lk) - lk[i],
// f_j = max(lk1) - lk1[j], values are 2(e_i - f_j) in i-major order.
std::vector<double> error_values_from_logliks(const std::vector<double>& logliks_k,
                                              const std::vector<double>& logliks_k1);

}  // namespace nmfrank

#endif  // NMFRANK_BOOTSTRAP_HPP
