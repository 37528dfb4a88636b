#include "nmfrank/bootstrap.hpp"

#include <algorithm>
#include <string>

#include "nmfrank/likelihood.hpp"
#include "nmfrank/parallel.hpp"
#include "nmfrank/rng.hpp"

namespace nmfrank {

DataMatrix sample_null_dataset(const NullModel& null, std::uint64_t seed) {
    DataMatrix out;
    out.values.resize(null.mean.rows(), null.mean.cols());
    Rng rng(seed);
    if (null.family.kind == Family::poisson) {
        for (Index j = 0; j < null.mean.cols(); ++j)
            for (Index i = 0; i < null.mean.rows(); ++i)
                out.values(i, j) = rng.poisson(null.mean(i, j));
    } else {
        const double sd = std::sqrt(std::max(null.family.variance, kVarianceFloor));
        for (Index j = 0; j < null.mean.cols(); ++j)
            for (Index i = 0; i < null.mean.rows(); ++i)
                out.values(i, j) = std::max(0.0, rng.normal(null.mean(i, j), sd));
    }
    return out;
}

LRSample boot_lr_sample_bestofm(const NullModel& null, int k, int B, int m,
                                std::uint64_t master_seed, const FitOptions& opts) {
    if (B < 1) throw std::invalid_argument("bootstrap size must be >= 1");
    if (m < 1) throw std::invalid_argument("starts must be >= 1");

    LRSample sample;
    sample.k = k;
    sample.values.resize(B);
    sample.per_sample_seeds.resize(B);
    sample.logliks_k.resize(B);
    sample.logliks_k1.resize(B);

    parallel::parallel_for(static_cast<std::size_t>(B), [&](std::size_t b) {
        try {
            const std::uint64_t data_seed = derive_seed(master_seed, kStreamBootData, b);
            const DataMatrix boot = sample_null_dataset(null, data_seed);
            const auto fit_k = multi_start_fit(boot, k, null.family.kind, m,
                                               derive_seed(master_seed, kStreamBootFit, b, k), opts);
            const auto fit_k1 = multi_start_fit(
                boot, k + 1, null.family.kind, m,
                derive_seed(master_seed, kStreamBootFit, b, k + 1), opts);
            sample.per_sample_seeds[b] = data_seed;
            sample.values[b] = lr_statistic(fit_k.best.loglik, fit_k1.best.loglik, k).value;
            sample.logliks_k[b] = fit_k.all_logliks;
            sample.logliks_k1[b] = fit_k1.all_logliks;
        } catch (const NumericalError& e) {
            throw NumericalError(std::string(e.what()) + " (bootstrap replicate " +
                                 std::to_string(b) + ")");
        }
    });
    return sample;
}

LRSample boot_lr_sample_single(const NullModel& null, int k, int B, std::uint64_t master_seed,
                               const FitOptions& opts) {
    return boot_lr_sample_bestofm(null, k, B, 1, master_seed, opts);
}

std::vector<double> error_values_from_logliks(const std::vector<double>& logliks_k,
                                              const std::vector<double>& logliks_k1) {
    if (logliks_k.empty() || logliks_k1.empty())
        throw std::invalid_argument("empty loglik list in error sample");
    const double best_k = *std::max_element(logliks_k.begin(), logliks_k.end());
    const double best_k1 = *std::max_element(logliks_k1.begin(), logliks_k1.end());
    std::vector<double> values;
    values.reserve(logliks_k.size() * logliks_k1.size());
    // A single-start LR draw decomposes as lambda* = lambda0* + 2(e_i(k) -
    // e_j(k+1)) in terms of the non-negative shortfalls e; enumerating all
    // start pairs gives the additive-error sample the deconvolution needs.
    for (double lk : logliks_k) {
        const double ei = best_k - lk;
        for (double lk1 : logliks_k1) {
            const double ej = best_k1 - lk1;
            values.push_back(2.0 * (ei - ej));
        }
    }
    return values;
}

ErrorSample pure_error_sample(const NullModel& null, int k, int m, std::uint64_t master_seed,
                              const FitOptions& opts) {
    if (m < 2) throw std::invalid_argument("the error sample needs m >= 2 starts");

    const DataMatrix extra =
        sample_null_dataset(null, derive_seed(master_seed, kStreamErrorData));
    const auto fit_k = multi_start_fit(extra, k, null.family.kind, m,
                                       derive_seed(master_seed, kStreamErrorFit, k), opts);
    const auto fit_k1 = multi_start_fit(extra, k + 1, null.family.kind, m,
                                        derive_seed(master_seed, kStreamErrorFit, k + 1), opts);

    ErrorSample sample;
    sample.starts = m;
    sample.logliks_k = fit_k.all_logliks;
    sample.logliks_k1 = fit_k1.all_logliks;
    sample.values = error_values_from_logliks(sample.logliks_k, sample.logliks_k1);
    return sample;
}

}  // namespace nmfrank
