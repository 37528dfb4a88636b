#ifndef NMFRANK_RANK_SELECTION_HPP
#define NMFRANK_RANK_SELECTION_HPP

#include <optional>

#include "nmfrank/bootstrap.hpp"
#include "nmfrank/deconvolution.hpp"
#include "nmfrank/nmf.hpp"
#include "nmfrank/types.hpp"

namespace nmfrank {

struct SampleSummary {
    double mean = 0.0;
    double sd = 0.0;
    double q05 = 0.0, q25 = 0.0, q50 = 0.0, q75 = 0.0, q95 = 0.0;
};

SampleSummary summarize(std::vector<double> values);

// One round of the sequential test H0: rank == k vs Ha: rank >= k+1.
struct RankStep {
    int k = 0;
    double lambda_obs = 0.0;
    double pvalue = 0.0;
    bool reject = false;  // pvalue < alpha
    double loglik_k = 0.0;
    double loglik_k1 = 0.0;
    SampleSummary lr_summary;
    std::optional<SampleSummary> error_summary;  // decon only
    bool decon_converged = true;
    double decon_bandwidth = 0.0;
    double decon_penalty = 0.0;
    std::uint64_t step_seed = 0;
    // Wall-clock time of the step. Volatile: serialized into the run
    // manifest, never into the report, so reports stay byte-reproducible.
    double wallclock_seconds = 0.0;
    // Raw samples and the fitted density, retained when
    // SelectionConfig::keep_samples is set (density exports).
    std::vector<double> lr_values;
    std::vector<double> error_values;
    std::optional<DeconDensity> density;
};

struct ImputeAudit {
    std::vector<int> k_grid;
    std::vector<double> avg_loss;                       // aligned with k_grid
    std::vector<std::vector<double>> per_repeat_loss;   // [repeat][k index]
};

struct RankReport {
    Method method = Method::decon;
    int selected_rank = 0;
    bool capped = false;  // sequential test still rejecting at k_max
    std::vector<RankStep> steps;
    SelectionConfig config;
    std::vector<std::uint64_t> seed_trace;
    ImputeAudit impute;  // impute method only
};

// Sequential Boot-test: best-of-m fits on the data and on every bootstrap
// replicate, empirical p-values.
RankReport select_rank_boot(const DataMatrix& X, const SelectionConfig& config);

// Sequential deconvolved test: single-start bootstrap fits plus a pure
// error sample from one extra dataset; p-values from the deconvolved null.
RankReport select_rank_decon(const DataMatrix& X, const SelectionConfig& config);

// Imputation baseline: repeatedly mask entries, fit every candidate rank on
// the rest, pick the rank minimizing the average held-out loss (generalized
// KL for Poisson, squared error for Gaussian), ties to the smaller rank.
RankReport select_rank_impute(const DataMatrix& X, const SelectionConfig& config,
                              double mask_fraction = 0.3, int repeats = 10,
                              std::vector<int> k_grid = {});

// Dispatch on config.method.
RankReport select_rank(const DataMatrix& X, const SelectionConfig& config);

// Uniform random mask with the given missing fraction (false = held out),
// redrawn up to 100 times until every row and column keeps at least one
// observed entry.
MaskMatrix draw_mask(Index p, Index n, double missing_fraction, std::uint64_t seed);

// Per-cell average held-out reconstruction loss over masked (false) entries.
double heldout_loss(const DataMatrix& X, const MaskMatrix& mask, const Matrix& mean,
                    Family family);

}  // namespace nmfrank

#endif  // NMFRANK_RANK_SELECTION_HPP
