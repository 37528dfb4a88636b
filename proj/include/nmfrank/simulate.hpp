#ifndef NMFRANK_SIMULATE_HPP
#define NMFRANK_SIMULATE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "nmfrank/rank_selection.hpp"
#include "nmfrank/types.hpp"

namespace nmfrank {

enum class ScenarioFamily { poisson_nmf, normal_nmf, non_nmf };

const char* scenario_family_name(ScenarioFamily f);
ScenarioFamily scenario_family_from_name(const std::string& name);

struct SimScenario {
    ScenarioFamily family = ScenarioFamily::poisson_nmf;
    int true_rank = 2;  // ignored for non_nmf
    Index p = 60;       // rows requested before all-zero-row removal
    Index n = 50;
    // Distance of the perturbed feature to the span of the others; applies
    // to Poisson ranks 2 and 4. Negative = no perturbation construction.
    double d = -1.0;
    double sigma2 = 1.0;  // Gaussian noise variance
    // Sequencing-depth surrogate: explicit list, or LogNormal draws.
    std::vector<double> depths;
    double depth_log_mean = 8.517193191416238;  // ln(5000)
    double depth_log_sd = 0.3;
    std::uint64_t seed = 0;
    SelectionConfig selection;  // method field overridden per run
};

// Raw Gamma(3,2) x Bernoulli(0.7) draws, before any row removal or
// normalization (exposed so sparsity is testable).
Matrix gen_gamma_bernoulli(Index p, int k, std::uint64_t seed);

// Feature matrix: gamma-Bernoulli draws, all-zero rows removed, all-zero
// columns redrawn, columns normalized to sum 1. The returned row count can
// be smaller than p.
Matrix gen_base_features(Index p, int k, std::uint64_t seed);

struct PerturbResult {
    Matrix features;               // perturbed matrix, columns sum to 1
    double requested_d = 0.0;
    double pre_norm_distance = 0.0;  // distance before clipping/renormalizing
    double realized_distance = 0.0;  // distance of the final column
};

// Appends a fourth feature at distance d from the plane of the three given
// ones, along the off-plane component of the normalized all-ones vector,
// with the perpendicular foot at their centroid.
PerturbResult perturb_fourth_feature(const Matrix& features, double d);

// Second feature on the segment from f1 towards the normalized all-ones
// vector, at distance d.
PerturbResult perturb_second_feature(const Vector& f1, double d);

// Columns ~ U(0,1) entries rescaled so each weight column sums to the given
// depth (features with unit column sums then give mean column sums = depth).
Matrix gen_weights_poisson(int k, Index n, const std::vector<double>& depths, std::uint64_t seed);

// Columns ~ 10 * Dirichlet(1.5, ..., 1.5).
Matrix gen_weights_dirichlet(int k, Index n, std::uint64_t seed);

DataMatrix gen_poisson_data(const Matrix& features, const Matrix& weights, std::uint64_t seed);

// Normal(mean, sigma2) entries with negatives replaced by 0.
DataMatrix gen_normal_data(const Matrix& features, const Matrix& weights, double sigma2,
                           std::uint64_t seed);

// Covariance eigenvalues of the non-NMF generator: evenly spaced from 3e-7
// to 1.
std::vector<double> non_nmf_eigenvalues(Index p);

// Poisson draws around column-wise log-multivariate-normal means whose log
// sums are rescaled to log(depth).
DataMatrix gen_non_nmf_data(Index p, Index n, const std::vector<double>& depths,
                            std::uint64_t seed);

std::vector<double> sample_depths(Index n, double log_mean, double log_sd, std::uint64_t seed);

// One replicate's data (and the generating factors for NMF families). The
// feature matrix depends only on the scenario seed; weights and noise are
// re-drawn per replicate.
struct ReplicateData {
    DataMatrix data;
    Matrix features;  // empty for non_nmf
    Matrix weights;   // empty for non_nmf
    std::uint64_t digest = 0;
};

ReplicateData generate_replicate(const SimScenario& scenario, int replicate);

struct ScenarioRun {
    int replicate = 0;
    Method method = Method::decon;
    int selected_rank = 0;
    bool capped = false;
    std::uint64_t data_digest = 0;
};

struct ScenarioResult {
    std::vector<ScenarioRun> runs;       // replicate-major, method order preserved
    std::vector<RankReport> reports;     // aligned with runs when kept
    bool keep_reports = false;
};

// Runs every method on identical data per replicate. Replicates may execute
// in parallel; output order and content match serial execution.
ScenarioResult run_scenario(const SimScenario& scenario, const std::vector<Method>& methods,
                            int replicates, bool keep_reports = false);

// Key-value scenario files: one "key = value" pair per line, '#' comments.
SimScenario parse_scenario_file(const std::string& path);
SimScenario parse_scenario_text(const std::string& text);

// FNV-1a digest of a matrix's entries (reproducibility checks).
std::uint64_t matrix_digest(const Matrix& m);

}  // namespace nmfrank

#endif  // NMFRANK_SIMULATE_HPP
