#ifndef NMFRANK_TYPES_HPP
#define NMFRANK_TYPES_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace nmfrank {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Smallest admissible Gaussian variance; keeps the parametric bootstrap
// nondegenerate when residuals vanish on exactly factorizable data.
constexpr double kVarianceFloor = 1e-12;

// Guard added to multiplicative-update denominators and used as the entry
// floor for factor matrices.
constexpr double kUpdateEps = 1e-16;

// Poisson means are floored at this value inside logarithms, on real and
// bootstrap data alike, so the LR statistic is not biased by the guard.
constexpr double kPoissonMeanFloor = 1e-10;

// Raised for malformed or invalid input data (parse failures, negative
// entries, empty matrices, bad masks).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised when an optimization encounters a non-finite objective.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Family { poisson, gaussian };

const char* family_name(Family f);
Family family_from_name(const std::string& name);

struct ModelFamily {
    Family kind = Family::poisson;
    // Common per-entry variance; meaningful only when kind == gaussian.
    double variance = 0.0;
};

// A non-negative p x n observation matrix: counts under the Poisson model,
// intensities under the Gaussian one. Counts are stored as reals so a single
// matrix type serves both families; Poisson operations verify integrality
// within 1e-9 and round. Immutable by convention after construction.
struct DataMatrix {
    Matrix values;                          // p x n, every entry >= 0
    std::vector<std::string> row_labels;    // size p, or empty
    std::vector<std::string> col_labels;    // size n, or empty
    std::vector<std::string> removed_rows;  // labels of all-zero rows dropped on ingest

    Index rows() const { return values.rows(); }
    Index cols() const { return values.cols(); }
};

struct Factorization {
    Matrix features;  // p x k, columns are features
    Matrix weights;   // k x n, columns weight one observation
    int rank = 0;
    double loglik = 0.0;
    ModelFamily model;
    std::uint64_t seed = 0;  // initialization seed of this fit
    int iterations = 0;
    bool converged = false;
    // Per-sweep objective values; filled only when FitOptions::track_objective.
    std::vector<double> objective_trace;

    Matrix mean() const { return features * weights; }
};

enum class Method { boot, decon, impute };

const char* method_name(Method m);
Method method_from_name(const std::string& name);

struct FitOptions {
    int max_iter = 2000;
    double rel_tol = 1e-6;    // relative objective change per full T+W sweep
    double init_scale = 1.0;  // extra multiplier on the scale-matched W init
    bool track_objective = false;
};

struct SelectionConfig {
    Family model = Family::poisson;
    double alpha = 0.1;
    int bootstrap_size = 50;  // B
    int starts = 50;          // m, initial values per NMF
    int k_start = 1;
    int k_max = 0;  // 0 = unset; validate() fills floor(np/(n+p)) - 1
    std::uint64_t seed = 0;
    Method method = Method::decon;
    FitOptions fit;
    // Imputation baseline knobs (ignored by the test-based methods).
    double mask_fraction = 0.3;
    int impute_repeats = 10;
    std::vector<int> k_grid;  // empty = k_start..k_max
    // Retain raw bootstrap samples and fitted densities in the report
    // (needed by the density-export command).
    bool keep_samples = false;
};

// Largest admissible rank: floor(np/(n+p)) - 1.
int max_rank_cap(Index p, Index n);

// Fills defaults, clamps k_max to the cap above, and rejects inconsistent
// fields. Throws std::invalid_argument with a field-naming message.
SelectionConfig validate(SelectionConfig config, const DataMatrix& data);

// Drops rows whose entries are all zero, recording their labels (1-based row
// numbers when the matrix is unlabeled). Idempotent.
DataMatrix remove_zero_rows(DataMatrix m);

}  // namespace nmfrank

#endif  // NMFRANK_TYPES_HPP
