#include "nmfrank/deconvolution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nmfrank/rng.hpp"

namespace nmfrank {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014327;

double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }
double normal_survival(double z) { return 0.5 * std::erfc(z / M_SQRT2); }

// Mixture response matrix: A(i,g) = (1/M) sum_j K_h(x_i - e_j - grid_g).
Matrix mixture_responses(const std::vector<double>& xs, const std::vector<double>& errors,
                         const std::vector<double>& grid, double h) {
    const Index n = static_cast<Index>(xs.size());
    const Index g = static_cast<Index>(grid.size());
    Matrix A(n, g);
    const double inv_m = 1.0 / static_cast<double>(errors.size());
    for (Index i = 0; i < n; ++i) {
        for (Index c = 0; c < g; ++c) {
            double acc = 0.0;
            for (double e : errors) acc += normal_pdf((xs[i] - e - grid[c]) / h);
            A(i, c) = acc * inv_m / h;
        }
    }
    return A;
}

double penalty_value(const Vector& w) {
    double pen = 0.0;
    for (Index g = 1; g + 1 < w.size(); ++g) {
        const double d2 = w[g - 1] - 2.0 * w[g] + w[g + 1];
        pen += d2 * d2;
    }
    return pen;
}

// Gradient of -tau * ||D2 w||^2 is -2 tau * D2' D2 w.
Vector penalty_gradient(const Vector& w, double tau) {
    Vector grad = Vector::Zero(w.size());
    for (Index g = 1; g + 1 < w.size(); ++g) {
        const double d2 = w[g - 1] - 2.0 * w[g] + w[g + 1];
        grad[g - 1] -= 2.0 * tau * d2;
        grad[g] += 4.0 * tau * d2;
        grad[g + 1] -= 2.0 * tau * d2;
    }
    return grad;
}

struct WeightFit {
    Vector weights;
    bool converged = false;
    int iterations = 0;
    double objective = 0.0;
    std::vector<double> trace;
};

// Maximizes sum_i log((A w)_i) - tau * pen(w) over the simplex by
// exponentiated-gradient ascent with backtracking; each step is
// multiplicative in the weights followed by renormalization, so
// non-negativity and the sum constraint hold throughout. The objective is
// concave, hence the monotone ascent converges to the global maximum.
WeightFit fit_weights(const Matrix& A, double tau, const DeconOptions& opts) {
    const Index G = A.cols();
    Vector w = Vector::Constant(G, 1.0 / static_cast<double>(G));

    auto objective = [&](const Vector& v) {
        const Vector mix = A * v;
        double ll = 0.0;
        for (Index i = 0; i < mix.size(); ++i) ll += std::log(std::max(mix[i], 1e-300));
        return ll - tau * penalty_value(v);
    };

    WeightFit fit;
    double obj = objective(w);
    if (opts.track_objective) fit.trace.push_back(obj);

    double step = 1.0;
    int iter = 0;
    for (; iter < opts.max_iter; ++iter) {
        const Vector mix = A * w;
        Vector grad = penalty_gradient(w, tau);
        for (Index i = 0; i < A.rows(); ++i) grad += A.row(i).transpose() / std::max(mix[i], 1e-300);

        const double gmax = grad.maxCoeff();
        bool accepted = false;
        double eta = step;
        for (int bt = 0; bt < 60; ++bt) {
            Vector cand = (w.array() * ((grad.array() - gmax) * eta).exp()).max(1e-300);
            cand /= cand.sum();
            const double cand_obj = objective(cand);
            if (cand_obj > obj) {
                w = std::move(cand);
                const double rel = (cand_obj - obj) / std::max(std::abs(obj), 1e-300);
                obj = cand_obj;
                if (opts.track_objective) fit.trace.push_back(obj);
                accepted = true;
                step = eta * 2.0;
                if (rel < opts.tol) {
                    fit.converged = true;
                    ++iter;
                }
                break;
            }
            eta *= 0.5;
        }
        if (!accepted) {
            // No ascent direction at any step size: stationary point.
            fit.converged = true;
            ++iter;
            break;
        }
        if (fit.converged) break;
    }

    w /= w.sum();
    fit.weights = std::move(w);
    fit.iterations = iter;
    fit.objective = obj;
    return fit;
}

struct GridSpec {
    std::vector<double> grid;
    double h = 0.0;
};

GridSpec build_grid(const std::vector<double>& contaminated, const std::vector<double>& errors,
                    const DeconOptions& opts) {
    const auto [lam_min, lam_max] = std::minmax_element(contaminated.begin(), contaminated.end());
    const auto [err_min, err_max] = std::minmax_element(errors.begin(), errors.end());
    const double lo = *lam_min - *err_max;
    const double hi = *lam_max - *err_min;
    const double span = hi - lo;
    const int G = opts.grid_size;
    if (G < 12) throw std::invalid_argument("grid_size must be >= 12");
    if (!(span > 1e-12 * std::max(1.0, std::abs(lo))))
        throw DataError("degenerate deconvolution grid: all lambda* - e coincide");

    GridSpec spec;
    double spacing;
    if (opts.bandwidth > 0.0) {
        spec.h = opts.bandwidth;
        spacing = (span + 6.0 * spec.h) / static_cast<double>(G - 1);
    } else {
        // h = 1.5 * spacing and 3h padding on both sides solve to
        // spacing = span / (G - 10).
        spacing = span / static_cast<double>(G - 10);
        spec.h = 1.5 * spacing;
    }
    const double start = lo - 3.0 * spec.h + opts.grid_offset * spacing;
    spec.grid.resize(G);
    for (int g = 0; g < G; ++g) spec.grid[g] = start + spacing * g;
    return spec;
}

}  // namespace

double DeconDensity::pdf(double x) const {
    double acc = 0.0;
    for (std::size_t g = 0; g < grid.size(); ++g)
        acc += weights[g] * normal_pdf((x - grid[g]) / bandwidth);
    return acc / bandwidth;
}

double DeconDensity::survival(double x) const {
    double acc = 0.0;
    for (std::size_t g = 0; g < grid.size(); ++g)
        acc += weights[g] * normal_survival((x - grid[g]) / bandwidth);
    return std::clamp(acc, 0.0, 1.0);
}

double DeconDensity::cdf(double x) const { return 1.0 - survival(x); }

double DeconDensity::mean() const {
    double acc = 0.0;
    for (std::size_t g = 0; g < grid.size(); ++g) acc += weights[g] * grid[g];
    return acc;
}

double DeconDensity::sd() const {
    const double m = mean();
    double acc = 0.0;
    for (std::size_t g = 0; g < grid.size(); ++g)
        acc += weights[g] * (grid[g] * grid[g] + bandwidth * bandwidth);
    return std::sqrt(std::max(acc - m * m, 0.0));
}

double DeconDensity::quantile(double q) const {
    double lo = grid.front() - 10.0 * bandwidth;
    double hi = grid.back() + 10.0 * bandwidth;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (cdf(mid) < q ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

DeconDensity deconvolve(const std::vector<double>& contaminated,
                        const std::vector<double>& errors, const DeconOptions& opts) {
    if (contaminated.empty()) throw std::invalid_argument("empty contaminated sample");
    if (errors.empty()) throw std::invalid_argument("empty error sample");

    const GridSpec spec = build_grid(contaminated, errors, opts);
    const Matrix A = mixture_responses(contaminated, errors, spec.grid, spec.h);
    WeightFit fit = fit_weights(A, opts.penalty, opts);

    DeconDensity density;
    density.grid = spec.grid;
    density.weights.assign(fit.weights.data(), fit.weights.data() + fit.weights.size());
    density.bandwidth = spec.h;
    density.penalty = opts.penalty;
    density.converged = fit.converged;
    density.iterations = fit.iterations;
    density.objective = fit.objective;
    density.objective_trace = std::move(fit.trace);
    return density;
}

DeconDensity deconvolve(const LRSample& contaminated, const ErrorSample& errors,
                        const DeconOptions& opts) {
    return deconvolve(contaminated.values, errors.values, opts);
}

double pvalue_decon(const DeconDensity& density, double lambda_obs) {
    return density.survival(lambda_obs);
}

double pvalue_empirical(const std::vector<double>& sample, double lambda_obs) {
    if (sample.empty()) throw std::invalid_argument("empty bootstrap sample");
    std::size_t count = 0;
    for (double v : sample)
        if (v >= lambda_obs) ++count;
    return static_cast<double>(1 + count) / static_cast<double>(sample.size() + 1);
}

double pvalue_empirical(const LRSample& sample, double lambda_obs) {
    return pvalue_empirical(sample.values, lambda_obs);
}

double select_penalty_cv(const std::vector<double>& contaminated,
                         const std::vector<double>& errors, const DeconOptions& opts,
                         std::uint64_t seed, const std::vector<double>& candidates) {
    if (candidates.empty()) throw std::invalid_argument("no penalty candidates");
    const std::size_t n = contaminated.size();
    const int folds = std::min<int>(5, static_cast<int>(n));
    if (folds < 2) return opts.penalty;

    // Fixed grid across folds so held-out logliks are comparable.
    const GridSpec spec = build_grid(contaminated, errors, opts);
    const Matrix A = mixture_responses(contaminated, errors, spec.grid, spec.h);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, kStreamCvFold));
    for (std::size_t i = n; i > 1; --i)
        std::swap(order[i - 1], order[rng.next_u64() % i]);

    double best_tau = candidates.front();
    double best_score = -std::numeric_limits<double>::infinity();
    for (double tau : candidates) {
        double score = 0.0;
        for (int f = 0; f < folds; ++f) {
            std::vector<Index> train, test;
            for (std::size_t i = 0; i < n; ++i)
                (static_cast<int>(i % folds) == f ? test : train)
                    .push_back(static_cast<Index>(order[i]));
            Matrix At(static_cast<Index>(train.size()), A.cols());
            for (std::size_t r = 0; r < train.size(); ++r) At.row(r) = A.row(train[r]);
            DeconOptions fold_opts = opts;
            fold_opts.penalty = tau;
            fold_opts.track_objective = false;
            const WeightFit fit = fit_weights(At, tau, fold_opts);
            for (Index t : test)
                score += std::log(std::max(A.row(t).dot(fit.weights), 1e-300));
        }
        if (score > best_score || (score == best_score && tau > best_tau)) {
            best_score = score;
            best_tau = tau;
        }
    }
    return best_tau;
}

}  // namespace nmfrank
