#include "nmfrank/rank_selection.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "nmfrank/likelihood.hpp"
#include "nmfrank/parallel.hpp"
#include "nmfrank/rng.hpp"

namespace nmfrank {

namespace {

double quantile_of_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

double now_seconds() {
    using namespace std::chrono;
    return duration<double>(steady_clock::now().time_since_epoch()).count();
}

NullModel make_null_model(const MultiStartResult& fit_k, Family family) {
    NullModel null;
    null.mean = fit_k.best.mean();
    null.family.kind = family;
    if (family == Family::gaussian)
        null.family.variance = average_variance(fit_k.all_variances);
    return null;
}

// Shared sequential loop for the Boot-test and Decon-boot-test. The
// rank-(k+1) multi-start from step k is carried into step k+1, where per
// start seeds depend only on (config.seed, rank, start), so the reuse is
// exact.
RankReport sequential_select(const DataMatrix& X, const SelectionConfig& config, bool decon) {
    const SelectionConfig cfg = validate(config, X);
    RankReport report;
    report.method = decon ? Method::decon : Method::boot;
    report.config = cfg;
    report.config.method = report.method;
    report.seed_trace.push_back(cfg.seed);

    std::optional<MultiStartResult> carried;
    for (int k = cfg.k_start;; ++k) {
        const double t0 = now_seconds();
        RankStep step;
        step.k = k;
        step.step_seed = derive_seed(cfg.seed, kStreamStep, k);
        report.seed_trace.push_back(step.step_seed);

        MultiStartResult fit_k = carried ? std::move(*carried)
                                         : multi_start_fit(X, k, cfg.model, cfg.starts, cfg.seed,
                                                           cfg.fit);
        MultiStartResult fit_k1 =
            multi_start_fit(X, k + 1, cfg.model, cfg.starts, cfg.seed, cfg.fit);

        const LRStatistic lr = lr_statistic(fit_k.best.loglik, fit_k1.best.loglik, k);
        step.lambda_obs = lr.value;
        step.loglik_k = lr.loglik_k;
        step.loglik_k1 = lr.loglik_k1;

        const NullModel null = make_null_model(fit_k, cfg.model);
        if (decon) {
            const LRSample sample = boot_lr_sample_single(null, k, cfg.bootstrap_size,
                                                          step.step_seed, cfg.fit);
            const ErrorSample errors =
                pure_error_sample(null, k, cfg.starts, step.step_seed, cfg.fit);
            const DeconDensity density = deconvolve(sample, errors);
            step.pvalue = pvalue_decon(density, step.lambda_obs);
            step.lr_summary = summarize(sample.values);
            step.error_summary = summarize(errors.values);
            step.decon_converged = density.converged;
            step.decon_bandwidth = density.bandwidth;
            step.decon_penalty = density.penalty;
            if (cfg.keep_samples) {
                step.lr_values = sample.values;
                step.error_values = errors.values;
                step.density = density;
            }
        } else {
            const LRSample sample = boot_lr_sample_bestofm(null, k, cfg.bootstrap_size,
                                                           cfg.starts, step.step_seed, cfg.fit);
            step.pvalue = pvalue_empirical(sample, step.lambda_obs);
            step.lr_summary = summarize(sample.values);
            if (cfg.keep_samples) step.lr_values = sample.values;
        }

        step.reject = step.pvalue < cfg.alpha;
        step.wallclock_seconds = now_seconds() - t0;
        report.steps.push_back(std::move(step));

        if (!report.steps.back().reject) {
            report.selected_rank = k;
            return report;
        }
        if (k == cfg.k_max) {
            report.selected_rank = cfg.k_max;
            report.capped = true;
            return report;
        }
        carried = std::move(fit_k1);
    }
}

}  // namespace

SampleSummary summarize(std::vector<double> values) {
    SampleSummary s;
    if (values.empty()) return s;
    const double n = static_cast<double>(values.size());
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    std::sort(values.begin(), values.end());
    s.q05 = quantile_of_sorted(values, 0.05);
    s.q25 = quantile_of_sorted(values, 0.25);
    s.q50 = quantile_of_sorted(values, 0.50);
    s.q75 = quantile_of_sorted(values, 0.75);
    s.q95 = quantile_of_sorted(values, 0.95);
    return s;
}

RankReport select_rank_boot(const DataMatrix& X, const SelectionConfig& config) {
    return sequential_select(X, config, false);
}

RankReport select_rank_decon(const DataMatrix& X, const SelectionConfig& config) {
    return sequential_select(X, config, true);
}

MaskMatrix draw_mask(Index p, Index n, double missing_fraction, std::uint64_t seed) {
    if (!(missing_fraction > 0.0 && missing_fraction < 1.0))
        throw std::invalid_argument("mask fraction must lie in (0,1)");
    const std::size_t total = static_cast<std::size_t>(p) * static_cast<std::size_t>(n);
    const std::size_t n_masked =
        std::min<std::size_t>(total - 1, static_cast<std::size_t>(std::llround(
                                             missing_fraction * static_cast<double>(total))));

    std::vector<std::size_t> cells(total);
    for (int attempt = 0; attempt < 100; ++attempt) {
        Rng rng(derive_seed(seed, kStreamMask, attempt));
        std::iota(cells.begin(), cells.end(), 0);
        // Partial Fisher-Yates: the first n_masked slots become the mask.
        for (std::size_t i = 0; i < n_masked; ++i) {
            const std::size_t j = i + rng.next_u64() % (total - i);
            std::swap(cells[i], cells[j]);
        }
        MaskMatrix mask = MaskMatrix::Constant(p, n, true);
        for (std::size_t i = 0; i < n_masked; ++i) {
            const Index r = static_cast<Index>(cells[i] % static_cast<std::size_t>(p));
            const Index c = static_cast<Index>(cells[i] / static_cast<std::size_t>(p));
            mask(r, c) = false;
        }
        bool ok = true;
        for (Index r = 0; ok && r < p; ++r) ok = mask.row(r).any();
        for (Index c = 0; ok && c < n; ++c) ok = mask.col(c).any();
        if (ok) return mask;
    }
    throw DataError("could not draw a mask keeping every row and column observed");
}

double heldout_loss(const DataMatrix& X, const MaskMatrix& mask, const Matrix& mean,
                    Family family) {
    double loss = 0.0;
    std::size_t cells = 0;
    for (Index j = 0; j < X.cols(); ++j) {
        for (Index i = 0; i < X.rows(); ++i) {
            if (mask(i, j)) continue;
            ++cells;
            const double x = X.values(i, j);
            const double fitted = mean(i, j);
            if (family == Family::gaussian) {
                loss += (x - fitted) * (x - fitted);
            } else {
                loss += fitted;
                if (x > 0.0) loss += x * std::log(x / std::max(fitted, kPoissonMeanFloor)) - x;
            }
        }
    }
    if (cells == 0) throw std::invalid_argument("mask holds out no entries");
    return loss / static_cast<double>(cells);
}

RankReport select_rank_impute(const DataMatrix& X, const SelectionConfig& config,
                              double mask_fraction, int repeats, std::vector<int> k_grid) {
    SelectionConfig cfg = config;
    cfg.mask_fraction = mask_fraction;
    cfg.impute_repeats = repeats;
    cfg.k_grid = std::move(k_grid);
    cfg = validate(cfg, X);
    if (cfg.k_grid.empty())
        for (int k = cfg.k_start; k <= cfg.k_max; ++k) cfg.k_grid.push_back(k);

    RankReport report;
    report.method = Method::impute;
    report.config = cfg;
    report.config.method = Method::impute;
    report.seed_trace.push_back(cfg.seed);

    const std::size_t n_k = cfg.k_grid.size();
    const std::size_t jobs = static_cast<std::size_t>(cfg.impute_repeats) * n_k;
    std::vector<std::vector<double>> losses(cfg.impute_repeats, std::vector<double>(n_k, 0.0));

    // One mask per repeat, shared by every candidate rank.
    std::vector<MaskMatrix> masks(cfg.impute_repeats);
    for (int r = 0; r < cfg.impute_repeats; ++r)
        masks[r] = draw_mask(X.rows(), X.cols(), cfg.mask_fraction,
                             derive_seed(cfg.seed, kStreamMask, r));

    parallel::parallel_for(jobs, [&](std::size_t job) {
        const int r = static_cast<int>(job / n_k);
        const std::size_t ki = job % n_k;
        const int k = cfg.k_grid[ki];
        const Factorization fit =
            fit_nmf_masked(X, masks[r], k, cfg.model,
                           derive_seed(cfg.seed, kStreamImputeFit, r, k), cfg.fit);
        losses[r][ki] = heldout_loss(X, masks[r], fit.mean(), cfg.model);
    });

    report.impute.k_grid = cfg.k_grid;
    report.impute.per_repeat_loss = losses;
    report.impute.avg_loss.assign(n_k, 0.0);
    for (int r = 0; r < cfg.impute_repeats; ++r)
        for (std::size_t ki = 0; ki < n_k; ++ki)
            report.impute.avg_loss[ki] += losses[r][ki] / static_cast<double>(cfg.impute_repeats);

    std::size_t best = 0;
    for (std::size_t ki = 1; ki < n_k; ++ki) {
        const bool better = report.impute.avg_loss[ki] < report.impute.avg_loss[best];
        const bool tie_smaller = report.impute.avg_loss[ki] == report.impute.avg_loss[best] &&
                                 cfg.k_grid[ki] < cfg.k_grid[best];
        if (better || tie_smaller) best = ki;
    }
    report.selected_rank = cfg.k_grid[best];
    return report;
}

RankReport select_rank(const DataMatrix& X, const SelectionConfig& config) {
    switch (config.method) {
        case Method::boot: return select_rank_boot(X, config);
        case Method::decon: return select_rank_decon(X, config);
        case Method::impute:
            return select_rank_impute(X, config, config.mask_fraction, config.impute_repeats,
                                      config.k_grid);
    }
    throw std::invalid_argument("unknown selection method");
}

}  // namespace nmfrank
