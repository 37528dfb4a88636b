#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "nmfrank/deconvolution.hpp"
#include "nmfrank/rng.hpp"

using namespace nmfrank;

namespace {

std::vector<double> normal_sample(std::size_t n, double mean, double sd, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> out(n);
    for (auto& v : out) v = rng.normal(mean, sd);
    return out;
}

// Centered gamma: mean 0, right-skewed.
std::vector<double> skewed_errors(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> out(n);
    for (auto& v : out) v = rng.gamma(2.0, 1.0) - 2.0;
    return out;
}

double ks_distance_to_cdf(std::vector<double> sample, const DeconDensity& density) {
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double sup = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = density.cdf(sample[i]);
        sup = std::max(sup, std::abs(f - static_cast<double>(i) / n));
        sup = std::max(sup, std::abs(f - static_cast<double>(i + 1) / n));
    }
    return sup;
}

double ks_between_samples(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double sup = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j])
            ++i;
        else
            ++j;
        sup = std::max(sup, std::abs(static_cast<double>(i) / a.size() -
                                     static_cast<double>(j) / b.size()));
    }
    return sup;
}

double second_difference_energy(const std::vector<double>& w) {
    double acc = 0.0;
    for (std::size_t g = 1; g + 1 < w.size(); ++g) {
        const double d2 = w[g - 1] - 2.0 * w[g] + w[g + 1];
        acc += d2 * d2;
    }
    return acc;
}

}  // namespace

TEST_CASE("zero errors collapse deconvolution to a direct density fit") {
    const auto sample = normal_sample(200, 3.0, 2.0, 801);
    const std::vector<double> zeros(200, 0.0);
    const DeconDensity density = deconvolve(sample, zeros);
    CHECK(density.converged);

    double sample_mean = 0.0, lo = sample[0], hi = sample[0];
    for (double v : sample) {
        sample_mean += v / sample.size();
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(std::abs(density.mean() - sample_mean) <= 1e-2 * (hi - lo));
    CHECK(ks_distance_to_cdf(sample, density) <= 0.05);
}

TEST_CASE("constant signal plus resampled errors concentrates at the constant") {
    const double c = 7.0;
    const auto errors = skewed_errors(200, 802);
    std::vector<double> contaminated(errors.size());
    for (std::size_t i = 0; i < errors.size(); ++i) contaminated[i] = c + errors[i];
    const DeconDensity density = deconvolve(contaminated, errors);
    const double h = density.bandwidth;
    CHECK(density.quantile(0.05) >= c - 2.0 * h);
    CHECK(density.quantile(0.95) <= c + 2.0 * h);
}

TEST_CASE("normal signal with skewed errors recovers mean and sd") {
    const auto signal = normal_sample(200, 5.0, 1.0, 803);
    const auto errors = skewed_errors(200, 804);
    const auto fresh = skewed_errors(200, 805);
    std::vector<double> contaminated(200);
    for (std::size_t i = 0; i < 200; ++i) contaminated[i] = signal[i] + fresh[i];

    const DeconDensity density = deconvolve(contaminated, errors);
    CHECK(density.mean() >= 4.5);
    CHECK(density.mean() <= 5.5);
    CHECK(density.sd() >= 0.6);
    CHECK(density.sd() <= 1.4);

    SUBCASE("density is a proper density") {
        double sum = 0.0;
        for (double w : density.weights) {
            CHECK(w >= 0.0);
            sum += w;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-10);

        // Simpson quadrature over the padded support
        const double a = density.grid.front() - 8.0 * density.bandwidth;
        const double b = density.grid.back() + 8.0 * density.bandwidth;
        const int steps = 4000;
        const double dx = (b - a) / steps;
        double integral = density.pdf(a) + density.pdf(b);
        for (int s = 1; s < steps; ++s)
            integral += density.pdf(a + s * dx) * (s % 2 == 1 ? 4.0 : 2.0);
        integral *= dx / 3.0;
        CHECK(std::abs(integral - 1.0) <= 1e-6);
    }

    SUBCASE("p-values are monotone non-increasing in lambda") {
        double prev = 1.0;
        for (double x = density.grid.front(); x <= density.grid.back(); x += 0.25) {
            const double p = pvalue_decon(density, x);
            CHECK(p <= prev + 1e-12);
            prev = p;
        }
    }

    SUBCASE("tail p-values saturate") {
        const double below = density.grid.front() - 10.0 * density.bandwidth;
        const double above = density.grid.back() + 10.0 * density.bandwidth;
        CHECK(pvalue_decon(density, below) >= 1.0 - 1e-6);
        CHECK(pvalue_decon(density, above) <= 1e-6);
    }

    SUBCASE("half-spacing grid shift moves p-values by less than 0.02") {
        DeconOptions shifted;
        shifted.grid_offset = 0.5;
        const DeconDensity density2 = deconvolve(contaminated, errors, shifted);
        for (double x : {3.0, 4.0, 5.0, 6.0, 7.0})
            CHECK(std::abs(pvalue_decon(density, x) - pvalue_decon(density2, x)) < 0.02);
    }

    SUBCASE("convolving the fit with the error sample reproduces the data") {
        Rng rng(806);
        std::vector<double> cumulative(density.weights.size());
        std::partial_sum(density.weights.begin(), density.weights.end(), cumulative.begin());
        std::vector<double> synthetic(10000);
        for (auto& v : synthetic) {
            const double u = rng.uniform();
            const std::size_t g =
                std::lower_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin();
            const double s = density.grid[std::min(g, density.grid.size() - 1)] +
                             density.bandwidth * rng.normal();
            const double e = errors[rng.next_u64() % errors.size()];
            v = s + e;
        }
        CHECK(ks_between_samples(synthetic, contaminated) <= 0.08);
    }
}

TEST_CASE("single grid point gives the Gaussian half p-value") {
    DeconDensity density;
    density.grid = {0.0};
    density.weights = {1.0};
    density.bandwidth = 1.0;
    CHECK(pvalue_decon(density, 0.0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("ascent is monotone and beats the uniform start") {
    const auto sample = normal_sample(120, 2.0, 1.5, 807);
    const auto errors = skewed_errors(150, 808);
    std::vector<double> contaminated(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i)
        contaminated[i] = sample[i] + errors[i % errors.size()];
    DeconOptions opts;
    opts.track_objective = true;
    const DeconDensity density = deconvolve(contaminated, errors, opts);
    REQUIRE(density.objective_trace.size() >= 2);
    for (std::size_t t = 1; t < density.objective_trace.size(); ++t)
        CHECK(density.objective_trace[t] >=
              density.objective_trace[t - 1] - 1e-10 * (1.0 + std::abs(density.objective_trace[t - 1])));
    CHECK(density.objective >= density.objective_trace.front());
}

TEST_CASE("larger penalties flatten the weights") {
    const auto sample = normal_sample(60, 0.0, 1.0, 809);
    const auto errors = skewed_errors(60, 810);
    std::vector<double> contaminated(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i)
        contaminated[i] = sample[i] + errors[i];
    DeconOptions opts;
    opts.tol = 1e-12;
    opts.max_iter = 30000;
    double prev = std::numeric_limits<double>::infinity();
    for (double tau : {1.0, 10.0, 100.0}) {
        opts.penalty = tau;
        const DeconDensity density = deconvolve(contaminated, errors, opts);
        const double energy = second_difference_energy(density.weights);
        CHECK(energy <= prev * (1.0 + 1e-6) + 1e-12);
        prev = energy;
    }
}

TEST_CASE("empirical p-values use the add-one rule") {
    std::vector<double> sample(50);
    for (int i = 0; i < 50; ++i) sample[i] = static_cast<double>(i + 1);  // 1..50
    CHECK(pvalue_empirical(sample, 0.5) == doctest::Approx(1.0));
    CHECK(pvalue_empirical(sample, 100.0) == doctest::Approx(1.0 / 51.0));

    std::vector<double> odd(49);
    for (int i = 0; i < 49; ++i) odd[i] = static_cast<double>(i + 1);  // 1..49, median 25
    CHECK(std::abs(pvalue_empirical(odd, 25.0) - 0.5) <= 1.0 / 50.0 + 1e-12);
}

TEST_CASE("degenerate support is rejected") {
    CHECK_THROWS_AS(deconvolve({5.0, 5.0, 5.0}, {0.0, 0.0}), DataError);
    CHECK_THROWS_AS(deconvolve({}, {0.0}), std::invalid_argument);
    CHECK_THROWS_AS(deconvolve({1.0}, {}), std::invalid_argument);
}

TEST_CASE("penalty cross-validation picks a candidate deterministically") {
    const auto sample = normal_sample(80, 4.0, 1.0, 811);
    const auto errors = skewed_errors(80, 812);
    std::vector<double> contaminated(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i)
        contaminated[i] = sample[i] + errors[i];
    DeconOptions opts;
    const double tau1 = select_penalty_cv(contaminated, errors, opts, 77);
    const double tau2 = select_penalty_cv(contaminated, errors, opts, 77);
    CHECK(tau1 == tau2);
    const std::vector<double> candidates{1e-2, 1e-1, 1.0, 10.0, 100.0};
    CHECK(std::count(candidates.begin(), candidates.end(), tau1) == 1);
}
