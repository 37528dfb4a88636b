#include "nmfrank/simulate.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "nmfrank/parallel.hpp"
#include "nmfrank/rng.hpp"

namespace nmfrank {

namespace {

Vector unit_ones(Index p) { return Vector::Constant(p, 1.0 / std::sqrt(static_cast<double>(p))); }

// Distance from column v to the affine plane through f1, f2, f3.
double distance_to_plane(const Matrix& three, const Vector& v) {
    const Vector q1_raw = three.col(1) - three.col(0);
    Vector q1 = q1_raw / q1_raw.norm();
    Vector q2 = three.col(2) - three.col(0);
    q2 -= q2.dot(q1) * q1;
    q2 /= q2.norm();
    Vector r = v - three.col(0);
    r -= r.dot(q1) * q1;
    r -= r.dot(q2) * q2;
    return r.norm();
}

void clip_and_normalize_column(Vector& col) {
    col = col.array().max(0.0).matrix();
    const double total = col.sum();
    if (total <= 0.0) throw DataError("perturbed feature collapsed to zero after clipping");
    col /= total;
}

}  // namespace

const char* scenario_family_name(ScenarioFamily f) {
    switch (f) {
        case ScenarioFamily::poisson_nmf: return "poisson_nmf";
        case ScenarioFamily::normal_nmf: return "normal_nmf";
        case ScenarioFamily::non_nmf: return "non_nmf";
    }
    return "?";
}

ScenarioFamily scenario_family_from_name(const std::string& name) {
    if (name == "poisson_nmf") return ScenarioFamily::poisson_nmf;
    if (name == "normal_nmf") return ScenarioFamily::normal_nmf;
    if (name == "non_nmf") return ScenarioFamily::non_nmf;
    throw std::invalid_argument("unknown scenario family: " + name);
}

Matrix gen_gamma_bernoulli(Index p, int k, std::uint64_t seed) {
    Rng rng(seed);
    Matrix raw(p, k);
    for (Index j = 0; j < k; ++j)
        for (Index i = 0; i < p; ++i) {
            const double g = rng.gamma(3.0, 2.0);
            const double b = rng.uniform() < 0.7 ? 1.0 : 0.0;
            raw(i, j) = g * b;
        }
    return raw;
}

Matrix gen_base_features(Index p, int k, std::uint64_t seed) {
    if (k < 1) throw std::invalid_argument("feature count must be >= 1");
    Matrix raw = gen_gamma_bernoulli(p, k, seed);

    for (Index j = 0; j < k; ++j)
        for (int attempt = 1; raw.col(j).sum() <= 0.0; ++attempt)
            raw.col(j) = gen_gamma_bernoulli(p, 1, derive_seed(seed, j, attempt)).col(0);

    std::vector<Index> keep;
    for (Index i = 0; i < p; ++i)
        if ((raw.row(i).array() != 0.0).any()) keep.push_back(i);
    Matrix features(static_cast<Index>(keep.size()), k);
    for (std::size_t r = 0; r < keep.size(); ++r) features.row(static_cast<Index>(r)) = raw.row(keep[r]);

    for (Index j = 0; j < k; ++j) features.col(j) /= features.col(j).sum();
    return features;
}

PerturbResult perturb_fourth_feature(const Matrix& features, double d) {
    if (features.cols() != 3) throw std::invalid_argument("expected exactly three feature columns");
    if (d < 0.0) throw std::invalid_argument("distance must be >= 0");
    const Index p = features.rows();

    const Vector centroid = features.rowwise().mean();
    Vector fourth = centroid;
    if (d > 0.0) {
        const Vector v1 = features.col(1) - features.col(0);
        const Vector v2_raw = features.col(2) - features.col(0);
        if (v1.norm() < 1e-14) throw DataError("feature columns are not linearly independent");
        Vector q1 = v1 / v1.norm();
        Vector q2 = v2_raw - v2_raw.dot(q1) * q1;
        if (q2.norm() < 1e-14) throw DataError("feature columns are not linearly independent");
        q2 /= q2.norm();

        Vector u = unit_ones(p);
        u -= u.dot(q1) * q1;
        u -= u.dot(q2) * q2;
        if (u.norm() < 1e-12)
            throw DataError("all-ones direction lies in the feature plane; no perpendicular");
        u /= u.norm();
        fourth = centroid + d * u;
    }

    PerturbResult result;
    result.requested_d = d;
    result.pre_norm_distance = distance_to_plane(features, fourth);

    clip_and_normalize_column(fourth);
    result.features.resize(p, 4);
    result.features.leftCols(3) = features;
    result.features.col(3) = fourth;
    result.realized_distance = distance_to_plane(features, result.features.col(3));
    return result;
}

PerturbResult perturb_second_feature(const Vector& f1, double d) {
    if (d < 0.0) throw std::invalid_argument("distance must be >= 0");
    const Index p = f1.size();
    const Vector u_hat = unit_ones(p);

    Vector second = f1;
    if (d > 0.0) {
        const Vector f1n = f1 / f1.norm();
        const Vector residual = u_hat - u_hat.dot(f1n) * f1n;
        if (residual.norm() < 1e-12 * u_hat.norm())
            throw DataError("first feature is proportional to the all-ones vector");
        Vector direction = u_hat - f1;
        direction /= direction.norm();
        second = f1 + d * direction;
    }

    PerturbResult result;
    result.requested_d = d;
    result.pre_norm_distance = (second - f1).norm();

    clip_and_normalize_column(second);
    result.features.resize(p, 2);
    result.features.col(0) = f1;
    result.features.col(1) = second;
    result.realized_distance = (result.features.col(1) - f1).norm();
    return result;
}

Matrix gen_weights_poisson(int k, Index n, const std::vector<double>& depths,
                           std::uint64_t seed) {
    if (static_cast<Index>(depths.size()) < n)
        throw std::invalid_argument("need one depth per observation");
    Rng rng(seed);
    Matrix W(k, n);
    for (Index j = 0; j < n; ++j) {
        double total = 0.0;
        for (Index i = 0; i < k; ++i) {
            W(i, j) = rng.uniform();
            total += W(i, j);
        }
        if (depths[j] <= 0.0) throw std::invalid_argument("depths must be positive");
        W.col(j) *= depths[j] / total;
    }
    return W;
}

Matrix gen_weights_dirichlet(int k, Index n, std::uint64_t seed) {
    Rng rng(seed);
    Matrix W(k, n);
    for (Index j = 0; j < n; ++j) {
        double total = 0.0;
        for (Index i = 0; i < k; ++i) {
            W(i, j) = rng.gamma(1.5, 1.0);
            total += W(i, j);
        }
        W.col(j) *= 10.0 / total;
    }
    return W;
}

DataMatrix gen_poisson_data(const Matrix& features, const Matrix& weights, std::uint64_t seed) {
    const Matrix mean = features * weights;
    DataMatrix out;
    out.values.resize(mean.rows(), mean.cols());
    Rng rng(seed);
    for (Index j = 0; j < mean.cols(); ++j)
        for (Index i = 0; i < mean.rows(); ++i) out.values(i, j) = rng.poisson(mean(i, j));
    return out;
}

DataMatrix gen_normal_data(const Matrix& features, const Matrix& weights, double sigma2,
                           std::uint64_t seed) {
    const Matrix mean = features * weights;
    const double sd = std::sqrt(sigma2);
    DataMatrix out;
    out.values.resize(mean.rows(), mean.cols());
    Rng rng(seed);
    for (Index j = 0; j < mean.cols(); ++j)
        for (Index i = 0; i < mean.rows(); ++i)
            out.values(i, j) = std::max(0.0, rng.normal(mean(i, j), sd));
    return out;
}

std::vector<double> non_nmf_eigenvalues(Index p) {
    std::vector<double> ev(p);
    const double lo = 3e-7, hi = 1.0;
    for (Index i = 0; i < p; ++i)
        ev[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(p - 1);
    return ev;
}

DataMatrix gen_non_nmf_data(Index p, Index n, const std::vector<double>& depths,
                            std::uint64_t seed) {
    if (static_cast<Index>(depths.size()) < n)
        throw std::invalid_argument("need one depth per observation");
    Rng rng(seed);

    // Random orthogonal eigenvectors from the QR of an iid Normal matrix,
    // sign-fixed to a positive R diagonal.
    Matrix G(p, p);
    for (Index j = 0; j < p; ++j)
        for (Index i = 0; i < p; ++i) G(i, j) = rng.normal();
    Eigen::HouseholderQR<Matrix> qr(G);
    Matrix Q = qr.householderQ();
    const Matrix R = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Index j = 0; j < p; ++j)
        if (R(j, j) < 0.0) Q.col(j) = -Q.col(j);

    const std::vector<double> ev = non_nmf_eigenvalues(p);
    Vector scale(p);
    for (Index i = 0; i < p; ++i) scale[i] = std::sqrt(ev[i]);

    Vector mu(p);
    for (Index i = 0; i < p; ++i) mu[i] = rng.normal(4.0, 3.0);

    DataMatrix out;
    out.values.resize(p, n);
    for (Index j = 0; j < n; ++j) {
        Vector v(p);
        for (int attempt = 0;; ++attempt) {
            Vector z(p);
            for (Index i = 0; i < p; ++i) z[i] = rng.normal();
            v = mu + Q * scale.cwiseProduct(z).eval();
            const double total = v.sum();
            if (std::abs(total) > 1e-3 * static_cast<double>(p)) {
                v *= std::log(depths[j]) / total;
                break;
            }
            if (attempt >= 100) throw NumericalError("log-mean rescaling kept degenerating");
        }
        for (Index i = 0; i < p; ++i) out.values(i, j) = rng.poisson(std::exp(v[i]));
    }
    return out;
}

std::vector<double> sample_depths(Index n, double log_mean, double log_sd, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> depths(n);
    for (Index j = 0; j < n; ++j) depths[j] = std::exp(rng.normal(log_mean, log_sd));
    return depths;
}

std::uint64_t matrix_digest(const Matrix& m) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const void* data, std::size_t len) {
        const unsigned char* bytes = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= bytes[i];
            h *= 1099511628211ULL;
        }
    };
    const std::int64_t rows = m.rows(), cols = m.cols();
    mix(&rows, sizeof rows);
    mix(&cols, sizeof cols);
    for (Index j = 0; j < m.cols(); ++j)
        for (Index i = 0; i < m.rows(); ++i) {
            const double v = m(i, j);
            mix(&v, sizeof v);
        }
    return h;
}

namespace {

Matrix scenario_features(const SimScenario& s) {
    const std::uint64_t seed = derive_seed(s.seed, kStreamScenario, 0xFEA7);
    if (s.family == ScenarioFamily::poisson_nmf && s.d >= 0.0 && s.true_rank == 2) {
        const Matrix base = gen_base_features(s.p, 1, seed);
        return perturb_second_feature(base.col(0), s.d).features;
    }
    if (s.family == ScenarioFamily::poisson_nmf && s.d >= 0.0 && s.true_rank == 4) {
        const Matrix base = gen_base_features(s.p, 3, seed);
        return perturb_fourth_feature(base, s.d).features;
    }
    return gen_base_features(s.p, s.true_rank, seed);
}

}  // namespace

ReplicateData generate_replicate(const SimScenario& scenario, int replicate) {
    ReplicateData rep;
    const std::uint64_t weights_seed = derive_seed(scenario.seed, kStreamScenario, replicate, 1);
    const std::uint64_t noise_seed = derive_seed(scenario.seed, kStreamScenario, replicate, 2);
    const std::uint64_t depth_seed = derive_seed(scenario.seed, kStreamScenario, replicate, 3);

    std::vector<double> depths = scenario.depths;
    if (static_cast<Index>(depths.size()) < scenario.n)
        depths = sample_depths(scenario.n, scenario.depth_log_mean, scenario.depth_log_sd,
                               depth_seed);

    switch (scenario.family) {
        case ScenarioFamily::poisson_nmf: {
            rep.features = scenario_features(scenario);
            rep.weights = gen_weights_poisson(static_cast<int>(rep.features.cols()), scenario.n,
                                              depths, weights_seed);
            rep.data = gen_poisson_data(rep.features, rep.weights, noise_seed);
            break;
        }
        case ScenarioFamily::normal_nmf: {
            rep.features = scenario_features(scenario);
            rep.weights = gen_weights_dirichlet(static_cast<int>(rep.features.cols()), scenario.n,
                                                weights_seed);
            rep.data = gen_normal_data(rep.features, rep.weights, scenario.sigma2, noise_seed);
            break;
        }
        case ScenarioFamily::non_nmf: {
            rep.data = gen_non_nmf_data(scenario.p, scenario.n, depths, noise_seed);
            break;
        }
    }
    rep.digest = matrix_digest(rep.data.values);
    return rep;
}

ScenarioResult run_scenario(const SimScenario& scenario, const std::vector<Method>& methods,
                            int replicates, bool keep_reports) {
    if (methods.empty()) throw std::invalid_argument("no methods requested");
    if (replicates < 1) throw std::invalid_argument("replicates must be >= 1");

    ScenarioResult result;
    result.keep_reports = keep_reports;
    result.runs.resize(static_cast<std::size_t>(replicates) * methods.size());
    if (keep_reports) result.reports.resize(result.runs.size());

    parallel::parallel_for(static_cast<std::size_t>(replicates), [&](std::size_t r) {
        const ReplicateData rep = generate_replicate(scenario, static_cast<int>(r));
        for (std::size_t mi = 0; mi < methods.size(); ++mi) {
            SelectionConfig config = scenario.selection;
            config.model = scenario.family == ScenarioFamily::normal_nmf ? Family::gaussian
                                                                         : Family::poisson;
            config.method = methods[mi];
            config.seed = derive_seed(scenario.seed, kStreamMethod, r, mi);
            const RankReport report = select_rank(rep.data, config);

            ScenarioRun& run = result.runs[r * methods.size() + mi];
            run.replicate = static_cast<int>(r);
            run.method = methods[mi];
            run.selected_rank = report.selected_rank;
            run.capped = report.capped;
            run.data_digest = rep.digest;
            if (keep_reports) result.reports[r * methods.size() + mi] = report;
        }
    });
    return result;
}

SimScenario parse_scenario_text(const std::string& text) {
    SimScenario s;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto trim = [](std::string v) {
            const auto b = v.find_first_not_of(" \t\r");
            if (b == std::string::npos) return std::string();
            const auto e = v.find_last_not_of(" \t\r");
            return v.substr(b, e - b + 1);
        };
        if (trim(line).empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("scenario line " + std::to_string(lineno) +
                                        ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        try {
            if (key == "family") s.family = scenario_family_from_name(value);
            else if (key == "true_rank") s.true_rank = std::stoi(value);
            else if (key == "p") s.p = std::stol(value);
            else if (key == "n") s.n = std::stol(value);
            else if (key == "d") s.d = std::stod(value);
            else if (key == "sigma2") s.sigma2 = std::stod(value);
            else if (key == "depth_log_mean") s.depth_log_mean = std::stod(value);
            else if (key == "depth_log_sd") s.depth_log_sd = std::stod(value);
            else if (key == "depths") {
                std::istringstream ds(value);
                double v;
                s.depths.clear();
                while (ds >> v) s.depths.push_back(v);
            } else if (key == "seed") s.seed = std::stoull(value);
            else if (key == "alpha") s.selection.alpha = std::stod(value);
            else if (key == "bootstrap") s.selection.bootstrap_size = std::stoi(value);
            else if (key == "starts") s.selection.starts = std::stoi(value);
            else if (key == "k_start") s.selection.k_start = std::stoi(value);
            else if (key == "k_max") s.selection.k_max = std::stoi(value);
            else if (key == "max_iter") s.selection.fit.max_iter = std::stoi(value);
            else if (key == "rel_tol") s.selection.fit.rel_tol = std::stod(value);
            else if (key == "mask_fraction") s.selection.mask_fraction = std::stod(value);
            else if (key == "impute_repeats") s.selection.impute_repeats = std::stoi(value);
            else
                throw std::invalid_argument("unknown scenario key: " + key);
        } catch (const std::invalid_argument&) {
            throw;
        } catch (const std::exception&) {
            throw std::invalid_argument("scenario line " + std::to_string(lineno) +
                                        ": bad value for " + key);
        }
    }
    if (s.family != ScenarioFamily::non_nmf && s.true_rank < 1)
        throw std::invalid_argument("true_rank must be >= 1");
    if (s.p < 2 || s.n < 2) throw std::invalid_argument("scenario dimensions too small");
    return s;
}

SimScenario parse_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open scenario file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario_text(buf.str());
}

}  // namespace nmfrank
