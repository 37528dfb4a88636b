#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "nmfrank/io.hpp"
#include "nmfrank/likelihood.hpp"
#include "nmfrank/parallel.hpp"
#include "nmfrank/rank_selection.hpp"
#include "nmfrank/report.hpp"
#include "nmfrank/rng.hpp"
#include "nmfrank/simulate.hpp"
#include "nmfrank/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace nmfrank;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

std::uint64_t fnv1a_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    std::uint64_t h = 1469598103934665603ULL;
    char buf[8192];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string iso_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path.string());
    out << text;
}

// Every command drops a manifest next to its outputs: full config echo,
// seed, input digest, output digests, and wall-clock timings. Timestamps
// and timings live here and only here; the result files stay
// byte-reproducible for a fixed seed.
struct Manifest {
    json body;
    std::string started;

    explicit Manifest(const std::string& command) : started(iso_now()) {
        body["command"] = command;
        body["version"] = kVersion;
        body["schema"] = 1;
    }

    void add_output(const fs::path& path) {
        body["outputs"][path.filename().string()] = hex64(fnv1a_file(path.string()));
    }

    void write(const fs::path& dir) {
        body["started_at"] = started;
        body["finished_at"] = iso_now();
        write_text(dir / "manifest.json", body.dump(2) + "\n");
    }
};

std::uint64_t resolve_seed(std::uint64_t flag_seed, bool seed_given) {
    if (seed_given) return flag_seed;
    if (const char* env = std::getenv("NMFRANK_SEED")) return std::strtoull(env, nullptr, 10);
    return 0;
}

TableFormat format_for(const std::string& path) {
    return path.size() >= 4 && path.substr(path.size() - 4) == ".tsv" ? TableFormat::tsv
                                                                      : TableFormat::csv;
}

DataMatrix matrix_from(const Matrix& values) {
    DataMatrix m;
    m.values = values;
    return m;
}

void export_densities(const RankReport& report, const fs::path& dir, Manifest& manifest) {
    fs::create_directories(dir);
    for (const auto& step : report.steps) {
        const std::string suffix = "_k" + std::to_string(step.k) + ".csv";
        {
            std::ostringstream out;
            out << "lambda\n";
            for (double v : step.lr_values) out << format_double(v) << "\n";
            write_text(dir / ("lr_sample" + suffix), out.str());
            manifest.add_output(dir / ("lr_sample" + suffix));
        }
        if (!step.error_values.empty()) {
            std::ostringstream out;
            out << "error\n";
            for (double v : step.error_values) out << format_double(v) << "\n";
            write_text(dir / ("error_sample" + suffix), out.str());
            manifest.add_output(dir / ("error_sample" + suffix));
        }
        if (step.density) {
            // 512-point evaluation grid spanning the padded support
            const auto& d = *step.density;
            const double lo = d.grid.front() - 3.0 * d.bandwidth;
            const double hi = d.grid.back() + 3.0 * d.bandwidth;
            std::ostringstream out;
            out << "x,f\n";
            for (int i = 0; i < 512; ++i) {
                const double x = lo + (hi - lo) * i / 511.0;
                out << format_double(x) << "," << format_double(d.pdf(x)) << "\n";
            }
            write_text(dir / ("decon_density" + suffix), out.str());
            manifest.add_output(dir / ("decon_density" + suffix));
        }
    }
}

int cmd_fit(const std::string& input, int rank, const std::string& model, int starts,
            std::uint64_t seed, const std::string& out_dir, const FitOptions& fit_opts) {
    Manifest manifest("fit");
    manifest.body["input"] = input;
    manifest.body["input_digest"] = hex64(fnv1a_file(input));
    manifest.body["seed"] = seed;
    manifest.body["config"] = {{"rank", rank},
                               {"model", model},
                               {"starts", starts},
                               {"max_iter", fit_opts.max_iter},
                               {"rel_tol", fit_opts.rel_tol}};

    const DataMatrix X = load_matrix(input, format_for(input));
    const Family family = family_from_name(model);
    const auto t0 = std::chrono::steady_clock::now();
    const MultiStartResult result = multi_start_fit(X, rank, family, starts, seed, fit_opts);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const fs::path dir(out_dir);
    fs::create_directories(dir);
    save_matrix(matrix_from(result.best.features), (dir / "T.csv").string(), TableFormat::csv);
    save_matrix(matrix_from(result.best.weights), (dir / "W.csv").string(), TableFormat::csv);

    // generalized KL (Poisson) or squared error (Gaussian) of the final fit
    double divergence = 0.0;
    const Matrix mean = result.best.mean();
    if (family == Family::poisson) {
        for (Index j = 0; j < X.cols(); ++j)
            for (Index i = 0; i < X.rows(); ++i) {
                const double x = X.values(i, j);
                divergence += mean(i, j);
                if (x > 0) divergence += x * std::log(x / mean(i, j)) - x;
            }
    } else {
        divergence = (X.values - mean).squaredNorm();
    }

    json fit_json{{"schema", 1},
                  {"loglik", result.best.loglik},
                  {"divergence", divergence},
                  {"iterations", result.best.iterations},
                  {"converged", result.best.converged},
                  {"rank", rank},
                  {"model", model},
                  {"all_logliks", result.all_logliks},
                  {"rows", X.rows()},
                  {"cols", X.cols()},
                  {"removed_rows", X.removed_rows}};
    write_text(dir / "fit.json", fit_json.dump(2) + "\n");

    manifest.add_output(dir / "T.csv");
    manifest.add_output(dir / "W.csv");
    manifest.add_output(dir / "fit.json");
    manifest.body["timings"] = {{"fit_seconds", seconds}};
    manifest.write(dir);
    std::cout << "fit: loglik " << result.best.loglik << ", divergence " << divergence << ", "
              << result.best.iterations << " iterations\n";
    return 0;
}

int cmd_select_rank(const std::string& input, SelectionConfig config, const std::string& out_dir,
                    const std::string& densities_dir) {
    Manifest manifest("select-rank");
    manifest.body["input"] = input;
    manifest.body["input_digest"] = hex64(fnv1a_file(input));
    manifest.body["seed"] = config.seed;

    const DataMatrix X = load_matrix(input, format_for(input));
    config.keep_samples = !densities_dir.empty();
    config = validate(config, X);
    manifest.body["config"] = config_to_json(config);

    const RankReport report = select_rank(X, config);

    const fs::path dir(out_dir);
    fs::create_directories(dir);
    write_text(dir / "report.json", report_to_string(report) + "\n");
    manifest.add_output(dir / "report.json");
    if (!densities_dir.empty()) export_densities(report, densities_dir, manifest);
    manifest.body["timings"] = report_timings_json(report);
    manifest.write(dir);

    bool decon_warned = false;
    for (const auto& step : report.steps)
        if (!step.decon_converged) decon_warned = true;
    if (decon_warned)
        std::cerr << "warning: deconvolution hit its iteration cap in at least one step\n";

    std::cout << "selected rank " << report.selected_rank << (report.capped ? " (capped)" : "")
              << " by " << method_name(report.method) << "\n";
    return 0;
}

int cmd_simulate(const std::string& scenario_file, int replicates, const std::string& methods_arg,
                 const std::string& out_dir, std::uint64_t seed, bool seed_given) {
    SimScenario scenario = parse_scenario_file(scenario_file);
    if (seed_given) scenario.seed = seed;

    std::vector<Method> methods;
    std::stringstream ms(methods_arg);
    std::string token;
    while (std::getline(ms, token, ',')) methods.push_back(method_from_name(token));

    Manifest manifest("simulate");
    manifest.body["scenario_file"] = scenario_file;
    manifest.body["input_digest"] = hex64(fnv1a_file(scenario_file));
    manifest.body["seed"] = scenario.seed;
    manifest.body["config"] = {{"family", scenario_family_name(scenario.family)},
                               {"true_rank", scenario.true_rank},
                               {"p", scenario.p},
                               {"n", scenario.n},
                               {"d", scenario.d},
                               {"replicates", replicates},
                               {"methods", methods_arg}};

    const auto t0 = std::chrono::steady_clock::now();
    const ScenarioResult result = run_scenario(scenario, methods, replicates, true);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const fs::path dir(out_dir);
    fs::create_directories(dir);

    for (int rep = 0; rep < replicates; ++rep) {
        const ReplicateData rd = generate_replicate(scenario, rep);
        save_matrix(rd.data, (dir / ("data_rep" + std::to_string(rep) + ".csv")).string(),
                    TableFormat::csv);
        manifest.add_output(dir / ("data_rep" + std::to_string(rep) + ".csv"));
    }

    {
        std::ostringstream out;
        out << "replicate,method,selected_rank,capped,data_digest\n";
        for (const auto& run : result.runs)
            out << run.replicate << "," << method_name(run.method) << "," << run.selected_rank
                << "," << (run.capped ? 1 : 0) << "," << hex64(run.data_digest) << "\n";
        write_text(dir / "selections.csv", out.str());
        manifest.add_output(dir / "selections.csv");
    }

    {
        // per-method correct count (when a true rank exists), mean, sd
        std::ostringstream out;
        out << "method,replicates,correct,mean_rank,sd_rank\n";
        for (std::size_t mi = 0; mi < methods.size(); ++mi) {
            int correct = 0;
            double mean = 0.0, ss = 0.0;
            for (int rep = 0; rep < replicates; ++rep) {
                const auto& run = result.runs[rep * methods.size() + mi];
                mean += run.selected_rank;
                if (scenario.family != ScenarioFamily::non_nmf &&
                    run.selected_rank == scenario.true_rank)
                    ++correct;
            }
            mean /= replicates;
            for (int rep = 0; rep < replicates; ++rep) {
                const auto& run = result.runs[rep * methods.size() + mi];
                ss += (run.selected_rank - mean) * (run.selected_rank - mean);
            }
            const double sd = replicates > 1 ? std::sqrt(ss / (replicates - 1)) : 0.0;
            out << method_name(methods[mi]) << "," << replicates << ","
                << (scenario.family == ScenarioFamily::non_nmf ? std::string("NA")
                                                               : std::to_string(correct))
                << "," << format_double(mean) << "," << format_double(sd) << "\n";
        }
        write_text(dir / "aggregate.csv", out.str());
        manifest.add_output(dir / "aggregate.csv");
    }

    for (std::size_t i = 0; i < result.runs.size(); ++i) {
        const auto& run = result.runs[i];
        const fs::path rpath = dir / ("report_rep" + std::to_string(run.replicate) + "_" +
                                      method_name(run.method) + ".json");
        write_text(rpath, report_to_string(result.reports[i]) + "\n");
        manifest.add_output(rpath);
    }

    manifest.body["timings"] = {{"total_seconds", seconds}};
    manifest.write(dir);
    std::cout << "wrote " << result.runs.size() << " selections to " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"NMF rank selection by sequential likelihood-ratio testing"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    int threads = 0;
    app.add_option("--threads", threads, "cap on worker threads (0 = all cores)");
    app.fallthrough();

    // fit
    auto* fit = app.add_subcommand("fit", "fit a single rank-k factorization");
    fit->fallthrough();
    std::string fit_input, fit_model = "poisson", fit_out = ".";
    int fit_rank = 0, fit_starts = 1;
    std::uint64_t fit_seed = 0;
    bool fit_seed_given = false;
    FitOptions fit_opts;
    fit->add_option("--input", fit_input, "CSV/TSV matrix")->required();
    fit->add_option("--rank", fit_rank, "factorization rank")->required()->check(CLI::PositiveNumber);
    fit->add_option("--model", fit_model, "poisson|gaussian")
        ->check(CLI::IsMember({"poisson", "gaussian"}));
    fit->add_option("--starts", fit_starts, "number of initial values")->check(CLI::PositiveNumber);
    fit->add_option("--seed", fit_seed, "master seed")->each([&](const std::string&) {
        fit_seed_given = true;
    });
    fit->add_option("--out", fit_out, "output directory");
    fit->add_option("--max-iter", fit_opts.max_iter, "update sweeps cap");
    fit->add_option("--tol", fit_opts.rel_tol, "relative objective tolerance");

    // select-rank
    auto* sel = app.add_subcommand("select-rank", "select the rank by sequential testing");
    sel->fallthrough();
    std::string sel_input, sel_model = "poisson", sel_method = "decon", sel_out = ".";
    std::string sel_densities;
    SelectionConfig sel_cfg;
    bool sel_seed_given = false;
    std::uint64_t sel_seed = 0;
    sel->add_option("--input", sel_input, "CSV/TSV matrix")->required();
    sel->add_option("--model", sel_model, "poisson|gaussian")
        ->check(CLI::IsMember({"poisson", "gaussian"}));
    sel->add_option("--method", sel_method, "boot|decon|impute")
        ->check(CLI::IsMember({"boot", "decon", "impute"}));
    sel->add_option("--alpha", sel_cfg.alpha, "significance level");
    sel->add_option("--bootstrap", sel_cfg.bootstrap_size, "bootstrap size B");
    sel->add_option("--starts", sel_cfg.starts, "initial values per NMF (m)");
    sel->add_option("--k-start", sel_cfg.k_start, "first tested rank");
    sel->add_option("--k-max", sel_cfg.k_max, "rank cap (0 = from dimensions)");
    sel->add_option("--seed", sel_seed, "master seed")->each([&](const std::string&) {
        sel_seed_given = true;
    });
    sel->add_option("--mask-fraction", sel_cfg.mask_fraction, "imputation holdout fraction");
    sel->add_option("--repeats", sel_cfg.impute_repeats, "imputation repeats");
    sel->add_option("--max-iter", sel_cfg.fit.max_iter, "update sweeps cap");
    sel->add_option("--tol", sel_cfg.fit.rel_tol, "relative objective tolerance");
    sel->add_option("--export-densities", sel_densities,
                    "directory for per-rank sample and density CSVs");
    sel->add_option("--out", sel_out, "output directory");

    // simulate
    auto* sim = app.add_subcommand("simulate", "run a synthetic scenario");
    sim->fallthrough();
    std::string sim_scenario, sim_methods = "decon", sim_out = ".";
    int sim_reps = 10;
    std::uint64_t sim_seed = 0;
    bool sim_seed_given = false;
    sim->add_option("--scenario", sim_scenario, "scenario key=value file")->required();
    sim->add_option("--replicates", sim_reps, "number of replicates")->check(CLI::PositiveNumber);
    sim->add_option("--methods", sim_methods, "comma list of boot,decon,impute");
    sim->add_option("--out", sim_out, "output directory")->required();
    sim->add_option("--seed", sim_seed, "override the scenario seed")->each([&](const std::string&) {
        sim_seed_given = true;
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return kExitUsage;
    }

    parallel::set_max_threads(threads);

    try {
        if (app.got_subcommand(fit))
            return cmd_fit(fit_input, fit_rank, fit_model, fit_starts,
                           resolve_seed(fit_seed, fit_seed_given), fit_out, fit_opts);
        if (app.got_subcommand(sel)) {
            sel_cfg.model = family_from_name(sel_model);
            sel_cfg.method = method_from_name(sel_method);
            sel_cfg.seed = resolve_seed(sel_seed, sel_seed_given);
            return cmd_select_rank(sel_input, sel_cfg, sel_out, sel_densities);
        }
        if (app.got_subcommand(sim))
            return cmd_simulate(sim_scenario, sim_reps, sim_methods, sim_out, sim_seed,
                                sim_seed_given);
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid configuration: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
