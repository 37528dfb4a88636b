#include "nmfrank/report.hpp"

namespace nmfrank {

using nlohmann::json;

namespace {

json summary_to_json(const SampleSummary& s) {
    return json{{"mean", s.mean}, {"sd", s.sd},
                {"quantiles",
                 json{{"q05", s.q05}, {"q25", s.q25}, {"q50", s.q50}, {"q75", s.q75},
                      {"q95", s.q95}}}};
}

json step_to_json(const RankStep& step, Method method) {
    json j{{"k", step.k},
           {"lambda_obs", step.lambda_obs},
           {"pvalue", step.pvalue},
           {"decision", step.reject ? "reject" : "accept"},
           {"loglik_k", step.loglik_k},
           {"loglik_k1", step.loglik_k1},
           {"lr_sample", summary_to_json(step.lr_summary)},
           {"seed", step.step_seed}};
    if (step.error_summary) j["error_sample"] = summary_to_json(*step.error_summary);
    if (method == Method::decon)
        j["decon"] = json{{"converged", step.decon_converged},
                          {"bandwidth", step.decon_bandwidth},
                          {"penalty", step.decon_penalty}};
    return j;
}

}  // namespace

json config_to_json(const SelectionConfig& config) {
    json j{{"model", family_name(config.model)},
           {"alpha", config.alpha},
           {"bootstrap_size", config.bootstrap_size},
           {"starts", config.starts},
           {"k_start", config.k_start},
           {"k_max", config.k_max},
           {"seed", config.seed},
           {"method", method_name(config.method)},
           {"fit", json{{"max_iter", config.fit.max_iter},
                        {"rel_tol", config.fit.rel_tol},
                        {"init_scale", config.fit.init_scale}}}};
    if (config.method == Method::impute) {
        j["mask_fraction"] = config.mask_fraction;
        j["impute_repeats"] = config.impute_repeats;
        j["k_grid"] = config.k_grid;
    }
    return j;
}

json report_to_json(const RankReport& report) {
    json j{{"schema", 1},
           {"method", method_name(report.method)},
           {"selected_rank", report.selected_rank},
           {"capped", report.capped},
           {"config", config_to_json(report.config)},
           {"seed_trace", report.seed_trace}};
    json steps = json::array();
    for (const auto& step : report.steps) steps.push_back(step_to_json(step, report.method));
    j["steps"] = steps;
    if (report.method == Method::impute) {
        j["impute"] = json{{"k_grid", report.impute.k_grid},
                           {"avg_loss", report.impute.avg_loss},
                           {"per_repeat_loss", report.impute.per_repeat_loss}};
    }
    return j;
}

std::string report_to_string(const RankReport& report) { return report_to_json(report).dump(2); }

json report_timings_json(const RankReport& report) {
    json j = json::object();
    for (const auto& step : report.steps)
        j["k" + std::to_string(step.k)] = step.wallclock_seconds;
    return j;
}

}  // namespace nmfrank
