#ifndef NMFRANK_REPORT_HPP
#define NMFRANK_REPORT_HPP

#include <string>

#include <json.hpp>

#include "nmfrank/rank_selection.hpp"

namespace nmfrank {

// Versioned report document ("schema": 1). Key order and number formatting
// are deterministic, so identical runs serialize byte-identically. Step
// wall-clock times are deliberately not part of the report; they are
// exposed separately for the run manifest.
nlohmann::json report_to_json(const RankReport& report);
std::string report_to_string(const RankReport& report);

// Per-step wall-clock seconds, keyed by tested rank.
nlohmann::json report_timings_json(const RankReport& report);

nlohmann::json config_to_json(const SelectionConfig& config);

}  // namespace nmfrank

#endif  // NMFRANK_REPORT_HPP
