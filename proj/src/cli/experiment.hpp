#pragma once

#include <string>

#include <json.hpp>

#include "cli/config.hpp"

namespace vitalattn {

// Executes the full pipeline described by the config into out_dir:
// data -> preprocess -> cross-validation -> final models -> attributions ->
// fidelity -> case study -> reports. Every artifact carries
// {tool_version, config_hash, master_seed}; reruns with an identical config
// produce byte-identical artifacts. Throws; the CLI maps exceptions to exit
// codes. On a stage failure, partial artifacts stay behind and MANIFEST.json
// names the failed stage.
void run_experiment(const nlohmann::json& config_doc, const std::string& out_dir);

// Validates completeness and [0,1] range, then marks a loaded CSV as
// preprocessed so training/window construction accept it. For cohorts that
// were produced by the `preprocess` subcommand.
void assume_preprocessed(Cohort& cohort);

std::string render_metrics_table(const std::vector<CvResult>& results);

}  // namespace vitalattn
