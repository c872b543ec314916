#pragma once

// Pipeline stages behind the command-line tool. Each stage reads the shared
// config and the intermediates of earlier stages from the run directory,
// and writes its own artifacts there.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "srcplan/config.hpp"
#include "srcplan/report.hpp"

namespace srcplan {

struct RunContext {
    Config config;
    std::filesystem::path run_dir;
    ReportMeta meta;  // config hash and every effective seed
};

// Validates keys and resolves the run directory and seeds.
RunContext make_run_context(const Config& config);

// synth, train-lm, baseline, ppl, posterior, stm, select, affinity, cramers,
// predict, report.
const std::vector<std::string_view>& stage_names();
void run_stage(std::string_view stage, const RunContext& ctx);

// synth (unless `corpus` is set), then every stage except stm, in order.
void run_pipeline(const RunContext& ctx);

// Loads predict/predictor.json and returns the predicted schema.
std::string predict_headline(const RunContext& ctx, std::string_view headline);

// Documented config keys.
const std::vector<std::string_view>& known_config_keys();

}  // namespace srcplan
