#pragma once

#include "tevim/config.hpp"

#include <json.hpp>

#include <string>

namespace tevim {

/// Shown in every report: which regression learners produced the numbers.
extern const char* const kLearnerNotice;

struct EstimateOutput {
  nlohmann::json report;
  std::string table_csv;  // one row per subset, sorted like report["tevims"]
};

/// Everything cmd_estimate writes, without touching the filesystem.
EstimateOutput run_estimate(const EstimateConfig& cfg, int threads = 1);

struct SimulateOutput {
  nlohmann::json summary;
  std::string metrics_csv;
};

SimulateOutput run_simulate(const SimulateConfig& cfg, int threads = 1);

nlohmann::json run_truths(const TruthsConfig& cfg);

/// Write report.json and tevims.csv under opts.out.
void cmd_estimate(const EstimateConfig& cfg, const RuntimeOptions& opts);
/// Write metrics.csv and summary.json under opts.out.
void cmd_simulate(const SimulateConfig& cfg, const RuntimeOptions& opts);
/// Write truths.json under opts.out and return its contents.
nlohmann::json cmd_truths(const TruthsConfig& cfg, const RuntimeOptions& opts);

/// Pretty-printed JSON text with a trailing newline.
std::string dump(const nlohmann::json& j);

}  // namespace tevim
