#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "autolabel/merge.hpp"
#include "autolabel/metrics.hpp"
#include "autolabel/types.hpp"

namespace autolabel {

// JSON object mirroring PipelineConfig field-for-field; unknown keys are
// rejected. dataset_root and work_dir are required, everything else has the
// documented default.
PipelineConfig config_from_json(std::string_view text);
PipelineConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const PipelineConfig& cfg);

struct PredictorOutcome {
  std::string command;  // "builtin:synth" or the substituted shell command
  int exit_code = 0;
};

struct IterationReport {
  IterationStats stats;
  std::optional<PredictorOutcome> predictor;  // absent for iteration 0
  std::optional<MetricsReport> metrics;       // present when evaluating against held-out labels
};

struct RunFailure {
  int iteration = 0;
  std::string category;
  std::string message;
};

struct RunReport {
  PipelineConfig config;
  std::vector<IterationReport> iterations;  // in order, starting at iteration 0
  bool stopped_early = false;
  std::optional<RunFailure> failure;
};

std::string report_to_json(const RunReport& report);

// One refinement step against the workdir: writes iteration `index`
// (labels/, manifest.jsonl, stats.json) under work_dir/iter<index>/, runs
// the configured predictor with {manifest}/{out} substituted (builtin:synth
// runs in process; both paths leave predictions.jsonl behind), and merges
// the parsed predictions into iteration index+1, which is written the same
// way. Returns the next label set as reloaded from its own files, plus its
// stats (growth relative to `baseline` when given). A predictor exiting
// nonzero raises errc::predictor_failed carrying the exit code.
std::pair<LabelSet, IterationStats> run_iteration(const PipelineConfig& cfg, int index,
                                                  const LabelSet& current,
                                                  const Manifest& manifest,
                                                  const LabelSet* baseline = nullptr);

struct RunOptions {
  // Dataset root with held-out labels; when set, every iteration's label set
  // is evaluated against it and the metrics land in the report.
  std::optional<std::filesystem::path> eval_against;
};

// Full refinement loop over cfg.iterations steps; writes iteration
// artifacts plus report.json under cfg.work_dir. A failing iteration stops
// the run and is recorded in the returned (and written) report instead of
// being thrown.
RunReport run_pipeline(const PipelineConfig& cfg, const RunOptions& options = {});

}  // namespace autolabel
