#include "autolabel/pipeline.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>
#include <utility>
#include <vector>

#include "autolabel/errors.hpp"
#include "autolabel/label_io.hpp"
#include "autolabel/synth.hpp"
#include "json.hpp"

namespace autolabel {

namespace fs = std::filesystem;

namespace {

// splitmix64 finalizer; decorrelates per-iteration predictor seeds.
std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr const char* kBuiltinPredictor = "builtin:synth";

std::string shell_quote(const std::string& value) {
  std::string quoted = "'";
  for (char c : value) {
    if (c == '\'') {
      quoted += "'\\''";
    } else {
      quoted += c;
    }
  }
  quoted += '\'';
  return quoted;
}

std::string substitute_placeholders(std::string command, const std::string& manifest_path,
                                    const std::string& out_path) {
  const std::pair<std::string, std::string> replacements[] = {
      {"{manifest}", shell_quote(manifest_path)},
      {"{out}", shell_quote(out_path)},
  };
  for (const auto& [placeholder, value] : replacements) {
    std::size_t pos = 0;
    while ((pos = command.find(placeholder, pos)) != std::string::npos) {
      command.replace(pos, placeholder.size(), value);
      pos += value.size();
    }
  }
  return command;
}

struct CommandResult {
  int exit_code = 0;
  std::string output;
};

CommandResult run_command(const std::string& command) {
  const std::string wrapped = command + " 2>&1";
  FILE* stream = ::popen(wrapped.c_str(), "r");
  if (stream == nullptr) {
    throw Error(errc::io, "failed to launch predictor command: " + command);
  }
  CommandResult result;
  char buffer[4096];
  std::size_t n = 0;
  while ((n = std::fread(buffer, 1, sizeof buffer, stream)) > 0) {
    result.output.append(buffer, n);
  }
  const int status = ::pclose(stream);
  if (status == -1) {
    throw Error(errc::io, "failed to reap predictor command: " + command);
  }
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

std::string trimmed_output(std::string text) {
  constexpr std::size_t kMaxLen = 2000;
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  if (text.size() > kMaxLen) {
    text.resize(kMaxLen);
    text += "...";
  }
  return text;
}

fs::path iteration_dir(const PipelineConfig& cfg, int index) {
  return fs::path(cfg.work_dir) / ("iter" + std::to_string(index));
}

std::string iteration_prefix(int index) {
  return "iteration " + std::to_string(index) + ": ";
}

// Writes one iteration's on-disk form: labels/<split>/<id>.txt for every
// image, the manifest, and the counted stats. Returns those stats.
IterationStats materialize_iteration(const PipelineConfig& cfg, const Manifest& manifest,
                                     const LabelSet& labels, int index,
                                     const LabelSet* baseline) {
  const fs::path dir = iteration_dir(cfg, index);
  fs::create_directories(dir);
  write_labels(dir, manifest, labels);
  write_text_file(dir / "manifest.jsonl", write_manifest(manifest));
  IterationStats stats = count_stats(labels, manifest, baseline);
  stats.iteration = index;
  write_text_file(dir / "stats.json", stats_to_json(stats) + "\n");
  return stats;
}

std::pair<LabelSet, IterationStats> run_iteration_impl(const PipelineConfig& cfg, int index,
                                                       const LabelSet& current,
                                                       const Manifest& manifest,
                                                       const LabelSet* baseline,
                                                       PredictorOutcome* outcome_out) {
  const fs::path dir = iteration_dir(cfg, index);
  materialize_iteration(cfg, manifest, current, index, baseline);

  const fs::path predictions_path = dir / "predictions.jsonl";
  PredictorOutcome outcome;
  if (cfg.predictor_command == kBuiltinPredictor) {
    NoiseProfile profile;
    profile.seed = mix64(cfg.seed ^ static_cast<std::uint64_t>(index + 1));
    const PredictionMap preds = synth_predict(current, profile, manifest);
    write_text_file(predictions_path, write_predictions(preds));
    outcome = PredictorOutcome{kBuiltinPredictor, 0};
  } else {
    const std::string command = substitute_placeholders(
        cfg.predictor_command, (dir / "manifest.jsonl").string(), predictions_path.string());
    const CommandResult result = run_command(command);
    outcome = PredictorOutcome{command, result.exit_code};
    if (result.exit_code != 0) {
      if (outcome_out != nullptr) *outcome_out = outcome;
      std::string message = iteration_prefix(index) + "predictor exited with code " +
                            std::to_string(result.exit_code);
      const std::string captured = trimmed_output(result.output);
      if (!captured.empty()) message += ": " + captured;
      throw Error(errc::predictor_failed, message, index, result.exit_code);
    }
  }
  if (outcome_out != nullptr) *outcome_out = outcome;

  // The predictions file is the interface for both predictor kinds; parse it
  // back rather than trusting in-process state.
  std::string predictions_text;
  try {
    predictions_text = read_text_file(predictions_path);
  } catch (const Error& e) {
    throw Error(errc::io, iteration_prefix(index) + "predictor left no predictions file: " +
                              e.what(),
                index);
  }
  PredictionMap preds;
  try {
    preds = parse_predictions(predictions_text, manifest, index + 1);
  } catch (const Error& e) {
    throw Error(e.code(),
                iteration_prefix(index) + predictions_path.string() + ": " + e.what(),
                e.line(), e.detail());
  }

  const LabelSet merged = merge_labels(current, preds, manifest, cfg);
  const IterationStats stats = materialize_iteration(cfg, manifest, merged, index + 1, baseline);

  LabelSet next = load_dataset(iteration_dir(cfg, index + 1), manifest);
  next.iteration = index + 1;
  return {std::move(next), stats};
}

nlohmann::json config_json(const PipelineConfig& cfg) {
  nlohmann::json j;
  j["conf_threshold"] = cfg.conf_threshold;
  j["nms_iou"] = cfg.nms_iou;
  j["iterations"] = cfg.iterations;
  j["keypoint_count"] = cfg.keypoint_count;
  j["predictor_command"] = cfg.predictor_command;
  j["dataset_root"] = cfg.dataset_root;
  j["work_dir"] = cfg.work_dir;
  nlohmann::json splits = nlohmann::json::array();
  for (Split split : cfg.splits_to_refine) splits.push_back(std::string(to_string(split)));
  j["splits_to_refine"] = std::move(splits);
  j["seed"] = cfg.seed;
  if (cfg.converge_epsilon) j["converge_epsilon"] = *cfg.converge_epsilon;
  return j;
}

}  // namespace

PipelineConfig config_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(errc::config, std::string("invalid config: ") + e.what());
  }
  if (!j.is_object()) throw Error(errc::config, "config must be a JSON object");

  PipelineConfig cfg;
  bool has_dataset_root = false;
  bool has_work_dir = false;
  for (const auto& [key, value] : j.items()) {
    if (key == "conf_threshold") {
      if (!value.is_number() || value.get<double>() < 0.0 || value.get<double>() > 1.0) {
        throw Error(errc::config, "conf_threshold must be a number in [0,1]");
      }
      cfg.conf_threshold = value.get<double>();
    } else if (key == "nms_iou") {
      if (!value.is_number() || value.get<double>() < 0.0 || value.get<double>() > 1.0) {
        throw Error(errc::config, "nms_iou must be a number in [0,1]");
      }
      cfg.nms_iou = value.get<double>();
    } else if (key == "iterations") {
      if (!value.is_number_integer() || value.get<int>() < 1) {
        throw Error(errc::config, "iterations must be a positive integer");
      }
      cfg.iterations = value.get<int>();
    } else if (key == "keypoint_count") {
      if (!value.is_number_integer() || value.get<int>() < 1) {
        throw Error(errc::config, "keypoint_count must be a positive integer");
      }
      cfg.keypoint_count = value.get<int>();
    } else if (key == "predictor_command") {
      if (!value.is_string() || value.get<std::string>().empty()) {
        throw Error(errc::config, "predictor_command must be a non-empty string");
      }
      cfg.predictor_command = value.get<std::string>();
    } else if (key == "dataset_root") {
      if (!value.is_string() || value.get<std::string>().empty()) {
        throw Error(errc::config, "dataset_root must be a non-empty string");
      }
      cfg.dataset_root = value.get<std::string>();
      has_dataset_root = true;
    } else if (key == "work_dir") {
      if (!value.is_string() || value.get<std::string>().empty()) {
        throw Error(errc::config, "work_dir must be a non-empty string");
      }
      cfg.work_dir = value.get<std::string>();
      has_work_dir = true;
    } else if (key == "splits_to_refine") {
      if (!value.is_array() || value.empty()) {
        throw Error(errc::config, "splits_to_refine must be a non-empty array");
      }
      std::vector<Split> splits;
      for (const auto& entry : value) {
        if (!entry.is_string()) {
          throw Error(errc::config, "splits_to_refine entries must be strings");
        }
        const auto split = split_from_string(entry.get<std::string>());
        if (!split) {
          throw Error(errc::config,
                      "unknown split '" + entry.get<std::string>() + "' in splits_to_refine");
        }
        for (Split seen : splits) {
          if (seen == *split) {
            throw Error(errc::config, "duplicate split in splits_to_refine");
          }
        }
        splits.push_back(*split);
      }
      cfg.splits_to_refine = std::move(splits);
    } else if (key == "seed") {
      if (!value.is_number_unsigned()) {
        throw Error(errc::config, "seed must be a non-negative integer");
      }
      cfg.seed = value.get<std::uint64_t>();
    } else if (key == "converge_epsilon") {
      if (!value.is_number() || value.get<double>() < 0.0) {
        throw Error(errc::config, "converge_epsilon must be a non-negative number");
      }
      cfg.converge_epsilon = value.get<double>();
    } else {
      throw Error(errc::config, "unknown config key '" + key + "'");
    }
  }
  if (!has_dataset_root) throw Error(errc::config, "config is missing dataset_root");
  if (!has_work_dir) throw Error(errc::config, "config is missing work_dir");
  return cfg;
}

PipelineConfig load_config(const fs::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    throw Error(errc::io, path.string() + ": " + e.what());
  }
  try {
    return config_from_json(text);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what(), e.line(), e.detail());
  }
}

std::string config_to_json(const PipelineConfig& cfg) { return config_json(cfg).dump(2) + "\n"; }

std::string report_to_json(const RunReport& report) {
  nlohmann::json j;
  j["config"] = config_json(report.config);
  nlohmann::json iterations = nlohmann::json::array();
  for (const IterationReport& it : report.iterations) {
    nlohmann::json entry;
    entry["iteration"] = it.stats.iteration;
    entry["stats"] = nlohmann::json::parse(stats_to_json(it.stats));
    if (it.predictor) {
      entry["predictor"] = {{"command", it.predictor->command},
                            {"exit_code", it.predictor->exit_code}};
    }
    if (it.metrics) {
      entry["metrics"] = nlohmann::json::parse(metrics_to_json(*it.metrics));
    }
    iterations.push_back(std::move(entry));
  }
  j["iterations"] = std::move(iterations);
  j["stopped_early"] = report.stopped_early;
  if (report.failure) {
    j["failure"] = {{"iteration", report.failure->iteration},
                    {"category", report.failure->category},
                    {"message", report.failure->message}};
  }
  return j.dump(2) + "\n";
}

std::pair<LabelSet, IterationStats> run_iteration(const PipelineConfig& cfg, int index,
                                                  const LabelSet& current,
                                                  const Manifest& manifest,
                                                  const LabelSet* baseline) {
  return run_iteration_impl(cfg, index, current, manifest, baseline, nullptr);
}

RunReport run_pipeline(const PipelineConfig& cfg, const RunOptions& options) {
  fs::create_directories(cfg.work_dir);
  const Manifest manifest =
      load_manifest(fs::path(cfg.dataset_root) / "manifest.jsonl", cfg.keypoint_count);
  const LabelSet initial = load_dataset(cfg.dataset_root, manifest);

  std::optional<Manifest> held_manifest;
  std::optional<LabelSet> held_labels;
  if (options.eval_against) {
    held_manifest = load_manifest(*options.eval_against / "manifest.jsonl", cfg.keypoint_count);
    held_labels = load_dataset(*options.eval_against, *held_manifest);
  }
  const auto evaluate_labels =
      [&](const LabelSet& labels) -> std::optional<MetricsReport> {
    if (!held_labels) return std::nullopt;
    return evaluate(*held_labels, labels.entries, *held_manifest);
  };

  RunReport report;
  report.config = cfg;

  IterationStats stats = materialize_iteration(cfg, manifest, initial, 0, &initial);
  report.iterations.push_back(IterationReport{stats, std::nullopt, evaluate_labels(initial)});

  LabelSet current = initial;
  for (int i = 0; i < cfg.iterations; ++i) {
    const std::int64_t previous_total = report.iterations.back().stats.total_labels;
    PredictorOutcome outcome;
    LabelSet next;
    IterationStats next_stats;
    try {
      std::tie(next, next_stats) =
          run_iteration_impl(cfg, i, current, manifest, &initial, &outcome);
    } catch (const Error& e) {
      report.failure = RunFailure{i, std::string(to_string(e.code())), e.what()};
      break;
    }
    report.iterations.push_back(
        IterationReport{next_stats, outcome, evaluate_labels(next)});
    current = std::move(next);

    const double gained = static_cast<double>(next_stats.total_labels - previous_total);
    if (cfg.converge_epsilon && gained < *cfg.converge_epsilon && i + 1 < cfg.iterations) {
      report.stopped_early = true;
      break;
    }
  }

  write_text_file(fs::path(cfg.work_dir) / "report.json", report_to_json(report));
  return report;
}

}  // namespace autolabel
