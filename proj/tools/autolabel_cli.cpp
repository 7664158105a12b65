#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "autolabel/errors.hpp"
#include "autolabel/geometry.hpp"
#include "autolabel/label_io.hpp"
#include "autolabel/merge.hpp"
#include "autolabel/metrics.hpp"
#include "autolabel/pipeline.hpp"
#include "autolabel/synth.hpp"
#include "autolabel/types.hpp"

namespace fs = std::filesystem;

namespace {

int exit_code_for(autolabel::errc code) {
  switch (code) {
    case autolabel::errc::io:
    case autolabel::errc::config:
      return 3;
    case autolabel::errc::predictor_failed:
      return 2;
    default:
      return 1;
  }
}

std::string format_pct(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.1f", value);
  return buffer;
}

std::string format_metric(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.4f", value);
  return buffer;
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
  } else {
    autolabel::write_text_file(out_path, text);
  }
}

int cmd_validate(const std::string& root, int keypoints) {
  const autolabel::Manifest manifest =
      autolabel::load_manifest(fs::path(root) / "manifest.jsonl", keypoints);
  std::int64_t files = 0;
  std::int64_t instances = 0;
  std::int64_t violations = 0;
  for (const autolabel::ImageRecord& rec : manifest.records) {
    const fs::path path = fs::path(root) / "labels" /
                          std::string(autolabel::to_string(rec.split)) / (rec.id + ".txt");
    if (!fs::exists(path)) continue;
    ++files;
    std::vector<autolabel::PoseInstance> parsed;
    try {
      parsed = autolabel::parse_label_file(autolabel::read_text_file(path),
                                           manifest.keypoint_count);
    } catch (const autolabel::Error& e) {
      if (e.code() == autolabel::errc::io) throw;
      std::cout << path.string() << ": " << e.what() << "\n";
      ++violations;
      continue;
    }
    for (std::size_t i = 0; i < parsed.size(); ++i) {
      ++instances;
      for (const std::string& message :
           autolabel::validate_instance(parsed[i], manifest.keypoint_count)) {
        std::cout << path.string() << ": instance " << i << ": " << message << "\n";
        ++violations;
      }
    }
  }
  if (violations > 0) {
    std::cout << violations << " violation(s)\n";
    return 1;
  }
  std::cout << "OK: " << files << " label file(s), " << instances << " instance(s)\n";
  return 0;
}

int cmd_stats(const std::string& root, int keypoints) {
  const autolabel::Manifest manifest =
      autolabel::load_manifest(fs::path(root) / "manifest.jsonl", keypoints);
  const autolabel::LabelSet labels = autolabel::load_dataset(root, manifest);
  std::cout << autolabel::stats_to_json(autolabel::count_stats(labels, manifest)) << "\n";
  return 0;
}

int cmd_filter(const std::string& preds_path, const std::string& root, int keypoints,
               double conf, double nms_iou, const std::string& out_path) {
  const std::string text = autolabel::read_text_file(preds_path);
  autolabel::PredictionMap preds;
  if (!root.empty()) {
    const autolabel::Manifest manifest =
        autolabel::load_manifest(fs::path(root) / "manifest.jsonl", keypoints);
    preds = autolabel::parse_predictions(text, manifest, 1);
  } else {
    preds = autolabel::parse_predictions(text, keypoints, 1);
  }
  autolabel::PredictionMap kept;
  for (const auto& [id, dets] : preds) {
    const std::vector<autolabel::Detection> gated = autolabel::confidence_filter(dets, conf);
    std::vector<autolabel::Detection> survivors = autolabel::nms(gated, nms_iou);
    if (!survivors.empty()) kept.emplace(id, std::move(survivors));
  }
  emit(autolabel::write_predictions(kept), out_path);
  return 0;
}

int cmd_merge(const std::string& root, const std::string& preds_path, int keypoints,
              double conf, double nms_iou, const std::string& out_dir) {
  const autolabel::Manifest manifest =
      autolabel::load_manifest(fs::path(root) / "manifest.jsonl", keypoints);
  const autolabel::LabelSet current = autolabel::load_dataset(root, manifest);
  const autolabel::PredictionMap preds =
      autolabel::parse_predictions(autolabel::read_text_file(preds_path), manifest, 1);
  autolabel::PipelineConfig cfg;
  cfg.conf_threshold = conf;
  cfg.nms_iou = nms_iou;
  cfg.keypoint_count = manifest.keypoint_count;
  const autolabel::LabelSet merged = autolabel::merge_labels(current, preds, manifest, cfg);
  const autolabel::IterationStats stats =
      autolabel::count_stats(merged, manifest, &current);
  if (!out_dir.empty()) {
    autolabel::write_labels(out_dir, manifest, merged);
    autolabel::write_text_file(fs::path(out_dir) / "manifest.jsonl",
                               autolabel::write_manifest(manifest));
    autolabel::write_text_file(fs::path(out_dir) / "stats.json",
                               autolabel::stats_to_json(stats) + "\n");
  }
  std::cout << autolabel::stats_to_json(stats) << "\n";
  return 0;
}

int cmd_eval(const std::string& gt_root, const std::string& preds_path, int keypoints) {
  const autolabel::Manifest manifest =
      autolabel::load_manifest(fs::path(gt_root) / "manifest.jsonl", keypoints);
  const autolabel::LabelSet gts = autolabel::load_dataset(gt_root, manifest);
  const autolabel::PredictionMap preds =
      autolabel::parse_predictions(autolabel::read_text_file(preds_path), manifest, 1);
  std::cout << autolabel::metrics_to_json(autolabel::evaluate(gts, preds, manifest)) << "\n";
  return 0;
}

int cmd_synth(const std::string& root, int keypoints, const std::string& profile_path,
              const std::string& out_path) {
  const autolabel::Manifest manifest =
      autolabel::load_manifest(fs::path(root) / "manifest.jsonl", keypoints);
  const autolabel::LabelSet labels = autolabel::load_dataset(root, manifest);
  autolabel::NoiseProfile profile;
  if (!profile_path.empty()) {
    profile = autolabel::profile_from_json(autolabel::read_text_file(profile_path));
  }
  emit(autolabel::write_predictions(autolabel::synth_predict(labels, profile, manifest)),
       out_path);
  return 0;
}

int cmd_run(const std::string& config_path, const std::string& eval_against,
            std::optional<double> converge_epsilon, std::optional<int> iterations,
            std::optional<std::uint64_t> seed) {
  autolabel::PipelineConfig cfg = autolabel::load_config(config_path);
  if (converge_epsilon) cfg.converge_epsilon = *converge_epsilon;
  if (iterations) cfg.iterations = *iterations;
  if (seed) cfg.seed = *seed;
  autolabel::RunOptions options;
  if (!eval_against.empty()) options.eval_against = fs::path(eval_against);

  const autolabel::RunReport report = autolabel::run_pipeline(cfg, options);
  for (const autolabel::IterationReport& it : report.iterations) {
    std::cout << "iter " << it.stats.iteration << ": train " << it.stats.train_labels
              << " val " << it.stats.val_labels << " total " << it.stats.total_labels;
    if (it.stats.total_growth_pct) {
      std::cout << " (+" << format_pct(*it.stats.total_growth_pct) << "%)";
    }
    if (it.metrics) {
      std::cout << " | ap50 " << format_metric(it.metrics->ap50) << " ap50_95 "
                << format_metric(it.metrics->ap50_95);
    }
    std::cout << "\n";
  }
  if (report.stopped_early) std::cout << "converged early\n";
  std::cout << "report written to " << (fs::path(cfg.work_dir) / "report.json").string()
            << "\n";
  if (report.failure) {
    // the recorded message already names the iteration
    std::cerr << "error (" << report.failure->category << "): " << report.failure->message
              << "\n";
    if (report.failure->category == "predictor_failed") return 2;
    if (report.failure->category == "io" || report.failure->category == "config") return 3;
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Iterative label refinement for pose datasets"};
  app.require_subcommand(1);

  std::string root;
  std::string preds_path;
  std::string out_path;
  std::string profile_path;
  std::string gt_root;
  std::string config_path;
  std::string eval_against;
  int keypoints = autolabel::kDefaultKeypointCount;
  int filter_keypoints = 0;
  double conf = 0.7;
  double nms_iou = 0.3;
  std::optional<double> converge_epsilon;
  std::optional<int> iterations;
  std::optional<std::uint64_t> seed;

  CLI::App* validate = app.add_subcommand("validate", "Check a dataset's label files");
  validate->add_option("root", root, "Dataset root containing manifest.jsonl and labels/")
      ->required();
  validate->add_option("--keypoints", keypoints, "Keypoints per instance")
      ->check(CLI::PositiveNumber);

  CLI::App* stats = app.add_subcommand("stats", "Count images and labels per split");
  stats->add_option("root", root, "Dataset root")->required();
  stats->add_option("--keypoints", keypoints, "Keypoints per instance")
      ->check(CLI::PositiveNumber);

  CLI::App* filter = app.add_subcommand(
      "filter", "Confidence-gate and deduplicate a prediction file");
  filter->add_option("predictions", preds_path, "Predictions file (JSON lines)")->required();
  filter->add_option("--root", root, "Dataset root for image id checks");
  filter->add_option("--keypoints", filter_keypoints,
                     "Keypoints per instance (default: inferred)");
  filter->add_option("--conf", conf, "Confidence threshold");
  filter->add_option("--nms", nms_iou, "IoU threshold for suppression");
  filter->add_option("--out", out_path, "Output file (default: stdout)");

  CLI::App* merge = app.add_subcommand("merge", "Merge predictions into a label set");
  merge->add_option("root", root, "Dataset root")->required();
  merge->add_option("predictions", preds_path, "Predictions file")->required();
  merge->add_option("--keypoints", keypoints, "Keypoints per instance")
      ->check(CLI::PositiveNumber);
  merge->add_option("--conf", conf, "Confidence threshold");
  merge->add_option("--nms", nms_iou, "IoU threshold for suppression");
  merge->add_option("--out", out_path, "Directory for the merged label set");

  CLI::App* eval = app.add_subcommand("eval", "Score predictions against reference labels");
  eval->add_option("--gt", gt_root, "Reference dataset root")->required();
  eval->add_option("--pred", preds_path, "Predictions file")->required();
  eval->add_option("--keypoints", keypoints, "Keypoints per instance")
      ->check(CLI::PositiveNumber);

  CLI::App* synth = app.add_subcommand(
      "synth", "Emit synthetic detector output for a labeled dataset");
  synth->add_option("root", root, "Dataset root")->required();
  synth->add_option("--keypoints", keypoints, "Keypoints per instance")
      ->check(CLI::PositiveNumber);
  synth->add_option("--profile", profile_path, "Noise profile JSON file");
  synth->add_option("--out", out_path, "Output file (default: stdout)");

  CLI::App* run = app.add_subcommand("run", "Run the refinement loop from a config file");
  run->add_option("--config", config_path, "Pipeline config JSON file")->required();
  run->add_option("--eval-against", eval_against,
                  "Dataset root with held-out labels to score each iteration against");
  run->add_option("--converge-epsilon", converge_epsilon,
                  "Stop once an iteration gains fewer labels than this");
  run->add_option("--iterations", iterations, "Override the configured iteration count")
      ->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "Override the configured seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 3;
  }

  try {
    if (app.got_subcommand(validate)) return cmd_validate(root, keypoints);
    if (app.got_subcommand(stats)) return cmd_stats(root, keypoints);
    if (app.got_subcommand(filter)) {
      return cmd_filter(preds_path, root, filter_keypoints, conf, nms_iou, out_path);
    }
    if (app.got_subcommand(merge)) {
      return cmd_merge(root, preds_path, keypoints, conf, nms_iou, out_path);
    }
    if (app.got_subcommand(eval)) return cmd_eval(gt_root, preds_path, keypoints);
    if (app.got_subcommand(synth)) return cmd_synth(root, keypoints, profile_path, out_path);
    if (app.got_subcommand(run)) {
      return cmd_run(config_path, eval_against, converge_epsilon, iterations, seed);
    }
  } catch (const autolabel::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 3;
}
