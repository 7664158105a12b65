#include "autolabel/label_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "autolabel/errors.hpp"
#include "json.hpp"

namespace autolabel {

namespace {

using nlohmann::json;

// Calls fn(line, line_no) for every line, line_no starting at 1. Handles a
// missing trailing newline and strips a trailing carriage return.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    if (pos == text.size()) {
      break;
    }
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    fn(line, line_no);
    pos = end + 1;
  }
}

std::vector<std::string_view> split_tokens(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i >= line.size()) break;
    std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    tokens.push_back(line.substr(start, i - start));
  }
  return tokens;
}

std::string field_name(int token_index) {
  if (token_index == 0) return "class_id";
  switch (token_index) {
    case 1: return "bbox.cx";
    case 2: return "bbox.cy";
    case 3: return "bbox.w";
    case 4: return "bbox.h";
    default: break;
  }
  const int k = (token_index - 5) / 3;
  const char* part[] = {"x", "y", "v"};
  return "keypoints[" + std::to_string(k) + "]." + part[(token_index - 5) % 3];
}

double parse_real(std::string_view token, int line_no, int token_index) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw Error(errc::non_numeric,
                "line " + std::to_string(line_no) + ": token " + std::to_string(token_index) +
                    " (" + field_name(token_index) + ") not numeric",
                line_no, token_index);
  }
  if (!std::isfinite(value)) {
    throw Error(errc::value_range,
                "line " + std::to_string(line_no) + ": " + field_name(token_index) +
                    " not finite",
                line_no);
  }
  return value;
}

long parse_integer(std::string_view token, int line_no, int token_index) {
  long value = 0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw Error(errc::non_numeric,
                "line " + std::to_string(line_no) + ": token " + std::to_string(token_index) +
                    " (" + field_name(token_index) + ") not an integer",
                line_no, token_index);
  }
  return value;
}

[[noreturn]] void throw_range(int line_no, const std::string& what) {
  throw Error(errc::value_range, "line " + std::to_string(line_no) + ": " + what, line_no);
}

}  // namespace

std::vector<PoseInstance> parse_label_file(std::string_view text, int keypoint_count) {
  std::vector<PoseInstance> instances;
  const int expected = 5 + 3 * keypoint_count;
  for_each_line(text, [&](std::string_view line, int line_no) {
    const auto tokens = split_tokens(line);
    if (tokens.empty()) return;
    if (static_cast<int>(tokens.size()) != expected) {
      throw Error(errc::token_count,
                  "line " + std::to_string(line_no) + ": token count " +
                      std::to_string(tokens.size()) + ", expected " + std::to_string(expected),
                  line_no);
    }
    PoseInstance inst;
    const long class_id = parse_integer(tokens[0], line_no, 0);
    if (class_id < 0) throw_range(line_no, "class_id negative");
    inst.class_id = static_cast<int>(class_id);

    const double cx = parse_real(tokens[1], line_no, 1);
    const double cy = parse_real(tokens[2], line_no, 2);
    const double w = parse_real(tokens[3], line_no, 3);
    const double h = parse_real(tokens[4], line_no, 4);
    const auto bbox = NormBBox::make(cx, cy, w, h);
    if (!bbox) throw_range(line_no, "bbox outside the frame or degenerate");
    inst.bbox = *bbox;

    inst.keypoints.reserve(keypoint_count);
    for (int k = 0; k < keypoint_count; ++k) {
      const int base = 5 + 3 * k;
      const double x = parse_real(tokens[base], line_no, base);
      const double y = parse_real(tokens[base + 1], line_no, base + 1);
      const long v = parse_integer(tokens[base + 2], line_no, base + 2);
      if (v < 0 || v > 2) {
        throw_range(line_no, "keypoints[" + std::to_string(k) + "].v not in {0,1,2}");
      }
      const auto kp = Keypoint::make(x, y, static_cast<int>(v));
      if (!kp) {
        throw_range(line_no, "keypoints[" + std::to_string(k) + "] coordinates out of [0,1]");
      }
      inst.keypoints.push_back(*kp);
    }
    instances.push_back(std::move(inst));
  });
  return instances;
}

std::string serialize_label_file(std::span<const PoseInstance> instances) {
  std::string out;
  char buf[32];
  const auto put_real = [&](double v) {
    if (v == 0.0) v = 0.0;  // fold -0 into 0
    std::snprintf(buf, sizeof buf, "%.6f", v);
    out += buf;
  };
  for (const PoseInstance& inst : instances) {
    out += std::to_string(inst.class_id);
    out += ' ';
    put_real(inst.bbox.cx);
    out += ' ';
    put_real(inst.bbox.cy);
    out += ' ';
    put_real(inst.bbox.w);
    out += ' ';
    put_real(inst.bbox.h);
    for (const Keypoint& kp : inst.keypoints) {
      out += ' ';
      put_real(kp.x);
      out += ' ';
      put_real(kp.y);
      out += ' ';
      out += std::to_string(kp.v);
    }
    out += '\n';
  }
  return out;
}

namespace {

json parse_json_line(std::string_view line, int line_no) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw Error(errc::schema,
                "line " + std::to_string(line_no) + ": invalid record: " + e.what(), line_no);
  }
}

[[noreturn]] void throw_schema(int line_no, const std::string& what) {
  throw Error(errc::schema, "line " + std::to_string(line_no) + ": " + what, line_no);
}

bool valid_image_id(const std::string& id) {
  if (id.empty() || id == "." || id == "..") return false;
  return id.find('/') == std::string::npos && id.find('\\') == std::string::npos;
}

}  // namespace

Manifest read_manifest(std::string_view text, int keypoint_count) {
  Manifest manifest;
  manifest.keypoint_count = keypoint_count;
  std::unordered_set<std::string> seen;
  for_each_line(text, [&](std::string_view line, int line_no) {
    if (line.find_first_not_of(" \t") == std::string_view::npos) return;
    const json rec = parse_json_line(line, line_no);
    if (!rec.is_object()) throw_schema(line_no, "record is not an object");
    if (!rec.contains("id") || !rec["id"].is_string()) {
      throw_schema(line_no, "missing or non-string id");
    }
    ImageRecord image;
    image.id = rec["id"].get<std::string>();
    if (!valid_image_id(image.id)) throw_schema(line_no, "invalid id '" + image.id + "'");
    for (const char* key : {"width_px", "height_px"}) {
      if (!rec.contains(key) || !rec[key].is_number_integer() || rec[key].get<long>() <= 0) {
        throw_schema(line_no, std::string(key) + " must be a positive integer");
      }
    }
    image.width_px = rec["width_px"].get<int>();
    image.height_px = rec["height_px"].get<int>();
    if (!rec.contains("split") || !rec["split"].is_string()) {
      throw_schema(line_no, "missing or non-string split");
    }
    const auto split = split_from_string(rec["split"].get<std::string>());
    if (!split) {
      throw_schema(line_no, "split must be \"train\" or \"val\"");
    }
    image.split = *split;
    if (!seen.insert(image.id).second) {
      throw Error(errc::duplicate_id,
                  "line " + std::to_string(line_no) + ": duplicate id '" + image.id + "'",
                  line_no);
    }
    manifest.records.push_back(std::move(image));
  });
  return manifest;
}

std::string write_manifest(const Manifest& manifest) {
  std::string out;
  for (const ImageRecord& rec : manifest.records) {
    json j;
    j["id"] = rec.id;
    j["width_px"] = rec.width_px;
    j["height_px"] = rec.height_px;
    j["split"] = std::string(to_string(rec.split));
    out += j.dump();
    out += '\n';
  }
  return out;
}

Manifest load_manifest(const std::filesystem::path& path, int keypoint_count) {
  try {
    return read_manifest(read_text_file(path), keypoint_count);
  } catch (const Error& e) {
    if (e.code() == errc::io) throw;
    throw Error(e.code(), path.string() + ": " + e.what(), e.line(), e.detail());
  }
}

LabelSet load_dataset(const std::filesystem::path& root, const Manifest& manifest) {
  LabelSet labels;
  labels.iteration = 0;
  for (const ImageRecord& rec : manifest.records) {
    const std::filesystem::path path =
        root / "labels" / std::string(to_string(rec.split)) / (rec.id + ".txt");
    std::vector<Detection> dets;
    std::error_code ec;
    if (std::filesystem::exists(path, ec)) {
      std::vector<PoseInstance> instances;
      try {
        instances = parse_label_file(read_text_file(path), manifest.keypoint_count);
      } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what(), e.line(), e.detail());
      }
      dets.reserve(instances.size());
      for (PoseInstance& inst : instances) {
        dets.push_back(Detection::original(std::move(inst)));
      }
    }
    labels.entries.emplace(rec.id, std::move(dets));
  }
  return labels;
}

void write_labels(const std::filesystem::path& root, const Manifest& manifest,
                  const LabelSet& labels) {
  for (const ImageRecord& rec : manifest.records) {
    const std::filesystem::path path =
        root / "labels" / std::string(to_string(rec.split)) / (rec.id + ".txt");
    const auto it = labels.entries.find(rec.id);
    std::vector<PoseInstance> instances;
    if (it != labels.entries.end()) {
      instances.reserve(it->second.size());
      for (const Detection& det : it->second) instances.push_back(det.instance);
    }
    write_text_file(path, serialize_label_file(instances));
  }
}

namespace {

PredictionMap parse_predictions_impl(std::string_view text, const Manifest* manifest,
                                     int keypoint_count, int predicted_iteration) {
  PredictionMap predictions;
  int expected_k = manifest ? manifest->keypoint_count : keypoint_count;
  std::unordered_map<std::string, const ImageRecord*> index;
  if (manifest) {
    index.reserve(manifest->records.size());
    for (const ImageRecord& rec : manifest->records) index.emplace(rec.id, &rec);
  }
  for_each_line(text, [&](std::string_view line, int line_no) {
    if (line.find_first_not_of(" \t") == std::string_view::npos) return;
    const json rec = parse_json_line(line, line_no);
    if (!rec.is_object()) throw_schema(line_no, "record is not an object");

    if (!rec.contains("image_id") || !rec["image_id"].is_string()) {
      throw_schema(line_no, "missing or non-string image_id");
    }
    const std::string image_id = rec["image_id"].get<std::string>();
    if (manifest && !index.count(image_id)) {
      throw Error(errc::unknown_image,
                  "line " + std::to_string(line_no) + ": unknown image id '" + image_id + "'",
                  line_no);
    }

    if (!rec.contains("confidence") || !rec["confidence"].is_number()) {
      throw_schema(line_no, "missing or non-numeric confidence");
    }
    const double confidence = rec["confidence"].get<double>();
    if (!(confidence >= 0.0 && confidence <= 1.0)) {
      throw_range(line_no, "confidence out of [0,1]");
    }

    if (!rec.contains("bbox") || !rec["bbox"].is_object()) {
      throw_schema(line_no, "missing or non-object bbox");
    }
    const json& jb = rec["bbox"];
    for (const char* key : {"cx", "cy", "w", "h"}) {
      if (!jb.contains(key) || !jb[key].is_number()) {
        throw_schema(line_no, std::string("bbox.") + key + " missing or non-numeric");
      }
    }
    const auto bbox = NormBBox::make(jb["cx"].get<double>(), jb["cy"].get<double>(),
                                     jb["w"].get<double>(), jb["h"].get<double>());
    if (!bbox) throw_range(line_no, "bbox outside the frame or degenerate");

    if (!rec.contains("keypoints") || !rec["keypoints"].is_array()) {
      throw_schema(line_no, "missing or non-array keypoints");
    }
    const json& jk = rec["keypoints"];
    if (expected_k == 0 && !manifest) {
      expected_k = static_cast<int>(jk.size());  // first record fixes K
    }
    if (static_cast<int>(jk.size()) != expected_k) {
      throw_schema(line_no, "keypoint count " + std::to_string(jk.size()) + ", expected " +
                                std::to_string(expected_k));
    }

    PoseInstance inst;
    inst.class_id = 0;
    inst.bbox = *bbox;
    inst.keypoints.reserve(jk.size());
    for (std::size_t k = 0; k < jk.size(); ++k) {
      const json& entry = jk[k];
      if (!entry.is_array() || entry.size() != 3 || !entry[0].is_number() ||
          !entry[1].is_number() || !entry[2].is_number_integer()) {
        throw_schema(line_no,
                     "keypoints[" + std::to_string(k) + "] must be [x, y, v] with integer v");
      }
      const int v = entry[2].get<int>();
      if (v < 0 || v > 2) {
        throw_range(line_no, "keypoints[" + std::to_string(k) + "].v not in {0,1,2}");
      }
      const auto kp = Keypoint::make(entry[0].get<double>(), entry[1].get<double>(), v);
      if (!kp) {
        throw_range(line_no, "keypoints[" + std::to_string(k) + "] coordinates out of [0,1]");
      }
      inst.keypoints.push_back(*kp);
    }
    predictions[image_id].push_back(
        Detection::predicted(std::move(inst), confidence, predicted_iteration));
  });
  return predictions;
}

}  // namespace

PredictionMap parse_predictions(std::string_view text, const Manifest& manifest,
                                int predicted_iteration) {
  return parse_predictions_impl(text, &manifest, 0, predicted_iteration);
}

PredictionMap parse_predictions(std::string_view text, int keypoint_count,
                                int predicted_iteration) {
  return parse_predictions_impl(text, nullptr, keypoint_count, predicted_iteration);
}

std::string write_predictions(const PredictionMap& predictions) {
  std::string out;
  const auto num = [](double v) { return v == 0.0 ? 0.0 : v; };
  for (const auto& [image_id, dets] : predictions) {
    for (const Detection& det : dets) {
      json j;
      j["image_id"] = image_id;
      j["confidence"] = num(det.confidence);
      j["bbox"] = {{"cx", num(det.instance.bbox.cx)},
                   {"cy", num(det.instance.bbox.cy)},
                   {"w", num(det.instance.bbox.w)},
                   {"h", num(det.instance.bbox.h)}};
      json kpts = json::array();
      for (const Keypoint& kp : det.instance.keypoints) {
        kpts.push_back(json::array({num(kp.x), num(kp.y), kp.v}));
      }
      j["keypoints"] = std::move(kpts);
      out += j.dump();
      out += '\n';
    }
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(errc::io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error(errc::io, "failed reading " + path.string());
  return std::move(buf).str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(errc::io, "cannot open " + path.string() + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(errc::io, "failed writing " + path.string());
}

}  // namespace autolabel
