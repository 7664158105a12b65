#include <functional>
#include <string>
#include <vector>

#include "autolabel/errors.hpp"
#include "autolabel/label_io.hpp"
#include "autolabel/types.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace autolabel;
using testsupport::TempDir;
using testsupport::TestRng;

namespace {

errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return errc::io;
}

const char* kManifestText =
    R"({"id": "a", "width_px": 640, "height_px": 480, "split": "train"})"
    "\n"
    R"({"id": "b", "width_px": 320, "height_px": 240, "split": "val"})"
    "\n";

}  // namespace

TEST_SUITE("label_io") {

TEST_CASE("label line parses into an instance") {
  const auto parsed = parse_label_file("0 0.5 0.5 0.2 0.3 0.4 0.45 2\n", 1);
  REQUIRE(parsed.size() == 1);
  CHECK(parsed[0].class_id == 0);
  CHECK(parsed[0].bbox.cx == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(parsed[0].bbox.cy == doctest::Approx(0.5).epsilon(1e-12));
  // box construction round-trips through the corners; see the geometry tests
  CHECK(parsed[0].bbox.w == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(parsed[0].bbox.h == doctest::Approx(0.3).epsilon(1e-12));
  REQUIRE(parsed[0].keypoints.size() == 1);
  CHECK(parsed[0].keypoints[0].x == 0.4);
  CHECK(parsed[0].keypoints[0].y == 0.45);
  CHECK(parsed[0].keypoints[0].v == 2);
}

TEST_CASE("label parsing accepts blank lines, CRLF, and a missing final newline") {
  const auto parsed = parse_label_file("\n0 0.5 0.5 0.2 0.3 0.4 0.45 2\r\n\n"
                                       "1 0.4 0.4 0.1 0.1 0.2 0.2 1",
                                       1);
  REQUIRE(parsed.size() == 2);
  CHECK(parsed[1].class_id == 1);
  CHECK(parse_label_file("", 1).empty());
  CHECK(parse_label_file("\n\n", 1).empty());
}

TEST_CASE("label parsing zeroes the coordinates of unlabeled points") {
  const auto parsed = parse_label_file("0 0.5 0.5 0.2 0.3 0.4 0.45 0\n", 1);
  REQUIRE(parsed.size() == 1);
  CHECK(parsed[0].keypoints[0] == Keypoint{0.0, 0.0, 0});
}

TEST_CASE("label parsing clamps a slightly overhanging box") {
  const auto parsed = parse_label_file("0 0.05 0.5 0.2 0.2 0.1 0.5 2\n", 1);
  REQUIRE(parsed.size() == 1);
  CHECK(parsed[0].bbox == *NormBBox::make(0.05, 0.5, 0.2, 0.2));
}

TEST_CASE("label parsing reports precise errors") {
  SUBCASE("token count") {
    try {
      parse_label_file("0 0.5 0.5 0.2\n", 1);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == errc::token_count);
      CHECK(e.line() == 1);
      CHECK(std::string(e.what()).find("token count 4, expected 8") != std::string::npos);
    }
  }
  SUBCASE("error line numbers count from one") {
    try {
      parse_label_file("0 0.5 0.5 0.2 0.3 0.4 0.45 2\n0 0.5 0.5\n", 1);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.line() == 2);
    }
  }
  SUBCASE("non-numeric token names the field") {
    try {
      parse_label_file("0 x 0.5 0.2 0.3 0.4 0.45 2\n", 1);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == errc::non_numeric);
      CHECK(std::string(e.what()).find("bbox.cx") != std::string::npos);
      CHECK(e.detail() == 1);
    }
  }
  SUBCASE("fractional visibility is not an integer") {
    CHECK(code_of([] { parse_label_file("0 0.5 0.5 0.2 0.3 0.4 0.45 1.5\n", 1); }) ==
          errc::non_numeric);
  }
  SUBCASE("value range violations") {
    CHECK(code_of([] { parse_label_file("-1 0.5 0.5 0.2 0.3 0.4 0.45 2\n", 1); }) ==
          errc::value_range);
    CHECK(code_of([] { parse_label_file("0 0.5 0.5 0.2 0.3 0.4 0.45 5\n", 1); }) ==
          errc::value_range);
    CHECK(code_of([] { parse_label_file("0 0.5 0.5 0.2 0.3 1.4 0.45 2\n", 1); }) ==
          errc::value_range);
    CHECK(code_of([] { parse_label_file("0 5.5 0.5 0.2 0.3 0.4 0.45 2\n", 1); }) ==
          errc::value_range);
    CHECK(code_of([] { parse_label_file("0 0.5 0.5 nan 0.3 0.4 0.45 2\n", 1); }) ==
          errc::value_range);
  }
}

TEST_CASE("serialization uses six fractional digits and one line per instance") {
  PoseInstance inst;
  inst.class_id = 0;
  inst.bbox = *NormBBox::make(0.5, 0.5, 0.2, 0.3);
  inst.keypoints.push_back(*Keypoint::make(0.4, 0.45, 2));
  const std::vector<PoseInstance> instances = {inst};
  CHECK(serialize_label_file(instances) ==
        "0 0.500000 0.500000 0.200000 0.300000 0.400000 0.450000 2\n");
  CHECK(serialize_label_file({}) == "");
}

TEST_CASE("serialization never prints a negative zero") {
  PoseInstance inst;
  inst.class_id = 0;
  inst.bbox = *NormBBox::make(0.5, 0.5, 0.2, 0.3);
  inst.keypoints.push_back(Keypoint{-0.0, 0.0, 2});
  const std::vector<PoseInstance> instances = {inst};
  const std::string text = serialize_label_file(instances);
  CHECK(text.find("-0.000000") == std::string::npos);
}

TEST_CASE("quantized labels round-trip bit-exactly") {
  TestRng rng(303);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<PoseInstance> instances;
    const int n = rng.uniform_int(0, 4);
    for (int i = 0; i < n; ++i) {
      instances.push_back(testsupport::random_quantized_instance(rng, 5));
    }
    const std::string first = serialize_label_file(instances);
    const std::vector<PoseInstance> reparsed = parse_label_file(first, 5);
    CHECK(serialize_label_file(reparsed) == first);
  }
}

TEST_CASE("manifest parsing reads records and attaches the keypoint count") {
  const Manifest manifest = read_manifest(kManifestText, 7);
  CHECK(manifest.keypoint_count == 7);
  REQUIRE(manifest.records.size() == 2);
  CHECK(manifest.records[0] == ImageRecord{"a", 640, 480, Split::train});
  CHECK(manifest.records[1] == ImageRecord{"b", 320, 240, Split::val});
}

TEST_CASE("manifest parsing tolerates blank lines and unknown keys") {
  const Manifest manifest = read_manifest(
      "\n"
      R"({"id": "a", "width_px": 1, "height_px": 1, "split": "train", "camera": "left"})"
      "\n\n");
  CHECK(manifest.records.size() == 1);
}

TEST_CASE("manifest parsing rejects malformed records") {
  CHECK(code_of([] { read_manifest("not json\n"); }) == errc::schema);
  CHECK(code_of([] { read_manifest("[1, 2]\n"); }) == errc::schema);
  CHECK(code_of([] {
          read_manifest(R"({"width_px": 1, "height_px": 1, "split": "train"})" "\n");
        }) == errc::schema);
  CHECK(code_of([] {
          read_manifest(R"({"id": "a", "width_px": 0, "height_px": 1, "split": "train"})" "\n");
        }) == errc::schema);
  CHECK(code_of([] {
          read_manifest(
              R"({"id": "a", "width_px": 1.5, "height_px": 1, "split": "train"})" "\n");
        }) == errc::schema);
  CHECK(code_of([] {
          read_manifest(R"({"id": "a", "width_px": 1, "height_px": 1, "split": "test"})" "\n");
        }) == errc::schema);
  CHECK(code_of([] {
          read_manifest(R"({"id": "a/b", "width_px": 1, "height_px": 1, "split": "train"})" "\n");
        }) == errc::schema);
  CHECK(code_of([] {
          read_manifest(R"({"id": "..", "width_px": 1, "height_px": 1, "split": "val"})" "\n");
        }) == errc::schema);
}

TEST_CASE("manifest parsing rejects duplicate ids") {
  const std::string text =
      R"({"id": "a", "width_px": 1, "height_px": 1, "split": "train"})" "\n"
      R"({"id": "a", "width_px": 2, "height_px": 2, "split": "val"})" "\n";
  CHECK(code_of([&] { read_manifest(text); }) == errc::duplicate_id);
}

TEST_CASE("manifest writing round-trips") {
  const Manifest manifest = read_manifest(kManifestText, 3);
  const Manifest again = read_manifest(write_manifest(manifest), 3);
  CHECK(again.records == manifest.records);
}

TEST_CASE("dataset files round-trip through a directory") {
  TempDir dir;
  const Manifest manifest = testsupport::make_manifest(2, 1, 2);
  LabelSet labels;
  TestRng rng(404);
  labels.entries[manifest.records[0].id] = {
      Detection::original(testsupport::random_quantized_instance(rng, 2)),
      Detection::original(testsupport::random_quantized_instance(rng, 2))};
  labels.entries[manifest.records[2].id] = {
      Detection::original(testsupport::random_quantized_instance(rng, 2))};

  testsupport::write_dataset(dir.path(), manifest, labels);
  const Manifest loaded_manifest = load_manifest(dir.path() / "manifest.jsonl", 2);
  CHECK(loaded_manifest.records == manifest.records);

  const LabelSet loaded = load_dataset(dir.path(), loaded_manifest);
  CHECK(loaded.iteration == 0);
  REQUIRE(loaded.entries.size() == manifest.records.size());
  CHECK(loaded.entries.at(manifest.records[0].id).size() == 2);
  CHECK(loaded.entries.at(manifest.records[1].id).empty());
  CHECK(loaded.entries.at(manifest.records[2].id).size() == 1);
  for (const auto& [id, dets] : loaded.entries) {
    for (const Detection& det : dets) {
      CHECK(det.confidence == 1.0);
      CHECK(det.source.is_original());
    }
  }
  CHECK(loaded.entries.at(manifest.records[0].id)[0].instance ==
        labels.entries.at(manifest.records[0].id)[0].instance);
}

TEST_CASE("dataset loading treats a missing label file as empty") {
  TempDir dir;
  const Manifest manifest = testsupport::make_manifest(1, 0, 2);
  write_text_file(dir.path() / "manifest.jsonl", write_manifest(manifest));
  const LabelSet loaded = load_dataset(dir.path(), manifest);
  CHECK(loaded.entries.at(manifest.records[0].id).empty());
}

TEST_CASE("dataset loading annotates parse errors with the file path") {
  TempDir dir;
  const Manifest manifest = testsupport::make_manifest(1, 0, 2);
  write_text_file(dir.path() / "manifest.jsonl", write_manifest(manifest));
  write_text_file(dir.path() / "labels" / "train" / (manifest.records[0].id + ".txt"),
                  "0 0.5\n");
  try {
    load_dataset(dir.path(), manifest);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == errc::token_count);
    CHECK(std::string(e.what()).find(manifest.records[0].id + ".txt") != std::string::npos);
  }
}

TEST_CASE("prediction parsing groups records by image in input order") {
  const Manifest manifest = read_manifest(kManifestText, 1);
  const std::string text =
      R"({"image_id": "b", "confidence": 0.9, "bbox": {"cx": 0.5, "cy": 0.5, "w": 0.2, "h": 0.2}, "keypoints": [[0.5, 0.5, 2]]})" "\n"
      R"({"image_id": "a", "confidence": 0.4, "bbox": {"cx": 0.3, "cy": 0.3, "w": 0.1, "h": 0.1}, "keypoints": [[0.3, 0.3, 1]]})" "\n"
      R"({"image_id": "b", "confidence": 0.95, "bbox": {"cx": 0.7, "cy": 0.7, "w": 0.2, "h": 0.2}, "keypoints": [[0.7, 0.7, 0]]})" "\n";
  const PredictionMap preds = parse_predictions(text, manifest, 3);
  REQUIRE(preds.size() == 2);
  REQUIRE(preds.at("b").size() == 2);
  CHECK(preds.at("b")[0].confidence == 0.9);
  CHECK(preds.at("b")[1].confidence == 0.95);
  CHECK(preds.at("a")[0].confidence == 0.4);
  for (const auto& [id, dets] : preds) {
    for (const Detection& det : dets) {
      CHECK(det.source.iteration == 3);
      CHECK(det.instance.class_id == 0);
    }
  }
  CHECK(preds.at("b")[1].instance.keypoints[0] == Keypoint{0.0, 0.0, 0});
}

TEST_CASE("prediction parsing validates against the manifest") {
  const Manifest manifest = read_manifest(kManifestText, 1);
  const auto line = [](const std::string& id, const std::string& conf,
                       const std::string& kpts) {
    return R"({"image_id": ")" + id + R"(", "confidence": )" + conf +
           R"(, "bbox": {"cx": 0.5, "cy": 0.5, "w": 0.2, "h": 0.2}, "keypoints": )" + kpts +
           "}\n";
  };
  CHECK(code_of([&] { parse_predictions(line("ghost", "0.9", "[[0.5, 0.5, 2]]"), manifest, 1); }) ==
        errc::unknown_image);
  CHECK(code_of([&] { parse_predictions(line("a", "1.5", "[[0.5, 0.5, 2]]"), manifest, 1); }) ==
        errc::value_range);
  CHECK(code_of([&] { parse_predictions(line("a", "\"high\"", "[[0.5, 0.5, 2]]"), manifest, 1); }) ==
        errc::schema);
  CHECK(code_of([&] {
          parse_predictions(line("a", "0.9", "[[0.5, 0.5, 2], [0.5, 0.5, 2]]"), manifest, 1);
        }) == errc::schema);
  CHECK(code_of([&] { parse_predictions(line("a", "0.9", "[[0.5, 0.5, 2.5]]"), manifest, 1); }) ==
        errc::schema);
  CHECK(code_of([&] { parse_predictions(line("a", "0.9", "[[0.5, 0.5, 7]]"), manifest, 1); }) ==
        errc::value_range);
  CHECK(code_of([&] { parse_predictions(line("a", "0.9", "[[1.5, 0.5, 2]]"), manifest, 1); }) ==
        errc::value_range);
  CHECK(code_of([&] { parse_predictions("[]\n", manifest, 1); }) == errc::schema);
  CHECK(code_of([&] { parse_predictions("{\n", manifest, 1); }) == errc::schema);
}

TEST_CASE("manifest-free prediction parsing infers the keypoint count") {
  const std::string text =
      R"({"image_id": "anything", "confidence": 0.9, "bbox": {"cx": 0.5, "cy": 0.5, "w": 0.2, "h": 0.2}, "keypoints": [[0.5, 0.5, 2], [0.4, 0.4, 1]]})" "\n";
  const PredictionMap preds = parse_predictions(text, 0, 1);
  REQUIRE(preds.count("anything") == 1);
  CHECK(preds.at("anything")[0].instance.keypoints.size() == 2);
  // an explicit count still binds
  CHECK(code_of([&] { parse_predictions(text, 3, 1); }) == errc::schema);
}

TEST_CASE("prediction writing round-trips") {
  TestRng rng(505);
  PredictionMap preds;
  for (int i = 0; i < 3; ++i) {
    std::vector<Detection> dets;
    for (int d = 0; d <= i; ++d) {
      PoseInstance inst = testsupport::random_instance(rng, 4);
      inst.class_id = 0;
      dets.push_back(Detection::predicted(std::move(inst), rng.uniform(0.0, 1.0), 1));
    }
    preds.emplace("img" + std::to_string(i), std::move(dets));
  }
  const PredictionMap reparsed = parse_predictions(write_predictions(preds), 4, 1);
  CHECK(reparsed == preds);
}

TEST_CASE("text file helpers create parents and report missing files") {
  TempDir dir;
  const auto path = dir.path() / "deep" / "nested" / "file.txt";
  write_text_file(path, "payload");
  CHECK(read_text_file(path) == "payload");
  CHECK(code_of([&] { read_text_file(dir.path() / "absent.txt"); }) == errc::io);
}

}  // TEST_SUITE
