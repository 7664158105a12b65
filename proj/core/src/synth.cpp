#include "autolabel/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "autolabel/errors.hpp"
#include "autolabel/geometry.hpp"
#include "json.hpp"

namespace autolabel {

namespace {

// splitmix64 finalizer
std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

enum : std::uint64_t {
  kStreamDetection = 1,
  kStreamFalsePositiveCount = 2,
  kStreamFalsePositiveBox = 3,
};

// Deterministic counter stream keyed by (seed, image id, instance index,
// stream kind). Platform-independent: no library distributions involved.
class KeyedRng {
 public:
  KeyedRng(std::uint64_t seed, std::string_view image_id, std::uint64_t instance_index,
           std::uint64_t stream) {
    state_ = mix64(seed);
    state_ = mix64(state_ ^ fnv1a(image_id));
    state_ = mix64(state_ ^ (instance_index * 0xd1342543de82ef95ULL));
    state_ = mix64(state_ ^ (stream * 0x2545f4914f6cdd1dULL));
  }

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // keep log() away from 0
    const double u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = mag * std::sin(angle);
    has_spare_ = true;
    return mag * std::cos(angle);
  }

  int poisson(double lambda) {
    const double limit = std::exp(-lambda);
    int k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

 private:
  std::uint64_t state_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Confidence decays from the ceiling with the box jitter magnitude.
constexpr double kConfSlope = 5.0;

}  // namespace

NoiseProfile profile_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(errc::config, std::string("invalid noise profile: ") + e.what());
  }
  if (!j.is_object()) throw Error(errc::config, "noise profile must be a JSON object");

  NoiseProfile profile;
  for (const auto& [key, value] : j.items()) {
    if (key == "coord_sigma") {
      if (!value.is_number() || value.get<double>() < 0.0) {
        throw Error(errc::config, "coord_sigma must be a non-negative number");
      }
      profile.coord_sigma = value.get<double>();
    } else if (key == "fp_rate") {
      if (!value.is_number() || value.get<double>() < 0.0) {
        throw Error(errc::config, "fp_rate must be a non-negative number");
      }
      profile.fp_rate = value.get<double>();
    } else if (key == "drop_rate") {
      if (!value.is_number() || value.get<double>() < 0.0 || value.get<double>() > 1.0) {
        throw Error(errc::config, "drop_rate must be in [0,1]");
      }
      profile.drop_rate = value.get<double>();
    } else if (key == "conf_floor") {
      if (!value.is_number() || value.get<double>() < 0.0 || value.get<double>() > 1.0) {
        throw Error(errc::config, "conf_floor must be in [0,1]");
      }
      profile.conf_floor = value.get<double>();
    } else if (key == "conf_ceil") {
      if (!value.is_number() || value.get<double>() < 0.0 || value.get<double>() > 1.0) {
        throw Error(errc::config, "conf_ceil must be in [0,1]");
      }
      profile.conf_ceil = value.get<double>();
    } else if (key == "seed") {
      if (!value.is_number_unsigned()) {
        throw Error(errc::config, "seed must be a non-negative integer");
      }
      profile.seed = value.get<std::uint64_t>();
    } else {
      throw Error(errc::config, "unknown noise profile key '" + key + "'");
    }
  }
  if (profile.conf_floor > profile.conf_ceil) {
    throw Error(errc::config, "conf_floor exceeds conf_ceil");
  }
  return profile;
}

PredictionMap synth_predict(const LabelSet& gts, const NoiseProfile& profile,
                            const Manifest& manifest) {
  PredictionMap out;
  const int predicted_iteration = gts.iteration + 1;
  for (const ImageRecord& rec : manifest.records) {
    std::vector<Detection> dets;
    const auto it = gts.entries.find(rec.id);
    const std::size_t n_gt = it != gts.entries.end() ? it->second.size() : 0;

    for (std::size_t i = 0; i < n_gt; ++i) {
      const PoseInstance& gt = it->second[i].instance;
      KeyedRng rng(profile.seed, rec.id, i, kStreamDetection);
      if (rng.uniform() < profile.drop_rate) continue;

      PoseInstance inst = gt;
      double jitter_norm = 0.0;
      if (profile.coord_sigma > 0.0) {
        double delta[4];
        for (double& d : delta) {
          d = profile.coord_sigma * rng.normal();
          jitter_norm += d * d;
        }
        jitter_norm = std::sqrt(jitter_norm);
        const auto bbox = NormBBox::make(gt.bbox.cx + delta[0], gt.bbox.cy + delta[1],
                                         gt.bbox.w + delta[2], gt.bbox.h + delta[3]);
        if (!bbox) continue;  // jittered out of the frame counts as a miss
        inst.bbox = *bbox;
        for (Keypoint& kp : inst.keypoints) {
          if (kp.v <= 0) continue;
          kp.x = clamp01(kp.x + profile.coord_sigma * rng.normal());
          kp.y = clamp01(kp.y + profile.coord_sigma * rng.normal());
        }
      }
      const double confidence = std::clamp(profile.conf_ceil - kConfSlope * jitter_norm,
                                           profile.conf_floor, profile.conf_ceil);
      dets.push_back(Detection::predicted(std::move(inst), confidence, predicted_iteration));
    }

    if (profile.fp_rate > 0.0) {
      KeyedRng count_rng(profile.seed, rec.id, 0, kStreamFalsePositiveCount);
      const int n_fp = count_rng.poisson(profile.fp_rate);
      for (int f = 0; f < n_fp; ++f) {
        KeyedRng rng(profile.seed, rec.id, static_cast<std::uint64_t>(f),
                     kStreamFalsePositiveBox);
        const double cx = rng.uniform();
        const double cy = rng.uniform();
        const double w = 0.05 + 0.25 * rng.uniform();
        const double h = 0.05 + 0.25 * rng.uniform();
        const auto bbox = NormBBox::make(cx, cy, w, h);
        if (!bbox) continue;  // cannot happen for these ranges; defensive
        PoseInstance inst;
        inst.class_id = 0;
        inst.bbox = *bbox;
        inst.keypoints.reserve(manifest.keypoint_count);
        const CornerBox fp_area{clamp01(bbox->cx - bbox->w / 2.0),
                                clamp01(bbox->cy - bbox->h / 2.0),
                                clamp01(bbox->cx + bbox->w / 2.0),
                                clamp01(bbox->cy + bbox->h / 2.0)};
        for (int k = 0; k < manifest.keypoint_count; ++k) {
          const double x = fp_area.x1 + rng.uniform() * (fp_area.x2 - fp_area.x1);
          const double y = fp_area.y1 + rng.uniform() * (fp_area.y2 - fp_area.y1);
          inst.keypoints.push_back(Keypoint{clamp01(x), clamp01(y), 2});
        }
        const double confidence =
            profile.conf_floor + (profile.conf_ceil - profile.conf_floor) * rng.uniform();
        dets.push_back(Detection::predicted(std::move(inst), confidence, predicted_iteration));
      }
    }

    if (!dets.empty()) out.emplace(rec.id, std::move(dets));
  }
  return out;
}

}  // namespace autolabel
