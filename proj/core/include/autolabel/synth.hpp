#pragma once

#include <cstdint>
#include <string_view>

#include "autolabel/types.hpp"

namespace autolabel {

struct NoiseProfile {
  double coord_sigma = 0.02;  // stddev of per-coordinate Gaussian jitter
  double fp_rate = 0.3;       // expected false positives per image (Poisson)
  double drop_rate = 0.1;     // probability a ground-truth instance is missed
  double conf_floor = 0.3;
  double conf_ceil = 0.99;
  std::uint64_t seed = 0;
};

// JSON object with the NoiseProfile fields; all optional, unknown keys
// rejected.
NoiseProfile profile_from_json(std::string_view text);

// Deterministic stand-in for a trained detector. Every ground-truth instance
// is re-detected with Gaussian coordinate jitter (clamped into frame) or
// dropped with probability drop_rate; its confidence decays from conf_ceil
// with the jitter magnitude. Each image also receives Poisson(fp_rate)
// uniform false-positive boxes. All randomness is a counter stream keyed by
// (seed, image id, instance index), so the output is a pure function of the
// inputs and independent of evaluation order.
PredictionMap synth_predict(const LabelSet& gts, const NoiseProfile& profile,
                            const Manifest& manifest);

}  // namespace autolabel
