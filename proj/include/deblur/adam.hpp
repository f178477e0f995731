#pragma once

#include <cstdint>
#include <vector>

#include "deblur/network.hpp"

namespace deblur {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.9;
  double epsilon = 1e-8;
};

// First/second-moment accumulators, laid out parallel to the param list.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t t = 0;
};

// One bias-corrected Adam update from the gradients currently held in the
// params. Initializes (and afterwards requires) state laid out to match.
void adam_step(const std::vector<Param*>& params, const AdamConfig& cfg,
               AdamState& state);

}  // namespace deblur
