#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "deblur/adam.hpp"
#include "deblur/image.hpp"
#include "deblur/network.hpp"

namespace deblur {

// One supervised example: network input (typically a blurred, noisy
// observation) and regression target (the clean image).
struct TrainPair {
  Image input;
  Image target;
};

struct TrainConfig {
  int epochs = 30;
  int batch_size = 8;
  // Standard deviation of Gaussian noise freshly injected into every input
  // each epoch, before any preprocessing transform. Zero disables injection.
  double injection_sigma = 0.0;
  std::uint64_t seed = 0;
  AdamConfig adam;
};

// Optional hook applied to each (possibly noise-injected) input before it is
// fed to the network, e.g. a stabilizer.
using InputTransform = std::function<Image(const Image&)>;

struct TrainResult {
  // Mean training loss per epoch; length equals config.epochs.
  std::vector<double> loss_history;
};

// Minibatch Adam training on mean-squared-error. Deterministic for a fixed
// seed: per-epoch shuffles and injected noise derive from it. Throws
// DivergenceError if an epoch's mean loss is not finite.
TrainResult train(NetworkModel& model, const std::vector<TrainPair>& data,
                  const TrainConfig& config,
                  const InputTransform& preprocess = nullptr);

// Writes "epoch,mean_loss" rows, one per entry, with full double precision.
void write_loss_csv(const std::string& path,
                    const std::vector<double>& loss_history);

}  // namespace deblur
