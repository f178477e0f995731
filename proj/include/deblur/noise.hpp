#pragma once

#include <cstdint>

#include "deblur/image.hpp"

namespace deblur {

// Additive i.i.d. Gaussian noise. Identical (sigma, seed, shape) reproduces
// the identical realization.
struct NoiseSpec {
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

struct NoisyImage {
  Image image;
  double realized_norm = 0.0;  // ‖e‖₂ of the draw actually added
};

NoisyImage add_noise(const Image& y, const NoiseSpec& spec);

}  // namespace deblur
