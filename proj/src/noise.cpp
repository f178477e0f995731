#include "deblur/noise.hpp"

#include <cmath>
#include <random>

#include "deblur/errors.hpp"
#include "deblur/rng.hpp"

namespace deblur {

NoisyImage add_noise(const Image& y, const NoiseSpec& spec) {
  if (spec.sigma < 0.0) throw InvalidParameter("add_noise: sigma must be >= 0");
  NoisyImage out{y, 0.0};
  if (spec.sigma == 0.0) return out;
  auto rng = make_rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, spec.sigma);
  double sq = 0.0;
  for (double& v : out.image.pixels()) {
    double e = gauss(rng);
    v += e;
    sq += e * e;
  }
  out.realized_norm = std::sqrt(sq);
  return out;
}

}  // namespace deblur
