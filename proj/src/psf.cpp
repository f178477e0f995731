#include "deblur/psf.hpp"

#include <cmath>

#include "deblur/errors.hpp"

namespace deblur {

double Psf::sum() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

Psf gaussian_psf(int radius, double sigma_g) {
  if (radius < 0) throw InvalidParameter("gaussian_psf: radius must be >= 0");
  if (!(sigma_g > 0.0)) throw InvalidParameter("gaussian_psf: sigma_g must be > 0");
  Psf psf;
  psf.radius = radius;
  const int side = psf.side();
  psf.weights.resize(std::size_t(side) * side);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    for (int j = -radius; j <= radius; ++j) {
      double w = std::exp(-(double(i) * i + double(j) * j) / (2.0 * sigma_g * sigma_g));
      psf.weights[std::size_t(i + radius) * side + (j + radius)] = w;
      total += w;
    }
  }
  for (double& w : psf.weights) w /= total;
  return psf;
}

Psf delta_psf() {
  Psf psf;
  psf.radius = 0;
  psf.weights = {1.0};
  return psf;
}

}  // namespace deblur
