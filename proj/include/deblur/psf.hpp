#pragma once

#include <vector>

namespace deblur {

// Square convolution kernel with odd side 2*radius+1, weights row-major and
// normalized to unit sum (so flat regions pass through unchanged).
struct Psf {
  int radius = 0;
  std::vector<double> weights;

  int side() const { return 2 * radius + 1; }
  double at(int di, int dj) const {
    return weights[std::size_t(di + radius) * side() + (dj + radius)];
  }
  double sum() const;
};

// Sampled isotropic Gaussian: w(i,j) ∝ exp(-(i²+j²)/(2 σ_g²)) on the
// [-radius, radius]² grid, then normalized to sum 1.
Psf gaussian_psf(int radius, double sigma_g);

// Single unit weight (blur with it is the identity).
Psf delta_psf();

}  // namespace deblur
