#pragma once

#include "deblur/dft.hpp"
#include "deblur/image.hpp"
#include "deblur/psf.hpp"

namespace deblur {

enum class Boundary { Periodic };

// Circulant blur operator: periodic convolution with a fixed PSF on a fixed
// grid. The 2-D DFT diagonalizes it, so the cached transfer function gives
// exact K, Kᵀ and (thresholded) K†.
class BlurOperator {
 public:
  // Relative spectral threshold for the pseudo-inverse. Gaussian transfer
  // functions never vanish exactly but underflow near Nyquist.
  static constexpr double kDefaultTau = 1e-10;

  BlurOperator(Psf psf, int height, int width,
               Boundary boundary = Boundary::Periodic);

  int height() const { return height_; }
  int width() const { return width_; }
  const Psf& psf() const { return psf_; }
  Boundary boundary() const { return boundary_; }

  // DFT eigenvalues of the circulant embedding, row-major h×w.
  const Spectrum& transfer() const { return transfer_; }
  double max_transfer_magnitude() const { return max_mag_; }  // = ‖K‖₂
  double min_transfer_magnitude() const { return min_mag_; }

  Image apply(const Image& x) const;          // K x
  Image apply_adjoint(const Image& y) const;  // Kᵀ y
  Image apply_pseudo_inverse(const Image& y, double tau = kDefaultTau) const;

 private:
  void check_shape(const Image& img) const;

  Psf psf_;
  Boundary boundary_;
  int height_ = 0;
  int width_ = 0;
  Spectrum transfer_;
  double max_mag_ = 0.0;
  double min_mag_ = 0.0;
};

}  // namespace deblur
