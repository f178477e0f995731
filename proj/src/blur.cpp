#include "deblur/blur.hpp"

#include <algorithm>
#include <cmath>

#include "deblur/errors.hpp"

namespace deblur {

BlurOperator::BlurOperator(Psf psf, int height, int width, Boundary boundary)
    : psf_(std::move(psf)), boundary_(boundary), height_(height), width_(width) {
  if (height <= 0 || width <= 0)
    throw DimensionError("BlurOperator: grid dimensions must be positive");
  if (psf_.weights.size() != std::size_t(psf_.side()) * psf_.side())
    throw InvalidParameter("BlurOperator: PSF weight count does not match radius");

  // Center-shifted periodic embedding of the PSF; offsets beyond the grid
  // wrap and accumulate, which keeps the circulant structure exact even for
  // kernels wider than the image.
  Image kernel(height_, width_, 0.0);
  const int r = psf_.radius;
  for (int i = -r; i <= r; ++i) {
    for (int j = -r; j <= r; ++j) {
      int row = ((i % height_) + height_) % height_;
      int col = ((j % width_) + width_) % width_;
      kernel.at(row, col) += psf_.at(i, j);
    }
  }
  transfer_ = dft::forward(kernel);

  max_mag_ = 0.0;
  min_mag_ = std::abs(transfer_[0]);
  for (const auto& t : transfer_) {
    double m = std::abs(t);
    max_mag_ = std::max(max_mag_, m);
    min_mag_ = std::min(min_mag_, m);
  }
}

void BlurOperator::check_shape(const Image& img) const {
  if (img.height() != height_ || img.width() != width_)
    throw DimensionError("BlurOperator: image shape does not match operator grid");
}

Image BlurOperator::apply(const Image& x) const {
  check_shape(x);
  Spectrum xs = dft::forward(x);
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] *= transfer_[i];
  return dft::inverse_real(xs, height_, width_);
}

Image BlurOperator::apply_adjoint(const Image& y) const {
  check_shape(y);
  Spectrum ys = dft::forward(y);
  for (std::size_t i = 0; i < ys.size(); ++i) ys[i] *= std::conj(transfer_[i]);
  return dft::inverse_real(ys, height_, width_);
}

Image BlurOperator::apply_pseudo_inverse(const Image& y, double tau) const {
  check_shape(y);
  if (tau < 0.0) throw InvalidParameter("pseudo-inverse: tau must be >= 0");
  const double cutoff = tau * max_mag_;
  Spectrum ys = dft::forward(y);
  for (std::size_t i = 0; i < ys.size(); ++i) {
    double mag = std::abs(transfer_[i]);
    if (mag > cutoff && mag > 0.0)
      ys[i] /= transfer_[i];
    else
      ys[i] = 0.0;
  }
  return dft::inverse_real(ys, height_, width_);
}

}  // namespace deblur
