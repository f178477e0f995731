#pragma once

#include <cstddef>
#include <vector>

namespace deblur {

// Single-channel image: row-major doubles. Intensities are nominally in
// [0,1]; intermediates (residuals, noise, spectra) may leave that range.
class Image {
 public:
  Image() = default;
  Image(int height, int width, double fill = 0.0);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return pixels_.size(); }
  bool empty() const { return pixels_.empty(); }

  double& at(int r, int c) { return pixels_[std::size_t(r) * width_ + c]; }
  double at(int r, int c) const { return pixels_[std::size_t(r) * width_ + c]; }

  double* data() { return pixels_.data(); }
  const double* data() const { return pixels_.data(); }
  std::vector<double>& pixels() { return pixels_; }
  const std::vector<double>& pixels() const { return pixels_; }

  bool same_shape(const Image& o) const {
    return height_ == o.height_ && width_ == o.width_;
  }

  double norm() const;  // Euclidean over all pixels
  double dot(const Image& o) const;
  double min_value() const;
  double max_value() const;
  double mean() const;
  bool all_finite() const;
  Image clamped(double lo, double hi) const;

  Image& operator+=(const Image& o);
  Image& operator-=(const Image& o);
  Image& operator*=(double s);

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> pixels_;
};

Image operator+(Image a, const Image& b);
Image operator-(Image a, const Image& b);
Image operator*(double s, Image a);

}  // namespace deblur
