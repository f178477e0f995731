#include "deblur/image.hpp"

#include <algorithm>
#include <cmath>

#include "deblur/errors.hpp"

namespace deblur {

Image::Image(int height, int width, double fill)
    : height_(height), width_(width) {
  if (height <= 0 || width <= 0)
    throw DimensionError("image dimensions must be positive");
  pixels_.assign(std::size_t(height) * width, fill);
}

double Image::norm() const {
  double s = 0.0;
  for (double v : pixels_) s += v * v;
  return std::sqrt(s);
}

double Image::dot(const Image& o) const {
  if (!same_shape(o)) throw DimensionError("dot: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < pixels_.size(); ++i) s += pixels_[i] * o.pixels_[i];
  return s;
}

double Image::min_value() const {
  return *std::min_element(pixels_.begin(), pixels_.end());
}

double Image::max_value() const {
  return *std::max_element(pixels_.begin(), pixels_.end());
}

double Image::mean() const {
  double s = 0.0;
  for (double v : pixels_) s += v;
  return pixels_.empty() ? 0.0 : s / double(pixels_.size());
}

bool Image::all_finite() const {
  for (double v : pixels_)
    if (!std::isfinite(v)) return false;
  return true;
}

Image Image::clamped(double lo, double hi) const {
  Image out = *this;
  for (double& v : out.pixels_) v = std::clamp(v, lo, hi);
  return out;
}

Image& Image::operator+=(const Image& o) {
  if (!same_shape(o)) throw DimensionError("+=: shape mismatch");
  for (std::size_t i = 0; i < pixels_.size(); ++i) pixels_[i] += o.pixels_[i];
  return *this;
}

Image& Image::operator-=(const Image& o) {
  if (!same_shape(o)) throw DimensionError("-=: shape mismatch");
  for (std::size_t i = 0; i < pixels_.size(); ++i) pixels_[i] -= o.pixels_[i];
  return *this;
}

Image& Image::operator*=(double s) {
  for (double& v : pixels_) v *= s;
  return *this;
}

Image operator+(Image a, const Image& b) { a += b; return a; }
Image operator-(Image a, const Image& b) { a -= b; return a; }
Image operator*(double s, Image a) { a *= s; return a; }

}  // namespace deblur
