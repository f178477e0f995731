#include "deblur/stabilizer.hpp"

#include <cmath>
#include <random>

#include "deblur/errors.hpp"
#include "deblur/noise.hpp"
#include "deblur/rng.hpp"

namespace deblur {

FilterStabilizer::FilterStabilizer(Psf psf_f, int height, int width)
    : filter_op_(std::move(psf_f), height, width) {
  if (std::abs(filter_op_.psf().sum() - 1.0) > 1e-9)
    throw InvalidParameter("FilterStabilizer: kernel must be normalized");
}

Image FilterStabilizer::apply(const Image& y) const {
  return filter_op_.apply(y);
}

IterativeStabilizer::IterativeStabilizer(const BlurOperator& op, Options options)
    : op_(&op), options_(std::move(options)) {
  if (options_.iterations < 1)
    throw InvalidParameter("IterativeStabilizer: iterations must be >= 1");
  TikhonovProblem p(*op_, options_.lambda);  // validates lambda
  if (options_.method == IterativeMethod::Landweber) {
    double norm_sq = op_->max_transfer_magnitude() * op_->max_transfer_magnitude();
    step_ = options_.step
                ? *options_.step
                : 1.0 / (double(options_.iterations) * (norm_sq + 2.0 * options_.lambda));
    if (!(step_ > 0.0) || step_ >= landweber_step_limit(p))
      throw InvalidParameter("IterativeStabilizer: step outside contraction range");
  }
  if (options_.x0 &&
      (options_.x0->height() != op_->height() || options_.x0->width() != op_->width()))
    throw DimensionError("IterativeStabilizer: x0 shape mismatch");
}

Image IterativeStabilizer::apply(const Image& y) const {
  TikhonovProblem p(*op_, options_.lambda);
  Image x0 = options_.x0 ? *options_.x0 : Image(op_->height(), op_->width(), 0.0);
  if (options_.method == IterativeMethod::Cgls)
    return cgls_solve(p, y, options_.iterations, x0);
  return landweber_solve(p, y, options_.iterations, step_, x0);
}

std::string IterativeStabilizer::name() const {
  return options_.method == IterativeMethod::Cgls ? "cgls" : "landweber";
}

double estimate_stabilizer_gain(const Stabilizer& phi, const BlurOperator& op,
                                int samples, double sigma, std::uint64_t seed,
                                int power_iterations) {
  if (samples < 1) throw InvalidParameter("estimate_stabilizer_gain: samples >= 1");
  if (!(sigma > 0.0)) throw InvalidParameter("estimate_stabilizer_gain: sigma > 0");

  const int h = op.height(), w = op.width();
  const std::size_t n = std::size_t(h) * w;

  double best = 0.0;
  Image best_base(h, w, 0.0);
  Image best_noise(h, w, 0.0);

  for (int s = 0; s < samples; ++s) {
    auto rng = make_rng(derive_seed(seed, std::uint64_t(s)));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Image x(h, w);
    for (double& v : x.pixels()) v = u(rng);
    Image y = op.apply(x);
    NoisyImage noisy = add_noise(y, {sigma, derive_seed(seed, 1'000'000 + s)});
    if (noisy.realized_norm == 0.0) continue;
    Image diff = phi.apply(noisy.image) - phi.apply(y);
    double ratio = diff.norm() / noisy.realized_norm;
    if (ratio > best) {
      best = ratio;
      best_base = y;
      best_noise = noisy.image - y;
    }
  }

  // Power refinement: repeatedly renormalize the response to the mean noise
  // magnitude and feed it back. Picks out the top singular direction of the
  // linear part when φ is affine.
  const double target_norm = sigma * std::sqrt(double(n));
  Image base_out = phi.apply(best_base);
  Image e = best_noise;
  double prev = 0.0;
  for (int it = 0; it < power_iterations; ++it) {
    double en = e.norm();
    if (en == 0.0) break;
    Image g = phi.apply(best_base + e) - base_out;
    double gn = g.norm();
    double ratio = gn / en;
    if (ratio > best) best = ratio;
    if (gn == 0.0) break;
    if (std::abs(ratio - prev) <= 1e-13 * std::max(1.0, ratio)) break;
    prev = ratio;
    e = (target_norm / gn) * g;
  }
  return best;
}

}  // namespace deblur
