#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "deblur/blur.hpp"
#include "deblur/image.hpp"
#include "deblur/psf.hpp"
#include "deblur/tikhonov.hpp"

namespace deblur {

// Pre-processor φ applied to the observation before reconstruction.
// Immutable after construction; apply() on distinct images is safe to run
// concurrently.
class Stabilizer {
 public:
  virtual ~Stabilizer() = default;
  virtual Image apply(const Image& y) const = 0;
  virtual std::string name() const = 0;
};

class IdentityStabilizer final : public Stabilizer {
 public:
  Image apply(const Image& y) const override { return y; }
  std::string name() const override { return "identity"; }
};

// Circular convolution with a normalized low-pass kernel. Linear, so
// φ(Kx+e) = φ(Kx) + φ(e) holds to rounding.
class FilterStabilizer final : public Stabilizer {
 public:
  FilterStabilizer(Psf psf_f, int height, int width);

  Image apply(const Image& y) const override;
  std::string name() const override { return "filter"; }

  // the filter as a circulant operator; exposes its spectral gains
  const BlurOperator& filter_op() const { return filter_op_; }

 private:
  BlurOperator filter_op_;
};

enum class IterativeMethod { Cgls, Landweber };

// M iterations of the Tikhonov solver from a fixed starting iterate.
class IterativeStabilizer final : public Stabilizer {
 public:
  struct Options {
    IterativeMethod method = IterativeMethod::Cgls;
    double lambda = 1e-2;
    int iterations = 50;
    // Landweber only. unset → 1/(M·(‖K‖²+2λ)), which certifies a linear-part
    // gain < 1 for every M (the classical 1/(‖K‖²+2λ) contracts per step but
    // its M-composed gain on the observation exceeds 1).
    std::optional<double> step;
    std::optional<Image> x0;  // unset → zero image
  };

  IterativeStabilizer(const BlurOperator& op, Options options);

  Image apply(const Image& y) const override;
  std::string name() const override;

  const Options& options() const { return options_; }
  double landweber_step() const { return step_; }  // resolved value

 private:
  const BlurOperator* op_;
  Options options_;
  double step_ = 0.0;
};

// Empirical Definition-6 gain: max over sampled (x, e) of
// ‖φ(Kx+e) − φ(Kx)‖/‖e‖, followed by power-iteration refinement around the
// best sample (e ← δ̄·normalized response, δ̄ = σ√n). For affine φ the
// refinement converges to the exact linear-part operator norm; for general
// φ the result stays a valid empirical lower bound.
double estimate_stabilizer_gain(const Stabilizer& phi, const BlurOperator& op,
                                int samples, double sigma, std::uint64_t seed,
                                int power_iterations = 5000);

}  // namespace deblur
