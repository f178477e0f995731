#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "deblur/blur.hpp"
#include "deblur/image.hpp"

namespace deblur {

// One evaluation example: ground truth and its noiseless blurred observation.
struct SamplePair {
  Image x_gt;
  Image y0;
};

// Any map from (possibly noisy) observations to image estimates.
using Reconstructor = std::function<Image(const Image&)>;

// Euclidean norm of the pixel-wise difference.
double reconstruction_error(const Image& psi_output, const Image& x_gt);

struct AccuracyResult {
  double eta_hat = 0.0;      // worst noiseless reconstruction error
  double eta_hat_inv = 0.0;  // 1/eta_hat; +infinity when eta_hat == 0
};

// Worst-case noiseless error over the test set (inputs are the clean y0).
AccuracyResult empirical_accuracy(const Reconstructor& psi,
                                  const std::vector<SamplePair>& test_set);

struct PerImageStats {
  double err_noiseless = 0.0;
  double err_noisy = 0.0;
  double noise_norm = 0.0;
  double ratio = 0.0;  // (err_noisy - eta_hat) / noise_norm
  double ssim = 0.0;   // NaN when the image is smaller than the SSIM window
};

struct StabilityReport {
  double eta_hat = 0.0;
  double eta_hat_inv = 0.0;
  double c_hat = 0.0;  // max per-image ratio
  std::vector<PerImageStats> per_image;
  bool delta_stable = false;  // c_hat in [0, 1)
  double sigma = 0.0;
  std::uint64_t seed = 0;
  std::string reconstructor_tag;
};

// Draws one fresh noise realization per test image (seed derived per index,
// so paired comparisons across reconstructors see identical noise) and
// measures the worst noise-amplification ratio beyond eta_hat.
StabilityReport empirical_stability(const Reconstructor& psi,
                                    const std::vector<SamplePair>& test_set,
                                    double sigma, std::uint64_t seed,
                                    const std::string& reconstructor_tag);

struct TheoremBound {
  double bound = 0.0;  // lower bound on the stability constant at noise level delta
  Image e_tilde;       // the adversarial probe realizing it, with norm delta
};

// Adversarial lower bound for eta-accurate reconstructors: the probe is the
// retained spectral mode with the smallest |transfer|, scaled to norm delta,
// and the bound is |K^+ e~|/|e~| - 2*eta_hat/delta.
TheoremBound theorem1_bound(const BlurOperator& op, double eta_hat, double delta);

// Mean local structural similarity, 11x11 Gaussian window (sigma 1.5),
// K1=0.01, K2=0.03, dynamic range 1; interior (valid) region only. Requires
// both dimensions >= 11.
double ssim(const Image& x, const Image& y);

// Shortest exact decimal representation ("%.17g") for report files.
std::string format_double(double v);

// One row per image: id,err_noiseless,err_noisy,noise_norm,ratio,ssim.
void write_report_csv(const std::string& path, const StabilityReport& report);

// Summary (eta_hat, c_hat, delta_stable, sigma, seed, tag, conventions).
void write_report_json(const std::string& path, const StabilityReport& report);

}  // namespace deblur
