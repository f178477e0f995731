#include "deblur/metrics.hpp"

#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "deblur/errors.hpp"
#include "deblur/noise.hpp"
#include "deblur/rng.hpp"

namespace deblur {

double reconstruction_error(const Image& psi_output, const Image& x_gt) {
  if (!psi_output.same_shape(x_gt))
    throw DimensionError("reconstruction_error: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < psi_output.size(); ++i) {
    const double d = psi_output.data()[i] - x_gt.data()[i];
    s += d * d;
  }
  return std::sqrt(s);
}

AccuracyResult empirical_accuracy(const Reconstructor& psi,
                                  const std::vector<SamplePair>& test_set) {
  if (test_set.empty())
    throw InvalidParameter("empirical_accuracy: empty test set");
  AccuracyResult r;
  for (const SamplePair& s : test_set)
    r.eta_hat = std::max(r.eta_hat, reconstruction_error(psi(s.y0), s.x_gt));
  r.eta_hat_inv = r.eta_hat > 0.0 ? 1.0 / r.eta_hat
                                  : std::numeric_limits<double>::infinity();
  return r;
}

StabilityReport empirical_stability(const Reconstructor& psi,
                                    const std::vector<SamplePair>& test_set,
                                    double sigma, std::uint64_t seed,
                                    const std::string& reconstructor_tag) {
  if (test_set.empty())
    throw InvalidParameter("empirical_stability: empty test set");
  if (sigma <= 0.0)
    throw InvalidParameter("empirical_stability: sigma must be positive");

  StabilityReport report;
  report.sigma = sigma;
  report.seed = seed;
  report.reconstructor_tag = reconstructor_tag;
  report.per_image.resize(test_set.size());

  // The supremum of the noiseless errors comes first: every ratio below is
  // measured relative to it.
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    report.per_image[i].err_noiseless =
        reconstruction_error(psi(test_set[i].y0), test_set[i].x_gt);
    report.eta_hat = std::max(report.eta_hat, report.per_image[i].err_noiseless);
  }
  report.eta_hat_inv = report.eta_hat > 0.0
                           ? 1.0 / report.eta_hat
                           : std::numeric_limits<double>::infinity();

  report.c_hat = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    const SamplePair& s = test_set[i];
    PerImageStats& row = report.per_image[i];
    NoisyImage noisy = add_noise(s.y0, {sigma, derive_seed(seed, i)});
    Image rec = psi(noisy.image);
    row.err_noisy = reconstruction_error(rec, s.x_gt);
    row.noise_norm = noisy.realized_norm;
    row.ratio = (row.err_noisy - report.eta_hat) / row.noise_norm;
    row.ssim = (std::min(s.x_gt.height(), s.x_gt.width()) >= 11)
                   ? ssim(rec, s.x_gt)
                   : std::numeric_limits<double>::quiet_NaN();
    report.c_hat = std::max(report.c_hat, row.ratio);
  }
  report.delta_stable = report.c_hat >= 0.0 && report.c_hat < 1.0;
  return report;
}

TheoremBound theorem1_bound(const BlurOperator& op, double eta_hat,
                            double delta) {
  if (delta <= 0.0) throw InvalidParameter("theorem1_bound: delta must be positive");
  if (eta_hat < 0.0)
    throw InvalidParameter("theorem1_bound: eta_hat must be non-negative");

  const int h = op.height(), w = op.width();
  const Spectrum& t = op.transfer();
  const double cutoff = BlurOperator::kDefaultTau * op.max_transfer_magnitude();

  // Worst retained mode: smallest |transfer| the pseudo-inverse still divides.
  std::size_t worst = 0;
  double worst_mag = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double m = std::abs(t[i]);
    if (m > cutoff && m < worst_mag) {
      worst_mag = m;
      worst = i;
    }
  }

  const int p = int(worst) / w, q = int(worst) % w;
  Image mode(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      mode.at(i, j) = std::cos(2.0 * M_PI * (double(p) * i / h + double(q) * j / w));

  TheoremBound out;
  out.e_tilde = (delta / mode.norm()) * mode;
  const double amplification =
      op.apply_pseudo_inverse(out.e_tilde).norm() / out.e_tilde.norm();
  out.bound = amplification - 2.0 * eta_hat / delta;
  return out;
}

namespace {

// Valid-region filtering with an 11-tap Gaussian, rows then columns.
void gauss_filter_valid(const std::vector<double>& in, int h, int w,
                        const double* win, std::vector<double>& out) {
  const int k = 11, vh = h - k + 1, vw = w - k + 1;
  std::vector<double> rows(std::size_t(h) * vw);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < vw; ++j) {
      double s = 0.0;
      for (int d = 0; d < k; ++d) s += win[d] * in[std::size_t(i) * w + j + d];
      rows[std::size_t(i) * vw + j] = s;
    }
  out.assign(std::size_t(vh) * vw, 0.0);
  for (int i = 0; i < vh; ++i)
    for (int j = 0; j < vw; ++j) {
      double s = 0.0;
      for (int d = 0; d < k; ++d) s += win[d] * rows[std::size_t(i + d) * vw + j];
      out[std::size_t(i) * vw + j] = s;
    }
}

}  // namespace

double ssim(const Image& x, const Image& y) {
  if (!x.same_shape(y)) throw DimensionError("ssim: shape mismatch");
  const int h = x.height(), w = x.width(), k = 11;
  if (h < k || w < k)
    throw DimensionError("ssim: image smaller than the 11x11 window");

  double win[11];
  double wsum = 0.0;
  for (int d = 0; d < k; ++d) {
    const double u = double(d - 5) / 1.5;
    win[d] = std::exp(-0.5 * u * u);
    wsum += win[d];
  }
  for (double& v : win) v /= wsum;

  const std::size_t n = x.size();
  std::vector<double> xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    xx[i] = x.data()[i] * x.data()[i];
    yy[i] = y.data()[i] * y.data()[i];
    xy[i] = x.data()[i] * y.data()[i];
  }
  std::vector<double> xv(x.data(), x.data() + n), yv(y.data(), y.data() + n);

  std::vector<double> mx, my, mxx, myy, mxy;
  gauss_filter_valid(xv, h, w, win, mx);
  gauss_filter_valid(yv, h, w, win, my);
  gauss_filter_valid(xx, h, w, win, mxx);
  gauss_filter_valid(yy, h, w, win, myy);
  gauss_filter_valid(xy, h, w, win, mxy);

  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;  // dynamic range 1
  double total = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = mxx[i] - mx[i] * mx[i];
    const double vy = myy[i] - my[i] * my[i];
    const double cov = mxy[i] - mx[i] * my[i];
    const double num = (2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2);
    const double den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2);
    total += num / den;
  }
  return total / double(mx.size());
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_report_csv(const std::string& path, const StabilityReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("write_report_csv: cannot open " + path);
  out << "id,err_noiseless,err_noisy,noise_norm,ratio,ssim\n";
  for (std::size_t i = 0; i < report.per_image.size(); ++i) {
    const PerImageStats& r = report.per_image[i];
    out << i << ',' << format_double(r.err_noiseless) << ','
        << format_double(r.err_noisy) << ',' << format_double(r.noise_norm)
        << ',' << format_double(r.ratio) << ',' << format_double(r.ssim) << '\n';
  }
  if (!out) throw IoError("write_report_csv: write failed for " + path);
}

void write_report_json(const std::string& path, const StabilityReport& report) {
  nlohmann::json j;
  j["reconstructor_tag"] = report.reconstructor_tag;
  j["eta_hat"] = report.eta_hat;
  if (std::isfinite(report.eta_hat_inv))
    j["eta_hat_inv"] = report.eta_hat_inv;
  else
    j["eta_hat_inv"] = "+inf";
  j["c_hat"] = report.c_hat;
  j["delta_stable"] = report.delta_stable;
  j["sigma"] = report.sigma;
  j["seed"] = report.seed;
  j["n_images"] = report.per_image.size();
  j["conventions"] = {
      {"tikhonov",
       "objective 0.5*||Kx-y||^2 + lambda*||x||^2; normal equations "
       "(K^T K + 2*lambda*I) x = K^T y"},
      {"ratio", "(err_noisy - eta_hat) / noise_norm"},
  };
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("write_report_json: cannot open " + path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write_report_json: write failed for " + path);
}

}  // namespace deblur
