#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>

#include "deblur/blur.hpp"
#include "deblur/dft.hpp"
#include "deblur/errors.hpp"
#include "deblur/image.hpp"
#include "deblur/noise.hpp"
#include "deblur/pgm_io.hpp"
#include "deblur/psf.hpp"
#include "deblur/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace deblur;
namespace fs = std::filesystem;

namespace {
fs::path temp_file(const char* name) {
  return fs::temp_directory_path() / name;
}
}  // namespace

TEST_CASE("gaussian_psf matches direct formula evaluation") {
  const double sigma = 1.3;
  Psf psf = gaussian_psf(5, sigma);
  CHECK(psf.side() == 11);
  CHECK(psf.sum() == doctest::Approx(1.0).epsilon(1e-12));

  // Term-by-term: w(i,j)/w(0,0) = exp(-(i²+j²)/(2σ²)), independent of the
  // normalizer.
  for (int i = -5; i <= 5; ++i)
    for (int j = -5; j <= 5; ++j) {
      double expected = std::exp(-(i * i + j * j) / (2.0 * sigma * sigma));
      CHECK(psf.at(i, j) / psf.at(0, 0) == doctest::Approx(expected).epsilon(1e-12));
    }

  // center/edge ratio for radius 1
  Psf small = gaussian_psf(1, sigma);
  CHECK(small.at(0, 0) / small.at(0, 1) ==
        doctest::Approx(std::exp(0.5 / (sigma * sigma))).epsilon(1e-12));

  for (double w : psf.weights) CHECK(w >= 0.0);
  for (int i = -5; i <= 5; ++i)
    for (int j = -5; j <= 5; ++j) CHECK(psf.at(i, j) == psf.at(-i, -j));

  Psf id = gaussian_psf(0, 2.0);
  CHECK(id.weights.size() == 1);
  CHECK(id.weights[0] == doctest::Approx(1.0));

  CHECK_THROWS_AS(gaussian_psf(5, 0.0), InvalidParameter);
  CHECK_THROWS_AS(gaussian_psf(5, -1.0), InvalidParameter);
  CHECK_THROWS_AS(gaussian_psf(-1, 1.0), InvalidParameter);
}

TEST_CASE("blur equals brute-force circular convolution") {
  for (unsigned seed : {1u, 2u, 3u}) {
    Image x = oracle::random_image(8, 8, seed);
    Psf psf = gaussian_psf(1, 0.8);
    BlurOperator op(psf, 8, 8);
    CHECK(oracle::max_abs_diff(op.apply(x), oracle::circular_conv(x, psf)) < 1e-10);
  }
  // wider kernels and non-square grids
  for (int r : {2, 3}) {
    Psf psf = gaussian_psf(r, 1.3);
    Image x = oracle::random_image(16, 12, 40u + r);
    BlurOperator op(psf, 16, 12);
    CHECK(oracle::max_abs_diff(op.apply(x), oracle::circular_conv(x, psf)) < 1e-10);
  }
  // kernel wider than the grid still matches (offsets wrap repeatedly)
  {
    Psf psf = gaussian_psf(5, 2.0);
    Image x = oracle::random_image(7, 7, 99);
    BlurOperator op(psf, 7, 7);
    CHECK(oracle::max_abs_diff(op.apply(x), oracle::circular_conv(x, psf)) < 1e-10);
  }
}

TEST_CASE("blur basics: constants, identity PSF, linearity, DC preservation") {
  BlurOperator op(gaussian_psf(5, 1.3), 64, 64);

  Image c(64, 64, 0.37);
  CHECK(oracle::max_abs_diff(op.apply(c), c) < 1e-12);

  BlurOperator idop(delta_psf(), 16, 16);
  Image x = oracle::random_image(16, 16, 7);
  CHECK(oracle::max_abs_diff(idop.apply(x), x) < 1e-12);

  Image x1 = oracle::random_image(64, 64, 11);
  Image x2 = oracle::random_image(64, 64, 12);
  Image lhs = op.apply(2.5 * x1 - x2);
  Image rhs = 2.5 * op.apply(x1) - op.apply(x2);
  CHECK(oracle::max_abs_diff(lhs, rhs) < 1e-10);

  CHECK(op.apply(x1).mean() == doctest::Approx(x1.mean()).epsilon(1e-10));

  CHECK_THROWS_AS(op.apply(Image(32, 32, 0.0)), DimensionError);
}

TEST_CASE("adjoint identity and symmetry") {
  BlurOperator op(gaussian_psf(2, 1.3), 8, 8);
  std::mt19937_64 rng(123);
  for (int trial = 0; trial < 100; ++trial) {
    Image x = oracle::random_image(8, 8, unsigned(rng()), -1.0, 1.0);
    Image y = oracle::random_image(8, 8, unsigned(rng()), -1.0, 1.0);
    double lhs = op.apply(x).dot(y);
    double rhs = x.dot(op.apply_adjoint(y));
    CHECK(std::abs(lhs - rhs) / (x.norm() * y.norm()) < 1e-10);
  }
  // symmetric kernel → Kᵀ = K
  Image y = oracle::random_image(8, 8, 5);
  CHECK(oracle::max_abs_diff(op.apply(y), op.apply_adjoint(y)) < 1e-12);

  BlurOperator idop(delta_psf(), 8, 8);
  CHECK(oracle::max_abs_diff(idop.apply_adjoint(y), y) < 1e-12);
}

TEST_CASE("pseudo-inverse: round trip, K K† K, worst-mode gain") {
  BlurOperator op(gaussian_psf(1, 0.8), 16, 16);

  Image y = oracle::random_image(16, 16, 21);
  BlurOperator idop(delta_psf(), 16, 16);
  CHECK(oracle::max_abs_diff(idop.apply_pseudo_inverse(y, 0.0), y) < 1e-12);

  Image x = oracle::random_image(16, 16, 22);
  Image rec = op.apply_pseudo_inverse(op.apply(x), 1e-10);
  CHECK(oracle::max_abs_diff(rec, x) < 1e-8);

  // K K† K = K (no nulled modes at this size/psf, tau=0)
  Image kx = op.apply(x);
  Image kkk = op.apply(op.apply_pseudo_inverse(kx, 0.0));
  CHECK(oracle::max_abs_diff(kkk, kx) < 1e-8);

  // Mode aligned with the smallest retained transfer value: gain is exactly
  // 1/|t_min|. Build the conjugate-symmetric cosine mode at the argmin.
  BlurOperator big(gaussian_psf(5, 1.3), 32, 32);
  double tmin = 1e300;
  int umin = 0, vmin = 0;
  for (int u = 0; u < 32; ++u)
    for (int v = 0; v < 32; ++v) {
      double m = std::abs(big.transfer()[std::size_t(u) * 32 + v]);
      if (m > 1e-10 * big.max_transfer_magnitude() && m < tmin) {
        tmin = m;
        umin = u;
        vmin = v;
      }
    }
  Image e(32, 32);
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 32; ++c)
      e.at(r, c) = std::cos(2.0 * M_PI * (double(umin) * r + double(vmin) * c) / 32.0);
  double gain = big.apply_pseudo_inverse(e, 1e-10).norm() / e.norm();
  CHECK(gain == doctest::Approx(1.0 / tmin).epsilon(1e-9));

  CHECK_THROWS_AS(op.apply_pseudo_inverse(y, -1.0), InvalidParameter);
}

TEST_CASE("transfer function bookkeeping") {
  BlurOperator op(gaussian_psf(5, 1.3), 64, 64);
  CHECK(op.transfer().size() == 64u * 64u);
  // DC gain is the kernel sum = 1; it is also the max for a Gaussian.
  CHECK(std::abs(op.transfer()[0]) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(op.max_transfer_magnitude() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(op.min_transfer_magnitude() > 0.0);
  CHECK(op.min_transfer_magnitude() < 1e-5);
}

TEST_CASE("additive noise: determinism, zero sigma, norm statistics") {
  Image y = oracle::random_image(16, 16, 31);

  NoisyImage a = add_noise(y, {0.0, 42});
  CHECK(oracle::max_abs_diff(a.image, y) == 0.0);
  CHECK(a.realized_norm == 0.0);

  NoisyImage b1 = add_noise(y, {0.05, 42});
  NoisyImage b2 = add_noise(y, {0.05, 42});
  CHECK(oracle::max_abs_diff(b1.image, b2.image) == 0.0);
  CHECK(b1.realized_norm == b2.realized_norm);
  CHECK(b1.realized_norm > 0.0);

  NoisyImage c = add_noise(y, {0.05, 43});
  CHECK(oracle::max_abs_diff(b1.image, c.image) > 0.0);

  // ‖e‖ concentrates near σ√n: chi-distribution mean ≈ σ√n(1 − 1/(4n)).
  const int h = 64, w = 64;
  const double sigma = 0.025;
  const double n = double(h) * w;
  Image base(h, w, 0.5);
  double mean_norm = 0.0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t)
    mean_norm += add_noise(base, {sigma, std::uint64_t(1000 + t)}).realized_norm;
  mean_norm /= trials;
  double expected = sigma * std::sqrt(n) * (1.0 - 1.0 / (4.0 * n));
  CHECK(std::abs(mean_norm - expected) / expected < 0.01);

  CHECK_THROWS_AS(add_noise(y, {-0.1, 0}), InvalidParameter);
}

TEST_CASE("derived seeds decorrelate substreams") {
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
  CHECK(derive_seed(7, 3) == derive_seed(7, 3));
}

TEST_CASE("dft round trip") {
  Image x = oracle::random_image(13, 9, 77, -2.0, 2.0);
  Spectrum s = dft::forward(x);
  Image back = dft::inverse_real(s, 13, 9);
  CHECK(oracle::max_abs_diff(back, x) < 1e-12);

  // imaginary residual of the inverse of a real image's spectrum
  Spectrum full = dft::inverse(s, 13, 9);
  double imag_max = 0.0;
  for (const auto& z : full) imag_max = std::max(imag_max, std::abs(z.imag()));
  CHECK(imag_max < 1e-10);

  // Parseval: ‖x‖² = ‖x̂‖²/n
  double spec_sq = 0.0;
  for (const auto& z : s) spec_sq += std::norm(z);
  CHECK(spec_sq / (13.0 * 9.0) == doctest::Approx(x.norm() * x.norm()).epsilon(1e-12));
}

TEST_CASE("pgm round trips") {
  fs::path p8 = temp_file("deblur_test_8.pgm");
  fs::path p16 = temp_file("deblur_test_16.pgm");
  Image img = oracle::random_image(9, 13, 55);

  write_pgm(p8, img, 8);
  Image r8 = read_pnm(p8);
  CHECK(r8.height() == 9);
  CHECK(r8.width() == 13);
  CHECK(oracle::max_abs_diff(r8, img) <= 0.5 / 255.0 + 1e-12);

  write_pgm(p16, img, 16);
  Image r16 = read_pnm(p16);
  CHECK(oracle::max_abs_diff(r16, img) <= 0.5 / 65535.0 + 1e-12);

  // out-of-range values are clamped before quantization
  Image wild(2, 2);
  wild.at(0, 0) = -0.5;
  wild.at(0, 1) = 1.5;
  wild.at(1, 0) = 0.25;
  wild.at(1, 1) = 1.0;
  write_pgm(p8, wild, 8);
  Image rw = read_pnm(p8);
  CHECK(rw.at(0, 0) == 0.0);
  CHECK(rw.at(0, 1) == 1.0);
  CHECK(rw.at(1, 1) == 1.0);

  fs::remove(p8);
  fs::remove(p16);
}

TEST_CASE("ppm luma reduction uses ITU-R 601 weights") {
  // hand-built 1×2 P6 file: pure red, pure green (8-bit)
  fs::path p = temp_file("deblur_test_rgb.ppm");
  {
    std::ofstream out(p, std::ios::binary);
    out << "P6\n2 1\n255\n";
    unsigned char px[6] = {255, 0, 0, 0, 255, 0};
    out.write(reinterpret_cast<char*>(px), 6);
  }
  Image img = read_pnm(p);
  CHECK(img.at(0, 0) == doctest::Approx(0.299).epsilon(1e-12));
  CHECK(img.at(0, 1) == doctest::Approx(0.587).epsilon(1e-12));
  fs::remove(p);
}

TEST_CASE("f64 container is lossless and little-endian") {
  fs::path p = temp_file("deblur_test.f64");
  Image img = oracle::random_image(5, 7, 66, -3.0, 3.0);
  img.at(0, 0) = 1.0;  // known bit pattern to check on disk
  write_f64(p, img);
  Image back = read_f64(p);
  CHECK(back.height() == 5);
  CHECK(back.width() == 7);
  CHECK(oracle::max_abs_diff(back, img) == 0.0);

  std::ifstream in(p, std::ios::binary);
  unsigned char hdr[8];
  in.read(reinterpret_cast<char*>(hdr), 8);
  CHECK(hdr[0] == 5);  // u32 LE height
  CHECK(hdr[1] == 0);
  CHECK(hdr[4] == 7);  // u32 LE width
  unsigned char d[8];
  in.read(reinterpret_cast<char*>(d), 8);
  // IEEE-754 double 1.0 little-endian: 00 00 00 00 00 00 f0 3f
  CHECK(d[6] == 0xf0);
  CHECK(d[7] == 0x3f);
  fs::remove(p);
}

TEST_CASE("pnm reader rejects malformed input") {
  fs::path p = temp_file("deblur_test_bad.pgm");
  {
    std::ofstream out(p, std::ios::binary);
    out << "P5\n4 4\n255\n";
    out.put(char(1));  // far too few bytes
  }
  CHECK_THROWS_AS(read_pnm(p), IoError);
  {
    std::ofstream out(p, std::ios::binary);
    out << "P7\n4 4\n255\n";
  }
  CHECK_THROWS_AS(read_pnm(p), IoError);
  CHECK_THROWS_AS(read_pnm(temp_file("deblur_missing_file.pgm")), IoError);
  fs::remove(p);
}
