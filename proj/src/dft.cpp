#include "deblur/dft.hpp"

#include <fftw3.h>

#include <map>
#include <utility>

#include "deblur/errors.hpp"

namespace deblur::dft {

namespace {

struct Plans {
  fftw_complex* in = nullptr;
  fftw_complex* out = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
  std::size_t n = 0;
};

Plans& plans_for(int h, int w) {
  if (h <= 0 || w <= 0) throw DimensionError("dft: dimensions must be positive");
  // Plans live for the process; FFTW_ESTIMATE keeps planning deterministic.
  static std::map<std::pair<int, int>, Plans> cache;
  auto [it, inserted] = cache.try_emplace({h, w});
  Plans& p = it->second;
  if (inserted) {
    p.n = std::size_t(h) * w;
    p.in = fftw_alloc_complex(p.n);
    p.out = fftw_alloc_complex(p.n);
    p.fwd = fftw_plan_dft_2d(h, w, p.in, p.out, FFTW_FORWARD, FFTW_ESTIMATE);
    p.bwd = fftw_plan_dft_2d(h, w, p.in, p.out, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  return p;
}

Spectrum run(Plans& p, fftw_plan plan, double scale) {
  fftw_execute(plan);
  Spectrum out(p.n);
  for (std::size_t i = 0; i < p.n; ++i)
    out[i] = {p.out[i][0] * scale, p.out[i][1] * scale};
  return out;
}

}  // namespace

Spectrum forward(const Image& img) {
  Plans& p = plans_for(img.height(), img.width());
  const double* src = img.data();
  for (std::size_t i = 0; i < p.n; ++i) {
    p.in[i][0] = src[i];
    p.in[i][1] = 0.0;
  }
  return run(p, p.fwd, 1.0);
}

Spectrum forward(const Spectrum& in, int height, int width) {
  Plans& p = plans_for(height, width);
  if (in.size() != p.n) throw DimensionError("dft: spectrum size mismatch");
  for (std::size_t i = 0; i < p.n; ++i) {
    p.in[i][0] = in[i].real();
    p.in[i][1] = in[i].imag();
  }
  return run(p, p.fwd, 1.0);
}

Spectrum inverse(const Spectrum& in, int height, int width) {
  Plans& p = plans_for(height, width);
  if (in.size() != p.n) throw DimensionError("dft: spectrum size mismatch");
  for (std::size_t i = 0; i < p.n; ++i) {
    p.in[i][0] = in[i].real();
    p.in[i][1] = in[i].imag();
  }
  return run(p, p.bwd, 1.0 / double(p.n));
}

Image inverse_real(const Spectrum& in, int height, int width) {
  Spectrum full = inverse(in, height, width);
  Image out(height, width);
  double* dst = out.data();
  for (std::size_t i = 0; i < full.size(); ++i) dst[i] = full[i].real();
  return out;
}

}  // namespace deblur::dft
