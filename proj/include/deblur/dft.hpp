#pragma once

#include <complex>
#include <vector>

#include "deblur/image.hpp"

namespace deblur {

// Row-major h*w complex spectrum.
using Spectrum = std::vector<std::complex<double>>;

// 2-D DFT helpers on top of FFTW. Plans use FFTW_ESTIMATE (pure heuristic,
// no runtime measurement) and are cached per shape, so transforms are
// bit-reproducible run to run. Single-threaded; not safe for concurrent use.
namespace dft {

Spectrum forward(const Image& img);
Spectrum forward(const Spectrum& in, int height, int width);

// Normalized inverse (divides by h*w).
Spectrum inverse(const Spectrum& in, int height, int width);

// Real part of the normalized inverse.
Image inverse_real(const Spectrum& in, int height, int width);

}  // namespace dft

}  // namespace deblur
