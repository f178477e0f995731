#include "deblur/pgm_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "deblur/binio.hpp"
#include "deblur/errors.hpp"

namespace deblur {

namespace {

using binio::read_exact;

// PNM header token: skips whitespace and '#' comment lines.
int next_header_int(std::istream& in, const char* what) {
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (!std::isspace(c)) {
      break;
    }
    c = in.get();
  }
  if (c == EOF) throw IoError(std::string("pnm: truncated header reading ") + what);
  std::string tok;
  while (c != EOF && !std::isspace(c)) {
    tok.push_back(char(c));
    c = in.get();
  }
  try {
    std::size_t pos = 0;
    int v = std::stoi(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw IoError(std::string("pnm: bad header token for ") + what + ": '" + tok + "'");
  }
}

}  // namespace

Image read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("pnm: cannot open " + path.string());
  char magic[2];
  read_exact(in, magic, 2, "magic");
  const bool color = (magic[0] == 'P' && magic[1] == '6');
  if (!color && !(magic[0] == 'P' && magic[1] == '5'))
    throw IoError("pnm: unsupported magic in " + path.string());
  int w = next_header_int(in, "width");
  int h = next_header_int(in, "height");
  int maxval = next_header_int(in, "maxval");
  if (w <= 0 || h <= 0) throw IoError("pnm: non-positive dimensions in " + path.string());
  if (maxval <= 0 || maxval > 65535)
    throw IoError("pnm: unsupported maxval in " + path.string());

  const int bytes_per_sample = maxval > 255 ? 2 : 1;
  const int samples_per_pixel = color ? 3 : 1;
  const std::size_t n = std::size_t(h) * w;
  std::vector<unsigned char> raw(n * samples_per_pixel * bytes_per_sample);
  read_exact(in, reinterpret_cast<char*>(raw.data()), raw.size(), "pixel data");

  Image img(h, w);
  const double scale = 1.0 / double(maxval);
  const unsigned char* p = raw.data();
  auto sample = [&]() {
    std::uint32_t v = *p++;
    if (bytes_per_sample == 2) v = (v << 8) | *p++;  // big-endian samples
    return double(v) * scale;
  };
  for (std::size_t i = 0; i < n; ++i) {
    if (color) {
      double r = sample(), g = sample(), b = sample();
      img.pixels()[i] = 0.299 * r + 0.587 * g + 0.114 * b;
    } else {
      img.pixels()[i] = sample();
    }
  }
  return img;
}

void write_pgm(const std::filesystem::path& path, const Image& img, int bit_depth) {
  if (img.empty()) throw InvalidParameter("write_pgm: empty image");
  if (bit_depth != 8 && bit_depth != 16)
    throw InvalidParameter("write_pgm: bit depth must be 8 or 16");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("pgm: cannot open " + path.string() + " for writing");
  const int maxval = bit_depth == 8 ? 255 : 65535;
  out << "P5\n" << img.width() << " " << img.height() << "\n" << maxval << "\n";
  for (double v : img.pixels()) {
    double c = std::clamp(v, 0.0, 1.0);
    auto q = std::uint32_t(std::lround(c * maxval));
    if (bit_depth == 16) out.put(char((q >> 8) & 0xff));
    out.put(char(q & 0xff));
  }
  if (!out) throw IoError("pgm: write failed for " + path.string());
}

Image read_f64(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("f64: cannot open " + path.string());
  std::uint32_t h = binio::get_u32(in, "height");
  std::uint32_t w = binio::get_u32(in, "width");
  if (h == 0 || w == 0) throw IoError("f64: zero dimension in " + path.string());
  Image img(static_cast<int>(h), static_cast<int>(w));
  for (double& v : img.pixels()) v = binio::get_f64(in, "f64 data");
  return img;
}

void write_f64(const std::filesystem::path& path, const Image& img) {
  if (img.empty()) throw InvalidParameter("write_f64: empty image");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("f64: cannot open " + path.string() + " for writing");
  binio::put_u32(out, std::uint32_t(img.height()));
  binio::put_u32(out, std::uint32_t(img.width()));
  for (double v : img.pixels()) binio::put_f64(out, v);
  if (!out) throw IoError("f64: write failed for " + path.string());
}

}  // namespace deblur
