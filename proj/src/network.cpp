#include "deblur/network.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "deblur/binio.hpp"
#include "deblur/errors.hpp"
#include "deblur/rng.hpp"

namespace deblur {

namespace {
constexpr char kCheckpointMagic[8] = {'D', 'B', 'N', 'C', '0', '0', '0', '1'};
}

// ---------------------------------------------------------------- tensors

Tensor Tensor::zeros(std::vector<int> dims) {
  Tensor t;
  t.shape = std::move(dims);
  std::size_t n = 1;
  for (int d : t.shape) n *= std::size_t(d);
  t.v.assign(n, 0.0);
  return t;
}

void Param::zero_grad() { std::fill(grad.v.begin(), grad.v.end(), 0.0); }

FeatureMap::FeatureMap(int c, int h, int w, double fill)
    : channels(c), height(h), width(w) {
  v.assign(std::size_t(c) * h * w, fill);
}

FeatureMap FeatureMap::from_image(const Image& img) {
  FeatureMap fm(1, img.height(), img.width());
  std::memcpy(fm.v.data(), img.data(), sizeof(double) * img.size());
  return fm;
}

Image FeatureMap::to_image() const {
  if (channels != 1) throw DimensionError("FeatureMap::to_image: need 1 channel");
  Image img(height, width);
  std::memcpy(img.data(), v.data(), sizeof(double) * v.size());
  return img;
}

// ------------------------------------------------------------- conv layer

ConvLayer::ConvLayer(std::string name, int in_channels, int out_channels,
                     int kernel_size, Activation activation, bool batchnorm,
                     Padding padding)
    : name_(std::move(name)),
      in_ch_(in_channels),
      out_ch_(out_channels),
      k_(kernel_size),
      act_(activation),
      pad_(padding) {
  if (in_ch_ < 1 || out_ch_ < 1)
    throw InvalidParameter("ConvLayer: channel counts must be >= 1");
  if (k_ < 1 || k_ % 2 == 0)
    throw InvalidParameter("ConvLayer: kernel size must be odd and positive");
  kernel_.name = name_ + ".weight";
  kernel_.value = Tensor::zeros({out_ch_, in_ch_, k_, k_});
  kernel_.grad = Tensor::zeros({out_ch_, in_ch_, k_, k_});
  bias_.name = name_ + ".bias";
  bias_.value = Tensor::zeros({out_ch_});
  bias_.grad = Tensor::zeros({out_ch_});
  if (batchnorm) {
    BatchNormState bn;
    bn.gamma.name = name_ + ".bn_gamma";
    bn.gamma.value = Tensor::zeros({out_ch_});
    bn.gamma.grad = Tensor::zeros({out_ch_});
    std::fill(bn.gamma.value.v.begin(), bn.gamma.value.v.end(), 1.0);
    bn.beta.name = name_ + ".bn_beta";
    bn.beta.value = Tensor::zeros({out_ch_});
    bn.beta.grad = Tensor::zeros({out_ch_});
    bn.running_mean.assign(out_ch_, 0.0);
    bn.running_var.assign(out_ch_, 1.0);
    bn_ = std::move(bn);
  }
}

void ConvLayer::init_he(std::uint64_t seed) {
  auto rng = make_rng(seed);
  double stddev = std::sqrt(2.0 / (double(in_ch_) * k_ * k_));
  std::normal_distribution<double> gauss(0.0, stddev);
  for (double& w : kernel_.value.v) w = gauss(rng);
  std::fill(bias_.value.v.begin(), bias_.value.v.end(), 0.0);
}

namespace {

// Padded copy with either zero or wrapped border, border width k/2.
FeatureMap make_padded(const FeatureMap& in, int k, Padding pad) {
  const int p = k / 2;
  const int ph = in.height + 2 * p, pw = in.width + 2 * p;
  FeatureMap out(in.channels, ph, pw, 0.0);
  for (int c = 0; c < in.channels; ++c) {
    const double* src = in.channel(c);
    double* dst = out.channel(c);
    if (pad == Padding::Zero) {
      for (int r = 0; r < in.height; ++r)
        std::memcpy(dst + std::size_t(r + p) * pw + p, src + std::size_t(r) * in.width,
                    sizeof(double) * in.width);
    } else {
      for (int r = 0; r < ph; ++r) {
        int sr = ((r - p) % in.height + in.height) % in.height;
        for (int col = 0; col < pw; ++col) {
          int sc = ((col - p) % in.width + in.width) % in.width;
          dst[std::size_t(r) * pw + col] = src[std::size_t(sr) * in.width + sc];
        }
      }
    }
  }
  return out;
}

// Adjoint of make_padded: fold the padded gradient back onto the grid.
FeatureMap unpad_grad(const FeatureMap& gpad, int h, int w, int k, Padding pad) {
  const int p = k / 2;
  const int pw = w + 2 * p;
  FeatureMap out(gpad.channels, h, w, 0.0);
  for (int c = 0; c < gpad.channels; ++c) {
    const double* src = gpad.channel(c);
    double* dst = out.channel(c);
    if (pad == Padding::Zero) {
      for (int r = 0; r < h; ++r)
        std::memcpy(dst + std::size_t(r) * w, src + std::size_t(r + p) * pw + p,
                    sizeof(double) * w);
    } else {
      const int ph = h + 2 * p;
      for (int r = 0; r < ph; ++r) {
        int sr = ((r - p) % h + h) % h;
        for (int col = 0; col < pw; ++col) {
          int sc = ((col - p) % w + w) % w;
          dst[std::size_t(sr) * w + sc] += src[std::size_t(r) * pw + col];
        }
      }
    }
  }
  return out;
}

}  // namespace

FeatureMap ConvLayer::run(const FeatureMap& in, Mode mode, Cache* cache,
                          const double* use_mean, const double* use_var) const {
  const int h = in.height, w = in.width;
  const int p = k_ / 2, pw = w + 2 * p;
  FeatureMap padded = make_padded(in, k_, pad_);
  FeatureMap out(out_ch_, h, w);

  // conv + bias; contiguous SAXPY inner loops so the compiler vectorizes
  for (int oc = 0; oc < out_ch_; ++oc) {
    double* o = out.channel(oc);
    const double b = bias_.value.v[oc];
    for (std::size_t i = 0; i < out.plane(); ++i) o[i] = b;
    for (int ic = 0; ic < in_ch_; ++ic) {
      const double* pin = padded.channel(ic);
      const double* kern =
          kernel_.value.v.data() + (std::size_t(oc) * in_ch_ + ic) * k_ * k_;
      for (int ki = 0; ki < k_; ++ki)
        for (int kj = 0; kj < k_; ++kj) {
          const double kw = kern[std::size_t(ki) * k_ + kj];
          for (int oy = 0; oy < h; ++oy) {
            const double* irow = pin + std::size_t(oy + ki) * pw + kj;
            double* orow = o + std::size_t(oy) * w;
            for (int ox = 0; ox < w; ++ox) orow[ox] += kw * irow[ox];
          }
        }
    }
  }

  if (cache) {
    cache->padded_in = std::move(padded);
    cache->preact = out;
    cache->mode = mode;
  }

  if (act_ == Activation::ReLU)
    for (double& v : out.v) v = v > 0.0 ? v : 0.0;

  if (bn_) {
    const std::size_t n = out.plane();
    if (cache) {
      cache->mu.assign(out_ch_, 0.0);
      cache->var.assign(out_ch_, 0.0);
      cache->xhat = FeatureMap(out_ch_, h, w);
    }
    for (int oc = 0; oc < out_ch_; ++oc) {
      double* o = out.channel(oc);
      double mean, var;
      if (mode == Mode::Train) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += o[i];
        mean = s / double(n);
        double sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          double d = o[i] - mean;
          sq += d * d;
        }
        var = sq / double(n);
      } else {
        mean = use_mean[oc];
        var = use_var[oc];
      }
      const double inv = 1.0 / std::sqrt(var + bn_->epsilon);
      const double g = bn_->gamma.value.v[oc], be = bn_->beta.value.v[oc];
      double* xh = cache ? cache->xhat.channel(oc) : nullptr;
      for (std::size_t i = 0; i < n; ++i) {
        double xhat = (o[i] - mean) * inv;
        if (xh) xh[i] = xhat;
        o[i] = g * xhat + be;
      }
      if (cache) {
        cache->mu[oc] = mean;
        cache->var[oc] = var;
      }
    }
  }
  return out;
}

FeatureMap ConvLayer::forward(const FeatureMap& in, Mode mode, Cache* cache) {
  if (in.channels != in_ch_)
    throw DimensionError("ConvLayer " + name_ + ": channel mismatch");
  const double* um = bn_ ? bn_->running_mean.data() : nullptr;
  const double* uv = bn_ ? bn_->running_var.data() : nullptr;
  FeatureMap out = run(in, mode, cache, um, uv);
  if (bn_ && mode == Mode::Train && cache) {
    for (int oc = 0; oc < out_ch_; ++oc) {
      bn_->running_mean[oc] = bn_->momentum * bn_->running_mean[oc] +
                              (1.0 - bn_->momentum) * cache->mu[oc];
      bn_->running_var[oc] = bn_->momentum * bn_->running_var[oc] +
                             (1.0 - bn_->momentum) * cache->var[oc];
    }
  }
  return out;
}

FeatureMap ConvLayer::infer(const FeatureMap& in) const {
  if (in.channels != in_ch_)
    throw DimensionError("ConvLayer " + name_ + ": channel mismatch");
  const double* um = bn_ ? bn_->running_mean.data() : nullptr;
  const double* uv = bn_ ? bn_->running_var.data() : nullptr;
  return run(in, Mode::Eval, nullptr, um, uv);
}

FeatureMap ConvLayer::backward(const Cache& cache, const FeatureMap& grad_out) {
  const int h = grad_out.height, w = grad_out.width;
  const int p = k_ / 2, pw = w + 2 * p;
  const std::size_t n = std::size_t(h) * w;

  FeatureMap g = grad_out;  // gradient flowing back through BN → ReLU → conv

  if (bn_) {
    for (int oc = 0; oc < out_ch_; ++oc) {
      double* gc = g.channel(oc);
      const double* xh = cache.xhat.channel(oc);
      const double inv = 1.0 / std::sqrt(cache.var[oc] + bn_->epsilon);
      const double gamma = bn_->gamma.value.v[oc];
      double sum_g = 0.0, sum_gx = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        sum_g += gc[i];
        sum_gx += gc[i] * xh[i];
      }
      bn_->beta.grad.v[oc] += sum_g;
      bn_->gamma.grad.v[oc] += sum_gx;
      if (cache.mode == Mode::Train) {
        const double c1 = sum_g / double(n), c2 = sum_gx / double(n);
        for (std::size_t i = 0; i < n; ++i)
          gc[i] = inv * gamma * (gc[i] - c1 - xh[i] * c2);
      } else {
        for (std::size_t i = 0; i < n; ++i) gc[i] *= gamma * inv;
      }
    }
  }

  if (act_ == Activation::ReLU) {
    for (int oc = 0; oc < out_ch_; ++oc) {
      double* gc = g.channel(oc);
      const double* pre = cache.preact.channel(oc);
      for (std::size_t i = 0; i < n; ++i)
        if (pre[i] <= 0.0) gc[i] = 0.0;
    }
  }

  // bias and kernel gradients
  std::vector<double> rowacc(static_cast<std::size_t>(w));
  for (int oc = 0; oc < out_ch_; ++oc) {
    const double* gc = g.channel(oc);
    double bsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) bsum += gc[i];
    bias_.grad.v[oc] += bsum;
    for (int ic = 0; ic < in_ch_; ++ic) {
      const double* pin = cache.padded_in.channel(ic);
      double* kg = kernel_.grad.v.data() + (std::size_t(oc) * in_ch_ + ic) * k_ * k_;
      for (int ki = 0; ki < k_; ++ki)
        for (int kj = 0; kj < k_; ++kj) {
          std::fill(rowacc.begin(), rowacc.end(), 0.0);
          for (int oy = 0; oy < h; ++oy) {
            const double* grow = gc + std::size_t(oy) * w;
            const double* irow = pin + std::size_t(oy + ki) * pw + kj;
            for (int ox = 0; ox < w; ++ox) rowacc[ox] += grow[ox] * irow[ox];
          }
          double acc = 0.0;
          for (int ox = 0; ox < w; ++ox) acc += rowacc[ox];
          kg[std::size_t(ki) * k_ + kj] += acc;
        }
    }
  }

  // gradient w.r.t. input via the padded buffer
  FeatureMap gpad(in_ch_, h + 2 * p, w + 2 * p, 0.0);
  for (int oc = 0; oc < out_ch_; ++oc) {
    const double* gc = g.channel(oc);
    for (int ic = 0; ic < in_ch_; ++ic) {
      double* gp = gpad.channel(ic);
      const double* kern =
          kernel_.value.v.data() + (std::size_t(oc) * in_ch_ + ic) * k_ * k_;
      for (int ki = 0; ki < k_; ++ki)
        for (int kj = 0; kj < k_; ++kj) {
          const double kw = kern[std::size_t(ki) * k_ + kj];
          for (int oy = 0; oy < h; ++oy) {
            const double* grow = gc + std::size_t(oy) * w;
            double* prow = gp + std::size_t(oy + ki) * pw + kj;
            for (int ox = 0; ox < w; ++ox) prow[ox] += kw * grow[ox];
          }
        }
    }
  }
  return unpad_grad(gpad, h, w, k_, pad_);
}

void ConvLayer::collect_params(std::vector<Param*>& out) {
  out.push_back(&kernel_);
  out.push_back(&bias_);
  if (bn_) {
    out.push_back(&bn_->gamma);
    out.push_back(&bn_->beta);
  }
}

std::size_t ConvLayer::parameter_count() const {
  std::size_t c = kernel_.value.size() + bias_.value.size();
  if (bn_) c += bn_->gamma.value.size() + bn_->beta.value.size();
  return c;
}

// --------------------------------------------------------- structural ops

namespace {

FeatureMap avgpool2(const FeatureMap& in) {
  if (in.height % 2 || in.width % 2)
    throw DimensionError("avgpool2: dimensions must be even");
  FeatureMap out(in.channels, in.height / 2, in.width / 2);
  for (int c = 0; c < in.channels; ++c) {
    const double* s = in.channel(c);
    double* d = out.channel(c);
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x) {
        const double* r0 = s + std::size_t(2 * y) * in.width + 2 * x;
        const double* r1 = r0 + in.width;
        d[std::size_t(y) * out.width + x] = 0.25 * (r0[0] + r0[1] + r1[0] + r1[1]);
      }
  }
  return out;
}

FeatureMap avgpool2_backward(const FeatureMap& go, int in_h, int in_w) {
  FeatureMap gin(go.channels, in_h, in_w, 0.0);
  for (int c = 0; c < go.channels; ++c) {
    const double* s = go.channel(c);
    double* d = gin.channel(c);
    for (int y = 0; y < go.height; ++y)
      for (int x = 0; x < go.width; ++x) {
        double v = 0.25 * s[std::size_t(y) * go.width + x];
        double* r0 = d + std::size_t(2 * y) * in_w + 2 * x;
        double* r1 = r0 + in_w;
        r0[0] += v;
        r0[1] += v;
        r1[0] += v;
        r1[1] += v;
      }
  }
  return gin;
}

FeatureMap upsample_nn2(const FeatureMap& in) {
  FeatureMap out(in.channels, in.height * 2, in.width * 2);
  for (int c = 0; c < in.channels; ++c) {
    const double* s = in.channel(c);
    double* d = out.channel(c);
    for (int y = 0; y < out.height; ++y) {
      const double* srow = s + std::size_t(y / 2) * in.width;
      double* drow = d + std::size_t(y) * out.width;
      for (int x = 0; x < out.width; ++x) drow[x] = srow[x / 2];
    }
  }
  return out;
}

FeatureMap upsample_nn2_backward(const FeatureMap& go) {
  FeatureMap gin(go.channels, go.height / 2, go.width / 2, 0.0);
  for (int c = 0; c < go.channels; ++c) {
    const double* s = go.channel(c);
    double* d = gin.channel(c);
    for (int y = 0; y < go.height; ++y) {
      const double* srow = s + std::size_t(y) * go.width;
      double* drow = d + std::size_t(y / 2) * gin.width;
      for (int x = 0; x < go.width; ++x) drow[x / 2] += srow[x];
    }
  }
  return gin;
}

FeatureMap concat(const FeatureMap& a, const FeatureMap& b) {
  if (a.height != b.height || a.width != b.width)
    throw DimensionError("concat: spatial mismatch");
  FeatureMap out(a.channels + b.channels, a.height, a.width);
  std::memcpy(out.v.data(), a.v.data(), sizeof(double) * a.v.size());
  std::memcpy(out.v.data() + a.v.size(), b.v.data(), sizeof(double) * b.v.size());
  return out;
}

void split_grad(const FeatureMap& g, int ca, FeatureMap& ga, FeatureMap& gb) {
  ga = FeatureMap(ca, g.height, g.width);
  gb = FeatureMap(g.channels - ca, g.height, g.width);
  std::memcpy(ga.v.data(), g.v.data(), sizeof(double) * ga.v.size());
  std::memcpy(gb.v.data(), g.v.data() + ga.v.size(), sizeof(double) * gb.v.size());
}

void add_into(FeatureMap& dst, const FeatureMap& src) {
  for (std::size_t i = 0; i < dst.v.size(); ++i) dst.v[i] += src.v[i];
}

}  // namespace

// --------------------------------------------------------------- resblock

FeatureMap NetworkModel::ResBlock::forward(const FeatureMap& in, Mode mode,
                                           Cache* cache) {
  FeatureMap z = a.forward(in, mode, cache ? &cache->ca : nullptr);
  z = b.forward(z, mode, cache ? &cache->cb : nullptr);
  if (proj) {
    FeatureMap s = proj->forward(in, mode, cache ? &cache->cproj : nullptr);
    add_into(z, s);
  } else {
    add_into(z, in);
  }
  return z;
}

FeatureMap NetworkModel::ResBlock::infer(const FeatureMap& in) const {
  FeatureMap z = b.infer(a.infer(in));
  if (proj)
    add_into(z, proj->infer(in));
  else
    add_into(z, in);
  return z;
}

FeatureMap NetworkModel::ResBlock::backward(const Cache& cache,
                                            const FeatureMap& grad_out) {
  FeatureMap g = a.backward(cache.ca, b.backward(cache.cb, grad_out));
  if (proj) {
    FeatureMap gs = proj->backward(cache.cproj, grad_out);
    add_into(g, gs);
  } else {
    add_into(g, grad_out);
  }
  return g;
}

void NetworkModel::ResBlock::collect_params(std::vector<Param*>& out) {
  a.collect_params(out);
  b.collect_params(out);
  if (proj) proj->collect_params(out);
}

std::size_t NetworkModel::ResBlock::parameter_count() const {
  return a.parameter_count() + b.parameter_count() +
         (proj ? proj->parameter_count() : 0);
}

// ------------------------------------------------------------------ model

NetworkModel NetworkModel::ssnet3l(std::array<int, 2> hidden_widths,
                                   std::array<int, 3> kernel_sizes,
                                   std::uint64_t seed, bool input_skip) {
  for (int k : kernel_sizes)
    if (k < 1 || k % 2 == 0)
      throw InvalidParameter("ssnet3l: kernel sizes must be odd");
  for (int wdt : hidden_widths)
    if (wdt < 1) throw InvalidParameter("ssnet3l: widths must be >= 1");
  NetworkModel m;
  m.arch_ = Architecture::SSNet3L;
  m.input_skip_ = input_skip;
  m.hidden_ = hidden_widths;
  m.ksizes_ = kernel_sizes;
  m.layers_.emplace_back("conv1", 1, hidden_widths[0], kernel_sizes[0],
                         Activation::ReLU, true);
  m.layers_.emplace_back("conv2", hidden_widths[0], hidden_widths[1],
                         kernel_sizes[1], Activation::ReLU, true);
  m.layers_.emplace_back("conv3", hidden_widths[1], 1, kernel_sizes[2],
                         Activation::None, false);
  for (std::size_t i = 0; i < m.layers_.size(); ++i)
    m.layers_[i].init_he(derive_seed(seed, i));
  return m;
}

NetworkModel NetworkModel::mini_unet(int base_width, std::uint64_t seed) {
  if (base_width < 1) throw InvalidParameter("mini_unet: base_width must be >= 1");
  NetworkModel m;
  m.arch_ = Architecture::MiniUNet;
  m.input_skip_ = true;
  m.base_width_ = base_width;
  const int w = base_width;

  auto make_block = [](const std::string& name, int cin, int cout) {
    ResBlock rb;
    rb.a = ConvLayer(name + ".a", cin, cout, 3, Activation::ReLU, true);
    rb.b = ConvLayer(name + ".b", cout, cout, 3, Activation::ReLU, true);
    if (cin != cout)
      rb.proj = ConvLayer(name + ".proj", cin, cout, 1, Activation::None, false);
    return rb;
  };
  m.blocks_.push_back(make_block("enc1", 1, w));
  m.blocks_.push_back(make_block("enc2", w, 2 * w));
  m.blocks_.push_back(make_block("dec", 3 * w, w));
  m.head_ = ConvLayer("head", w, 1, 3, Activation::None, false);

  std::uint64_t idx = 0;
  for (auto& rb : m.blocks_) {
    rb.a.init_he(derive_seed(seed, idx++));
    rb.b.init_he(derive_seed(seed, idx++));
    if (rb.proj) rb.proj->init_he(derive_seed(seed, idx++));
  }
  m.head_->init_he(derive_seed(seed, idx++));
  return m;
}

void NetworkModel::check_input(const Image& y) const {
  if (y.empty()) throw DimensionError("network: empty input");
  if (arch_ == Architecture::MiniUNet && (y.height() % 2 || y.width() % 2))
    throw DimensionError("mini_unet: input dimensions must be even");
}

FeatureMap NetworkModel::run_ssnet(const FeatureMap& in, Mode mode,
                                   std::vector<ConvLayer::Cache>* caches) {
  if (caches) caches->resize(layers_.size());
  FeatureMap z = in;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    z = layers_[i].forward(z, mode, caches ? &(*caches)[i] : nullptr);
  if (input_skip_) add_into(z, in);
  return z;
}

struct UnetCache {
  NetworkModel::ResBlock::Cache c1, c2, c3;
  ConvLayer::Cache chead;
  int h = 0, w = 0, base = 0;
};

FeatureMap NetworkModel::run_unet(const FeatureMap& in, Mode mode,
                                  UnetCache* cache) {
  FeatureMap e1 = blocks_[0].forward(in, mode, cache ? &cache->c1 : nullptr);
  FeatureMap p = avgpool2(e1);
  FeatureMap e2 = blocks_[1].forward(p, mode, cache ? &cache->c2 : nullptr);
  FeatureMap u = upsample_nn2(e2);
  FeatureMap c = concat(e1, u);
  FeatureMap d = blocks_[2].forward(c, mode, cache ? &cache->c3 : nullptr);
  FeatureMap h = head_->forward(d, mode, cache ? &cache->chead : nullptr);
  add_into(h, in);  // input→output residual
  if (cache) {
    cache->h = in.height;
    cache->w = in.width;
    cache->base = base_width_;
  }
  return h;
}

Image NetworkModel::forward(const Image& y, Mode mode) {
  check_input(y);
  FeatureMap in = FeatureMap::from_image(y);
  if (arch_ == Architecture::SSNet3L) {
    std::vector<ConvLayer::Cache> caches;
    return run_ssnet(in, mode, mode == Mode::Train ? &caches : nullptr).to_image();
  }
  UnetCache cache;
  return run_unet(in, mode, mode == Mode::Train ? &cache : nullptr).to_image();
}

Image NetworkModel::infer(const Image& y) const {
  check_input(y);
  FeatureMap in = FeatureMap::from_image(y);
  if (arch_ == Architecture::SSNet3L) {
    FeatureMap z = in;
    for (const auto& layer : layers_) z = layer.infer(z);
    if (input_skip_) add_into(z, in);
    return z.to_image();
  }
  FeatureMap e1 = blocks_[0].infer(in);
  FeatureMap e2 = blocks_[1].infer(avgpool2(e1));
  FeatureMap d = blocks_[2].infer(concat(e1, upsample_nn2(e2)));
  FeatureMap h = head_->infer(d);
  add_into(h, in);
  return h.to_image();
}

double NetworkModel::backward(const Image& y, const Image& target, Mode mode) {
  check_input(y);
  if (!y.same_shape(target)) throw DimensionError("backward: target shape mismatch");
  FeatureMap in = FeatureMap::from_image(y);
  const std::size_t n = y.size();

  auto mse_and_grad = [&](const FeatureMap& out, FeatureMap& gout) {
    gout = FeatureMap(1, out.height, out.width);
    double loss = 0.0;
    const double* t = target.data();
    for (std::size_t i = 0; i < n; ++i) {
      double r = out.v[i] - t[i];
      loss += r * r;
      gout.v[i] = 2.0 * r / double(n);
    }
    return loss / double(n);
  };

  if (arch_ == Architecture::SSNet3L) {
    std::vector<ConvLayer::Cache> caches;
    FeatureMap out = run_ssnet(in, mode, &caches);
    FeatureMap g;
    double loss = mse_and_grad(out, g);
    for (std::size_t i = layers_.size(); i-- > 0;)
      g = layers_[i].backward(caches[i], g);
    return loss;  // skip path adds grad to the input only
  }

  UnetCache cache;
  FeatureMap out = run_unet(in, mode, &cache);
  FeatureMap g;
  double loss = mse_and_grad(out, g);
  FeatureMap gd = head_->backward(cache.chead, g);
  FeatureMap gc = blocks_[2].backward(cache.c3, gd);
  FeatureMap ge1a, gu;
  split_grad(gc, base_width_, ge1a, gu);
  FeatureMap ge2 = upsample_nn2_backward(gu);
  FeatureMap gp = blocks_[1].backward(cache.c2, ge2);
  FeatureMap ge1b = avgpool2_backward(gp, cache.h, cache.w);
  add_into(ge1a, ge1b);
  blocks_[0].backward(cache.c1, ge1a);
  return loss;
}

std::vector<Param*> NetworkModel::params() {
  std::vector<Param*> out;
  for (auto& layer : layers_) layer.collect_params(out);
  for (auto& rb : blocks_) rb.collect_params(out);
  if (head_) head_->collect_params(out);
  return out;
}

void NetworkModel::zero_grads() {
  for (Param* p : params()) p->zero_grad();
}

std::size_t NetworkModel::parameter_count() const {
  std::size_t c = 0;
  for (const auto& layer : layers_) c += layer.parameter_count();
  for (const auto& rb : blocks_) c += rb.parameter_count();
  if (head_) c += head_->parameter_count();
  return c;
}

// ------------------------------------------------------------ checkpoints

std::string NetworkModel::config_string() const {
  std::ostringstream os;
  if (arch_ == Architecture::SSNet3L) {
    os << "h1=" << hidden_[0] << ";h2=" << hidden_[1] << ";k1=" << ksizes_[0]
       << ";k2=" << ksizes_[1] << ";k3=" << ksizes_[2]
       << ";skip=" << (input_skip_ ? 1 : 0);
  } else {
    os << "base=" << base_width_;
  }
  return os.str();
}

namespace {

std::map<std::string, int> parse_config_string(const std::string& s) {
  std::map<std::string, int> kv;
  std::istringstream is(s);
  std::string item;
  while (std::getline(is, item, ';')) {
    auto eq = item.find('=');
    if (eq == std::string::npos) throw IoError("checkpoint: bad config entry " + item);
    kv[item.substr(0, eq)] = std::stoi(item.substr(eq + 1));
  }
  return kv;
}

struct NamedTensor {
  std::string name;
  std::vector<double>* data;
  std::vector<int> shape;
};

}  // namespace

void NetworkModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("checkpoint: cannot open " + path.string());
  out.write(kCheckpointMagic, 8);
  binio::put_string(out, arch_ == Architecture::SSNet3L ? "ssnet3l" : "mini_unet");
  binio::put_string(out, config_string());

  auto* self = const_cast<NetworkModel*>(this);
  std::vector<NamedTensor> tensors;
  for (Param* p : self->params())
    tensors.push_back({p->name, &p->value.v, p->value.shape});
  auto add_bn_stats = [&](ConvLayer& layer) {
    if (!layer.has_bn()) return;
    tensors.push_back({layer.name() + ".bn_rmean", &layer.bn().running_mean,
                       {int(layer.bn().running_mean.size())}});
    tensors.push_back({layer.name() + ".bn_rvar", &layer.bn().running_var,
                       {int(layer.bn().running_var.size())}});
  };
  for (auto& layer : self->layers_) add_bn_stats(layer);
  for (auto& rb : self->blocks_) {
    add_bn_stats(rb.a);
    add_bn_stats(rb.b);
    if (rb.proj) add_bn_stats(*rb.proj);
  }
  if (self->head_) add_bn_stats(*self->head_);

  binio::put_u32(out, std::uint32_t(tensors.size()));
  for (const auto& t : tensors) {
    binio::put_string(out, t.name);
    binio::put_u32(out, std::uint32_t(t.shape.size()));
    for (int d : t.shape) binio::put_u32(out, std::uint32_t(d));
    for (double v : *t.data) binio::put_f64(out, v);
  }
  if (!out) throw IoError("checkpoint: write failed for " + path.string());
}

NetworkModel NetworkModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open " + path.string());
  char magic[8];
  binio::read_exact(in, magic, 8, "checkpoint magic");
  if (std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw IoError("checkpoint: bad magic in " + path.string());
  std::string tag = binio::get_string(in, "architecture tag");
  auto kv = parse_config_string(binio::get_string(in, "config"));

  NetworkModel m;
  if (tag == "ssnet3l") {
    m = ssnet3l({kv.at("h1"), kv.at("h2")}, {kv.at("k1"), kv.at("k2"), kv.at("k3")},
                0, kv.at("skip") != 0);
  } else if (tag == "mini_unet") {
    m = mini_unet(kv.at("base"), 0);
  } else {
    throw IoError("checkpoint: unknown architecture tag " + tag);
  }

  std::map<std::string, std::vector<double>*> slots;
  for (Param* p : m.params()) slots[p->name] = &p->value.v;
  auto add_bn_slots = [&](ConvLayer& layer) {
    if (!layer.has_bn()) return;
    slots[layer.name() + ".bn_rmean"] = &layer.bn().running_mean;
    slots[layer.name() + ".bn_rvar"] = &layer.bn().running_var;
  };
  for (auto& layer : m.layers_) add_bn_slots(layer);
  for (auto& rb : m.blocks_) {
    add_bn_slots(rb.a);
    add_bn_slots(rb.b);
    if (rb.proj) add_bn_slots(*rb.proj);
  }
  if (m.head_) add_bn_slots(*m.head_);

  std::uint32_t count = binio::get_u32(in, "tensor count");
  std::size_t filled = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = binio::get_string(in, "tensor name");
    std::uint32_t ndim = binio::get_u32(in, "tensor rank");
    std::size_t total = 1;
    for (std::uint32_t d = 0; d < ndim; ++d)
      total *= binio::get_u32(in, "tensor dim");
    auto it = slots.find(name);
    if (it == slots.end())
      throw IoError("checkpoint: unexpected tensor " + name);
    if (it->second->size() != total)
      throw IoError("checkpoint: shape mismatch for " + name);
    for (double& v : *it->second) v = binio::get_f64(in, "tensor data");
    ++filled;
  }
  if (filled != slots.size())
    throw IoError("checkpoint: missing tensors in " + path.string());
  return m;
}

}  // namespace deblur
