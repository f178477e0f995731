#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "deblur/adam.hpp"
#include "deblur/errors.hpp"
#include "deblur/network.hpp"
#include "deblur/rng.hpp"
#include "deblur/train.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace deblur;

namespace {

// Reference cross-correlation with explicit border handling, written
// independently of the library's padded-buffer implementation.
FeatureMap ref_conv(const FeatureMap& in, const Tensor& kernel,
                    const std::vector<double>& bias, Padding pad) {
  const int oc_n = kernel.shape[0], ic_n = kernel.shape[1], k = kernel.shape[2];
  const int r = k / 2, h = in.height, w = in.width;
  FeatureMap out(oc_n, h, w, 0.0);
  for (int oc = 0; oc < oc_n; ++oc)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = bias[std::size_t(oc)];
        for (int ic = 0; ic < ic_n; ++ic)
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
              int sy = y + ky - r, sx = x + kx - r;
              double px = 0.0;
              if (pad == Padding::Periodic) {
                sy = ((sy % h) + h) % h;
                sx = ((sx % w) + w) % w;
                px = in.channel(ic)[std::size_t(sy) * w + sx];
              } else if (sy >= 0 && sy < h && sx >= 0 && sx < w) {
                px = in.channel(ic)[std::size_t(sy) * w + sx];
              }
              const std::size_t kidx =
                  ((std::size_t(oc) * ic_n + ic) * k + ky) * k + kx;
              acc += kernel.v[kidx] * px;
            }
        out.channel(oc)[std::size_t(y) * w + x] = acc;
      }
  return out;
}

FeatureMap random_map(int c, int h, int w, std::uint64_t seed) {
  FeatureMap fm(c, h, w);
  auto rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (double& x : fm.v) x = gauss(rng);
  return fm;
}

double map_max_abs_diff(const FeatureMap& a, const FeatureMap& b) {
  REQUIRE(a.v.size() == b.v.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i)
    m = std::max(m, std::abs(a.v[i] - b.v[i]));
  return m;
}

double mse(const Image& out, const Image& target) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double d = out.data()[i] - target.data()[i];
    s += d * d;
  }
  return s / double(out.size());
}

Param* find_param(std::vector<Param*>& params, const std::string& name) {
  for (Param* p : params)
    if (p->name == name) return p;
  return nullptr;
}

// Central finite differences against the analytic gradients, sampling a
// strided subset of each tensor's entries.
void gradient_check(NetworkModel& model, const Image& y, const Image& target,
                    Mode mode) {
  const double h = 1e-5;
  std::vector<Param*> params = model.params();

  model.zero_grads();
  model.backward(y, target, mode);
  std::vector<std::vector<double>> analytic;
  for (Param* p : params) analytic.push_back(p->grad.v);

  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Param& prm = *params[pi];
    const std::size_t n = prm.value.v.size();
    const std::size_t stride = n <= 32 ? 1 : n / 17;
    for (std::size_t i = 0; i < n; i += stride) {
      const double saved = prm.value.v[i];
      prm.value.v[i] = saved + h;
      const double lp = mse(model.forward(y, mode), target);
      prm.value.v[i] = saved - h;
      const double lm = mse(model.forward(y, mode), target);
      prm.value.v[i] = saved;
      const double fd = (lp - lm) / (2.0 * h);
      const double an = analytic[pi][i];
      const double err = std::abs(fd - an);
      const double rel = err / std::max(std::abs(fd) + std::abs(an), 1e-8);
      INFO("param ", prm.name, " index ", i, " fd=", fd, " analytic=", an);
      CHECK((rel < 1e-4 || err < 1e-10));
    }
  }
}

std::size_t ssnet_count(int w1, int w2, int k1, int k2, int k3) {
  const std::size_t conv1 = std::size_t(k1) * k1 * 1 * w1 + w1;
  const std::size_t conv2 = std::size_t(k2) * k2 * w1 * w2 + w2;
  const std::size_t conv3 = std::size_t(k3) * k3 * w2 * 1 + 1;
  const std::size_t bn = 2 * std::size_t(w1) + 2 * std::size_t(w2);
  return conv1 + conv2 + conv3 + bn;
}

std::size_t block_count(int cin, int cout) {
  std::size_t n = 9 * std::size_t(cin) * cout + cout;   // conv a
  n += 9 * std::size_t(cout) * cout + cout;             // conv b
  n += 4 * std::size_t(cout);                           // two batch norms
  if (cin != cout) n += std::size_t(cin) * cout + cout; // 1x1 projection
  return n;
}

std::size_t unet_count(int w) {
  return block_count(1, w) + block_count(w, 2 * w) + block_count(3 * w, w) +
         (9 * std::size_t(w) + 1);
}

}  // namespace

TEST_SUITE_BEGIN("network");

TEST_CASE("parameter counts match closed-form arithmetic") {
  NetworkModel big = NetworkModel::ssnet3l({128, 128}, {9, 5, 3}, 1);
  CHECK(big.parameter_count() == ssnet_count(128, 128, 9, 5, 3));
  CHECK(big.parameter_count() == 421889);

  NetworkModel desk = NetworkModel::ssnet3l({16, 16}, {9, 5, 3}, 1);
  CHECK(desk.parameter_count() == ssnet_count(16, 16, 9, 5, 3));
  CHECK(desk.parameter_count() == 7937);

  NetworkModel unet = NetworkModel::mini_unet(4, 1);
  CHECK(unet.parameter_count() == unet_count(4));

  // params() must account for exactly the same scalars.
  std::size_t total = 0;
  for (Param* p : unet.params()) total += p->value.size();
  CHECK(total == unet.parameter_count());
  total = 0;
  for (Param* p : big.params()) total += p->value.size();
  CHECK(total == big.parameter_count());
}

TEST_CASE("conv layer matches the reference correlation") {
  for (Padding pad : {Padding::Zero, Padding::Periodic}) {
    for (int k : {1, 3, 5}) {
      ConvLayer layer("t", 2, 3, k, Activation::None, false, pad);
      layer.init_he(42 + std::uint64_t(k));
      for (std::size_t i = 0; i < layer.bias().value.v.size(); ++i)
        layer.bias().value.v[i] = 0.1 * double(i + 1);
      FeatureMap in = random_map(2, 5, 6, 7);
      FeatureMap got = layer.infer(in);
      FeatureMap want = ref_conv(in, layer.kernel().value, layer.bias().value.v, pad);
      CHECK(map_max_abs_diff(got, want) < 1e-12);
    }
  }
}

TEST_CASE("relu layer output is the clamped reference") {
  ConvLayer layer("t", 1, 2, 3, Activation::ReLU, false);
  layer.init_he(5);
  FeatureMap in = random_map(1, 6, 4, 11);
  FeatureMap got = layer.infer(in);
  FeatureMap want = ref_conv(in, layer.kernel().value, layer.bias().value.v,
                             Padding::Zero);
  for (double& x : want.v) x = std::max(x, 0.0);
  CHECK(map_max_abs_diff(got, want) < 1e-12);
  for (double x : got.v) CHECK(x >= 0.0);
}

TEST_CASE("batch norm train mode standardizes with spatial statistics") {
  ConvLayer layer("t", 1, 2, 1, Activation::None, true);
  // 1x1 kernels: channel 0 copies the input, channel 1 scales it by 2.
  layer.kernel().value.v = {1.0, 2.0};
  FeatureMap in = random_map(1, 4, 5, 3);

  ConvLayer::Cache cache;
  FeatureMap out = layer.forward(in, Mode::Train, &cache);

  const std::size_t n = in.plane();
  for (int c = 0; c < 2; ++c) {
    const double scale = c == 0 ? 1.0 : 2.0;
    double mu = 0.0;
    for (std::size_t i = 0; i < n; ++i) mu += scale * in.v[i];
    mu /= double(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = scale * in.v[i] - mu;
      var += d * d;
    }
    var /= double(n);  // biased
    const double inv = 1.0 / std::sqrt(var + layer.bn().epsilon);
    for (std::size_t i = 0; i < n; ++i) {
      const double want = (scale * in.v[i] - mu) * inv;  // gamma=1, beta=0
      CHECK(out.channel(c)[i] == doctest::Approx(want).epsilon(1e-12));
    }
    // One momentum-0.9 update from the (0, 1) initialization.
    CHECK(layer.bn().running_mean[std::size_t(c)] ==
          doctest::Approx(0.1 * mu).epsilon(1e-12));
    CHECK(layer.bn().running_var[std::size_t(c)] ==
          doctest::Approx(0.9 + 0.1 * var).epsilon(1e-12));
  }

  // Eval mode must use the running statistics, not the batch ones.
  FeatureMap ev = layer.infer(in);
  for (int c = 0; c < 2; ++c) {
    const double scale = c == 0 ? 1.0 : 2.0;
    const double rm = layer.bn().running_mean[std::size_t(c)];
    const double rv = layer.bn().running_var[std::size_t(c)];
    const double inv = 1.0 / std::sqrt(rv + layer.bn().epsilon);
    for (std::size_t i = 0; i < n; ++i) {
      const double want = (scale * in.v[i] - rm) * inv;
      CHECK(ev.channel(c)[i] == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("gradient check: ssnet3l in both batch-norm modes") {
  NetworkModel model = NetworkModel::ssnet3l({4, 3}, {5, 3, 3}, 9);
  Image y = oracle::random_image(8, 8, 21);
  Image target = oracle::random_image(8, 8, 22);
  // Move the running statistics off their initialization first so eval mode
  // exercises a nontrivial affine correction.
  model.forward(y, Mode::Train);
  gradient_check(model, y, target, Mode::Train);
  gradient_check(model, y, target, Mode::Eval);
}

TEST_CASE("gradient check: ssnet3l with input skip") {
  NetworkModel model = NetworkModel::ssnet3l({3, 3}, {3, 3, 3}, 4, true);
  Image y = oracle::random_image(6, 8, 31);
  Image target = oracle::random_image(6, 8, 32);
  gradient_check(model, y, target, Mode::Train);
}

TEST_CASE("gradient check: mini_unet in both batch-norm modes") {
  NetworkModel model = NetworkModel::mini_unet(2, 13);
  Image y = oracle::random_image(8, 8, 41);
  Image target = oracle::random_image(8, 8, 42);
  model.forward(y, Mode::Train);
  gradient_check(model, y, target, Mode::Train);
  gradient_check(model, y, target, Mode::Eval);
}

TEST_CASE("gradient check: periodic-padding conv layer") {
  // Wrap-around padding changes which input pixels each kernel tap reads, so
  // check the full layer backward against finite differences directly. The
  // probe loss is linear with random coefficients: a norm-style loss would be
  // almost blind to the conv weights here, since batch norm standardizes each
  // channel regardless of what the convolution produced.
  ConvLayer layer("t", 1, 2, 3, Activation::ReLU, true, Padding::Periodic);
  layer.init_he(6);
  FeatureMap in = random_map(1, 5, 4, 17);
  const FeatureMap coeff = random_map(2, 5, 4, 27);

  auto loss_of = [&](const FeatureMap& out) {
    double s = 0.0;
    for (std::size_t i = 0; i < out.v.size(); ++i) s += coeff.v[i] * out.v[i];
    return s;
  };

  ConvLayer::Cache cache;
  layer.forward(in, Mode::Train, &cache);
  FeatureMap gout = coeff;  // dL/dout for L = sum(coeff * out)
  std::vector<Param*> params;
  layer.collect_params(params);
  for (Param* p : params) p->zero_grad();
  FeatureMap gin = layer.backward(cache, gout);

  const double h = 1e-6;
  for (Param* p : params) {
    for (std::size_t i = 0; i < p->value.v.size(); ++i) {
      const double saved = p->value.v[i];
      p->value.v[i] = saved + h;
      const double lp = loss_of(layer.forward(in, Mode::Train, &cache));
      p->value.v[i] = saved - h;
      const double lm = loss_of(layer.forward(in, Mode::Train, &cache));
      p->value.v[i] = saved;
      const double fd = (lp - lm) / (2.0 * h);
      const double an = p->grad.v[i];
      INFO("param ", p->name, " index ", i);
      CHECK((std::abs(fd - an) / std::max(std::abs(fd) + std::abs(an), 1e-8) < 1e-4 ||
             std::abs(fd - an) < 1e-8));
    }
  }
  // Input gradient by the same finite differences.
  for (std::size_t i = 0; i < in.v.size(); i += 3) {
    const double saved = in.v[i];
    in.v[i] = saved + h;
    const double lp = loss_of(layer.forward(in, Mode::Train, &cache));
    in.v[i] = saved - h;
    const double lm = loss_of(layer.forward(in, Mode::Train, &cache));
    in.v[i] = saved;
    const double fd = (lp - lm) / (2.0 * h);
    CHECK((std::abs(fd - gin.v[i]) /
               std::max(std::abs(fd) + std::abs(gin.v[i]), 1e-8) <
           1e-4 ||
           std::abs(fd - gin.v[i]) < 1e-8));
  }
}

TEST_CASE("zeroed final layer collapses the output to its bias") {
  NetworkModel model = NetworkModel::ssnet3l({3, 3}, {3, 3, 3}, 8);
  std::vector<Param*> params = model.params();
  Param* w3 = find_param(params, "conv3.weight");
  Param* b3 = find_param(params, "conv3.bias");
  REQUIRE(w3 != nullptr);
  REQUIRE(b3 != nullptr);
  std::fill(w3->value.v.begin(), w3->value.v.end(), 0.0);
  b3->value.v[0] = 0.37;

  Image y = oracle::random_image(6, 6, 3);
  Image out = model.infer(y);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out.data()[i] == 0.37);

  NetworkModel skip = NetworkModel::ssnet3l({3, 3}, {3, 3, 3}, 8, true);
  params = skip.params();
  w3 = find_param(params, "conv3.weight");
  b3 = find_param(params, "conv3.bias");
  std::fill(w3->value.v.begin(), w3->value.v.end(), 0.0);
  b3->value.v[0] = 0.37;
  out = skip.infer(y);
  for (std::size_t i = 0; i < out.size(); ++i)
    CHECK(out.data()[i] == doctest::Approx(y.data()[i] + 0.37).epsilon(1e-15));
}

TEST_CASE("zeroing every parameter turns mini_unet into the identity") {
  NetworkModel model = NetworkModel::mini_unet(3, 11);
  for (Param* p : model.params())
    std::fill(p->value.v.begin(), p->value.v.end(), 0.0);
  Image y = oracle::random_image(10, 8, 5);
  Image out = model.infer(y);
  CHECK(oracle::max_abs_diff(out, y) == 0.0);
}

TEST_CASE("zero residual gives zero gradients; doubling it doubles them") {
  NetworkModel model = NetworkModel::ssnet3l({3, 2}, {3, 3, 3}, 15);
  Image y = oracle::random_image(8, 6, 51);
  Image out = model.forward(y, Mode::Train);

  model.zero_grads();
  const double zero_loss = model.backward(y, out, Mode::Train);
  CHECK(zero_loss == 0.0);
  for (Param* p : model.params())
    for (double g : p->grad.v) CHECK(g == 0.0);

  Image d = oracle::random_image(8, 6, 52);
  Image t1 = out - d;
  Image t2 = out - (2.0 * d);

  model.zero_grads();
  model.backward(y, t1, Mode::Train);
  std::vector<std::vector<double>> g1;
  for (Param* p : model.params()) g1.push_back(p->grad.v);

  model.zero_grads();
  model.backward(y, t2, Mode::Train);
  std::size_t pi = 0;
  for (Param* p : model.params()) {
    for (std::size_t i = 0; i < p->grad.v.size(); ++i) {
      const double want = 2.0 * g1[pi][i];
      CHECK(p->grad.v[i] == doctest::Approx(want).epsilon(1e-12));
    }
    ++pi;
  }
}

TEST_CASE("adam first step is approximately lr times the gradient sign") {
  Param p;
  p.value = Tensor::zeros({3});
  p.grad = Tensor::zeros({3});
  p.grad.v = {3.0, -2.0, 0.5};

  AdamConfig cfg;  // defaults: lr 1e-3, betas 0.9/0.9, eps 1e-8
  AdamState state;
  std::vector<Param*> params = {&p};
  adam_step(params, cfg, state);

  CHECK(state.t == 1);
  for (std::size_t i = 0; i < 3; ++i) {
    const double g = p.grad.v[i];
    const double sign = g > 0 ? 1.0 : -1.0;
    CHECK(std::abs(p.value.v[i] + cfg.learning_rate * sign) < 1e-10);
  }

  // Two steps with different gradients must match the hand recurrence.
  Param q;
  q.value = Tensor::zeros({1});
  q.grad = Tensor::zeros({1});
  AdamState st2;
  std::vector<Param*> qs = {&q};
  const double g1 = 0.7, g2 = -0.3;
  double m = 0.0, v = 0.0, x = 0.0;
  q.grad.v[0] = g1;
  adam_step(qs, cfg, st2);
  q.grad.v[0] = g2;
  adam_step(qs, cfg, st2);
  for (int t = 1; t <= 2; ++t) {
    const double g = t == 1 ? g1 : g2;
    m = cfg.beta1 * m + (1 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1 - cfg.beta2) * g * g;
    const double mh = m / (1 - std::pow(cfg.beta1, t));
    const double vh = v / (1 - std::pow(cfg.beta2, t));
    x -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.epsilon);
  }
  CHECK(q.value.v[0] == doctest::Approx(x).epsilon(1e-15));
  CHECK(st2.t == 2);

  CHECK_THROWS_AS(adam_step(params, AdamConfig{-1.0, 0.9, 0.9, 1e-8}, state),
                  InvalidParameter);
  CHECK_THROWS_AS(adam_step(params, AdamConfig{1e-3, 1.0, 0.9, 1e-8}, state),
                  InvalidParameter);
}

TEST_CASE("inference is repeatable bit for bit") {
  NetworkModel model = NetworkModel::mini_unet(2, 19);
  Image y = oracle::random_image(12, 10, 6);
  model.forward(y, Mode::Train);  // move running stats off initialization
  Image a = model.infer(y);
  Image b = model.infer(y);
  CHECK(oracle::max_abs_diff(a, b) == 0.0);
}

TEST_CASE("checkpoint round trip preserves parameters and behavior") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "deblur_ckpt_test";
  fs::create_directories(dir);

  Image y = oracle::random_image(8, 8, 61);

  NetworkModel unet = NetworkModel::mini_unet(2, 23);
  unet.forward(y, Mode::Train);  // nontrivial running statistics
  unet.forward(y, Mode::Train);
  const fs::path p1 = dir / "unet.ckpt";
  unet.save(p1);
  NetworkModel unet2 = NetworkModel::load(p1);
  CHECK(unet2.architecture() == Architecture::MiniUNet);
  CHECK(unet2.parameter_count() == unet.parameter_count());
  std::vector<Param*> pa = unet.params(), pb = unet2.params();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i]->name == pb[i]->name);
    CHECK(pa[i]->value.v == pb[i]->value.v);
  }
  CHECK(oracle::max_abs_diff(unet.infer(y), unet2.infer(y)) == 0.0);

  NetworkModel ss = NetworkModel::ssnet3l({5, 4}, {9, 5, 3}, 29, true);
  ss.forward(y, Mode::Train);
  const fs::path p2 = dir / "ssnet.ckpt";
  ss.save(p2);
  NetworkModel ss2 = NetworkModel::load(p2);
  CHECK(ss2.architecture() == Architecture::SSNet3L);
  CHECK(ss2.input_skip());
  CHECK(oracle::max_abs_diff(ss.infer(y), ss2.infer(y)) == 0.0);

  const fs::path bad = dir / "bad.ckpt";
  {
    std::ofstream out(bad, std::ios::binary);
    out << "NOTACKPT garbage";
  }
  CHECK_THROWS_AS(NetworkModel::load(bad), IoError);

  // Truncated file: keep only the first 32 bytes of a valid checkpoint.
  std::ifstream in(p1, std::ios::binary);
  std::vector<char> head(32);
  in.read(head.data(), 32);
  const fs::path trunc = dir / "trunc.ckpt";
  {
    std::ofstream out(trunc, std::ios::binary);
    out.write(head.data(), 32);
  }
  CHECK_THROWS_AS(NetworkModel::load(trunc), IoError);
  CHECK_THROWS_AS(NetworkModel::load(dir / "missing.ckpt"), IoError);
}

TEST_CASE("mini_unet rejects odd input dimensions") {
  NetworkModel model = NetworkModel::mini_unet(2, 1);
  Image odd(7, 8, 0.5);
  CHECK_THROWS_AS(model.infer(odd), DimensionError);
  NetworkModel ss = NetworkModel::ssnet3l({2, 2}, {3, 3, 3}, 1);
  CHECK_NOTHROW(ss.infer(odd));
}

TEST_CASE("feature map and image conversions round trip") {
  Image img = oracle::random_image(4, 7, 9);
  FeatureMap fm = FeatureMap::from_image(img);
  CHECK(fm.channels == 1);
  CHECK(oracle::max_abs_diff(fm.to_image(), img) == 0.0);
  FeatureMap multi(2, 3, 3, 0.0);
  CHECK_THROWS_AS(multi.to_image(), DimensionError);
}

TEST_CASE("builders validate their configuration") {
  CHECK_THROWS_AS(NetworkModel::ssnet3l({0, 4}, {3, 3, 3}, 1), InvalidParameter);
  CHECK_THROWS_AS(NetworkModel::ssnet3l({4, 4}, {4, 3, 3}, 1), InvalidParameter);
  CHECK_THROWS_AS(NetworkModel::mini_unet(0, 1), InvalidParameter);
  CHECK_THROWS_AS(ConvLayer("t", 1, 1, 2, Activation::None, false),
                  InvalidParameter);
}

TEST_CASE("training is deterministic and records one loss per epoch") {
  auto make_data = [] {
    std::vector<TrainPair> data;
    for (int i = 0; i < 6; ++i)
      data.push_back({oracle::random_image(8, 8, 100 + std::uint64_t(i)),
                      oracle::random_image(8, 8, 200 + std::uint64_t(i))});
    return data;
  };

  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 2;
  cfg.injection_sigma = 0.01;
  cfg.seed = 7;

  NetworkModel m1 = NetworkModel::ssnet3l({3, 3}, {3, 3, 3}, 77);
  NetworkModel m2 = NetworkModel::ssnet3l({3, 3}, {3, 3, 3}, 77);
  TrainResult r1 = train(m1, make_data(), cfg);
  TrainResult r2 = train(m2, make_data(), cfg);

  REQUIRE(r1.loss_history.size() == 4);
  CHECK(r1.loss_history == r2.loss_history);
  for (double l : r1.loss_history) CHECK(std::isfinite(l));

  Image probe = oracle::random_image(8, 8, 300);
  CHECK(oracle::max_abs_diff(m1.infer(probe), m2.infer(probe)) == 0.0);

  // A different seed must give a different trajectory.
  NetworkModel m3 = NetworkModel::ssnet3l({3, 3}, {3, 3, 3}, 77);
  TrainConfig other = cfg;
  other.seed = 8;
  TrainResult r3 = train(m3, make_data(), other);
  CHECK(r1.loss_history != r3.loss_history);
}

TEST_CASE("preprocessing runs once per sample when injection is disabled") {
  std::vector<TrainPair> data;
  for (int i = 0; i < 5; ++i)
    data.push_back({oracle::random_image(6, 6, 10 + std::uint64_t(i)),
                    oracle::random_image(6, 6, 20 + std::uint64_t(i))});

  int calls = 0;
  InputTransform counting = [&calls](const Image& img) {
    ++calls;
    return img;
  };

  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 8;
  cfg.seed = 5;

  NetworkModel m = NetworkModel::ssnet3l({2, 2}, {3, 3, 3}, 9);
  train(m, data, cfg, counting);
  CHECK(calls == 5);  // once per sample, not per epoch

  // With injection the transform sees freshly perturbed inputs every epoch.
  calls = 0;
  std::set<long long> seen;
  InputTransform recording = [&](const Image& img) {
    ++calls;
    seen.insert(llround(img.norm() * 1e9));
    return img;
  };
  cfg.injection_sigma = 0.05;
  NetworkModel m2 = NetworkModel::ssnet3l({2, 2}, {3, 3, 3}, 9);
  train(m2, data, cfg, recording);
  CHECK(calls == 15);                 // every sample, every epoch
  CHECK(seen.size() > data.size());   // noise actually varies across epochs
}

TEST_CASE("training rejects invalid configurations") {
  std::vector<TrainPair> data = {
      {oracle::random_image(6, 6, 1), oracle::random_image(6, 6, 2)}};
  NetworkModel m = NetworkModel::ssnet3l({2, 2}, {3, 3, 3}, 3);

  TrainConfig cfg;
  cfg.epochs = -1;
  CHECK_THROWS_AS(train(m, data, cfg), InvalidParameter);
  cfg.epochs = 1;
  cfg.batch_size = 0;
  CHECK_THROWS_AS(train(m, data, cfg), InvalidParameter);
  cfg.batch_size = 1;
  cfg.injection_sigma = -0.5;
  CHECK_THROWS_AS(train(m, data, cfg), InvalidParameter);
  cfg.injection_sigma = 0.0;
  CHECK_THROWS_AS(train(m, {}, cfg), InvalidParameter);

  std::vector<TrainPair> bad = {
      {oracle::random_image(6, 6, 1), oracle::random_image(6, 5, 2)}};
  CHECK_THROWS_AS(train(m, bad, cfg), DimensionError);
}

TEST_CASE("training overfits a single sample") {
  Image y = oracle::random_image(16, 16, 400);
  Image x = oracle::random_image(16, 16, 401);
  // Smooth targets are more representative of images than white noise.
  for (int i = 0; i < x.height(); ++i)
    for (int j = 0; j < x.width(); ++j)
      x.at(i, j) = 0.5 + 0.3 * std::sin(0.5 * i) * std::cos(0.4 * j);

  NetworkModel model = NetworkModel::ssnet3l({8, 8}, {9, 5, 3}, 55);
  TrainConfig cfg;
  cfg.epochs = 400;
  cfg.batch_size = 1;
  cfg.seed = 1;
  cfg.adam.learning_rate = 2e-3;

  TrainResult r = train(model, {{y, x}}, cfg);
  REQUIRE(r.loss_history.size() == 400);
  CHECK(r.loss_history.back() < 0.01 * r.loss_history.front());
}

TEST_CASE("loss csv uses full precision") {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "deblur_loss_test.csv";
  std::vector<double> hist = {0.125, 1.0 / 3.0};
  write_loss_csv(path.string(), hist);

  std::ifstream in(path);
  std::string header, row0, row1;
  std::getline(in, header);
  std::getline(in, row0);
  std::getline(in, row1);
  CHECK(header == "epoch,mean_loss");
  CHECK(row0 == "0,0.125");
  double parsed = 0.0;
  REQUIRE(std::sscanf(row1.c_str(), "1,%lg", &parsed) == 1);
  CHECK(parsed == 1.0 / 3.0);  // survives the round trip exactly
}

TEST_SUITE_END();
