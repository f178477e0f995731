#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "deblur/image.hpp"

namespace deblur {

// Flat dense tensor of doubles with a bookkeeping shape.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> v;

  static Tensor zeros(std::vector<int> dims);
  std::size_t size() const { return v.size(); }
};

// Trainable tensor plus its gradient accumulator.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;

  void zero_grad();
};

// C×H×W feature map, channel-major.
struct FeatureMap {
  int channels = 0, height = 0, width = 0;
  std::vector<double> v;

  FeatureMap() = default;
  FeatureMap(int c, int h, int w, double fill = 0.0);
  double* channel(int c) { return v.data() + std::size_t(c) * height * width; }
  const double* channel(int c) const {
    return v.data() + std::size_t(c) * height * width;
  }
  std::size_t plane() const { return std::size_t(height) * width; }

  static FeatureMap from_image(const Image& img);
  Image to_image() const;  // requires channels == 1
};

enum class Mode { Train, Eval };
enum class Padding { Zero, Periodic };
enum class Activation { None, ReLU };

struct BatchNormState {
  Param gamma;
  Param beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.9;
  double epsilon = 1e-5;
};

// Conv (+ bias) → optional ReLU → optional per-image batch norm, "same"
// spatial shape. Train-mode BN normalizes with the current image's spatial
// statistics and updates the running ones; eval mode uses only the running
// statistics.
class ConvLayer {
 public:
  struct Cache {
    FeatureMap padded_in;
    FeatureMap preact;
    FeatureMap xhat;           // BN-normalized activations (when BN present)
    std::vector<double> mu;    // per-channel batch stats (when BN present)
    std::vector<double> var;
    Mode mode = Mode::Train;
  };

  ConvLayer() = default;
  ConvLayer(std::string name, int in_channels, int out_channels, int kernel_size,
            Activation activation, bool batchnorm, Padding padding = Padding::Zero);

  void init_he(std::uint64_t seed);

  FeatureMap forward(const FeatureMap& in, Mode mode, Cache* cache);
  FeatureMap infer(const FeatureMap& in) const;  // eval-mode, no side effects

  // Accumulates parameter gradients, returns grad w.r.t. the layer input.
  FeatureMap backward(const Cache& cache, const FeatureMap& grad_out);

  int in_channels() const { return in_ch_; }
  int out_channels() const { return out_ch_; }
  int kernel_size() const { return k_; }
  const std::string& name() const { return name_; }
  bool has_bn() const { return bn_.has_value(); }

  Param& kernel() { return kernel_; }
  Param& bias() { return bias_; }
  BatchNormState& bn() { return *bn_; }
  const BatchNormState& bn() const { return *bn_; }

  void collect_params(std::vector<Param*>& out);
  std::size_t parameter_count() const;

 private:
  FeatureMap run(const FeatureMap& in, Mode mode, Cache* cache,
                 const double* use_mean, const double* use_var) const;

  std::string name_;
  int in_ch_ = 0, out_ch_ = 0, k_ = 0;
  Activation act_ = Activation::None;
  Padding pad_ = Padding::Zero;
  Param kernel_;
  Param bias_;
  std::optional<BatchNormState> bn_;
};

enum class Architecture { SSNet3L, MiniUNet };

// ψ_θ: single-channel image in, same-shape single-channel image out.
class NetworkModel {
 public:
  // conv(1→w1, k1)+ReLU+BN, conv(w1→w2, k2)+ReLU+BN, conv(w2→1, k3) linear
  // head; optional input→output residual skip.
  static NetworkModel ssnet3l(std::array<int, 2> hidden_widths,
                              std::array<int, 3> kernel_sizes, std::uint64_t seed,
                              bool input_skip = false);

  // Two resolution levels: ResBlock(1→w) → avgpool2 → ResBlock(w→2w) →
  // nearest ×2 upsample → concat → ResBlock(3w→w) → 3×3 head, plus an
  // input→output residual skip. Input dimensions must be even.
  static NetworkModel mini_unet(int base_width, std::uint64_t seed);

  Image forward(const Image& y, Mode mode);
  Image infer(const Image& y) const;

  // Forward + pixel-MSE + full backprop; gradients accumulate. Train mode
  // uses per-image BN statistics (and advances the running ones).
  double backward(const Image& y, const Image& target, Mode mode = Mode::Train);

  std::vector<Param*> params();
  void zero_grads();
  std::size_t parameter_count() const;
  Architecture architecture() const { return arch_; }
  bool input_skip() const { return input_skip_; }

  void save(const std::filesystem::path& path) const;
  static NetworkModel load(const std::filesystem::path& path);

 private:
  friend struct UnetCache;

  NetworkModel() = default;

  struct ResBlock {
    ConvLayer a, b;
    std::optional<ConvLayer> proj;  // 1×1 projection when channels change

    struct Cache {
      ConvLayer::Cache ca, cb, cproj;
    };
    FeatureMap forward(const FeatureMap& in, Mode mode, Cache* cache);
    FeatureMap infer(const FeatureMap& in) const;
    FeatureMap backward(const Cache& cache, const FeatureMap& grad_out);
    void collect_params(std::vector<Param*>& out);
    std::size_t parameter_count() const;
  };

  FeatureMap run_ssnet(const FeatureMap& in, Mode mode,
                       std::vector<ConvLayer::Cache>* caches);
  FeatureMap run_unet(const FeatureMap& in, Mode mode, struct UnetCache* cache);
  void check_input(const Image& y) const;
  std::string config_string() const;

  Architecture arch_ = Architecture::SSNet3L;
  bool input_skip_ = false;
  std::array<int, 2> hidden_{};
  std::array<int, 3> ksizes_{};
  int base_width_ = 0;
  std::vector<ConvLayer> layers_;        // SSNet3L
  std::vector<ResBlock> blocks_;         // MiniUNet: enc1, enc2, dec
  std::optional<ConvLayer> head_;        // MiniUNet head
};

}  // namespace deblur
