#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "deblur/stabilizer.hpp"
#include "deblur/train.hpp"

namespace deblur {

enum class ExperimentKind { A, B, Sweep };

// Parameters for both stabilized variants: the finn variant smooths with a
// Gaussian filter, the stnn variant runs a regularized solver. Every run
// compares nn/finn/stnn side by side, so both blocks are always live.
struct StabilizerConfig {
  int filter_radius = 3;
  double filter_sigma = 1.0;
  IterativeMethod method = IterativeMethod::Cgls;
  double lambda = 1e-2;
  int iterations = 50;
};

enum class NetworkArch { SSNet3L, MiniUNet };

struct NetworkConfig {
  NetworkArch arch = NetworkArch::SSNet3L;
  std::array<int, 2> widths = {16, 16};
  std::array<int, 3> kernels = {9, 5, 3};
  bool input_skip = false;
  int base_width = 16;  // MiniUNet
};

// Flat key=value configuration for the experiment drivers; desk-scale
// defaults. Every key is listed in config_keys() and unknown keys are
// rejected.
struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::A;
  std::uint64_t seed = 1;
  std::string output_dir = "out";

  // dataset: a directory of images to ingest, or (when empty) a synthesized
  // procedural dataset of `count` images at `size`x`size`.
  std::string dataset_dir;
  int count = 260;
  int size = 64;
  double train_fraction = 0.77;  // 260 images -> 200 train / 60 test

  int psf_radius = 4;
  double psf_sigma = 1.3;

  double train_sigma = 0.0;  // noise injection during training (experiment B)
  std::vector<double> test_sigmas = {0.0, 0.0125, 0.025, 0.05, 0.075, 0.1};
  double eval_sigma = 0.05;  // noise level for the stability reports

  StabilizerConfig stabilizer;  // parameters of the FiNN filter / StNN solver
  NetworkConfig network;

  int epochs = 30;
  int batch_size = 8;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.9;

  int gallery_count = 3;
  // false: each stabilized variant trains its own network on preprocessed
  // inputs; true: one network trained on raw inputs, stabilizers composed
  // only at evaluation time.
  bool posthoc_composition = false;
};

// All recognized keys, for documentation and validation.
const std::vector<std::string>& config_keys();

// Parses `key = value` lines ('#' comments, blank lines ignored). Unknown
// keys, malformed lines, and un-parseable values throw ConfigError.
ExperimentConfig parse_config_file(const std::string& path);

// Applies one "key=value" override (CLI --set) to an existing config.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

// Cross-field validation (ranges, experiment-A noise rule). ConfigError on
// violation. Called by the parser after all assignments.
void validate(const ExperimentConfig& cfg);

// Canonical textual form; parsing it back reproduces the config.
std::string to_text(const ExperimentConfig& cfg);

}  // namespace deblur
