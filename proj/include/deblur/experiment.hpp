#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "deblur/config.hpp"
#include "deblur/dataset.hpp"
#include "deblur/metrics.hpp"
#include "deblur/network.hpp"

namespace deblur {

// One reconstruction pipeline under comparison: plain network ("nn"),
// filter + network ("finn"), or iterative solver + network ("stnn").
struct Variant {
  std::string tag;
  std::shared_ptr<Stabilizer> phi;  // null for the plain network
};

BlurOperator make_operator(const ExperimentConfig& cfg);

// nn / finn / stnn as parameterized by the config.
std::vector<Variant> make_variants(const ExperimentConfig& cfg,
                                   const BlurOperator& op);

// Loads cfg.dataset_dir if set (manifest dir → load, otherwise ingest raw
// images), else synthesizes.
Dataset prepare_dataset(const ExperimentConfig& cfg, const BlurOperator& op);

// Trains one network per variant on stabilized inputs (or a single shared
// network on raw inputs in posthoc mode); writes <tag>.ckpt and
// <tag>_loss.csv into output_dir. models[i] belongs to variants[i].
std::vector<NetworkModel> train_variants(const ExperimentConfig& cfg,
                                         const Dataset& ds,
                                         const BlurOperator& op);

// Re-loads what train_variants saved.
std::vector<NetworkModel> load_variant_models(const ExperimentConfig& cfg,
                                              const BlurOperator& op);

struct VariantResult {
  std::string tag;
  StabilityReport report;                         // at cfg.eval_sigma
  std::vector<std::pair<double, double>> sweep;   // (sigma, mean error)
};

struct ExperimentResult {
  std::vector<VariantResult> variants;
};

// Stability report (CSV + JSON) per variant, sweep CSV per variant, combined
// scatter CSV, and summary.json. Noise seeds are shared across variants so
// all comparisons are paired.
ExperimentResult evaluate_variants(const ExperimentConfig& cfg,
                                   const Dataset& ds, const BlurOperator& op,
                                   const std::vector<NetworkModel>& models);

// Ground truth, blurred, noisy, and per-variant reconstructions of the first
// gallery_count test images as 16-bit PGMs under output_dir/gallery.
void write_gallery(const ExperimentConfig& cfg, const Dataset& ds,
                   const BlurOperator& op,
                   const std::vector<NetworkModel>& models);

// Dataset preparation + training + evaluation + gallery in one call.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

}  // namespace deblur
