#include "deblur/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "deblur/errors.hpp"
#include "deblur/noise.hpp"
#include "deblur/pgm_io.hpp"
#include "deblur/psf.hpp"
#include "deblur/rng.hpp"
#include "deblur/train.hpp"

namespace deblur {

namespace fs = std::filesystem;

namespace {

// Seed streams per purpose, all derived from the one config seed.
constexpr std::uint64_t kInitStream = 100;   // network initialization
constexpr std::uint64_t kTrainStream = 200;  // shuffles + injected noise
constexpr std::uint64_t kEvalStream = 300;   // stability-report noise
constexpr std::uint64_t kSweepStream = 400;  // per-sigma sweep noise

NetworkModel build_network(const ExperimentConfig& cfg) {
  const std::uint64_t seed = derive_seed(cfg.seed, kInitStream);
  if (cfg.network.arch == NetworkArch::MiniUNet)
    return NetworkModel::mini_unet(cfg.network.base_width, seed);
  return NetworkModel::ssnet3l(cfg.network.widths, cfg.network.kernels, seed,
                               cfg.network.input_skip);
}

Reconstructor make_reconstructor(const Variant& variant,
                                 const NetworkModel& net) {
  std::shared_ptr<Stabilizer> phi = variant.phi;
  const NetworkModel* model = &net;
  return [phi, model](const Image& y) {
    return model->infer(phi ? phi->apply(y) : y);
  };
}

std::string sigma_label(double sigma) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", sigma);
  return buf;
}

}  // namespace

BlurOperator make_operator(const ExperimentConfig& cfg) {
  return BlurOperator(gaussian_psf(cfg.psf_radius, cfg.psf_sigma), cfg.size,
                      cfg.size);
}

std::vector<Variant> make_variants(const ExperimentConfig& cfg,
                                   const BlurOperator& op) {
  std::vector<Variant> variants;
  variants.push_back({"nn", nullptr});
  variants.push_back(
      {"finn", std::make_shared<FilterStabilizer>(
                   gaussian_psf(cfg.stabilizer.filter_radius,
                                cfg.stabilizer.filter_sigma),
                   op.height(), op.width())});
  IterativeStabilizer::Options opt;
  opt.method = cfg.stabilizer.method;
  opt.lambda = cfg.stabilizer.lambda;
  opt.iterations = cfg.stabilizer.iterations;
  variants.push_back({"stnn", std::make_shared<IterativeStabilizer>(op, opt)});
  return variants;
}

Dataset prepare_dataset(const ExperimentConfig& cfg, const BlurOperator& op) {
  if (!cfg.dataset_dir.empty()) {
    const fs::path dir = cfg.dataset_dir;
    if (fs::exists(dir / "manifest.txt")) return load_dataset(dir, op);
    return ingest(dir, cfg.size, cfg.seed, op, cfg.train_fraction);
  }
  return synthesize(cfg.count, cfg.size, cfg.seed, op, cfg.train_fraction);
}

std::vector<NetworkModel> train_variants(const ExperimentConfig& cfg,
                                         const Dataset& ds,
                                         const BlurOperator& op) {
  if (ds.train.empty()) throw InvalidParameter("train_variants: empty train split");
  fs::create_directories(cfg.output_dir);

  std::vector<TrainPair> data;
  data.reserve(ds.train.size());
  for (const SamplePair& s : ds.train) data.push_back({s.y0, s.x_gt});

  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.injection_sigma = cfg.train_sigma;
  tc.seed = derive_seed(cfg.seed, kTrainStream);
  tc.adam.learning_rate = cfg.learning_rate;
  tc.adam.beta1 = cfg.beta1;
  tc.adam.beta2 = cfg.beta2;

  const std::vector<Variant> variants = make_variants(cfg, op);
  std::vector<NetworkModel> models;

  if (cfg.posthoc_composition) {
    // One network, trained on raw observations; stabilizers compose at
    // evaluation only.
    NetworkModel net = build_network(cfg);
    TrainResult res = train(net, data, tc, nullptr);
    write_loss_csv((fs::path(cfg.output_dir) / "nn_loss.csv").string(),
                   res.loss_history);
    for (const Variant& variant : variants) {
      net.save(fs::path(cfg.output_dir) / (variant.tag + ".ckpt"));
      models.push_back(NetworkModel::load(fs::path(cfg.output_dir) /
                                          (variant.tag + ".ckpt")));
    }
    return models;
  }

  for (const Variant& variant : variants) {
    NetworkModel net = build_network(cfg);  // identical init across variants
    InputTransform pre;
    if (variant.phi) {
      std::shared_ptr<Stabilizer> phi = variant.phi;
      pre = [phi](const Image& img) { return phi->apply(img); };
    }
    TrainResult res = train(net, data, tc, pre);
    write_loss_csv(
        (fs::path(cfg.output_dir) / (variant.tag + "_loss.csv")).string(),
        res.loss_history);
    net.save(fs::path(cfg.output_dir) / (variant.tag + ".ckpt"));
    models.push_back(std::move(net));
  }
  return models;
}

std::vector<NetworkModel> load_variant_models(const ExperimentConfig& cfg,
                                              const BlurOperator& op) {
  std::vector<NetworkModel> models;
  for (const Variant& variant : make_variants(cfg, op)) {
    const fs::path path = fs::path(cfg.output_dir) / (variant.tag + ".ckpt");
    if (!fs::exists(path))
      throw IoError("missing checkpoint " + path.string() +
                    " (run the train subcommand first)");
    models.push_back(NetworkModel::load(path));
  }
  return models;
}

ExperimentResult evaluate_variants(const ExperimentConfig& cfg,
                                   const Dataset& ds, const BlurOperator& op,
                                   const std::vector<NetworkModel>& models) {
  if (ds.test.empty()) throw InvalidParameter("evaluate_variants: empty test split");
  fs::create_directories(cfg.output_dir);
  const std::vector<Variant> variants = make_variants(cfg, op);
  if (models.size() != variants.size())
    throw InvalidParameter("evaluate_variants: one model per variant required");

  const std::uint64_t eval_seed = derive_seed(cfg.seed, kEvalStream);
  ExperimentResult result;

  for (std::size_t vi = 0; vi < variants.size(); ++vi) {
    const Variant& variant = variants[vi];
    Reconstructor psi = make_reconstructor(variant, models[vi]);

    VariantResult vr;
    vr.tag = variant.tag;
    vr.report =
        empirical_stability(psi, ds.test, cfg.eval_sigma, eval_seed, variant.tag);
    write_report_csv(
        (fs::path(cfg.output_dir) / (variant.tag + "_report.csv")).string(),
        vr.report);
    write_report_json(
        (fs::path(cfg.output_dir) / (variant.tag + "_report.json")).string(),
        vr.report);

    // Out-of-domain sweep: same noise draws for every variant at each sigma.
    for (std::size_t si = 0; si < cfg.test_sigmas.size(); ++si) {
      const double sigma = cfg.test_sigmas[si];
      const std::uint64_t sigma_seed =
          derive_seed(derive_seed(cfg.seed, kSweepStream), si);
      double total = 0.0;
      for (std::size_t i = 0; i < ds.test.size(); ++i) {
        Image y = sigma > 0.0
                      ? add_noise(ds.test[i].y0, {sigma, derive_seed(sigma_seed, i)})
                            .image
                      : ds.test[i].y0;
        total += reconstruction_error(psi(y), ds.test[i].x_gt);
      }
      vr.sweep.emplace_back(sigma, total / double(ds.test.size()));
    }
    std::ofstream sweep_out(fs::path(cfg.output_dir) / (variant.tag + "_sweep.csv"),
                            std::ios::trunc);
    if (!sweep_out) throw IoError("evaluate_variants: cannot write sweep csv");
    sweep_out << "sigma,mean_error\n";
    for (const auto& [sigma, err] : vr.sweep)
      sweep_out << format_double(sigma) << ',' << format_double(err) << '\n';

    result.variants.push_back(std::move(vr));
  }

  // Combined scatter: excess error against noise norm, all variants in one
  // file for plotting.
  std::ofstream scatter(fs::path(cfg.output_dir) / "scatter.csv", std::ios::trunc);
  if (!scatter) throw IoError("evaluate_variants: cannot write scatter.csv");
  scatter << "variant,id,noise_norm,excess_error,ratio\n";
  for (const VariantResult& vr : result.variants)
    for (std::size_t i = 0; i < vr.report.per_image.size(); ++i) {
      const PerImageStats& row = vr.report.per_image[i];
      scatter << vr.tag << ',' << i << ',' << format_double(row.noise_norm)
              << ',' << format_double(row.err_noisy - vr.report.eta_hat) << ','
              << format_double(row.ratio) << '\n';
    }
  scatter.close();

  nlohmann::json summary;
  summary["experiment"] = cfg.experiment == ExperimentKind::A   ? "A"
                          : cfg.experiment == ExperimentKind::B ? "B"
                                                                : "sweep";
  summary["seed"] = cfg.seed;
  summary["dataset"] = {{"train", ds.train.size()},
                        {"test", ds.test.size()},
                        {"provenance", ds.provenance}};
  summary["eval_sigma"] = cfg.eval_sigma;
  summary["train_sigma"] = cfg.train_sigma;
  summary["placement"] = cfg.posthoc_composition ? "posthoc" : "preprocess";
  summary["conventions"] = {
      {"tikhonov",
       "objective 0.5*||Kx-y||^2 + lambda*||x||^2; normal equations "
       "(K^T K + 2*lambda*I) x = K^T y"}};
  summary["variants"] = nlohmann::json::array();
  for (const VariantResult& vr : result.variants) {
    nlohmann::json v;
    v["tag"] = vr.tag;
    v["eta_hat"] = vr.report.eta_hat;
    v["c_hat"] = vr.report.c_hat;
    v["delta_stable"] = vr.report.delta_stable;
    v["sweep"] = nlohmann::json::array();
    for (const auto& [sigma, err] : vr.sweep)
      v["sweep"].push_back({{"sigma", sigma}, {"mean_error", err}});
    summary["variants"].push_back(std::move(v));
  }
  std::ofstream summary_out(fs::path(cfg.output_dir) / "summary.json",
                            std::ios::trunc);
  if (!summary_out) throw IoError("evaluate_variants: cannot write summary.json");
  summary_out << summary.dump(2) << '\n';

  return result;
}

void write_gallery(const ExperimentConfig& cfg, const Dataset& ds,
                   const BlurOperator& op,
                   const std::vector<NetworkModel>& models) {
  const std::vector<Variant> variants = make_variants(cfg, op);
  if (models.size() != variants.size())
    throw InvalidParameter("write_gallery: one model per variant required");
  const fs::path dir = fs::path(cfg.output_dir) / "gallery";
  fs::create_directories(dir);

  const std::uint64_t eval_seed = derive_seed(cfg.seed, kEvalStream);
  const std::size_t count =
      std::min<std::size_t>(std::size_t(cfg.gallery_count), ds.test.size());
  const std::string slabel = sigma_label(cfg.eval_sigma);

  char prefix[32];
  for (std::size_t i = 0; i < count; ++i) {
    std::snprintf(prefix, sizeof(prefix), "img%03zu", i);
    const SamplePair& s = ds.test[i];
    write_pgm(dir / (std::string(prefix) + "_gt.pgm"), s.x_gt);
    write_pgm(dir / (std::string(prefix) + "_blurred.pgm"), s.y0);
    // same draw the stability report saw for this image
    Image noisy = add_noise(s.y0, {cfg.eval_sigma, derive_seed(eval_seed, i)}).image;
    write_pgm(dir / (std::string(prefix) + "_noisy_s" + slabel + ".pgm"), noisy);
    for (std::size_t vi = 0; vi < variants.size(); ++vi) {
      Reconstructor psi = make_reconstructor(variants[vi], models[vi]);
      write_pgm(dir / (std::string(prefix) + "_recon_" + variants[vi].tag +
                       "_s" + slabel + ".pgm"),
                psi(noisy));
    }
  }
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  BlurOperator op = make_operator(cfg);
  Dataset ds = prepare_dataset(cfg, op);
  fs::create_directories(cfg.output_dir);
  {
    std::ofstream echo(fs::path(cfg.output_dir) / "config.txt", std::ios::trunc);
    echo << to_text(cfg);
  }
  std::vector<NetworkModel> models = train_variants(cfg, ds, op);
  ExperimentResult result = evaluate_variants(cfg, ds, op, models);
  write_gallery(cfg, ds, op, models);
  return result;
}

}  // namespace deblur
