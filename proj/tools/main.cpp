// deblur: noise-robust image deblurring with stabilized neural networks.
//
// Subcommands: synth, ingest, train, evaluate, sweep, gallery.
// Exit codes: 0 success, 2 configuration error, 3 training divergence,
// 4 I/O failure.

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "deblur/config.hpp"
#include "deblur/dataset.hpp"
#include "deblur/errors.hpp"
#include "deblur/experiment.hpp"
#include "deblur/metrics.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitIo = 4;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("-c,--config", args.config_path,
                  "configuration file (key = value lines)");
  cmd->add_option("--set", args.overrides,
                  "override a config key, e.g. --set train.epochs=5")
      ->take_all();
}

deblur::ExperimentConfig resolve_config(const CommonArgs& args) {
  deblur::ExperimentConfig cfg;
  if (!args.config_path.empty())
    cfg = deblur::parse_config_file(args.config_path);
  for (const std::string& assignment : args.overrides)
    deblur::apply_override(cfg, assignment);
  deblur::validate(cfg);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "deblur: Gaussian-blur inversion with plain, filtered, and "
      "solver-stabilized neural reconstructors"};
  app.require_subcommand(1);

  CommonArgs synth_args, ingest_args, train_args, eval_args, sweep_args,
      gallery_args;
  std::string synth_out, ingest_in, ingest_out;

  CLI::App* synth = app.add_subcommand(
      "synth", "generate a procedural dataset and save it");
  add_common(synth, synth_args);
  synth->add_option("-o,--out", synth_out, "dataset directory")->required();

  CLI::App* ingest_cmd = app.add_subcommand(
      "ingest", "crop a directory of PNM images into a dataset and save it");
  add_common(ingest_cmd, ingest_args);
  ingest_cmd->add_option("-i,--images", ingest_in, "directory of PNM images")
      ->required();
  ingest_cmd->add_option("-o,--out", ingest_out, "dataset directory")->required();

  CLI::App* train_cmd = app.add_subcommand(
      "train", "train the nn/finn/stnn variants; writes checkpoints and loss "
               "curves to output_dir");
  add_common(train_cmd, train_args);

  CLI::App* eval_cmd = app.add_subcommand(
      "evaluate", "stability reports, sweep CSVs, scatter CSV, and summary "
                  "from saved checkpoints");
  add_common(eval_cmd, eval_args);

  CLI::App* sweep_cmd = app.add_subcommand(
      "sweep", "per-variant (sigma, mean error) CSVs from saved checkpoints");
  add_common(sweep_cmd, sweep_args);

  CLI::App* gallery_cmd = app.add_subcommand(
      "gallery", "write ground-truth / blurred / noisy / reconstruction PGMs");
  add_common(gallery_cmd, gallery_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    // --help and --version land here with code 0; genuine argument errors
    // become configuration errors.
    int rc = app.exit(err);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (synth->parsed()) {
      deblur::ExperimentConfig cfg = resolve_config(synth_args);
      deblur::BlurOperator op = deblur::make_operator(cfg);
      deblur::Dataset ds = deblur::synthesize(cfg.count, cfg.size, cfg.seed, op,
                                              cfg.train_fraction);
      deblur::save_dataset(synth_out, ds);
      std::cout << "wrote " << ds.train.size() << " train / " << ds.test.size()
                << " test patches to " << synth_out << "\n";
    } else if (ingest_cmd->parsed()) {
      deblur::ExperimentConfig cfg = resolve_config(ingest_args);
      deblur::BlurOperator op = deblur::make_operator(cfg);
      deblur::Dataset ds =
          deblur::ingest(ingest_in, cfg.size, cfg.seed, op, cfg.train_fraction);
      deblur::save_dataset(ingest_out, ds);
      std::cout << "wrote " << ds.train.size() << " train / " << ds.test.size()
                << " test patches to " << ingest_out << "\n";
    } else if (train_cmd->parsed()) {
      deblur::ExperimentConfig cfg = resolve_config(train_args);
      deblur::BlurOperator op = deblur::make_operator(cfg);
      deblur::Dataset ds = deblur::prepare_dataset(cfg, op);
      deblur::train_variants(cfg, ds, op);
      std::cout << "checkpoints and loss curves written to " << cfg.output_dir
                << "\n";
    } else if (eval_cmd->parsed()) {
      deblur::ExperimentConfig cfg = resolve_config(eval_args);
      deblur::BlurOperator op = deblur::make_operator(cfg);
      deblur::Dataset ds = deblur::prepare_dataset(cfg, op);
      std::vector<deblur::NetworkModel> models =
          deblur::load_variant_models(cfg, op);
      deblur::ExperimentResult result =
          deblur::evaluate_variants(cfg, ds, op, models);
      for (const deblur::VariantResult& vr : result.variants)
        std::cout << vr.tag << ": eta_hat=" << deblur::format_double(vr.report.eta_hat)
                  << " c_hat=" << deblur::format_double(vr.report.c_hat)
                  << (vr.report.delta_stable ? " (delta-stable)" : "") << "\n";
      std::cout << "reports written to " << cfg.output_dir << "\n";
    } else if (sweep_cmd->parsed()) {
      deblur::ExperimentConfig cfg = resolve_config(sweep_args);
      deblur::BlurOperator op = deblur::make_operator(cfg);
      deblur::Dataset ds = deblur::prepare_dataset(cfg, op);
      std::vector<deblur::NetworkModel> models =
          deblur::load_variant_models(cfg, op);
      deblur::evaluate_variants(cfg, ds, op, models);
      std::cout << "sweep CSVs written to " << cfg.output_dir << "\n";
    } else if (gallery_cmd->parsed()) {
      deblur::ExperimentConfig cfg = resolve_config(gallery_args);
      deblur::BlurOperator op = deblur::make_operator(cfg);
      deblur::Dataset ds = deblur::prepare_dataset(cfg, op);
      std::vector<deblur::NetworkModel> models =
          deblur::load_variant_models(cfg, op);
      deblur::write_gallery(cfg, ds, op, models);
      std::cout << "gallery written to " << cfg.output_dir << "/gallery\n";
    }
  } catch (const deblur::ConfigError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitConfig;
  } catch (const deblur::DivergenceError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitDivergence;
  } catch (const deblur::IoError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitIo;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}
