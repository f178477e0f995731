#include "deblur/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "deblur/errors.hpp"
#include "deblur/metrics.hpp"

namespace deblur {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    long long n = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "': not an integer: '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    unsigned long long n = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "': not an integer: '" + v + "'");
  }
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "': not a number: '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: key '" + key + "': not a boolean: '" + v + "'");
}

std::vector<std::string> split_commas(const std::string& v) {
  std::vector<std::string> parts;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(trim(item));
  return parts;
}

std::vector<double> parse_reals(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const std::string& p : split_commas(v)) out.push_back(parse_real(key, p));
  if (out.empty())
    throw ConfigError("config: key '" + key + "': empty list");
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"experiment",
       [](ExperimentConfig& c, const std::string& v) {
         if (v == "A" || v == "a")
           c.experiment = ExperimentKind::A;
         else if (v == "B" || v == "b")
           c.experiment = ExperimentKind::B;
         else if (v == "sweep")
           c.experiment = ExperimentKind::Sweep;
         else
           throw ConfigError("config: experiment must be A, B, or sweep, got '" +
                             v + "'");
       }},
      {"seed",
       [](ExperimentConfig& c, const std::string& v) { c.seed = parse_u64("seed", v); }},
      {"output_dir",
       [](ExperimentConfig& c, const std::string& v) { c.output_dir = v; }},
      {"dataset.dir",
       [](ExperimentConfig& c, const std::string& v) { c.dataset_dir = v; }},
      {"dataset.count",
       [](ExperimentConfig& c, const std::string& v) {
         c.count = int(parse_int("dataset.count", v));
       }},
      {"dataset.size",
       [](ExperimentConfig& c, const std::string& v) {
         c.size = int(parse_int("dataset.size", v));
       }},
      {"dataset.train_fraction",
       [](ExperimentConfig& c, const std::string& v) {
         c.train_fraction = parse_real("dataset.train_fraction", v);
       }},
      {"psf.radius",
       [](ExperimentConfig& c, const std::string& v) {
         c.psf_radius = int(parse_int("psf.radius", v));
       }},
      {"psf.sigma",
       [](ExperimentConfig& c, const std::string& v) {
         c.psf_sigma = parse_real("psf.sigma", v);
       }},
      {"noise.train_sigma",
       [](ExperimentConfig& c, const std::string& v) {
         c.train_sigma = parse_real("noise.train_sigma", v);
       }},
      {"noise.test_sigmas",
       [](ExperimentConfig& c, const std::string& v) {
         c.test_sigmas = parse_reals("noise.test_sigmas", v);
       }},
      {"noise.eval_sigma",
       [](ExperimentConfig& c, const std::string& v) {
         c.eval_sigma = parse_real("noise.eval_sigma", v);
       }},
      {"stabilizer.filter_radius",
       [](ExperimentConfig& c, const std::string& v) {
         c.stabilizer.filter_radius = int(parse_int("stabilizer.filter_radius", v));
       }},
      {"stabilizer.filter_sigma",
       [](ExperimentConfig& c, const std::string& v) {
         c.stabilizer.filter_sigma = parse_real("stabilizer.filter_sigma", v);
       }},
      {"stabilizer.method",
       [](ExperimentConfig& c, const std::string& v) {
         if (v == "cgls")
           c.stabilizer.method = IterativeMethod::Cgls;
         else if (v == "landweber")
           c.stabilizer.method = IterativeMethod::Landweber;
         else
           throw ConfigError(
               "config: stabilizer.method must be cgls or landweber, got '" +
               v + "'");
       }},
      {"stabilizer.lambda",
       [](ExperimentConfig& c, const std::string& v) {
         c.stabilizer.lambda = parse_real("stabilizer.lambda", v);
       }},
      {"stabilizer.iterations",
       [](ExperimentConfig& c, const std::string& v) {
         c.stabilizer.iterations = int(parse_int("stabilizer.iterations", v));
       }},
      {"network.arch",
       [](ExperimentConfig& c, const std::string& v) {
         if (v == "ssnet3l")
           c.network.arch = NetworkArch::SSNet3L;
         else if (v == "mini_unet")
           c.network.arch = NetworkArch::MiniUNet;
         else
           throw ConfigError(
               "config: network.arch must be ssnet3l or mini_unet, got '" + v +
               "'");
       }},
      {"network.widths",
       [](ExperimentConfig& c, const std::string& v) {
         std::vector<std::string> parts = split_commas(v);
         if (parts.size() != 2)
           throw ConfigError("config: network.widths needs two integers");
         c.network.widths = {int(parse_int("network.widths", parts[0])),
                             int(parse_int("network.widths", parts[1]))};
       }},
      {"network.kernels",
       [](ExperimentConfig& c, const std::string& v) {
         std::vector<std::string> parts = split_commas(v);
         if (parts.size() != 3)
           throw ConfigError("config: network.kernels needs three integers");
         c.network.kernels = {int(parse_int("network.kernels", parts[0])),
                              int(parse_int("network.kernels", parts[1])),
                              int(parse_int("network.kernels", parts[2]))};
       }},
      {"network.input_skip",
       [](ExperimentConfig& c, const std::string& v) {
         c.network.input_skip = parse_bool("network.input_skip", v);
       }},
      {"network.base_width",
       [](ExperimentConfig& c, const std::string& v) {
         c.network.base_width = int(parse_int("network.base_width", v));
       }},
      {"train.epochs",
       [](ExperimentConfig& c, const std::string& v) {
         c.epochs = int(parse_int("train.epochs", v));
       }},
      {"train.batch_size",
       [](ExperimentConfig& c, const std::string& v) {
         c.batch_size = int(parse_int("train.batch_size", v));
       }},
      {"train.learning_rate",
       [](ExperimentConfig& c, const std::string& v) {
         c.learning_rate = parse_real("train.learning_rate", v);
       }},
      {"train.beta1",
       [](ExperimentConfig& c, const std::string& v) {
         c.beta1 = parse_real("train.beta1", v);
       }},
      {"train.beta2",
       [](ExperimentConfig& c, const std::string& v) {
         c.beta2 = parse_real("train.beta2", v);
       }},
      {"gallery.count",
       [](ExperimentConfig& c, const std::string& v) {
         c.gallery_count = int(parse_int("gallery.count", v));
       }},
      {"placement",
       [](ExperimentConfig& c, const std::string& v) {
         if (v == "preprocess")
           c.posthoc_composition = false;
         else if (v == "posthoc")
           c.posthoc_composition = true;
         else
           throw ConfigError(
               "config: placement must be preprocess or posthoc, got '" + v +
               "'");
       }},
  };
  return table;
}

void apply_assignment(ExperimentConfig& cfg, const std::string& key,
                      const std::string& value) {
  auto it = setters().find(key);
  if (it == setters().end())
    throw ConfigError("config: unknown key '" + key + "'");
  it->second(cfg, value);
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [key, fn] : setters()) k.push_back(key);
    return k;
  }();
  return keys;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: " + path + ":" + std::to_string(lineno) +
                        ": expected 'key = value'");
    apply_assignment(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  validate(cfg);
  return cfg;
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  std::size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("config: override must be key=value, got '" + assignment +
                      "'");
  apply_assignment(cfg, trim(assignment.substr(0, eq)),
                   trim(assignment.substr(eq + 1)));
}

void validate(const ExperimentConfig& cfg) {
  auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
  if (cfg.output_dir.empty()) fail("output_dir must not be empty");
  if (cfg.count < 2) fail("dataset.count must be >= 2");
  if (cfg.size < 16) fail("dataset.size must be >= 16");
  if (cfg.train_fraction <= 0.0 || cfg.train_fraction >= 1.0)
    fail("dataset.train_fraction must lie in (0, 1)");
  if (cfg.psf_radius < 0) fail("psf.radius must be >= 0");
  if (cfg.psf_sigma <= 0.0) fail("psf.sigma must be positive");
  if (cfg.train_sigma < 0.0) fail("noise.train_sigma must be >= 0");
  if (cfg.experiment == ExperimentKind::A && cfg.train_sigma != 0.0)
    fail("experiment A trains without noise; set noise.train_sigma = 0");
  if (cfg.experiment == ExperimentKind::B && cfg.train_sigma <= 0.0)
    fail("experiment B needs noise.train_sigma > 0");
  for (double s : cfg.test_sigmas)
    if (s < 0.0) fail("noise.test_sigmas must be >= 0");
  if (cfg.eval_sigma <= 0.0) fail("noise.eval_sigma must be positive");
  if (cfg.stabilizer.filter_radius < 0) fail("stabilizer.filter_radius must be >= 0");
  if (cfg.stabilizer.filter_sigma <= 0.0) fail("stabilizer.filter_sigma must be positive");
  if (cfg.stabilizer.lambda <= 0.0) fail("stabilizer.lambda must be positive");
  if (cfg.stabilizer.iterations < 1) fail("stabilizer.iterations must be >= 1");
  for (int w : cfg.network.widths)
    if (w < 1) fail("network.widths must be >= 1");
  for (int k : cfg.network.kernels)
    if (k < 1 || k % 2 == 0) fail("network.kernels must be odd and positive");
  if (cfg.network.base_width < 1) fail("network.base_width must be >= 1");
  if (cfg.network.arch == NetworkArch::MiniUNet && cfg.size % 2 != 0)
    fail("mini_unet needs an even dataset.size");
  if (cfg.epochs < 0) fail("train.epochs must be >= 0");
  if (cfg.batch_size < 1) fail("train.batch_size must be >= 1");
  if (cfg.learning_rate <= 0.0) fail("train.learning_rate must be positive");
  if (cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 < 0.0 || cfg.beta2 >= 1.0)
    fail("train.beta1/beta2 must lie in [0, 1)");
  if (cfg.gallery_count < 0) fail("gallery.count must be >= 0");
}

std::string to_text(const ExperimentConfig& cfg) {
  std::ostringstream out;
  const char* exp = cfg.experiment == ExperimentKind::A   ? "A"
                    : cfg.experiment == ExperimentKind::B ? "B"
                                                          : "sweep";
  out << "experiment = " << exp << '\n';
  out << "seed = " << cfg.seed << '\n';
  out << "output_dir = " << cfg.output_dir << '\n';
  out << "dataset.dir = " << cfg.dataset_dir << '\n';
  out << "dataset.count = " << cfg.count << '\n';
  out << "dataset.size = " << cfg.size << '\n';
  out << "dataset.train_fraction = " << format_double(cfg.train_fraction) << '\n';
  out << "psf.radius = " << cfg.psf_radius << '\n';
  out << "psf.sigma = " << format_double(cfg.psf_sigma) << '\n';
  out << "noise.train_sigma = " << format_double(cfg.train_sigma) << '\n';
  out << "noise.test_sigmas = ";
  for (std::size_t i = 0; i < cfg.test_sigmas.size(); ++i)
    out << (i ? "," : "") << format_double(cfg.test_sigmas[i]);
  out << '\n';
  out << "noise.eval_sigma = " << format_double(cfg.eval_sigma) << '\n';
  out << "stabilizer.filter_radius = " << cfg.stabilizer.filter_radius << '\n';
  out << "stabilizer.filter_sigma = " << format_double(cfg.stabilizer.filter_sigma)
      << '\n';
  out << "stabilizer.method = "
      << (cfg.stabilizer.method == IterativeMethod::Cgls ? "cgls" : "landweber")
      << '\n';
  out << "stabilizer.lambda = " << format_double(cfg.stabilizer.lambda) << '\n';
  out << "stabilizer.iterations = " << cfg.stabilizer.iterations << '\n';
  out << "network.arch = "
      << (cfg.network.arch == NetworkArch::SSNet3L ? "ssnet3l" : "mini_unet")
      << '\n';
  out << "network.widths = " << cfg.network.widths[0] << ','
      << cfg.network.widths[1] << '\n';
  out << "network.kernels = " << cfg.network.kernels[0] << ','
      << cfg.network.kernels[1] << ',' << cfg.network.kernels[2] << '\n';
  out << "network.input_skip = " << (cfg.network.input_skip ? "true" : "false")
      << '\n';
  out << "network.base_width = " << cfg.network.base_width << '\n';
  out << "train.epochs = " << cfg.epochs << '\n';
  out << "train.batch_size = " << cfg.batch_size << '\n';
  out << "train.learning_rate = " << format_double(cfg.learning_rate) << '\n';
  out << "train.beta1 = " << format_double(cfg.beta1) << '\n';
  out << "train.beta2 = " << format_double(cfg.beta2) << '\n';
  out << "gallery.count = " << cfg.gallery_count << '\n';
  out << "placement = " << (cfg.posthoc_composition ? "posthoc" : "preprocess")
      << '\n';
  return out.str();
}

}  // namespace deblur
