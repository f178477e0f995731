#include "deblur/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "deblur/errors.hpp"
#include "deblur/noise.hpp"
#include "deblur/rng.hpp"

namespace deblur {

namespace {

// Explicit Fisher-Yates so the visitation order is reproducible bit-for-bit
// regardless of standard-library shuffle internals.
void shuffle_indices(std::vector<int>& idx, std::uint64_t seed) {
  auto rng = make_rng(seed);
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = std::size_t(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
}

}  // namespace

TrainResult train(NetworkModel& model, const std::vector<TrainPair>& data,
                  const TrainConfig& config, const InputTransform& preprocess) {
  if (data.empty()) throw InvalidParameter("train: dataset is empty");
  if (config.epochs < 0) throw InvalidParameter("train: epochs must be >= 0");
  if (config.batch_size < 1)
    throw InvalidParameter("train: batch_size must be >= 1");
  if (config.injection_sigma < 0.0)
    throw InvalidParameter("train: injection_sigma must be >= 0");
  for (const TrainPair& pair : data) {
    if (!pair.input.same_shape(pair.target))
      throw DimensionError("train: input/target shapes differ");
    if (!pair.input.same_shape(data.front().input))
      throw DimensionError("train: all samples must share one shape");
  }

  const int n = int(data.size());

  // Without injection the preprocessed inputs never change, so apply the
  // transform once up front instead of once per epoch.
  std::vector<Image> fixed_inputs;
  if (config.injection_sigma == 0.0 && preprocess) {
    fixed_inputs.reserve(data.size());
    for (const TrainPair& pair : data) fixed_inputs.push_back(preprocess(pair.input));
  }

  const std::vector<Param*> params = model.params();
  AdamState opt_state;

  TrainResult result;
  result.loss_history.reserve(std::size_t(config.epochs));

  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const std::uint64_t shuffle_seed = derive_seed(config.seed, 2 * std::uint64_t(epoch));
    const std::uint64_t noise_base = derive_seed(config.seed, 2 * std::uint64_t(epoch) + 1);
    shuffle_indices(order, shuffle_seed);

    double epoch_loss = 0.0;
    for (int start = 0; start < n; start += config.batch_size) {
      const int batch_n = std::min(config.batch_size, n - start);
      model.zero_grads();
      for (int b = 0; b < batch_n; ++b) {
        const int idx = order[std::size_t(start + b)];
        double loss;
        if (config.injection_sigma > 0.0) {
          Image input = add_noise(data[std::size_t(idx)].input,
                                  {config.injection_sigma,
                                   derive_seed(noise_base, std::uint64_t(idx))})
                            .image;
          if (preprocess) input = preprocess(input);
          loss = model.backward(input, data[std::size_t(idx)].target);
        } else if (preprocess) {
          loss = model.backward(fixed_inputs[std::size_t(idx)],
                                data[std::size_t(idx)].target);
        } else {
          loss = model.backward(data[std::size_t(idx)].input,
                                data[std::size_t(idx)].target);
        }
        epoch_loss += loss;
      }
      if (batch_n > 1) {
        const double scale = 1.0 / double(batch_n);
        for (Param* p : params)
          for (double& g : p->grad.v) g *= scale;
      }
      adam_step(params, config.adam, opt_state);
    }

    const double mean_loss = epoch_loss / double(n);
    if (!std::isfinite(mean_loss))
      throw DivergenceError("train: non-finite mean loss at epoch " +
                            std::to_string(epoch));
    result.loss_history.push_back(mean_loss);
  }

  return result;
}

void write_loss_csv(const std::string& path,
                    const std::vector<double>& loss_history) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("write_loss_csv: cannot open " + path);
  out << "epoch,mean_loss\n";
  char buf[64];
  for (std::size_t i = 0; i < loss_history.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", loss_history[i]);
    out << i << ',' << buf << '\n';
  }
  if (!out) throw IoError("write_loss_csv: write failed for " + path);
}

}  // namespace deblur
