#include "deblur/adam.hpp"

#include <cmath>
#include <cstddef>

#include "deblur/errors.hpp"

namespace deblur {

void adam_step(const std::vector<Param*>& params, const AdamConfig& cfg,
               AdamState& state) {
  if (cfg.learning_rate <= 0.0)
    throw InvalidParameter("adam_step: learning_rate must be positive");
  if (cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 < 0.0 || cfg.beta2 >= 1.0)
    throw InvalidParameter("adam_step: betas must lie in [0, 1)");
  if (cfg.epsilon <= 0.0)
    throw InvalidParameter("adam_step: epsilon must be positive");

  if (state.t == 0) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t p = 0; p < params.size(); ++p) {
      state.m[p].assign(params[p]->value.v.size(), 0.0);
      state.v[p].assign(params[p]->value.v.size(), 0.0);
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw InvalidParameter("adam_step: state does not match parameter list");

  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, double(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, double(state.t));

  for (std::size_t p = 0; p < params.size(); ++p) {
    Param& prm = *params[p];
    std::vector<double>& m = state.m[p];
    std::vector<double>& v = state.v[p];
    if (m.size() != prm.value.v.size())
      throw InvalidParameter("adam_step: state does not match parameter list");
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double g = prm.grad.v[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      prm.value.v[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
  }
}

}  // namespace deblur
