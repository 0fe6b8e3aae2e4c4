#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "pachinko/layers.hpp"
#include "pachinko/matrix.hpp"

namespace pachinko {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// One optimizer slot per parameter block; moments are shaped like the block.
struct AdamState {
  long long t = 0;
  AdamConfig config;
  std::vector<Matrix> m, v;

  void attach(const std::vector<const Matrix*>& params) {
    m.clear();
    v.clear();
    for (const Matrix* p : params) {
      m.emplace_back(p->rows, p->cols);
      v.emplace_back(p->rows, p->cols);
    }
  }
};

// Standard Adam with bias correction over a list of parameter blocks.
inline void adam_step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads,
                      const std::vector<std::string>& names, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw std::invalid_argument("adam_step: block count mismatch");
  state.t += 1;
  double bc1 = 1.0 - std::pow(state.config.beta1, static_cast<double>(state.t));
  double bc2 = 1.0 - std::pow(state.config.beta2, static_cast<double>(state.t));
  for (size_t b = 0; b < params.size(); ++b) {
    Matrix& p = *params[b];
    const Matrix& g = *grads[b];
    if (!p.same_shape(g)) throw std::invalid_argument("adam_step: grad shape mismatch for " + names[b]);
    if (!all_finite(g)) throw NumericError("adam_step: non-finite gradient in block '" + names[b] + "'");
    Matrix& m = state.m[b];
    Matrix& v = state.v[b];
    const AdamConfig& c = state.config;
    for (size_t i = 0; i < p.size(); ++i) {
      m.data[i] = c.beta1 * m.data[i] + (1.0 - c.beta1) * g.data[i];
      v.data[i] = c.beta2 * v.data[i] + (1.0 - c.beta2) * g.data[i] * g.data[i];
      double mhat = m.data[i] / bc1;
      double vhat = v.data[i] / bc2;
      p.data[i] -= c.lr * mhat / (std::sqrt(vhat) + c.epsilon);
    }
  }
}

}  // namespace pachinko
