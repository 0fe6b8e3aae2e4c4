#pragma once

#include <cmath>
#include <functional>

#include "pachinko/layers.hpp"
#include "pachinko/matrix.hpp"

namespace pachinko {

// Central finite differences against an analytic gradient.
// f evaluates the scalar objective at the current point; point is mutated
// in place around each coordinate and restored.
inline double grad_check(const std::function<double()>& f, Matrix& point, const Matrix& analytic,
                         double h = 1e-5) {
  if (!point.same_shape(analytic)) throw std::invalid_argument("grad_check: shape mismatch");
  double worst = 0.0;
  for (size_t i = 0; i < point.size(); ++i) {
    double saved = point.data[i];
    point.data[i] = saved + h;
    double fp = f();
    point.data[i] = saved - h;
    double fm = f();
    point.data[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm)) throw NumericError("grad_check: f non-finite near point");
    double numeric = (fp - fm) / (2.0 * h);
    double a = analytic.data[i];
    double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace pachinko
