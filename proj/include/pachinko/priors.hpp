#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "pachinko/layers.hpp"

namespace pachinko {

struct DirichletPrior {
  std::vector<double> concentration;

  static DirichletPrior symmetric(int k, double alpha) {
    if (k < 1 || alpha <= 0.0) throw std::invalid_argument("DirichletPrior: bad parameters");
    return DirichletPrior{std::vector<double>(k, alpha)};
  }

  int dim() const { return static_cast<int>(concentration.size()); }

  void validate() const {
    for (double a : concentration)
      if (!(a > 0.0) || !std::isfinite(a)) throw std::domain_error("DirichletPrior: concentration must be positive");
  }
};

// Gaussian approximation of a Dirichlet in the softmax basis.
struct SoftmaxGaussianPrior {
  std::vector<double> mean;
  std::vector<double> variance;

  int dim() const { return static_cast<int>(mean.size()); }
  double logvar(int k) const { return std::log(variance[k]); }
};

// mu0_k = log a_k - mean(log a); s0_k = (1/a_k)(1 - 2/K) + (1/K^2) sum 1/a_i.
// Full K-dimensional softmax basis with the zero-mean-log gauge.
inline SoftmaxGaussianPrior laplace_approx_dirichlet(const DirichletPrior& prior) {
  prior.validate();
  int K = prior.dim();
  if (K < 2) throw std::domain_error("laplace_approx_dirichlet: need K >= 2");
  SoftmaxGaussianPrior out;
  out.mean.resize(K);
  out.variance.resize(K);
  double mean_log = 0.0, sum_inv = 0.0;
  for (double a : prior.concentration) {
    mean_log += std::log(a);
    sum_inv += 1.0 / a;
  }
  mean_log /= K;
  for (int k = 0; k < K; ++k) {
    double a = prior.concentration[k];
    out.mean[k] = std::log(a) - mean_log;
    out.variance[k] = (1.0 / a) * (1.0 - 2.0 / K) + sum_inv / (K * K);
  }
  return out;
}

// KL[N(q_mean, e^q_logvar) || N(p_mean, e^p_logvar)], diagonal, summed over dims.
inline double kl_diag_gaussian(const std::vector<double>& q_mean, const std::vector<double>& q_logvar,
                               const std::vector<double>& p_mean, const std::vector<double>& p_logvar) {
  size_t n = q_mean.size();
  if (q_logvar.size() != n || p_mean.size() != n || p_logvar.size() != n)
    throw std::invalid_argument("kl_diag_gaussian: length mismatch");
  double kl = 0.0;
  for (size_t k = 0; k < n; ++k) {
    double qm = q_mean[k], ql = q_logvar[k], pm = p_mean[k], pl = p_logvar[k];
    if (!std::isfinite(qm) || !std::isfinite(ql) || !std::isfinite(pm) || !std::isfinite(pl))
      throw NumericError("kl_diag_gaussian: non-finite input");
    double d = pm - qm;
    kl += 0.5 * (std::exp(ql - pl) + d * d / std::exp(pl) - 1.0 + pl - ql);
  }
  return kl;
}

// Scalar per-dimension KL against an arbitrary diagonal Gaussian prior.
inline double kl_diag_gaussian_1(double qm, double ql, double pm, double pl) {
  double d = pm - qm;
  return 0.5 * (std::exp(ql - pl) + d * d / std::exp(pl) - 1.0 + pl - ql);
}

// d KL / d q_mean and d KL / d q_logvar for the diagonal Gaussian KL.
inline double kl_grad_qmean_1(double qm, double /*ql*/, double pm, double pl) {
  return (qm - pm) / std::exp(pl);
}
inline double kl_grad_qlogvar_1(double /*qm*/, double ql, double /*pm*/, double pl) {
  return 0.5 * (std::exp(ql - pl) - 1.0);
}

// Gradient of KL[q || N(0, I)] with respect to the log-variance u: (e^u - 1)/2.
inline std::vector<double> kl_grad_logvar_standard_prior(const std::vector<double>& u) {
  std::vector<double> g(u.size());
  for (size_t k = 0; k < u.size(); ++k) {
    if (!std::isfinite(u[k])) throw NumericError("kl_grad_logvar_standard_prior: non-finite input");
    g[k] = 0.5 * (std::exp(u[k]) - 1.0);
  }
  return g;
}

}  // namespace pachinko
