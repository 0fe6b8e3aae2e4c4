#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pachinko/priors.hpp"
#include "pachinko/rng.hpp"
#include "test_util.hpp"

using namespace pachinko;

namespace {

// Numeric oracle for the softmax-basis Laplace approximation, independent of
// the closed form: maximize the Dirichlet density in the softmax basis under
// the zero-sum gauge, build the Hessian by finite differences of the log
// density, and invert it on the zero-sum complement.
struct LaplaceOracle {
  std::vector<double> mean;
  std::vector<double> variance;
};

double softmax_log_density(const std::vector<double>& alpha, const std::vector<double>& g) {
  // log p(g) = sum_k alpha_k g_k - alpha0 log sum_i exp(g_i) + const
  double a0 = 0.0, s = 0.0, mx = g[0];
  for (double gk : g) mx = std::max(mx, gk);
  for (size_t k = 0; k < g.size(); ++k) {
    a0 += alpha[k];
    s += std::exp(g[k] - mx);
  }
  double lse = mx + std::log(s);
  double val = 0.0;
  for (size_t k = 0; k < g.size(); ++k) val += alpha[k] * g[k];
  return val - a0 * lse;
}

LaplaceOracle laplace_oracle(const std::vector<double>& alpha) {
  int K = static_cast<int>(alpha.size());
  double a0 = 0.0;
  for (double a : alpha) a0 += a;

  // mode by projected gradient ascent; gradient is alpha - alpha0 * softmax(g)
  std::vector<double> g(K, 0.0);
  for (int iter = 0; iter < 200000; ++iter) {
    double mx = g[0];
    for (double x : g) mx = std::max(mx, x);
    double s = 0.0;
    for (int k = 0; k < K; ++k) s += std::exp(g[k] - mx);
    std::vector<double> grad(K);
    double gnorm = 0.0;
    for (int k = 0; k < K; ++k) {
      grad[k] = alpha[k] - a0 * std::exp(g[k] - mx) / s;
      gnorm += grad[k] * grad[k];
    }
    double step = 0.5 / a0;
    double mean_shift = 0.0;
    for (int k = 0; k < K; ++k) {
      g[k] += step * grad[k];
      mean_shift += g[k];
    }
    mean_shift /= K;
    for (int k = 0; k < K; ++k) g[k] -= mean_shift;  // zero-sum gauge
    if (gnorm < 1e-26) break;
  }

  // negative Hessian by central finite differences of the log density
  double h = 1e-4;
  std::vector<std::vector<double>> negH(K, std::vector<double>(K));
  double f0 = softmax_log_density(alpha, g);
  for (int i = 0; i < K; ++i)
    for (int j = i; j < K; ++j) {
      std::vector<double> gp = g;
      double fpp, fpm, fmp, fmm;
      if (i == j) {
        gp[i] = g[i] + h;
        fpp = softmax_log_density(alpha, gp);
        gp[i] = g[i] - h;
        fmm = softmax_log_density(alpha, gp);
        negH[i][i] = -(fpp - 2 * f0 + fmm) / (h * h);
      } else {
        gp[i] = g[i] + h;
        gp[j] = g[j] + h;
        fpp = softmax_log_density(alpha, gp);
        gp[j] = g[j] - h;
        fpm = softmax_log_density(alpha, gp);
        gp[i] = g[i] - h;
        gp[j] = g[j] + h;
        fmp = softmax_log_density(alpha, gp);
        gp[j] = g[j] - h;
        fmm = softmax_log_density(alpha, gp);
        negH[i][j] = negH[j][i] = -(fpp - fpm - fmp + fmm) / (4 * h * h);
      }
    }

  // The Hessian is singular along the all-ones gauge direction. Adding the
  // projector c * 11^T/K makes it invertible; subtracting (1/c) 11^T/K from
  // the inverse leaves exactly the covariance on the zero-sum complement.
  double c = 1.0;
  std::vector<std::vector<double>> A = negH;
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j) A[i][j] += c / K;
  LaplaceOracle out;
  out.mean = g;
  out.variance.resize(K);
  for (int k = 0; k < K; ++k) {
    std::vector<double> e(K, 0.0);
    e[k] = 1.0;
    std::vector<double> col = testutil::solve_linear(A, e);
    out.variance[k] = col[k] - 1.0 / (c * K);
  }
  return out;
}

}  // namespace

TEST_CASE("laplace approximation: symmetric alpha = (1,1)") {
  auto sg = laplace_approx_dirichlet(DirichletPrior{{1.0, 1.0}});
  REQUIRE(sg.mean[0] == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(sg.mean[1] == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(sg.variance[0] == Catch::Approx(0.5).margin(1e-12));
  REQUIRE(sg.variance[1] == Catch::Approx(0.5).margin(1e-12));

  LaplaceOracle o = laplace_oracle({1.0, 1.0});
  REQUIRE(sg.variance[0] == Catch::Approx(o.variance[0]).margin(1e-6));
}

TEST_CASE("laplace approximation: symmetric concentration has zero mean") {
  for (double c : {0.1, 0.5, 2.0, 7.0}) {
    auto sg = laplace_approx_dirichlet(DirichletPrior::symmetric(5, c));
    for (double m : sg.mean) REQUIRE(m == Catch::Approx(0.0).margin(1e-12));
  }
}

TEST_CASE("laplace approximation matches the numeric mode/Hessian oracle") {
  auto check = [](const std::vector<double>& alpha) {
    auto sg = laplace_approx_dirichlet(DirichletPrior{alpha});
    LaplaceOracle o = laplace_oracle(alpha);
    for (size_t k = 0; k < alpha.size(); ++k) {
      REQUIRE(sg.mean[k] == Catch::Approx(o.mean[k]).margin(1e-6));
      REQUIRE(sg.variance[k] == Catch::Approx(o.variance[k]).margin(1e-6));
    }
  };
  check({2.0, 1.0, 1.0});
  check({0.5, 1.5});
  check({3.0, 0.7, 1.2, 2.5});
}

TEST_CASE("laplace approximation is permutation-equivariant") {
  std::vector<double> alpha = {0.4, 1.1, 2.7};
  auto a = laplace_approx_dirichlet(DirichletPrior{alpha});
  auto b = laplace_approx_dirichlet(DirichletPrior{{2.7, 0.4, 1.1}});
  REQUIRE(a.mean[0] == Catch::Approx(b.mean[1]).margin(1e-15));
  REQUIRE(a.variance[2] == Catch::Approx(b.variance[0]).margin(1e-15));
}

TEST_CASE("laplace approximation rejects non-positive concentration") {
  REQUIRE_THROWS_AS(laplace_approx_dirichlet(DirichletPrior{{1.0, 0.0}}), std::domain_error);
  REQUIRE_THROWS_AS(laplace_approx_dirichlet(DirichletPrior{{1.0, -2.0}}), std::domain_error);
  REQUIRE_THROWS_AS(laplace_approx_dirichlet(DirichletPrior{{1.0}}), std::domain_error);
}

TEST_CASE("kl_diag_gaussian examples") {
  std::vector<double> m = {0.3, -1.2, 0.0};
  std::vector<double> lv = {0.1, -0.5, 0.7};
  REQUIRE(kl_diag_gaussian(m, lv, m, lv) == 0.0);

  // 1-D, q = N(1,1), p = N(0,1): only the mean term remains
  REQUIRE(kl_diag_gaussian({1.0}, {0.0}, {0.0}, {0.0}) == Catch::Approx(0.5).margin(1e-15));
}

TEST_CASE("kl_diag_gaussian matches a Monte-Carlo estimate") {
  Rng rng(2024);
  for (int trial = 0; trial < 3; ++trial) {
    std::vector<double> qm(5), ql(5), pm(5), pl(5);
    for (int k = 0; k < 5; ++k) {
      qm[k] = rng.normal();
      ql[k] = 0.5 * rng.normal();
      pm[k] = rng.normal();
      pl[k] = 0.5 * rng.normal();
    }
    double closed = kl_diag_gaussian(qm, ql, pm, pl);
    double mc = 0.0;
    const int N = 1000000;
    for (int i = 0; i < N; ++i) {
      double logq = 0.0, logp = 0.0;
      for (int k = 0; k < 5; ++k) {
        double x = qm[k] + std::exp(0.5 * ql[k]) * rng.normal();
        double dq = x - qm[k], dp = x - pm[k];
        logq += -0.5 * (ql[k] + dq * dq / std::exp(ql[k]));
        logp += -0.5 * (pl[k] + dp * dp / std::exp(pl[k]));
      }
      mc += (logq - logp) / N;
    }
    REQUIRE(closed == Catch::Approx(mc).margin(0.01));
  }
}

TEST_CASE("kl_diag_gaussian is non-negative and zero only at q = p") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> qm(4), ql(4), pm(4), pl(4);
    for (int k = 0; k < 4; ++k) {
      qm[k] = 2.0 * rng.normal();
      ql[k] = rng.normal();
      pm[k] = 2.0 * rng.normal();
      pl[k] = rng.normal();
    }
    REQUIRE(kl_diag_gaussian(qm, ql, pm, pl) >= 0.0);
  }
}

TEST_CASE("kl_grad_logvar_standard_prior examples and consistency") {
  auto g0 = kl_grad_logvar_standard_prior({0.0});
  REQUIRE(g0[0] == 0.0);
  auto g1 = kl_grad_logvar_standard_prior({std::log(2.0)});
  REQUIRE(g1[0] == Catch::Approx(0.5).margin(1e-12));

  // matches the numeric derivative of the closed-form KL against N(0, I)
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    double u = rng.normal();
    auto g = kl_grad_logvar_standard_prior({u});
    auto f = [&](const std::vector<double>& x) {
      return kl_diag_gaussian({0.7}, {x[0]}, {0.0}, {0.0});
    };
    auto numeric = testutil::numeric_gradient(f, {u});
    REQUIRE(g[0] == Catch::Approx(numeric[0]).margin(1e-6));
  }
}

TEST_CASE("kl gradient helpers match finite differences") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    double qm = rng.normal(), ql = rng.normal(), pm = rng.normal(), pl = rng.normal();
    auto fm = [&](const std::vector<double>& x) { return kl_diag_gaussian_1(x[0], ql, pm, pl); };
    auto fl = [&](const std::vector<double>& x) { return kl_diag_gaussian_1(qm, x[0], pm, pl); };
    REQUIRE(kl_grad_qmean_1(qm, ql, pm, pl) ==
            Catch::Approx(testutil::numeric_gradient(fm, {qm})[0]).margin(1e-6));
    REQUIRE(kl_grad_qlogvar_1(qm, ql, pm, pl) ==
            Catch::Approx(testutil::numeric_gradient(fl, {ql})[0]).margin(1e-6));
  }
}
