#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace pachinko {

// Deterministic RNG. Distribution transforms are written out explicitly so a
// fixed seed reproduces the exact same stream on every standard library.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t raw() { return engine_(); }

  // Uniform in (0, 1); never returns 0 so log(u) is safe.
  double uniform() {
    uint64_t r = engine_() >> 11;  // 53 bits
    double u = (static_cast<double>(r) + 0.5) * (1.0 / 9007199254740992.0);
    return u;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  int uniform_int(int n) {  // [0, n)
    if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
    return static_cast<int>(engine_() % static_cast<uint64_t>(n));
  }

  // Box-Muller.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Marsaglia-Tsang; shape < 1 handled through the boost gamma(a+1) * U^(1/a).
  double gamma(double shape) {
    if (shape <= 0.0) throw std::invalid_argument("gamma: shape must be positive");
    if (shape < 1.0) {
      double u = uniform();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    double d = shape - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  std::vector<double> dirichlet(const std::vector<double>& alpha) {
    std::vector<double> out(alpha.size());
    double sum = 0.0;
    for (size_t i = 0; i < alpha.size(); ++i) {
      out[i] = gamma(alpha[i]);
      sum += out[i];
    }
    if (sum <= 0.0) {
      // extreme underflow with tiny alphas; fall back to a uniform draw
      double u = 1.0 / static_cast<double>(alpha.size());
      for (double& v : out) v = u;
      return out;
    }
    for (double& v : out) v /= sum;
    return out;
  }

  // Sample index from unnormalized non-negative weights.
  int discrete(const std::vector<double>& w) {
    double total = 0.0;
    for (double x : w) total += x;
    if (!(total > 0.0)) throw std::runtime_error("discrete: weights sum to zero");
    double t = uniform() * total;
    double acc = 0.0;
    for (size_t i = 0; i < w.size(); ++i) {
      acc += w[i];
      if (t <= acc) return static_cast<int>(i);
    }
    return static_cast<int>(w.size()) - 1;
  }

  int discrete(const double* w, int n) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += w[i];
    if (!(total > 0.0)) throw std::runtime_error("discrete: weights sum to zero");
    double t = uniform() * total;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      acc += w[i];
      if (t <= acc) return i;
    }
    return n - 1;
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace pachinko
