#pragma once

#include <stdexcept>
#include <vector>

#include "pachinko/corpus.hpp"
#include "pachinko/matrix.hpp"
#include "pachinko/rng.hpp"

namespace pachinko {

// Collapsed Gibbs sampler for LDA (3-PAM). Count matrices are maintained
// incrementally and must stay consistent marginals of z.
struct GibbsState {
  int K = 0;
  int V = 0;
  double alpha = 0.0;  // symmetric document-topic prior
  double eta = 0.0;    // symmetric topic-word prior
  std::vector<std::vector<int>> tokens;  // expanded word ids per document
  std::vector<std::vector<int>> z;       // topic assignment per token
  Matrix n_dk;                           // D x K
  Matrix n_kv;                           // K x V
  std::vector<double> n_k;               // K
  Rng rng;

  GibbsState() : rng(0) {}
};

inline GibbsState gibbs_init(const Corpus& corpus, int K, double alpha, double eta, uint64_t seed) {
  corpus.validate();
  if (K < 1) throw std::invalid_argument("gibbs_init: K must be >= 1");
  if (!(alpha > 0.0) || !(eta > 0.0))
    throw std::invalid_argument("gibbs_init: hyperparameters must be positive");
  GibbsState s;
  s.K = K;
  s.V = corpus.vocab_size();
  s.alpha = alpha;
  s.eta = eta;
  s.rng = Rng(seed);
  int D = corpus.num_docs();
  s.n_dk = Matrix(D, K);
  s.n_kv = Matrix(K, s.V);
  s.n_k.assign(K, 0.0);
  s.tokens.resize(D);
  s.z.resize(D);
  for (int d = 0; d < D; ++d) {
    for (auto& [v, c] : corpus.documents[d].counts)
      for (int i = 0; i < c; ++i) s.tokens[d].push_back(v);
    s.z[d].resize(s.tokens[d].size());
    for (size_t n = 0; n < s.tokens[d].size(); ++n) {
      int k = s.rng.uniform_int(K);
      s.z[d][n] = k;
      s.n_dk(d, k) += 1;
      s.n_kv(k, s.tokens[d][n]) += 1;
      s.n_k[k] += 1;
    }
  }
  return s;
}

// Unnormalized conditional p(z=k | rest) for word v in document d, with the
// token in question already removed from the counts:
// (n_dk + alpha) (n_kv + eta) / (n_k + V eta).
inline std::vector<double> gibbs_conditional(const GibbsState& s, int d, int v) {
  std::vector<double> w(s.K);
  for (int k = 0; k < s.K; ++k)
    w[k] = (s.n_dk(d, k) + s.alpha) * (s.n_kv(k, v) + s.eta) / (s.n_k[k] + s.V * s.eta);
  return w;
}

// One full pass, counts decremented and incremented around each draw.
inline void gibbs_sweep(GibbsState& s) {
  for (size_t d = 0; d < s.tokens.size(); ++d) {
    for (size_t n = 0; n < s.tokens[d].size(); ++n) {
      int v = s.tokens[d][n];
      int old_k = s.z[d][n];
      s.n_dk(static_cast<int>(d), old_k) -= 1;
      s.n_kv(old_k, v) -= 1;
      s.n_k[old_k] -= 1;
      std::vector<double> w = gibbs_conditional(s, static_cast<int>(d), v);
      double total = 0.0;
      for (double x : w) total += x;
      if (!(total > 0.0)) throw std::runtime_error("gibbs_sweep: conditional weights underflowed");
      int new_k = s.rng.discrete(w);
      s.z[d][n] = new_k;
      s.n_dk(static_cast<int>(d), new_k) += 1;
      s.n_kv(new_k, v) += 1;
      s.n_k[new_k] += 1;
    }
  }
}

struct GibbsEstimate {
  Matrix topics;       // K x V simplex rows
  Matrix proportions;  // D x K simplex rows
};

// Posterior-mean point estimates from the current counts.
inline GibbsEstimate gibbs_estimate(const GibbsState& s) {
  GibbsEstimate e;
  e.topics = Matrix(s.K, s.V);
  for (int k = 0; k < s.K; ++k) {
    double denom = s.n_k[k] + s.V * s.eta;
    for (int v = 0; v < s.V; ++v) e.topics(k, v) = (s.n_kv(k, v) + s.eta) / denom;
  }
  int D = s.n_dk.rows;
  e.proportions = Matrix(D, s.K);
  for (int d = 0; d < D; ++d) {
    double nd = static_cast<double>(s.tokens[d].size());
    double denom = nd + s.K * s.alpha;
    for (int k = 0; k < s.K; ++k) e.proportions(d, k) = (s.n_dk(d, k) + s.alpha) / denom;
  }
  return e;
}

// Recompute counts from z; used by the consistency checks.
inline bool gibbs_counts_consistent(const GibbsState& s) {
  Matrix n_dk(s.n_dk.rows, s.K), n_kv(s.K, s.V);
  std::vector<double> n_k(s.K, 0.0);
  for (size_t d = 0; d < s.tokens.size(); ++d)
    for (size_t n = 0; n < s.tokens[d].size(); ++n) {
      int k = s.z[d][n];
      n_dk(static_cast<int>(d), k) += 1;
      n_kv(k, s.tokens[d][n]) += 1;
      n_k[k] += 1;
    }
  return n_dk == s.n_dk && n_kv == s.n_kv && n_k == s.n_k;
}

}  // namespace pachinko
