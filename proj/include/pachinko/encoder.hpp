#pragma once

#include <cmath>
#include <vector>

#include "pachinko/architecture.hpp"
#include "pachinko/layers.hpp"
#include "pachinko/matrix.hpp"
#include "pachinko/rng.hpp"

namespace pachinko {

// One MLP per virtual DAG level. The mean head is linear; the log-variance
// head is followed by the configured normalization.
struct EncoderLevelParams {
  Matrix W1, b1;   // V x H
  Matrix W2, b2;   // H x H
  Matrix Wmu, bmu; // H x D
  Matrix Wu, bu;   // H x D
  NormParams u_norm;
};

struct EncoderParams {
  int hidden = 100;
  std::vector<EncoderLevelParams> levels;

  static EncoderParams init(const ArchLayout& lay, int hidden, NormMode u_norm_mode, Rng& rng) {
    EncoderParams enc;
    enc.hidden = hidden;
    int V = lay.vocab;
    auto gaussian = [&rng](int r, int c) {
      Matrix m(r, c);
      double scale = std::sqrt(2.0 / (r + c));
      for (double& v : m.data) v = scale * rng.normal();
      return m;
    };
    for (const LevelLayout& L : lay.levels) {
      EncoderLevelParams p;
      p.W1 = gaussian(V, hidden);
      p.b1 = Matrix(1, hidden);
      p.W2 = gaussian(hidden, hidden);
      p.b2 = Matrix(1, hidden);
      p.Wmu = gaussian(hidden, L.total_dim);
      p.bmu = Matrix(1, L.total_dim);
      p.Wu = gaussian(hidden, L.total_dim);
      p.bu = Matrix(1, L.total_dim);
      p.u_norm = NormParams::make(u_norm_mode, L.total_dim);
      enc.levels.push_back(std::move(p));
    }
    return enc;
  }
};

struct EncodeLevelCache {
  LayerCache c1, c2, cmu, cu;
  NormCache u_norm_cache;
  Matrix mu;  // B x D
  Matrix u;   // B x D, normalized log-variance
};

struct EncodeResult {
  Matrix xf;  // frequency-normalized input, B x V
  std::vector<EncodeLevelCache> levels;
};

// Count rows are normalized to frequencies so the posterior is invariant to
// document length.
inline Matrix normalize_counts(const Matrix& counts) {
  Matrix xf(counts.rows, counts.cols);
  for (int i = 0; i < counts.rows; ++i) {
    double total = 0.0;
    for (int j = 0; j < counts.cols; ++j) {
      if (counts(i, j) < 0.0) throw std::invalid_argument("encode: negative count");
      total += counts(i, j);
    }
    if (!(total > 0.0)) throw std::invalid_argument("encode: all-zero count row " + std::to_string(i));
    for (int j = 0; j < counts.cols; ++j) xf(i, j) = counts(i, j) / total;
  }
  return xf;
}

inline EncodeResult encode(const Matrix& counts, EncoderParams& enc, const ArchLayout& lay,
                           bool training) {
  require_shape(counts, counts.rows, lay.vocab, "encode input");
  EncodeResult res;
  res.xf = normalize_counts(counts);
  res.levels.resize(enc.levels.size());
  for (size_t l = 0; l < enc.levels.size(); ++l) {
    EncoderLevelParams& p = enc.levels[l];
    EncodeLevelCache& c = res.levels[l];
    Matrix h1 = layer_forward(res.xf, p.W1, p.b1, Activation::Softplus, &c.c1);
    Matrix h2 = layer_forward(h1, p.W2, p.b2, Activation::Softplus, &c.c2);
    c.mu = layer_forward(h2, p.Wmu, p.bmu, Activation::Linear, &c.cmu);
    Matrix u_raw = layer_forward(h2, p.Wu, p.bu, Activation::Linear, &c.cu);
    c.u = normalize_forward(u_raw, p.u_norm, training, &c.u_norm_cache);
  }
  return res;
}

struct EncoderLevelGrads {
  Matrix gW1, gb1, gW2, gb2, gWmu, gbmu, gWu, gbu, g_norm_gain, g_norm_shift;
};

// Backprop one level given upstream gradients on mu and on the normalized u.
inline EncoderLevelGrads encoder_level_backward(const EncoderLevelParams& p, const EncodeLevelCache& c,
                                                const Matrix& g_mu, const Matrix& g_u) {
  EncoderLevelGrads g;
  NormGrads ng = normalize_backward(c.u_norm_cache, p.u_norm, g_u);
  g.g_norm_gain = std::move(ng.ggain);
  g.g_norm_shift = std::move(ng.gshift);
  LayerGrads gu = layer_backward(c.cu, p.Wu, ng.gu);
  LayerGrads gm = layer_backward(c.cmu, p.Wmu, g_mu);
  g.gWu = std::move(gu.gW);
  g.gbu = std::move(gu.gbias);
  g.gWmu = std::move(gm.gW);
  g.gbmu = std::move(gm.gbias);
  Matrix g_h2 = gu.gx;
  axpy(1.0, gm.gx, g_h2);
  LayerGrads g2 = layer_backward(c.c2, p.W2, g_h2);
  g.gW2 = std::move(g2.gW);
  g.gb2 = std::move(g2.gbias);
  LayerGrads g1 = layer_backward(c.c1, p.W1, g2.gx);
  g.gW1 = std::move(g1.gW);
  g.gb1 = std::move(g1.gbias);
  return g;
}

}  // namespace pachinko
