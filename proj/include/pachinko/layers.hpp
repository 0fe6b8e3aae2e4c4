#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "pachinko/matrix.hpp"

namespace pachinko {

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Activation { Linear, Softplus, SoftmaxRows };

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// Row-wise softmax with max subtraction.
inline void softmax_row(const double* in, double* out, int n) {
  double mx = in[0];
  for (int j = 1; j < n; ++j) mx = std::max(mx, in[j]);
  double sum = 0.0;
  for (int j = 0; j < n; ++j) {
    out[j] = std::exp(in[j] - mx);
    sum += out[j];
  }
  for (int j = 0; j < n; ++j) out[j] /= sum;
}

inline Matrix softmax_rows(const Matrix& x) {
  Matrix y(x.rows, x.cols);
  for (int i = 0; i < x.rows; ++i) softmax_row(x.row_ptr(i), y.row_ptr(i), x.cols);
  return y;
}

// Backward through row-wise softmax given outputs y: g_in = y .* (g_out - (g_out . y)).
inline Matrix softmax_rows_backward(const Matrix& y, const Matrix& gy) {
  if (!y.same_shape(gy)) throw std::invalid_argument("softmax backward: shape mismatch");
  Matrix gx(y.rows, y.cols);
  for (int i = 0; i < y.rows; ++i) {
    const double* yi = y.row_ptr(i);
    const double* gi = gy.row_ptr(i);
    double dot = 0.0;
    for (int j = 0; j < y.cols; ++j) dot += gi[j] * yi[j];
    double* oi = gx.row_ptr(i);
    for (int j = 0; j < y.cols; ++j) oi[j] = yi[j] * (gi[j] - dot);
  }
  return gx;
}

struct LayerCache {
  Matrix x;    // input
  Matrix pre;  // pre-activation
  Matrix y;    // output
  Activation act = Activation::Linear;
};

inline Matrix layer_forward(const Matrix& x, const Matrix& W, const Matrix& bias, Activation act,
                            LayerCache* cache = nullptr) {
  if (x.cols != W.rows) throw std::invalid_argument("layer_forward: x/W shape mismatch");
  require_shape(bias, 1, W.cols, "layer_forward bias");
  if (!all_finite(x)) throw NumericError("layer_forward: non-finite input");
  Matrix pre = matmul(x, W);
  for (int i = 0; i < pre.rows; ++i)
    for (int j = 0; j < pre.cols; ++j) pre(i, j) += bias(0, j);
  Matrix y;
  switch (act) {
    case Activation::Linear:
      y = pre;
      break;
    case Activation::Softplus: {
      y = Matrix(pre.rows, pre.cols);
      for (size_t i = 0; i < pre.size(); ++i) y.data[i] = softplus(pre.data[i]);
      break;
    }
    case Activation::SoftmaxRows:
      y = softmax_rows(pre);
      break;
  }
  if (!all_finite(y)) throw NumericError("layer_forward: non-finite output");
  if (cache) {
    cache->x = x;
    cache->pre = std::move(pre);
    cache->y = y;
    cache->act = act;
  }
  return y;
}

struct LayerGrads {
  Matrix gx, gW, gbias;
};

inline LayerGrads layer_backward(const LayerCache& cache, const Matrix& W, const Matrix& gy) {
  if (!gy.same_shape(cache.y)) throw std::invalid_argument("layer_backward: upstream shape mismatch");
  Matrix gpre;
  switch (cache.act) {
    case Activation::Linear:
      gpre = gy;
      break;
    case Activation::Softplus: {
      gpre = Matrix(gy.rows, gy.cols);
      for (size_t i = 0; i < gy.size(); ++i) gpre.data[i] = gy.data[i] * sigmoid(cache.pre.data[i]);
      break;
    }
    case Activation::SoftmaxRows:
      gpre = softmax_rows_backward(cache.y, gy);
      break;
  }
  LayerGrads g;
  g.gx = matmul_bt(gpre, W);
  g.gW = matmul_at(cache.x, gpre);
  g.gbias = Matrix(1, gpre.cols);
  for (int i = 0; i < gpre.rows; ++i)
    for (int j = 0; j < gpre.cols; ++j) g.gbias(0, j) += gpre(i, j);
  return g;
}

// --- normalization ---------------------------------------------------------

enum class NormMode { None, BatchNorm, L2Norm };

inline std::string norm_mode_name(NormMode m) {
  switch (m) {
    case NormMode::None: return "none";
    case NormMode::BatchNorm: return "batchnorm";
    case NormMode::L2Norm: return "l2norm";
  }
  return "none";
}

inline NormMode norm_mode_from(const std::string& s) {
  if (s == "none") return NormMode::None;
  if (s == "batchnorm") return NormMode::BatchNorm;
  if (s == "l2norm") return NormMode::L2Norm;
  throw std::invalid_argument("unknown normalization mode '" + s + "'");
}

struct NormParams {
  NormMode mode = NormMode::None;
  Matrix gain;          // 1 x dim
  Matrix shift;         // 1 x dim (batchnorm only)
  Matrix running_mean;  // 1 x dim
  Matrix running_var;   // 1 x dim
  double epsilon = 1e-5;
  double momentum = 0.99;

  static NormParams make(NormMode mode, int dim) {
    NormParams p;
    p.mode = mode;
    p.gain = Matrix(1, dim, 1.0);
    p.shift = Matrix(1, dim, 0.0);
    p.running_mean = Matrix(1, dim, 0.0);
    p.running_var = Matrix(1, dim, 1.0);
    return p;
  }

  int dim() const { return gain.cols; }
};

struct NormCache {
  NormMode mode = NormMode::None;
  Matrix u;     // input
  Matrix xhat;  // standardized input (batchnorm)
  Matrix mean;  // 1 x dim batch mean
  Matrix inv_std;
  std::vector<double> row_norm;  // l2norm
};

// batchnorm training updates running stats in place; everything else is pure.
inline Matrix normalize_forward(const Matrix& u, NormParams& params, bool training,
                                NormCache* cache = nullptr) {
  if (cache) {
    cache->mode = params.mode;
    cache->u = u;
  }
  switch (params.mode) {
    case NormMode::None:
      return u;
    case NormMode::L2Norm: {
      require_shape(params.gain, 1, u.cols, "l2norm gain");
      Matrix y(u.rows, u.cols);
      std::vector<double> norms(u.rows);
      for (int i = 0; i < u.rows; ++i) {
        const double* ui = u.row_ptr(i);
        double s = 0.0;
        for (int j = 0; j < u.cols; ++j) s += ui[j] * ui[j];
        double n = std::sqrt(s);
        if (n < 1e-30) n = 1e-30;
        norms[i] = n;
        double* yi = y.row_ptr(i);
        for (int j = 0; j < u.cols; ++j) yi[j] = params.gain(0, j) * ui[j] / n;
      }
      if (cache) cache->row_norm = std::move(norms);
      return y;
    }
    case NormMode::BatchNorm: {
      require_shape(params.gain, 1, u.cols, "batchnorm gain");
      if (training && u.rows < 2)
        throw std::invalid_argument("batchnorm training needs batch size >= 2");
      Matrix mean(1, u.cols), var(1, u.cols);
      if (training) {
        for (int j = 0; j < u.cols; ++j) {
          double m = 0.0;
          for (int i = 0; i < u.rows; ++i) m += u(i, j);
          m /= u.rows;
          double v = 0.0;
          for (int i = 0; i < u.rows; ++i) {
            double d = u(i, j) - m;
            v += d * d;
          }
          v /= u.rows;
          mean(0, j) = m;
          var(0, j) = v;
          params.running_mean(0, j) =
              params.momentum * params.running_mean(0, j) + (1.0 - params.momentum) * m;
          params.running_var(0, j) =
              params.momentum * params.running_var(0, j) + (1.0 - params.momentum) * v;
        }
      } else {
        mean = params.running_mean;
        var = params.running_var;
      }
      Matrix y(u.rows, u.cols), xhat(u.rows, u.cols), inv_std(1, u.cols);
      for (int j = 0; j < u.cols; ++j) inv_std(0, j) = 1.0 / std::sqrt(var(0, j) + params.epsilon);
      for (int i = 0; i < u.rows; ++i)
        for (int j = 0; j < u.cols; ++j) {
          xhat(i, j) = (u(i, j) - mean(0, j)) * inv_std(0, j);
          y(i, j) = params.gain(0, j) * xhat(i, j) + params.shift(0, j);
        }
      if (cache) {
        cache->xhat = std::move(xhat);
        cache->mean = std::move(mean);
        cache->inv_std = std::move(inv_std);
      }
      return y;
    }
  }
  throw std::logic_error("unreachable");
}

struct NormGrads {
  Matrix gu, ggain, gshift;
};

// Backward assuming the batch statistics path (training mode for batchnorm).
inline NormGrads normalize_backward(const NormCache& cache, const NormParams& params, const Matrix& gy) {
  NormGrads g;
  switch (cache.mode) {
    case NormMode::None:
      g.gu = gy;
      g.ggain = Matrix(1, gy.cols);
      g.gshift = Matrix(1, gy.cols);
      return g;
    case NormMode::L2Norm: {
      const Matrix& u = cache.u;
      if (!gy.same_shape(u)) throw std::invalid_argument("l2norm backward: shape mismatch");
      g.gu = Matrix(u.rows, u.cols);
      g.ggain = Matrix(1, u.cols);
      g.gshift = Matrix(1, u.cols);
      for (int i = 0; i < u.rows; ++i) {
        double n = cache.row_norm[i];
        const double* ui = u.row_ptr(i);
        const double* gi = gy.row_ptr(i);
        double dot = 0.0;  // u . (gain .* gy)
        for (int j = 0; j < u.cols; ++j) dot += ui[j] * params.gain(0, j) * gi[j];
        double* oi = g.gu.row_ptr(i);
        for (int j = 0; j < u.cols; ++j) {
          oi[j] = params.gain(0, j) * gi[j] / n - ui[j] * dot / (n * n * n);
          g.ggain(0, j) += gi[j] * ui[j] / n;
        }
      }
      return g;
    }
    case NormMode::BatchNorm: {
      const Matrix& xhat = cache.xhat;
      if (!gy.same_shape(xhat)) throw std::invalid_argument("batchnorm backward: shape mismatch");
      int B = xhat.rows, D = xhat.cols;
      g.gu = Matrix(B, D);
      g.ggain = Matrix(1, D);
      g.gshift = Matrix(1, D);
      for (int j = 0; j < D; ++j) {
        double sum_gy = 0.0, sum_gy_xhat = 0.0;
        for (int i = 0; i < B; ++i) {
          sum_gy += gy(i, j);
          sum_gy_xhat += gy(i, j) * xhat(i, j);
        }
        g.ggain(0, j) = sum_gy_xhat;
        g.gshift(0, j) = sum_gy;
        double coeff = params.gain(0, j) * cache.inv_std(0, j);
        for (int i = 0; i < B; ++i)
          g.gu(i, j) = coeff * (gy(i, j) - sum_gy / B - xhat(i, j) * sum_gy_xhat / B);
      }
      return g;
    }
  }
  throw std::logic_error("unreachable");
}

}  // namespace pachinko
