#pragma once

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "pachinko/adam.hpp"
#include "pachinko/corpus.hpp"
#include "pachinko/encoder.hpp"
#include "pachinko/model.hpp"
#include "pachinko/priors.hpp"

namespace pachinko {

struct TrainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Reparameterized posterior draw: theta = softmax(mu + exp(u/2) * eps), one
// softmax per latent node slice.
struct PosteriorSample {
  std::vector<Matrix> g;      // per level, B x D
  std::vector<Matrix> theta;  // per level, B x D
};

inline PosteriorSample sample_posterior(const EncodeResult& enc_out, const std::vector<Matrix>& noise,
                                        const ArchLayout& lay) {
  if (noise.size() != enc_out.levels.size())
    throw std::invalid_argument("sample_posterior: noise level count mismatch");
  PosteriorSample s;
  for (size_t l = 0; l < enc_out.levels.size(); ++l) {
    const Matrix& mu = enc_out.levels[l].mu;
    const Matrix& u = enc_out.levels[l].u;
    if (!noise[l].same_shape(mu)) throw std::invalid_argument("sample_posterior: noise shape mismatch");
    Matrix g(mu.rows, mu.cols);
    for (size_t i = 0; i < g.size(); ++i)
      g.data[i] = mu.data[i] + std::exp(0.5 * u.data[i]) * noise[l].data[i];
    Matrix theta(mu.rows, mu.cols);
    for (int nid : lay.levels[l].node_ids) {
      const LatentNode& node = lay.nodes[nid];
      for (int b = 0; b < g.rows; ++b)
        softmax_row(g.row_ptr(b) + node.offset, theta.row_ptr(b) + node.offset, node.fanout);
    }
    s.g.push_back(std::move(g));
    s.theta.push_back(std::move(theta));
  }
  return s;
}

inline DocThetas thetas_for_doc(const PosteriorSample& s, const ArchLayout& lay, int b) {
  DocThetas thetas(lay.nodes.size());
  for (size_t i = 0; i < lay.nodes.size(); ++i) {
    const LatentNode& n = lay.nodes[i];
    const double* row = s.theta[n.enc_level].row_ptr(b) + n.offset;
    thetas[i].assign(row, row + n.fanout);
  }
  return thetas;
}

struct ElboResult {
  double elbo = 0.0;       // per-document mean
  double recon = 0.0;      // per-document mean
  double kl_total = 0.0;   // per-document mean
  std::vector<double> kl_per_node;  // per-document mean, per latent node
  std::vector<double> kl_per_dim;   // per-document mean, flattened latent dims
  Matrix g_beta;
  Matrix g_topic_gain, g_topic_shift;
  std::vector<EncoderLevelGrads> g_enc;
};

// Eq-3 style objective: -sum_node KL[q(theta_node|w) || N(mu0, s0)] plus the
// expected reconstruction, single reparameterized sample, averaged over the
// batch. Returns the gradients of the mean objective for every parameter.
inline ElboResult elbo(const Matrix& counts, EncoderParams& enc, ModelParams& params,
                       const std::vector<SoftmaxGaussianPrior>& gauss_priors,
                       const std::vector<Matrix>& noise, bool training) {
  const ArchLayout& lay = params.layout;
  if (gauss_priors.size() != lay.nodes.size())
    throw std::invalid_argument("elbo: need one Gaussian prior per latent node");
  int B = counts.rows, V = lay.vocab, K = lay.k_total;
  ElboResult res;

  EncodeResult eo = encode(counts, enc, lay, training);
  PosteriorSample post = sample_posterior(eo, noise, lay);

  // KL block and its gradient contributions w.r.t. mu and (normalized) u
  std::vector<Matrix> g_mu(lay.levels.size()), g_u(lay.levels.size());
  for (size_t l = 0; l < lay.levels.size(); ++l) {
    g_mu[l] = Matrix(B, lay.levels[l].total_dim);
    g_u[l] = Matrix(B, lay.levels[l].total_dim);
  }
  res.kl_per_node.assign(lay.nodes.size(), 0.0);
  res.kl_per_dim.assign(lay.total_latent_dim, 0.0);
  double kl_sum = 0.0;
  int dim_base = 0;
  for (size_t i = 0; i < lay.nodes.size(); ++i) {
    const LatentNode& n = lay.nodes[i];
    const SoftmaxGaussianPrior& gp = gauss_priors[i];
    if (gp.dim() != n.fanout) throw std::invalid_argument("elbo: prior dimension mismatch");
    const Matrix& mu = eo.levels[n.enc_level].mu;
    const Matrix& u = eo.levels[n.enc_level].u;
    for (int k = 0; k < n.fanout; ++k) {
      double pm = gp.mean[k], pl = std::log(gp.variance[k]);
      double dim_kl = 0.0;
      for (int b = 0; b < B; ++b) {
        double qm = mu(b, n.offset + k), ql = u(b, n.offset + k);
        dim_kl += kl_diag_gaussian_1(qm, ql, pm, pl);
        g_mu[n.enc_level](b, n.offset + k) -= kl_grad_qmean_1(qm, ql, pm, pl) / B;
        g_u[n.enc_level](b, n.offset + k) -= kl_grad_qlogvar_1(qm, ql, pm, pl) / B;
      }
      res.kl_per_dim[dim_base + k] = dim_kl / B;
      res.kl_per_node[i] += dim_kl / B;
      kl_sum += dim_kl;
    }
    dim_base += n.fanout;
  }
  res.kl_total = kl_sum / B;

  // decode: topics and leaf-level mixing
  NormCache topic_norm_cache;
  Matrix beta_norm = normalize_forward(params.beta_logits, params.topic_norm, training, &topic_norm_cache);
  Matrix topics = softmax_rows(beta_norm);

  // per-document chain products, keeping intermediate mixes for backward
  Matrix leaf_mix(B, K);
  int M = lay.arch.num_components();
  // mixes[b][c][l] holds the mixing vector after absorbing component level l
  std::vector<std::vector<std::vector<std::vector<double>>>> mixes(
      B, std::vector<std::vector<std::vector<double>>>(M));
  for (int b = 0; b < B; ++b) {
    for (int c = 0; c < M; ++c) {
      const auto& chain = lay.comp_levels[c];
      auto& cm = mixes[b][c];
      cm.resize(chain.size());
      {
        const LatentNode& root = lay.nodes[lay.comp_node_ids[c][0][0]];
        const double* row = post.theta[root.enc_level].row_ptr(b) + root.offset;
        cm[0].assign(row, row + root.fanout);
      }
      for (size_t l = 1; l < chain.size(); ++l) {
        cm[l].assign(chain[l].fanout, 0.0);
        for (int i = 0; i < chain[l].nodes; ++i) {
          const LatentNode& nd = lay.nodes[lay.comp_node_ids[c][l][i]];
          const double* row = post.theta[nd.enc_level].row_ptr(b) + nd.offset;
          double w = cm[l - 1][i];
          for (int f = 0; f < chain[l].fanout; ++f) cm[l][f] += w * row[f];
        }
      }
      double wc = 1.0;
      if (lay.mix_root_node >= 0) {
        const LatentNode& mr = lay.nodes[lay.mix_root_node];
        wc = post.theta[mr.enc_level](b, mr.offset + c);
      }
      const auto& last = cm.back();
      for (size_t k = 0; k < last.size(); ++k) leaf_mix(b, lay.beta_offset[c] + k) = wc * last[k];
    }
  }

  // reconstruction
  Matrix p = matmul(leaf_mix, topics);
  double recon_sum = 0.0;
  Matrix g_p(B, V);
  for (int b = 0; b < B; ++b)
    for (int v = 0; v < V; ++v) {
      double cnt = counts(b, v);
      if (cnt == 0.0) continue;
      double pv = p(b, v);
      if (!(pv > 0.0)) throw NumericError("elbo: zero word probability in reconstruction term");
      recon_sum += cnt * std::log(pv);
      g_p(b, v) = cnt / pv / B;
    }
  res.recon = recon_sum / B;
  res.elbo = res.recon - res.kl_total;
  if (!std::isfinite(res.elbo)) throw NumericError("elbo: objective is non-finite");

  // ---- backward ----
  Matrix g_leaf_mix = matmul_bt(g_p, topics);    // B x K
  Matrix g_topics = matmul_at(leaf_mix, g_p);    // K x V
  Matrix g_beta_norm = softmax_rows_backward(topics, g_topics);
  NormGrads tng = normalize_backward(topic_norm_cache, params.topic_norm, g_beta_norm);
  res.g_beta = std::move(tng.gu);
  res.g_topic_gain = std::move(tng.ggain);
  res.g_topic_shift = std::move(tng.gshift);

  // theta gradients from the chain products
  std::vector<Matrix> g_theta(lay.levels.size());
  for (size_t l = 0; l < lay.levels.size(); ++l) g_theta[l] = Matrix(B, lay.levels[l].total_dim);
  for (int b = 0; b < B; ++b) {
    for (int c = 0; c < M; ++c) {
      const auto& chain = lay.comp_levels[c];
      const auto& cm = mixes[b][c];
      double wc = 1.0;
      if (lay.mix_root_node >= 0) {
        const LatentNode& mr = lay.nodes[lay.mix_root_node];
        wc = post.theta[mr.enc_level](b, mr.offset + c);
        double dot = 0.0;
        for (size_t k = 0; k < cm.back().size(); ++k)
          dot += cm.back()[k] * g_leaf_mix(b, lay.beta_offset[c] + static_cast<int>(k));
        g_theta[mr.enc_level](b, mr.offset + c) += dot;
      }
      std::vector<double> g_mix(cm.back().size());
      for (size_t k = 0; k < g_mix.size(); ++k)
        g_mix[k] = wc * g_leaf_mix(b, lay.beta_offset[c] + static_cast<int>(k));
      for (int l = static_cast<int>(chain.size()) - 1; l >= 1; --l) {
        std::vector<double> g_prev(chain[l].nodes, 0.0);
        for (int i = 0; i < chain[l].nodes; ++i) {
          const LatentNode& nd = lay.nodes[lay.comp_node_ids[c][l][i]];
          const double* row = post.theta[nd.enc_level].row_ptr(b) + nd.offset;
          double* gt = g_theta[nd.enc_level].row_ptr(b) + nd.offset;
          double w = cm[l - 1][i];
          double dot = 0.0;
          for (int f = 0; f < chain[l].fanout; ++f) {
            gt[f] += w * g_mix[f];
            dot += row[f] * g_mix[f];
          }
          g_prev[i] = dot;
        }
        g_mix = std::move(g_prev);
      }
      const LatentNode& root = lay.nodes[lay.comp_node_ids[c][0][0]];
      double* gt = g_theta[root.enc_level].row_ptr(b) + root.offset;
      for (int f = 0; f < root.fanout; ++f) gt[f] += g_mix[f];
    }
  }

  // back through softmax per node, then into mu and u
  for (size_t l = 0; l < lay.levels.size(); ++l) {
    const Matrix& u = eo.levels[l].u;
    for (int nid : lay.levels[l].node_ids) {
      const LatentNode& node = lay.nodes[nid];
      for (int b = 0; b < B; ++b) {
        const double* th = post.theta[l].row_ptr(b) + node.offset;
        const double* gt = g_theta[l].row_ptr(b) + node.offset;
        double dot = 0.0;
        for (int f = 0; f < node.fanout; ++f) dot += gt[f] * th[f];
        for (int f = 0; f < node.fanout; ++f) {
          double gg = th[f] * (gt[f] - dot);
          int j = node.offset + f;
          g_mu[l](b, j) += gg;
          g_u[l](b, j) += gg * noise[l](b, j) * 0.5 * std::exp(0.5 * u(b, j));
        }
      }
    }
  }

  for (size_t l = 0; l < enc.levels.size(); ++l)
    res.g_enc.push_back(encoder_level_backward(enc.levels[l], eo.levels[l], g_mu[l], g_u[l]));
  return res;
}

// --- training --------------------------------------------------------------

struct TrainConfig {
  double lr = 1e-3;
  int batch_size = 200;
  int epochs = 100;
  uint64_t seed = 0;
  NormMode norm = NormMode::BatchNorm;  // log-variance head and topic logits
  int hidden = 100;
  double alpha = 0.0;  // symmetric Dirichlet per node; <= 0 means 1/fanout
  int mc_samples = 1;
  double kl_threshold = 0.01;
};

struct EpochStats {
  int epoch;
  double elbo;
  double kl_total;
  std::vector<double> kl_per_node;
  double seconds;
};

struct ModelBundle {
  ModelParams params;
  EncoderParams enc;
  TrainConfig config;
  std::vector<EpochStats> trace;
};

inline Matrix make_count_matrix(const Corpus& corpus, const std::vector<int>& doc_ids) {
  Matrix X(static_cast<int>(doc_ids.size()), corpus.vocab_size());
  for (size_t r = 0; r < doc_ids.size(); ++r)
    for (auto& [t, c] : corpus.documents[doc_ids[r]].counts) X(static_cast<int>(r), t) = c;
  return X;
}

namespace detail {

// Registration of every trainable block, in a fixed order.
struct ParamBlocks {
  std::vector<Matrix*> params;
  std::vector<std::string> names;

  static ParamBlocks collect(ModelParams& mp, EncoderParams& enc, NormMode norm) {
    ParamBlocks pb;
    auto add = [&pb](const std::string& name, Matrix* m) {
      pb.params.push_back(m);
      pb.names.push_back(name);
    };
    add("beta_logits", &mp.beta_logits);
    if (norm != NormMode::None) add("topic_norm.gain", &mp.topic_norm.gain);
    if (norm == NormMode::BatchNorm) add("topic_norm.shift", &mp.topic_norm.shift);
    for (size_t l = 0; l < enc.levels.size(); ++l) {
      std::string p = "enc" + std::to_string(l) + ".";
      EncoderLevelParams& e = enc.levels[l];
      add(p + "W1", &e.W1);
      add(p + "b1", &e.b1);
      add(p + "W2", &e.W2);
      add(p + "b2", &e.b2);
      add(p + "Wmu", &e.Wmu);
      add(p + "bmu", &e.bmu);
      add(p + "Wu", &e.Wu);
      add(p + "bu", &e.bu);
      if (norm != NormMode::None) add(p + "u_norm.gain", &e.u_norm.gain);
      if (norm == NormMode::BatchNorm) add(p + "u_norm.shift", &e.u_norm.shift);
    }
    return pb;
  }

  // gradients in the same order, negated: Adam minimizes, the ELBO is maximized
  std::vector<Matrix> collect_neg_grads(const ElboResult& r, NormMode norm) const {
    std::vector<Matrix> g;
    g.push_back(r.g_beta);
    if (norm != NormMode::None) g.push_back(r.g_topic_gain);
    if (norm == NormMode::BatchNorm) g.push_back(r.g_topic_shift);
    for (const EncoderLevelGrads& e : r.g_enc) {
      g.push_back(e.gW1);
      g.push_back(e.gb1);
      g.push_back(e.gW2);
      g.push_back(e.gb2);
      g.push_back(e.gWmu);
      g.push_back(e.gbmu);
      g.push_back(e.gWu);
      g.push_back(e.gbu);
      if (norm != NormMode::None) g.push_back(e.g_norm_gain);
      if (norm == NormMode::BatchNorm) g.push_back(e.g_norm_shift);
    }
    for (Matrix& m : g)
      for (double& v : m.data) v = -v;
    return g;
  }
};

}  // namespace detail

inline ModelBundle train(const Corpus& corpus, const PamArchitecture& arch, const TrainConfig& config) {
  corpus.validate();
  if (!(config.lr > 0.0)) throw TrainError("train: learning rate must be positive");
  if (config.batch_size < 2 && config.norm == NormMode::BatchNorm)
    throw TrainError("train: batch size must be >= 2 with batchnorm");
  if (config.batch_size < 1) throw TrainError("train: batch size must be >= 1");

  ModelBundle bundle;
  Rng rng(config.seed);
  bundle.params = ModelParams::init(arch, config.norm, rng);
  bundle.params.seed = config.seed;
  bundle.enc = EncoderParams::init(bundle.params.layout, config.hidden, config.norm, rng);
  bundle.config = config;
  const ArchLayout& lay = bundle.params.layout;
  if (lay.vocab != corpus.vocab_size())
    throw TrainError("train: architecture leaf width " + std::to_string(lay.vocab) +
                     " does not match corpus vocabulary " + std::to_string(corpus.vocab_size()));

  auto gauss_priors = laplace_node_priors(node_priors(lay, config.alpha));
  detail::ParamBlocks blocks = detail::ParamBlocks::collect(bundle.params, bundle.enc, config.norm);
  AdamState adam;
  adam.config.lr = config.lr;
  adam.attach({blocks.params.begin(), blocks.params.end()});

  int D = corpus.num_docs();
  std::vector<int> order(D);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    for (int i = D - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(i + 1)]);
    double epoch_elbo = 0.0, epoch_kl = 0.0;
    std::vector<double> epoch_kl_node(lay.nodes.size(), 0.0);
    int batches = 0;
    for (int start = 0; start < D; start += config.batch_size) {
      int end = std::min(D, start + config.batch_size);
      int B = end - start;
      if (B < 2 && config.norm == NormMode::BatchNorm) continue;  // leftover singleton
      std::vector<int> ids(order.begin() + start, order.begin() + end);
      Matrix X = make_count_matrix(corpus, ids);
      std::vector<Matrix> noise;
      for (const LevelLayout& L : lay.levels) {
        Matrix n(B, L.total_dim);
        for (double& v : n.data) v = rng.normal();
        noise.push_back(std::move(n));
      }
      ElboResult r;
      try {
        r = elbo(X, bundle.enc, bundle.params, gauss_priors, noise, /*training=*/true);
      } catch (const NumericError& e) {
        throw TrainError("train: diverged at epoch " + std::to_string(epoch) + " (lr " +
                         std::to_string(config.lr) + "): " + e.what());
      }
      std::vector<Matrix> grads = blocks.collect_neg_grads(r, config.norm);
      std::vector<const Matrix*> gp;
      for (const Matrix& g : grads) gp.push_back(&g);
      adam_step(blocks.params, gp, blocks.names, adam);
      epoch_elbo += r.elbo;
      epoch_kl += r.kl_total;
      for (size_t n = 0; n < epoch_kl_node.size(); ++n) epoch_kl_node[n] += r.kl_per_node[n];
      ++batches;
    }
    if (batches == 0) throw TrainError("train: no usable batches (corpus smaller than batch size 2?)");
    auto t1 = std::chrono::steady_clock::now();
    EpochStats st;
    st.epoch = epoch;
    st.elbo = epoch_elbo / batches;
    st.kl_total = epoch_kl / batches;
    for (double& v : epoch_kl_node) v /= batches;
    st.kl_per_node = std::move(epoch_kl_node);
    st.seconds = std::chrono::duration<double>(t1 - t0).count();
    bundle.trace.push_back(std::move(st));
  }
  return bundle;
}

// Amortized posterior for one document: a single encoder evaluation with
// zero noise, so theta = softmax(mu) at every node.
inline DocThetas infer_document(const Document& doc, ModelBundle& bundle) {
  const ArchLayout& lay = bundle.params.layout;
  Matrix X(1, lay.vocab);
  for (auto& [t, c] : doc.counts) {
    if (t < 0 || t >= lay.vocab) throw std::invalid_argument("infer_document: term id out of range");
    X(0, t) = c;
  }
  EncodeResult eo = encode(X, bundle.enc, lay, /*training=*/false);
  std::vector<Matrix> noise;
  for (const LevelLayout& L : lay.levels) noise.emplace_back(1, L.total_dim);
  PosteriorSample s = sample_posterior(eo, noise, lay);
  return thetas_for_doc(s, lay, 0);
}

struct ActiveUnits {
  int active = 0;
  std::vector<double> kl_per_dim;  // corpus-mean KL per flattened latent dimension
};

// A latent dimension is active iff its corpus-mean KL contribution exceeds
// the threshold.
inline ActiveUnits active_units(ModelBundle& bundle, const Corpus& corpus, double threshold) {
  const ArchLayout& lay = bundle.params.layout;
  auto gauss_priors = laplace_node_priors(node_priors(lay, bundle.config.alpha));
  ActiveUnits out;
  out.kl_per_dim.assign(lay.total_latent_dim, 0.0);
  int D = corpus.num_docs();
  const int chunk = 512;
  for (int start = 0; start < D; start += chunk) {
    int end = std::min(D, start + chunk);
    std::vector<int> ids(end - start);
    std::iota(ids.begin(), ids.end(), start);
    Matrix X = make_count_matrix(corpus, ids);
    EncodeResult eo = encode(X, bundle.enc, lay, /*training=*/false);
    int dim_base = 0;
    for (size_t i = 0; i < lay.nodes.size(); ++i) {
      const LatentNode& n = lay.nodes[i];
      const SoftmaxGaussianPrior& gp = gauss_priors[i];
      const Matrix& mu = eo.levels[n.enc_level].mu;
      const Matrix& u = eo.levels[n.enc_level].u;
      for (int k = 0; k < n.fanout; ++k) {
        double pl = std::log(gp.variance[k]);
        for (int b = 0; b < X.rows; ++b)
          out.kl_per_dim[dim_base + k] +=
              kl_diag_gaussian_1(mu(b, n.offset + k), u(b, n.offset + k), gp.mean[k], pl);
      }
      dim_base += n.fanout;
    }
  }
  for (double& v : out.kl_per_dim) v /= D;
  for (double v : out.kl_per_dim)
    if (v > threshold) ++out.active;
  return out;
}

// --- persistence -----------------------------------------------------------

inline void save_model(const ModelBundle& bundle, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out << "pachinko-model v1\n";
  out << "arch " << (bundle.params.layout.arch.is_mixture() ? "mixture" : "lpam") << " "
      << bundle.params.layout.arch.describe() << "\n";
  out << "norm " << norm_mode_name(bundle.config.norm) << "\n";
  out << "seed " << bundle.config.seed << "\n";
  out << "hidden " << bundle.enc.hidden << "\n";
  out << "lr " << fmt_double(bundle.config.lr) << "\n";
  out << "alpha " << fmt_double(bundle.config.alpha) << "\n";
  write_named_matrix(out, "beta_logits", bundle.params.beta_logits);
  write_norm_params(out, "topic_norm", bundle.params.topic_norm);
  for (size_t l = 0; l < bundle.enc.levels.size(); ++l) {
    std::string p = "enc" + std::to_string(l) + ".";
    const EncoderLevelParams& e = bundle.enc.levels[l];
    write_named_matrix(out, p + "W1", e.W1);
    write_named_matrix(out, p + "b1", e.b1);
    write_named_matrix(out, p + "W2", e.W2);
    write_named_matrix(out, p + "b2", e.b2);
    write_named_matrix(out, p + "Wmu", e.Wmu);
    write_named_matrix(out, p + "bmu", e.bmu);
    write_named_matrix(out, p + "Wu", e.Wu);
    write_named_matrix(out, p + "bu", e.bu);
    write_norm_params(out, p + "u_norm", e.u_norm);
  }
}

inline ModelBundle load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::string magic, version;
  in >> magic >> version;
  if (magic != "pachinko-model" || version != "v1") throw ParseError(path + ": not a model file");
  std::string tag, kind, arch_spec, norm_name;
  uint64_t seed;
  int hidden;
  double lr, alpha;
  if (!(in >> tag >> kind >> arch_spec) || tag != "arch") throw ParseError(path + ": missing arch header");
  if (!(in >> tag >> norm_name) || tag != "norm") throw ParseError(path + ": missing norm header");
  if (!(in >> tag >> seed) || tag != "seed") throw ParseError(path + ": missing seed header");
  if (!(in >> tag >> hidden) || tag != "hidden") throw ParseError(path + ": missing hidden header");
  if (!(in >> tag >> lr) || tag != "lr") throw ParseError(path + ": missing lr header");
  if (!(in >> tag >> alpha) || tag != "alpha") throw ParseError(path + ": missing alpha header");

  ModelBundle bundle;
  PamArchitecture arch = parse_architecture(arch_spec);
  if ((kind == "mixture") != arch.is_mixture()) throw ParseError(path + ": arch kind mismatch");
  bundle.params.layout = make_layout(arch);
  bundle.params.seed = seed;
  bundle.config.seed = seed;
  bundle.config.norm = norm_mode_from(norm_name);
  bundle.config.hidden = hidden;
  bundle.config.lr = lr;
  bundle.config.alpha = alpha;
  bundle.params.beta_logits = read_named_matrix(in, "beta_logits");
  require_shape(bundle.params.beta_logits, bundle.params.layout.k_total, bundle.params.layout.vocab,
                "beta_logits");
  bundle.params.topic_norm = read_norm_params(in, "topic_norm");
  bundle.enc.hidden = hidden;
  for (size_t l = 0; l < bundle.params.layout.levels.size(); ++l) {
    std::string p = "enc" + std::to_string(l) + ".";
    EncoderLevelParams e;
    e.W1 = read_named_matrix(in, p + "W1");
    e.b1 = read_named_matrix(in, p + "b1");
    e.W2 = read_named_matrix(in, p + "W2");
    e.b2 = read_named_matrix(in, p + "b2");
    e.Wmu = read_named_matrix(in, p + "Wmu");
    e.bmu = read_named_matrix(in, p + "bmu");
    e.Wu = read_named_matrix(in, p + "Wu");
    e.bu = read_named_matrix(in, p + "bu");
    e.u_norm = read_norm_params(in, p + "u_norm");
    bundle.enc.levels.push_back(std::move(e));
  }
  return bundle;
}

inline void save_trace(const std::vector<EpochStats>& trace, int num_nodes, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out << "epoch,elbo,kl_total";
  for (int n = 0; n < num_nodes; ++n) out << ",kl_node_" << n;
  out << ",seconds\n";
  for (const EpochStats& st : trace) {
    out << st.epoch << "," << fmt_double(st.elbo) << "," << fmt_double(st.kl_total);
    for (double v : st.kl_per_node) out << "," << fmt_double(v);
    out << "," << fmt_double(st.seconds) << "\n";
  }
}

}  // namespace pachinko
