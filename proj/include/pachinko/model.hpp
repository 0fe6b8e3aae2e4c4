#pragma once

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "pachinko/architecture.hpp"
#include "pachinko/corpus.hpp"
#include "pachinko/layers.hpp"
#include "pachinko/matrix.hpp"
#include "pachinko/priors.hpp"
#include "pachinko/rng.hpp"

namespace pachinko {

struct DecodeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Sampled (or planted) mixing proportions for one document: one simplex
// vector per latent node, ordered as ArchLayout::nodes.
using DocThetas = std::vector<std::vector<double>>;

// Global model state: topic logits plus the normalization applied to them
// before the softmax. Encoder weights live in EncoderParams but are
// persisted in the same model file.
struct ModelParams {
  ArchLayout layout;
  Matrix beta_logits;    // k_total x V
  NormParams topic_norm; // over V
  uint64_t seed = 0;

  static ModelParams init(const PamArchitecture& arch, NormMode topic_norm_mode, Rng& rng,
                          double init_scale = 0.1) {
    ModelParams p;
    p.layout = make_layout(arch);
    p.beta_logits = Matrix(p.layout.k_total, p.layout.vocab);
    for (double& v : p.beta_logits.data) v = init_scale * rng.normal();
    p.topic_norm = NormParams::make(topic_norm_mode, p.layout.vocab);
    return p;
  }

  // Inference-mode topic matrix: softmax(normalize(beta_logits)) rows.
  Matrix topics() const {
    NormParams norm = topic_norm;  // copy so running stats stay untouched
    return softmax_rows(normalize_forward(beta_logits, norm, /*training=*/false));
  }
};

// Chain product through one component: component-root theta through the
// stacked per-document topic matrices down to that component's sub-topics.
inline std::vector<double> component_mixing(const ArchLayout& lay, int comp, const DocThetas& thetas) {
  const auto& chain = lay.comp_levels[comp];
  std::vector<double> mix = thetas[lay.node_id(comp, 0, 0)];
  for (size_t l = 1; l < chain.size(); ++l) {
    const CompLevel& cl = chain[l];
    if (static_cast<int>(mix.size()) != cl.nodes)
      throw DecodeError("propagate_mixing: level width mismatch");
    std::vector<double> next(cl.fanout, 0.0);
    for (int i = 0; i < cl.nodes; ++i) {
      const std::vector<double>& row = thetas[lay.node_id(comp, static_cast<int>(l), i)];
      if (static_cast<int>(row.size()) != cl.fanout)
        throw DecodeError("propagate_mixing: node fanout mismatch");
      double w = mix[i];
      for (int f = 0; f < cl.fanout; ++f) next[f] += w * row[f];
    }
    mix = std::move(next);
  }
  return mix;
}

// Leaf-level mixing over all k_total sub-topics.
inline std::vector<double> propagate_mixing(const ArchLayout& lay, const DocThetas& thetas) {
  if (thetas.size() != lay.nodes.size()) throw DecodeError("propagate_mixing: node count mismatch");
  std::vector<double> out(lay.k_total, 0.0);
  int M = lay.arch.num_components();
  const std::vector<double>* root_mix = nullptr;
  if (lay.arch.is_mixture()) {
    root_mix = &thetas[0];
    if (static_cast<int>(root_mix->size()) != M) throw DecodeError("propagate_mixing: root width mismatch");
  }
  for (int c = 0; c < M; ++c) {
    std::vector<double> mix = component_mixing(lay, c, thetas);
    double w = root_mix ? (*root_mix)[c] : 1.0;
    int off = lay.beta_offset[c];
    for (size_t k = 0; k < mix.size(); ++k) out[off + k] = w * mix[k];
  }
  return out;
}

// p(w) = leaf_mix . topics; rows of `topics` are sub-topic word distributions.
inline std::vector<double> decode_word_distribution(const DocThetas& thetas, const ModelParams& params) {
  Matrix topics = params.topics();
  std::vector<double> mix = propagate_mixing(params.layout, thetas);
  std::vector<double> p(params.layout.vocab, 0.0);
  for (int k = 0; k < topics.rows; ++k) {
    double w = mix[k];
    if (w == 0.0) continue;
    const double* row = topics.row_ptr(k);
    for (int v = 0; v < topics.cols; ++v) p[v] += w * row[v];
  }
  return p;
}

// Symmetric Dirichlet priors for every latent node; alpha <= 0 selects the
// default 1/fanout.
inline std::vector<DirichletPrior> node_priors(const ArchLayout& lay, double alpha = 0.0) {
  std::vector<DirichletPrior> priors;
  priors.reserve(lay.nodes.size());
  for (const LatentNode& n : lay.nodes) {
    double a = alpha > 0.0 ? alpha : 1.0 / n.fanout;
    priors.push_back(DirichletPrior::symmetric(n.fanout, a));
  }
  return priors;
}

inline std::vector<SoftmaxGaussianPrior> laplace_node_priors(const std::vector<DirichletPrior>& priors) {
  std::vector<SoftmaxGaussianPrior> out;
  out.reserve(priors.size());
  for (const auto& p : priors) out.push_back(laplace_approx_dirichlet(p));
  return out;
}

// --- generative sampler ----------------------------------------------------

struct GenConfig {
  int n_docs = 100;
  int doc_length = 50;
  uint64_t seed = 0;
  double alpha_internal = 0.0;  // <= 0: 1/fanout per node
  double alpha_beta = 0.0;      // <= 0: 1/V
};

// Root-to-leaf child index chains, one per word position per document.
using PathAssignments = std::vector<std::vector<std::vector<int>>>;

struct SyntheticCorpus {
  Corpus corpus;
  ModelParams planted;       // beta_logits = log planted topics, norm mode none
  Matrix planted_topics;     // k_total x V simplex rows
  PathAssignments paths;
  std::vector<DocThetas> doc_thetas;
};

inline SyntheticCorpus generate_corpus(const PamArchitecture& arch,
                                       const std::vector<DirichletPrior>& priors, const GenConfig& cfg) {
  ArchLayout lay = make_layout(arch);
  if (cfg.n_docs < 1) throw std::invalid_argument("generate_corpus: need n_docs >= 1");
  if (cfg.doc_length < 1) throw std::invalid_argument("generate_corpus: documents must be non-empty");
  if (priors.size() != lay.nodes.size())
    throw std::invalid_argument("generate_corpus: need one prior per latent node");
  for (size_t i = 0; i < priors.size(); ++i)
    if (priors[i].dim() != lay.nodes[i].fanout)
      throw std::invalid_argument("generate_corpus: prior dimension mismatch at node " + std::to_string(i));

  Rng rng(cfg.seed);
  int V = lay.vocab, K = lay.k_total;
  double ab = cfg.alpha_beta > 0.0 ? cfg.alpha_beta : 1.0 / V;
  std::vector<double> beta_alpha(V, ab);

  SyntheticCorpus out;
  out.planted_topics = Matrix(K, V);
  for (int k = 0; k < K; ++k) {
    std::vector<double> row = rng.dirichlet(beta_alpha);
    for (int v = 0; v < V; ++v) out.planted_topics(k, v) = row[v];
  }

  out.planted.layout = lay;
  out.planted.topic_norm = NormParams::make(NormMode::None, V);
  out.planted.seed = cfg.seed;
  out.planted.beta_logits = Matrix(K, V);
  for (size_t i = 0; i < out.planted_topics.size(); ++i)
    out.planted.beta_logits.data[i] = std::log(std::max(out.planted_topics.data[i], 1e-300));

  std::vector<std::string> toks(V);
  for (int v = 0; v < V; ++v) toks[v] = "w" + std::to_string(v);
  out.corpus.vocabulary = Vocabulary::from_tokens(std::move(toks));

  for (int d = 0; d < cfg.n_docs; ++d) {
    DocThetas thetas(lay.nodes.size());
    for (size_t i = 0; i < lay.nodes.size(); ++i) thetas[i] = rng.dirichlet(priors[i].concentration);
    Document doc;
    doc.id = "d" + std::to_string(d);
    std::vector<std::vector<int>> doc_paths;
    for (int n = 0; n < cfg.doc_length; ++n) {
      std::vector<int> path;
      // walk the virtual DAG: mixture root picks a component, then each
      // component level picks a child until a sub-topic is reached
      int comp = 0;
      if (lay.arch.is_mixture()) {
        comp = rng.discrete(thetas[0]);
        path.push_back(comp);
      }
      const auto& chain = lay.comp_levels[comp];
      int index = 0;
      int child = 0;
      for (size_t l = 0; l < chain.size(); ++l) {
        child = rng.discrete(thetas[lay.node_id(comp, static_cast<int>(l), index)]);
        path.push_back(child);
        index = child;
      }
      int k = lay.beta_offset[comp] + child;
      int w = rng.discrete(out.planted_topics.row_ptr(k), V);
      path.push_back(w);
      ++doc.counts[w];
      doc_paths.push_back(std::move(path));
    }
    out.corpus.documents.push_back(std::move(doc));
    out.paths.push_back(std::move(doc_paths));
    out.doc_thetas.push_back(std::move(thetas));
  }
  out.corpus.validate();
  return out;
}

// Draw documents from an existing model: per-document node thetas from the
// given Dirichlet priors, words through the model's current topic matrix.
inline Corpus sample_documents(const ModelParams& params, const std::vector<DirichletPrior>& priors,
                               int n_docs, int doc_length, uint64_t seed,
                               const Vocabulary* vocab = nullptr) {
  const ArchLayout& lay = params.layout;
  if (n_docs < 1) throw std::invalid_argument("sample_documents: need n_docs >= 1");
  if (doc_length < 1) throw std::invalid_argument("sample_documents: documents must be non-empty");
  if (priors.size() != lay.nodes.size())
    throw std::invalid_argument("sample_documents: need one prior per latent node");
  if (vocab && vocab->size() != lay.vocab)
    throw std::invalid_argument("sample_documents: vocabulary size mismatch");
  Matrix topics = params.topics();
  Rng rng(seed);
  Corpus out;
  if (vocab) {
    out.vocabulary = *vocab;
  } else {
    std::vector<std::string> toks(lay.vocab);
    for (int v = 0; v < lay.vocab; ++v) toks[v] = "w" + std::to_string(v);
    out.vocabulary = Vocabulary::from_tokens(std::move(toks));
  }
  for (int d = 0; d < n_docs; ++d) {
    DocThetas thetas(lay.nodes.size());
    for (size_t i = 0; i < lay.nodes.size(); ++i) thetas[i] = rng.dirichlet(priors[i].concentration);
    Document doc;
    doc.id = "s" + std::to_string(d);
    for (int n = 0; n < doc_length; ++n) {
      int comp = lay.arch.is_mixture() ? rng.discrete(thetas[0]) : 0;
      const auto& chain = lay.comp_levels[comp];
      int index = 0, child = 0;
      for (size_t l = 0; l < chain.size(); ++l) {
        child = rng.discrete(thetas[lay.node_id(comp, static_cast<int>(l), index)]);
        index = child;
      }
      int k = lay.beta_offset[comp] + child;
      ++doc.counts[rng.discrete(topics.row_ptr(k), lay.vocab)];
    }
    out.documents.push_back(std::move(doc));
  }
  out.validate();
  return out;
}

// --- persistence helpers ---------------------------------------------------

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_named_matrix(std::ostream& out, const std::string& name, const Matrix& m) {
  out << "array " << name << " " << m.rows << " " << m.cols << "\n";
  for (int i = 0; i < m.rows; ++i) {
    for (int j = 0; j < m.cols; ++j) {
      if (j) out << " ";
      out << fmt_double(m(i, j));
    }
    out << "\n";
  }
}

inline Matrix read_named_matrix(std::istream& in, const std::string& expected) {
  std::string tag, name;
  int rows, cols;
  if (!(in >> tag >> name >> rows >> cols) || tag != "array" || name != expected)
    throw ParseError("model file: expected array '" + expected + "'");
  Matrix m(rows, cols);
  for (size_t i = 0; i < m.size(); ++i)
    if (!(in >> m.data[i])) throw ParseError("model file: truncated array '" + expected + "'");
  return m;
}

inline void write_norm_params(std::ostream& out, const std::string& prefix, const NormParams& p) {
  out << "norm " << prefix << " " << norm_mode_name(p.mode) << " " << fmt_double(p.epsilon) << " "
      << fmt_double(p.momentum) << "\n";
  write_named_matrix(out, prefix + ".gain", p.gain);
  write_named_matrix(out, prefix + ".shift", p.shift);
  write_named_matrix(out, prefix + ".running_mean", p.running_mean);
  write_named_matrix(out, prefix + ".running_var", p.running_var);
}

inline NormParams read_norm_params(std::istream& in, const std::string& prefix) {
  std::string tag, name, mode;
  double eps, mom;
  if (!(in >> tag >> name >> mode >> eps >> mom) || tag != "norm" || name != prefix)
    throw ParseError("model file: expected norm block '" + prefix + "'");
  NormParams p;
  p.mode = norm_mode_from(mode);
  p.epsilon = eps;
  p.momentum = mom;
  p.gain = read_named_matrix(in, prefix + ".gain");
  p.shift = read_named_matrix(in, prefix + ".shift");
  p.running_mean = read_named_matrix(in, prefix + ".running_mean");
  p.running_var = read_named_matrix(in, prefix + ".running_var");
  return p;
}

}  // namespace pachinko
