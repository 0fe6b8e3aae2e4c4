#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "pachinko/corpus.hpp"
#include "pachinko/matrix.hpp"

namespace pachinko {

struct EvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TopicWords {
  std::vector<int> ids;
  std::vector<std::string> words;
  std::vector<double> probs;
};

// N highest-probability words per topic, ties broken by ascending term id.
inline std::vector<TopicWords> top_words(const Matrix& topics, const Vocabulary& vocab, int N) {
  if (topics.cols != vocab.size()) throw EvalError("top_words: vocabulary size mismatch");
  if (N < 1 || N > topics.cols) throw EvalError("top_words: N out of range");
  std::vector<TopicWords> out(topics.rows);
  std::vector<int> idx(topics.cols);
  for (int k = 0; k < topics.rows; ++k) {
    std::iota(idx.begin(), idx.end(), 0);
    const double* row = topics.row_ptr(k);
    std::stable_sort(idx.begin(), idx.end(), [row](int a, int b) { return row[a] > row[b]; });
    for (int i = 0; i < N; ++i) {
      out[k].ids.push_back(idx[i]);
      out[k].words.push_back(vocab.tokens[idx[i]]);
      out[k].probs.push_back(row[idx[i]]);
    }
  }
  return out;
}

// Document-frequency statistics over the reference corpus (presence/absence).
struct CoherenceCounts {
  int num_docs = 0;
  std::vector<int> df;                       // per term
  std::vector<std::vector<int>> doc_terms;   // sorted distinct term ids per doc

  static CoherenceCounts from(const Corpus& corpus) {
    CoherenceCounts cc;
    cc.num_docs = corpus.num_docs();
    cc.df.assign(corpus.vocab_size(), 0);
    for (const Document& d : corpus.documents) {
      std::vector<int> terms;
      for (auto& [t, c] : d.counts) {
        terms.push_back(t);
        ++cc.df[t];
      }
      cc.doc_terms.push_back(std::move(terms));
    }
    return cc;
  }

  int joint_df(int a, int b) const {
    int n = 0;
    for (const auto& terms : doc_terms)
      if (std::binary_search(terms.begin(), terms.end(), a) &&
          std::binary_search(terms.begin(), terms.end(), b))
        ++n;
    return n;
  }
};

constexpr double kCoherenceEps = 1e-12;

// NPMI(a,b) = log(P(a,b) / (P(a) P(b))) / (-log P(a,b)) with document
// presence probabilities, smoothed by kCoherenceEps.
inline double npmi_pair(const CoherenceCounts& cc, int a, int b) {
  double D = cc.num_docs;
  double pa = cc.df[a] / D + kCoherenceEps;
  double pb = cc.df[b] / D + kCoherenceEps;
  double pab = cc.joint_df(a, b) / D + kCoherenceEps;
  return std::log(pab / (pa * pb)) / (-std::log(pab));
}

struct CoherenceResult {
  std::vector<double> per_topic;
  double mean = 0.0;
};

inline CoherenceResult npmi_coherence(const std::vector<TopicWords>& topics, const Corpus& reference) {
  reference.validate();
  CoherenceCounts cc = CoherenceCounts::from(reference);
  CoherenceResult res;
  for (const TopicWords& tw : topics) {
    for (size_t i = 0; i < tw.words.size(); ++i) {
      int id = reference.vocabulary.id_of(tw.words[i]);
      if (id < 0) throw EvalError("npmi_coherence: word '" + tw.words[i] + "' not in reference vocabulary");
      if (cc.df[id] == 0) throw EvalError("npmi_coherence: word '" + tw.words[i] + "' absent from reference corpus");
    }
    double sum = 0.0;
    int pairs = 0;
    for (size_t i = 0; i < tw.words.size(); ++i)
      for (size_t j = i + 1; j < tw.words.size(); ++j) {
        int a = reference.vocabulary.id_of(tw.words[i]);
        int b = reference.vocabulary.id_of(tw.words[j]);
        sum += npmi_pair(cc, a, b);
        ++pairs;
      }
    res.per_topic.push_back(pairs > 0 ? sum / pairs : 0.0);
  }
  if (!res.per_topic.empty())
    res.mean = std::accumulate(res.per_topic.begin(), res.per_topic.end(), 0.0) /
               static_cast<double>(res.per_topic.size());
  return res;
}

inline double total_variation(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += std::abs(a[i] - b[i]);
  return 0.5 * s;
}

struct Alignment {
  std::vector<int> permutation;  // learned row k matched to planted row permutation[k]
  std::vector<double> tv;        // TV distance per matched pair, indexed by learned row
  double mean_tv = 0.0;
};

// Greedy matching: repeatedly pair the unmatched rows with smallest TV.
inline Alignment align_topics(const Matrix& learned, const Matrix& planted) {
  if (!learned.same_shape(planted)) throw EvalError("align_topics: shape mismatch");
  int K = learned.rows, V = learned.cols;
  Matrix d(K, K);
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j) d(i, j) = total_variation(learned.row_ptr(i), planted.row_ptr(j), V);
  Alignment a;
  a.permutation.assign(K, -1);
  a.tv.assign(K, 0.0);
  std::vector<bool> used_l(K, false), used_p(K, false);
  for (int step = 0; step < K; ++step) {
    double best = std::numeric_limits<double>::infinity();
    int bi = -1, bj = -1;
    for (int i = 0; i < K; ++i) {
      if (used_l[i]) continue;
      for (int j = 0; j < K; ++j) {
        if (used_p[j]) continue;
        if (d(i, j) < best) {
          best = d(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    used_l[bi] = used_p[bj] = true;
    a.permutation[bi] = bj;
    a.tv[bi] = best;
    a.mean_tv += best / K;
  }
  return a;
}

// Topic report file: one line per topic, then the model mean; for mixtures
// also a mean per component block.
inline void write_topic_report(std::ostream& out, const std::vector<TopicWords>& topics,
                               const CoherenceResult& coherence,
                               const std::vector<std::pair<int, int>>& component_blocks = {}) {
  char buf[64];
  for (size_t k = 0; k < topics.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%.6f", coherence.per_topic[k]);
    out << "topic " << k << " [npmi=" << buf << "]:";
    for (const std::string& w : topics[k].words) out << " " << w;
    out << "\n";
  }
  std::snprintf(buf, sizeof(buf), "%.6f", coherence.mean);
  out << "mean_npmi=" << buf << "\n";
  for (size_t c = 0; c < component_blocks.size(); ++c) {
    auto [off, len] = component_blocks[c];
    double m = 0.0;
    for (int k = off; k < off + len; ++k) m += coherence.per_topic[k];
    m /= len;
    std::snprintf(buf, sizeof(buf), "%.6f", m);
    out << "component_" << c << "_mean_npmi=" << buf << "\n";
  }
}

}  // namespace pachinko
