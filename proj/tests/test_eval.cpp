#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "pachinko/eval.hpp"
#include "pachinko/rng.hpp"

using namespace pachinko;

namespace {

Corpus presence_corpus(const std::vector<std::vector<int>>& docs, int V) {
  Corpus c;
  std::vector<std::string> toks(V);
  for (int v = 0; v < V; ++v) toks[v] = std::string(1, static_cast<char>('a' + v));
  c.vocabulary = Vocabulary::from_tokens(std::move(toks));
  for (size_t d = 0; d < docs.size(); ++d) {
    Document doc;
    doc.id = "d" + std::to_string(d);
    for (int t : docs[d]) doc.counts[t] = 1;
    c.documents.push_back(std::move(doc));
  }
  c.validate();
  return c;
}

}  // namespace

TEST_CASE("top_words: one-hot topic row puts the dominant word first") {
  Matrix topics(1, 4);
  topics(0, 2) = 1.0;
  Vocabulary v = Vocabulary::from_tokens({"a", "b", "c", "d"});
  auto tw = top_words(topics, v, 2);
  REQUIRE(tw[0].words[0] == "c");
}

TEST_CASE("top_words: uniform row breaks ties by ascending term id") {
  Matrix topics(1, 5, 0.2);
  Vocabulary v = Vocabulary::from_tokens({"e", "d", "c", "b", "a"});
  auto tw = top_words(topics, v, 3);
  REQUIRE(tw[0].words == std::vector<std::string>{"e", "d", "c"});
  REQUIRE(tw[0].ids == std::vector<int>{0, 1, 2});
}

TEST_CASE("top_words is equivariant under vocabulary permutation") {
  Matrix topics(1, 3);
  topics(0, 0) = 0.2;
  topics(0, 1) = 0.5;
  topics(0, 2) = 0.3;
  Vocabulary v1 = Vocabulary::from_tokens({"x", "y", "z"});
  auto tw1 = top_words(topics, v1, 3);
  Matrix permuted(1, 3);
  permuted(0, 0) = 0.5;
  permuted(0, 1) = 0.3;
  permuted(0, 2) = 0.2;
  Vocabulary v2 = Vocabulary::from_tokens({"y", "z", "x"});
  auto tw2 = top_words(permuted, v2, 3);
  REQUIRE(tw1[0].words == tw2[0].words);
}

TEST_CASE("top_words rejects N out of range") {
  Matrix topics(1, 3, 1.0 / 3);
  Vocabulary v = Vocabulary::from_tokens({"a", "b", "c"});
  REQUIRE_THROWS_AS(top_words(topics, v, 4), EvalError);
  REQUIRE_THROWS_AS(top_words(topics, v, 0), EvalError);
}

TEST_CASE("npmi: perfectly associated pair scores 1") {
  // words 0 and 1 co-occur in every document where either appears, each in
  // half of the documents
  Corpus c = presence_corpus({{0, 1}, {0, 1}, {2}, {2}}, 3);
  std::vector<TopicWords> topics(1);
  topics[0].words = {"a", "b"};
  CoherenceResult r = npmi_coherence(topics, c);
  REQUIRE(r.per_topic[0] == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("npmi: independent pair scores 0") {
  // joint presence = product of marginals: P(a)=1/2, P(b)=1/2, P(ab)=1/4
  Corpus c = presence_corpus({{0, 1}, {0, 2}, {1, 3}, {2, 3}}, 4);
  std::vector<TopicWords> topics(1);
  topics[0].words = {"a", "b"};
  CoherenceResult r = npmi_coherence(topics, c);
  REQUIRE(r.per_topic[0] == Catch::Approx(0.0).margin(1e-6));
}

TEST_CASE("npmi: hand-counted 4-document toy corpus") {
  // d1={a,b}, d2={a,b}, d3={a,c}, d4={d}
  // df(a)=3, df(b)=2, df(c)=1, df(ab)=2, df(ac)=1, df(bc)=0, D=4
  Corpus c = presence_corpus({{0, 1}, {0, 1}, {0, 2}, {3}}, 4);
  std::vector<TopicWords> topics(1);
  topics[0].words = {"a", "b", "c"};
  CoherenceResult r = npmi_coherence(topics, c);

  const double eps = 1e-12;
  auto npmi = [eps](double pa, double pb, double pab) {
    return std::log((pab + eps) / ((pa + eps) * (pb + eps))) / (-std::log(pab + eps));
  };
  double ab = npmi(3.0 / 4, 2.0 / 4, 2.0 / 4);  // = log(4/3)/log(2)
  double ac = npmi(3.0 / 4, 1.0 / 4, 1.0 / 4);  // = log(4/3)/log(4)
  double bc = npmi(2.0 / 4, 1.0 / 4, 0.0);
  double expected = (ab + ac + bc) / 3.0;
  REQUIRE(r.per_topic[0] == Catch::Approx(expected).margin(1e-10));
  REQUIRE(r.mean == Catch::Approx(expected).margin(1e-10));
  // spot-check the two closed forms
  REQUIRE(ab == Catch::Approx(std::log(4.0 / 3.0) / std::log(2.0)).margin(1e-9));
  REQUIRE(ac == Catch::Approx(std::log(4.0 / 3.0) / std::log(4.0)).margin(1e-9));
}

TEST_CASE("npmi is symmetric and bounded") {
  Corpus c = presence_corpus({{0, 1, 2}, {0, 2}, {1}, {2, 3}, {0, 3}}, 4);
  CoherenceCounts cc = CoherenceCounts::from(c);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      if (a == b) continue;
      double x = npmi_pair(cc, a, b);
      REQUIRE(x == Catch::Approx(npmi_pair(cc, b, a)).margin(1e-15));
      REQUIRE(x >= -1.0 - 1e-9);
      REQUIRE(x <= 1.0 + 1e-9);
    }
}

TEST_CASE("npmi is invariant to document order") {
  Corpus c1 = presence_corpus({{0, 1}, {2, 3}, {0, 2}}, 4);
  Corpus c2 = presence_corpus({{0, 2}, {0, 1}, {2, 3}}, 4);
  std::vector<TopicWords> topics(1);
  topics[0].words = {"a", "c"};
  REQUIRE(npmi_coherence(topics, c1).mean == Catch::Approx(npmi_coherence(topics, c2).mean).margin(1e-15));
}

TEST_CASE("npmi names a missing word") {
  Corpus c = presence_corpus({{0, 1}, {1}}, 2);
  std::vector<TopicWords> topics(1);
  topics[0].words = {"a", "zebra"};
  try {
    npmi_coherence(topics, c);
    FAIL("expected EvalError");
  } catch (const EvalError& e) {
    REQUIRE(std::string(e.what()).find("zebra") != std::string::npos);
  }
}

TEST_CASE("align_topics: identity and permutation recovery") {
  Rng rng(8);
  Matrix planted(4, 6);
  for (int k = 0; k < 4; ++k) {
    auto row = rng.dirichlet(std::vector<double>(6, 0.3));
    for (int v = 0; v < 6; ++v) planted(k, v) = row[v];
  }
  Alignment id = align_topics(planted, planted);
  REQUIRE(id.mean_tv == Catch::Approx(0.0).margin(1e-12));
  for (int k = 0; k < 4; ++k) REQUIRE(id.permutation[k] == k);

  Matrix shuffled(4, 6);
  std::vector<int> perm = {2, 0, 3, 1};
  for (int k = 0; k < 4; ++k)
    for (int v = 0; v < 6; ++v) shuffled(k, v) = planted(perm[k], v);
  Alignment a = align_topics(shuffled, planted);
  REQUIRE(a.mean_tv == Catch::Approx(0.0).margin(1e-12));
  for (int k = 0; k < 4; ++k) REQUIRE(a.permutation[k] == perm[k]);
}

TEST_CASE("align_topics: 10% uniform noise gives the analytic mean TV") {
  Rng rng(9);
  int K = 3, V = 8;
  Matrix planted(K, V);
  for (int k = 0; k < K; ++k) {
    auto row = rng.dirichlet(std::vector<double>(V, 0.2));
    for (int v = 0; v < V; ++v) planted(k, v) = row[v];
  }
  Matrix noisy(K, V);
  for (int k = 0; k < K; ++k)
    for (int v = 0; v < V; ++v) noisy(k, v) = 0.9 * planted(k, v) + 0.1 / V;
  double analytic = 0.0;
  for (int k = 0; k < K; ++k) {
    double tv = 0.0;
    for (int v = 0; v < V; ++v) tv += std::abs(planted(k, v) - 1.0 / V);
    analytic += 0.1 * 0.5 * tv / K;
  }
  Alignment a = align_topics(noisy, planted);
  REQUIRE(a.mean_tv == Catch::Approx(analytic).margin(1e-12));
}

TEST_CASE("align_topics rejects shape mismatch") {
  REQUIRE_THROWS_AS(align_topics(Matrix(2, 3), Matrix(3, 3)), EvalError);
}

TEST_CASE("topic report format") {
  Corpus c = presence_corpus({{0, 1}, {0, 1}}, 2);
  Matrix topics(2, 2);
  topics(0, 0) = 0.9;
  topics(0, 1) = 0.1;
  topics(1, 0) = 0.2;
  topics(1, 1) = 0.8;
  auto tw = top_words(topics, c.vocabulary, 2);
  CoherenceResult r = npmi_coherence(tw, c);
  std::ostringstream out;
  write_topic_report(out, tw, r, {{0, 1}, {1, 1}});
  std::string s = out.str();
  REQUIRE(s.find("topic 0 [npmi=") != std::string::npos);
  REQUIRE(s.find("mean_npmi=") != std::string::npos);
  REQUIRE(s.find("component_1_mean_npmi=") != std::string::npos);
}
