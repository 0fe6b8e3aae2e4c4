#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pachinko/model.hpp"
#include "test_util.hpp"

using namespace pachinko;

namespace {

DocThetas random_thetas(const ArchLayout& lay, Rng& rng) {
  DocThetas th(lay.nodes.size());
  for (size_t i = 0; i < lay.nodes.size(); ++i)
    th[i] = rng.dirichlet(std::vector<double>(lay.nodes[i].fanout, 1.0));
  return th;
}

ModelParams random_params(const PamArchitecture& arch, Rng& rng) {
  ModelParams p = ModelParams::init(arch, NormMode::None, rng, 1.0);
  return p;
}

}  // namespace

TEST_CASE("validate_architecture accepts the published-scale shapes") {
  REQUIRE_NOTHROW(validate_architecture(PamArchitecture::lpam({1, 50, 2000})));
  REQUIRE_NOTHROW(validate_architecture(PamArchitecture::lpam({1, 2, 50, 2000})));
  REQUIRE_NOTHROW(validate_architecture(PamArchitecture::lpam({1, 2, 2, 50, 2000})));
  REQUIRE_NOTHROW(validate_architecture(
      PamArchitecture::mixture({{1, 10, 2000}, {1, 50, 2000}})));
}

TEST_CASE("validate_architecture rejects malformed shapes") {
  REQUIRE_THROWS_AS(validate_architecture(PamArchitecture::lpam({1, 0, 10})), ArchitectureError);
  REQUIRE_THROWS_AS(validate_architecture(PamArchitecture::lpam({1, 3})), ArchitectureError);
  REQUIRE_THROWS_AS(validate_architecture(PamArchitecture::lpam({2, 3, 10})), ArchitectureError);
  REQUIRE_THROWS_AS(validate_architecture(PamArchitecture::mixture({{1, 5, 10}, {1, 5, 12}})),
                    ArchitectureError);
}

TEST_CASE("parse_architecture handles lpam and mixture specs") {
  PamArchitecture a = parse_architecture("1,2,50,2000");
  REQUIRE(!a.is_mixture());
  REQUIRE(a.components[0] == std::vector<int>{1, 2, 50, 2000});
  PamArchitecture m = parse_architecture("1,10,100;1,50,100");
  REQUIRE(m.is_mixture());
  REQUIRE(m.num_components() == 2);
  REQUIRE(m.subtopic_count() == 60);
  REQUIRE_THROWS_AS(parse_architecture("1,x,10"), ArchitectureError);
}

TEST_CASE("layout enumerates latent nodes level by level") {
  ArchLayout lay = make_layout(PamArchitecture::lpam({1, 3, 5, 12}));
  REQUIRE(lay.levels.size() == 2);
  REQUIRE(lay.nodes.size() == 4);  // root + 3 super-topics
  REQUIRE(lay.levels[0].total_dim == 3);
  REQUIRE(lay.levels[1].total_dim == 15);
  REQUIRE(lay.k_total == 5);
  REQUIRE(lay.vocab == 12);

  ArchLayout mix = make_layout(PamArchitecture::mixture({{1, 2, 8}, {1, 4, 8}}));
  REQUIRE(mix.levels.size() == 2);
  REQUIRE(mix.mix_root_node == 0);
  REQUIRE(mix.levels[0].total_dim == 2);   // root over the two components
  REQUIRE(mix.levels[1].total_dim == 6);   // the two component roots
  REQUIRE(mix.k_total == 6);
  REQUIRE(mix.beta_offset == std::vector<int>{0, 2});
}

TEST_CASE("3-PAM decode with one-hot theta selects the topic row") {
  Rng rng(3);
  PamArchitecture arch = PamArchitecture::lpam({1, 4, 9});
  ModelParams params = random_params(arch, rng);
  Matrix topics = params.topics();
  DocThetas th(1);
  th[0] = {0.0, 0.0, 1.0, 0.0};
  std::vector<double> p = decode_word_distribution(th, params);
  for (int v = 0; v < 9; ++v) REQUIRE(p[v] == Catch::Approx(topics(2, v)).margin(1e-15));
}

TEST_CASE("4-PAM decode with one-hot path selects the sub-topic row") {
  Rng rng(4);
  PamArchitecture arch = PamArchitecture::lpam({1, 3, 5, 7});
  ModelParams params = random_params(arch, rng);
  Matrix topics = params.topics();
  ArchLayout lay = params.layout;
  DocThetas th(lay.nodes.size());
  th[0] = {0.0, 1.0, 0.0};  // root picks super-topic 1
  for (int i = 0; i < 3; ++i) {
    th[1 + i].assign(5, 0.0);
    th[1 + i][3] = 1.0;  // every super-topic picks sub-topic 3
  }
  std::vector<double> p = decode_word_distribution(th, params);
  for (int v = 0; v < 7; ++v) REQUIRE(p[v] == Catch::Approx(topics(3, v)).margin(1e-14));
}

TEST_CASE("4-PAM decode matches brute-force path enumeration") {
  Rng rng(11);
  PamArchitecture arch = PamArchitecture::lpam({1, 3, 4, 6});
  ModelParams params = random_params(arch, rng);
  Matrix topics = params.topics();
  ArchLayout lay = params.layout;
  for (int trial = 0; trial < 5; ++trial) {
    DocThetas th = random_thetas(lay, rng);
    std::vector<double> p = decode_word_distribution(th, params);
    for (int v = 0; v < 6; ++v) {
      double brute = 0.0;
      for (int s = 0; s < 3; ++s)
        for (int k = 0; k < 4; ++k) brute += th[0][s] * th[1 + s][k] * topics(k, v);
      REQUIRE(p[v] == Catch::Approx(brute).margin(1e-12));
    }
  }
}

TEST_CASE("3-PAM decode reduces exactly to LDA theta . topics") {
  Rng rng(12);
  PamArchitecture arch = PamArchitecture::lpam({1, 5, 8});
  ModelParams params = random_params(arch, rng);
  Matrix topics = params.topics();
  DocThetas th(1);
  th[0] = rng.dirichlet(std::vector<double>(5, 1.0));
  std::vector<double> p = decode_word_distribution(th, params);
  for (int v = 0; v < 8; ++v) {
    double lda = 0.0;
    for (int k = 0; k < 5; ++k) lda += th[0][k] * topics(k, v);
    REQUIRE(p[v] == Catch::Approx(lda).margin(1e-14));
  }
}

TEST_CASE("mixture decoder equals the concatenated-block decoder") {
  Rng rng(21);
  PamArchitecture mix = PamArchitecture::mixture({{1, 2, 6}, {1, 3, 6}});
  ModelParams params = random_params(mix, rng);
  Matrix topics = params.topics();
  ArchLayout lay = params.layout;
  DocThetas th = random_thetas(lay, rng);
  std::vector<double> p = decode_word_distribution(th, params);
  // manual: sum over components of root weight times component LDA decode
  for (int v = 0; v < 6; ++v) {
    double manual = 0.0;
    for (int k = 0; k < 2; ++k) manual += th[0][0] * th[1][k] * topics(k, v);
    for (int k = 0; k < 3; ++k) manual += th[0][1] * th[2][k] * topics(2 + k, v);
    REQUIRE(p[v] == Catch::Approx(manual).margin(1e-12));
  }
}

TEST_CASE("decode output lies on the simplex") {
  Rng rng(31);
  for (const PamArchitecture& arch :
       {PamArchitecture::lpam({1, 4, 10}), PamArchitecture::lpam({1, 2, 3, 10}),
        PamArchitecture::mixture({{1, 2, 10}, {1, 5, 10}})}) {
    ModelParams params = random_params(arch, rng);
    DocThetas th = random_thetas(params.layout, rng);
    std::vector<double> p = decode_word_distribution(th, params);
    double sum = 0.0;
    for (double x : p) {
      REQUIRE(x >= 0.0);
      sum += x;
    }
    REQUIRE(sum == Catch::Approx(1.0).margin(1e-10));
  }
}

TEST_CASE("generate_corpus: single-topic degenerate DAG draws iid from beta") {
  PamArchitecture arch = PamArchitecture::lpam({1, 1, 15});
  ArchLayout lay = make_layout(arch);
  GenConfig cfg;
  cfg.n_docs = 200;
  cfg.doc_length = 20;
  cfg.seed = 5;
  SyntheticCorpus syn = generate_corpus(arch, node_priors(lay), cfg);
  // every path goes through the single topic
  for (const auto& doc : syn.paths)
    for (const auto& path : doc) REQUIRE(path[0] == 0);
  // empirical marginal approaches beta_1
  std::vector<double> freq(15, 0.0);
  double total = 0.0;
  for (const auto& d : syn.corpus.documents)
    for (auto& [t, c] : d.counts) {
      freq[t] += c;
      total += c;
    }
  double tv = 0.0;
  for (int v = 0; v < 15; ++v) tv += std::abs(freq[v] / total - syn.planted_topics(0, v));
  REQUIRE(0.5 * tv < 0.05);
}

TEST_CASE("generate_corpus rejects empty documents") {
  PamArchitecture arch = PamArchitecture::lpam({1, 2, 8});
  GenConfig cfg;
  cfg.doc_length = 0;
  REQUIRE_THROWS_AS(generate_corpus(arch, node_priors(make_layout(arch)), cfg),
                    std::invalid_argument);
}

TEST_CASE("generate_corpus word marginal matches the analytic model marginal") {
  // law of large numbers against E[theta]^T beta; E[theta] is uniform for
  // symmetric priors
  PamArchitecture arch = PamArchitecture::lpam({1, 5, 30});
  ArchLayout lay = make_layout(arch);
  GenConfig cfg;
  cfg.n_docs = 2000;
  cfg.doc_length = 50;
  cfg.seed = 7;
  SyntheticCorpus syn = generate_corpus(arch, node_priors(lay), cfg);
  std::vector<double> analytic(30, 0.0);
  for (int v = 0; v < 30; ++v)
    for (int k = 0; k < 5; ++k) analytic[v] += syn.planted_topics(k, v) / 5.0;
  std::vector<double> freq(30, 0.0);
  double total = 0.0;
  for (const auto& d : syn.corpus.documents)
    for (auto& [t, c] : d.counts) {
      freq[t] += c;
      total += c;
    }
  double tv = 0.0;
  for (int v = 0; v < 30; ++v) tv += std::abs(freq[v] / total - analytic[v]);
  // words inside a document are exchangeable but correlated through theta, so
  // the effective sample size is the document count, not the token count
  REQUIRE(0.5 * tv < 0.03);
}

TEST_CASE("generate_corpus is bitwise reproducible under a fixed seed") {
  PamArchitecture arch = PamArchitecture::lpam({1, 3, 2, 12});
  auto priors = node_priors(make_layout(arch));
  GenConfig cfg;
  cfg.n_docs = 30;
  cfg.doc_length = 10;
  cfg.seed = 99;
  SyntheticCorpus a = generate_corpus(arch, priors, cfg);
  SyntheticCorpus b = generate_corpus(arch, priors, cfg);
  REQUIRE(a.corpus == b.corpus);
  REQUIRE(a.planted_topics == b.planted_topics);
  REQUIRE(a.paths == b.paths);
}

TEST_CASE("mixture generation respects component structure") {
  PamArchitecture arch = PamArchitecture::mixture({{1, 2, 10}, {1, 3, 10}});
  ArchLayout lay = make_layout(arch);
  GenConfig cfg;
  cfg.n_docs = 50;
  cfg.doc_length = 12;
  cfg.seed = 1;
  SyntheticCorpus syn = generate_corpus(arch, node_priors(lay), cfg);
  for (const auto& doc : syn.paths)
    for (const auto& path : doc) {
      REQUIRE(path.size() == 3);  // component, sub-topic, word
      int comp = path[0];
      REQUIRE((comp == 0 || comp == 1));
      REQUIRE(path[1] < (comp == 0 ? 2 : 3));
      REQUIRE(path[2] < 10);
    }
}
