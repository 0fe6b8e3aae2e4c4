#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pachinko/eval.hpp"
#include "pachinko/gibbs.hpp"
#include "pachinko/inference.hpp"

namespace pachinko {

// --- small artifact helpers -------------------------------------------------

inline uint64_t fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("checksum: cannot open " + path);
  uint64_t h = 14695981039346656037ull;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (!in) break;
  }
  return h;
}

inline void save_topics_file(const Matrix& topics, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out << "pachinko-topics v1\n";
  write_named_matrix(out, "topics", topics);
}

inline Matrix load_topics_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::string magic, version;
  in >> magic >> version;
  if (magic != "pachinko-topics" || version != "v1") throw ParseError(path + ": not a topics file");
  return read_named_matrix(in, "topics");
}

// Worker cap from the environment; all current kernels are single-threaded
// but the resolved value is recorded so runs stay comparable.
inline int resolved_threads() {
  if (const char* env = std::getenv("PACHINKO_THREADS")) {
    try {
      int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception&) {
    }
    throw std::invalid_argument("PACHINKO_THREADS must be a positive integer");
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

// One manifest per run: the resolved command plus checksums of everything the
// run wrote, sufficient to repeat it bitwise.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  nlohmann::json flags;
  uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  double duration_seconds = 0.0;
  int threads = 1;
};

inline void write_manifest(const RunManifest& m, const std::string& path) {
  nlohmann::json j;
  j["command"] = m.command;
  j["argv"] = m.argv;
  j["flags"] = m.flags;
  j["seed"] = m.seed;
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;
  j["duration_seconds"] = m.duration_seconds;
  j["threads"] = m.threads;
  nlohmann::json sums = nlohmann::json::object();
  char buf[24];
  for (const std::string& out : m.outputs) {
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a_file(out)));
    sums[out] = buf;
  }
  j["checksums"] = sums;
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out << j.dump(2) << "\n";
}

inline Corpus load_counts_corpus(const std::string& counts_path, const std::string& vocab_path) {
  return load_sparse_counts(counts_path, load_vocab(vocab_path));
}

// Per-component sub-topic blocks for mixture reports.
inline std::vector<std::pair<int, int>> component_blocks(const ArchLayout& lay) {
  std::vector<std::pair<int, int>> blocks;
  if (!lay.arch.is_mixture()) return blocks;
  for (int c = 0; c < lay.arch.num_components(); ++c) {
    const auto& w = lay.arch.components[c];
    blocks.emplace_back(lay.beta_offset[c], w[w.size() - 2]);
  }
  return blocks;
}

inline int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"pachinko: amortized variational PAM topic models"};
  app.require_subcommand(1);
  auto t_start = std::chrono::steady_clock::now();
  int threads = 1;

  auto finish = [&](RunManifest& m, const std::string& manifest_path) {
    m.argv = args;
    m.threads = threads;
    m.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    write_manifest(m, manifest_path.empty() ? m.command + ".manifest.json" : manifest_path);
  };

  // ingest -------------------------------------------------------------------
  auto* ingest = app.add_subcommand("ingest", "tokenize raw text lines into corpus files");
  struct {
    std::string input, out_counts, out_vocab, manifest;
    int max_vocab = 0;
  } ig;
  ingest->add_option("--input", ig.input, "text file, one document per line")->required();
  ingest->add_option("--out-counts", ig.out_counts, "sparse counts output")->required();
  ingest->add_option("--out-vocab", ig.out_vocab, "vocabulary output")->required();
  ingest->add_option("--max-vocab", ig.max_vocab, "keep the N most frequent terms (0 = all)");
  ingest->add_option("--manifest", ig.manifest, "manifest output path");
  ingest->callback([&] {
    RawDocs raw = load_text_docs(ig.input);
    Vocabulary vocab = build_vocab(raw, ig.max_vocab > 0 ? ig.max_vocab : 1 << 30);
    Corpus corpus = count_docs(raw, vocab);
    save_vocab(vocab, ig.out_vocab);
    save_corpus(corpus, ig.out_counts);
    std::cout << "ingested " << corpus.num_docs() << " documents, vocabulary " << vocab.size()
              << ", dropped " << corpus.dropped_empty << " empty\n";
    RunManifest m;
    m.command = "ingest";
    m.flags = {{"input", ig.input}, {"out-counts", ig.out_counts}, {"out-vocab", ig.out_vocab},
               {"max-vocab", ig.max_vocab}};
    m.inputs = {ig.input};
    m.outputs = {ig.out_counts, ig.out_vocab};
    finish(m, ig.manifest);
  });

  // synth --------------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "generate a planted synthetic corpus");
  struct {
    std::string arch, out_prefix, manifest;
    int docs = 100, len = 50;
    uint64_t seed = 0;
    double alpha = 0.0, alpha_beta = 0.0;
  } sy;
  synth->add_option("--arch", sy.arch, "level widths, e.g. 1,5,30 (use ';' for mixtures)")->required();
  synth->add_option("--docs", sy.docs, "number of documents");
  synth->add_option("--len", sy.len, "words per document");
  synth->add_option("--seed", sy.seed, "random seed");
  synth->add_option("--alpha", sy.alpha, "internal-node Dirichlet (0 = 1/fanout)");
  synth->add_option("--alpha-beta", sy.alpha_beta, "topic-word Dirichlet (0 = 1/V)");
  synth->add_option("--out-prefix", sy.out_prefix, "writes <prefix>.counts/.vocab/.topics")->required();
  synth->callback([&] {
    PamArchitecture arch = parse_architecture(sy.arch);
    GenConfig cfg;
    cfg.n_docs = sy.docs;
    cfg.doc_length = sy.len;
    cfg.seed = sy.seed;
    cfg.alpha_internal = sy.alpha;
    cfg.alpha_beta = sy.alpha_beta;
    ArchLayout lay = make_layout(arch);
    SyntheticCorpus syn = generate_corpus(arch, node_priors(lay, sy.alpha), cfg);
    save_vocab(syn.corpus.vocabulary, sy.out_prefix + ".vocab");
    save_corpus(syn.corpus, sy.out_prefix + ".counts");
    save_topics_file(syn.planted_topics, sy.out_prefix + ".topics");
    std::cout << "generated " << sy.docs << " documents over " << lay.vocab << " terms, "
              << lay.k_total << " sub-topics\n";
    RunManifest m;
    m.command = "synth";
    m.flags = {{"arch", sy.arch}, {"docs", sy.docs}, {"len", sy.len}, {"seed", sy.seed},
               {"alpha", sy.alpha}, {"alpha-beta", sy.alpha_beta}, {"out-prefix", sy.out_prefix}};
    m.seed = sy.seed;
    m.outputs = {sy.out_prefix + ".counts", sy.out_prefix + ".vocab", sy.out_prefix + ".topics"};
    finish(m, sy.manifest);
  });
  synth->add_option("--manifest", sy.manifest, "manifest output path");

  // train --------------------------------------------------------------------
  auto* tr = app.add_subcommand("train", "train the amortized variational model");
  struct {
    std::string corpus, vocab, arch, mixture, norm = "batchnorm", out, trace, topics_out, manifest;
    TrainConfig cfg;
  } tn;
  tr->add_option("--corpus", tn.corpus, "sparse counts file")->required();
  tr->add_option("--vocab", tn.vocab, "vocabulary file")->required();
  tr->add_option("--arch", tn.arch, "level widths, e.g. 1,2,50,2000");
  tr->add_option("--mixture", tn.mixture, "mixture spec, e.g. 1,10,2000;1,50,2000");
  tr->add_option("--lr", tn.cfg.lr, "Adam learning rate");
  tr->add_option("--batch", tn.cfg.batch_size, "minibatch size");
  tr->add_option("--epochs", tn.cfg.epochs, "training epochs");
  tr->add_option("--seed", tn.cfg.seed, "random seed");
  tr->add_option("--norm", tn.norm, "none | batchnorm | l2norm");
  tr->add_option("--hidden", tn.cfg.hidden, "encoder hidden width");
  tr->add_option("--alpha", tn.cfg.alpha, "internal-node Dirichlet (0 = 1/fanout)");
  tr->add_option("--out", tn.out, "model output path")->required();
  tr->add_option("--trace", tn.trace, "per-epoch CSV trace output");
  tr->add_option("--topics-out", tn.topics_out, "write the learned topic matrix");
  tr->add_option("--manifest", tn.manifest, "manifest output path");
  tr->callback([&] {
    if (tn.arch.empty() == tn.mixture.empty())
      throw ArchitectureError("train: give exactly one of --arch or --mixture");
    PamArchitecture arch = parse_architecture(tn.arch.empty() ? tn.mixture : tn.arch);
    tn.cfg.norm = norm_mode_from(tn.norm);
    Corpus corpus = load_counts_corpus(tn.corpus, tn.vocab);
    ModelBundle bundle = train(corpus, arch, tn.cfg);
    save_model(bundle, tn.out);
    RunManifest m;
    m.command = "train";
    m.outputs = {tn.out};
    if (!tn.trace.empty()) {
      save_trace(bundle.trace, static_cast<int>(bundle.params.layout.nodes.size()), tn.trace);
      m.outputs.push_back(tn.trace);
    }
    if (!tn.topics_out.empty()) {
      save_topics_file(bundle.params.topics(), tn.topics_out);
      m.outputs.push_back(tn.topics_out);
    }
    std::cout << "trained " << arch.describe() << ": final elbo " << bundle.trace.back().elbo
              << ", kl " << bundle.trace.back().kl_total << "\n";
    m.flags = {{"corpus", tn.corpus}, {"vocab", tn.vocab}, {"arch", arch.describe()},
               {"lr", tn.cfg.lr}, {"batch", tn.cfg.batch_size}, {"epochs", tn.cfg.epochs},
               {"seed", tn.cfg.seed}, {"norm", tn.norm}, {"hidden", tn.cfg.hidden},
               {"alpha", tn.cfg.alpha}, {"out", tn.out}, {"trace", tn.trace},
               {"topics-out", tn.topics_out}};
    m.seed = tn.cfg.seed;
    m.inputs = {tn.corpus, tn.vocab};
    finish(m, tn.manifest);
  });

  // gibbs --------------------------------------------------------------------
  auto* gb = app.add_subcommand("gibbs", "collapsed Gibbs LDA baseline");
  struct {
    std::string corpus, vocab, out_topics, out_proportions, manifest;
    int topics = 50, sweeps = 500, burnin = 100;
    double alpha = 0.0, eta = 0.01;
    uint64_t seed = 0;
  } gi;
  gb->add_option("--corpus", gi.corpus, "sparse counts file")->required();
  gb->add_option("--vocab", gi.vocab, "vocabulary file")->required();
  gb->add_option("--topics", gi.topics, "number of topics K");
  gb->add_option("--sweeps", gi.sweeps, "sampling sweeps after burn-in");
  gb->add_option("--burnin", gi.burnin, "burn-in sweeps");
  gb->add_option("--alpha", gi.alpha, "document-topic prior (0 = 50/K)");
  gb->add_option("--eta", gi.eta, "topic-word prior");
  gb->add_option("--seed", gi.seed, "random seed");
  gb->add_option("--out-topics", gi.out_topics, "topic matrix output")->required();
  gb->add_option("--out-proportions", gi.out_proportions, "document proportions output");
  gb->add_option("--manifest", gi.manifest, "manifest output path");
  gb->callback([&] {
    if (gi.sweeps < 1) throw std::invalid_argument("gibbs: need at least one sampling sweep");
    Corpus corpus = load_counts_corpus(gi.corpus, gi.vocab);
    double alpha = gi.alpha > 0.0 ? gi.alpha : 50.0 / gi.topics;
    GibbsState s = gibbs_init(corpus, gi.topics, alpha, gi.eta, gi.seed);
    for (int i = 0; i < gi.burnin; ++i) gibbs_sweep(s);
    Matrix topics_avg(gi.topics, corpus.vocab_size());
    Matrix props_avg(corpus.num_docs(), gi.topics);
    for (int i = 0; i < gi.sweeps; ++i) {
      gibbs_sweep(s);
      GibbsEstimate e = gibbs_estimate(s);
      axpy(1.0 / gi.sweeps, e.topics, topics_avg);
      axpy(1.0 / gi.sweeps, e.proportions, props_avg);
    }
    save_topics_file(topics_avg, gi.out_topics);
    RunManifest m;
    m.command = "gibbs";
    m.outputs = {gi.out_topics};
    if (!gi.out_proportions.empty()) {
      save_topics_file(props_avg, gi.out_proportions);
      m.outputs.push_back(gi.out_proportions);
    }
    std::cout << "gibbs: K " << gi.topics << ", " << gi.burnin << " burn-in + " << gi.sweeps
              << " sampling sweeps\n";
    m.flags = {{"corpus", gi.corpus}, {"vocab", gi.vocab}, {"topics", gi.topics},
               {"sweeps", gi.sweeps}, {"burnin", gi.burnin}, {"alpha", alpha}, {"eta", gi.eta},
               {"seed", gi.seed}, {"out-topics", gi.out_topics},
               {"out-proportions", gi.out_proportions}};
    m.seed = gi.seed;
    m.inputs = {gi.corpus, gi.vocab};
    finish(m, gi.manifest);
  });

  // top-words ----------------------------------------------------------------
  auto* tw = app.add_subcommand("top-words", "highest-probability words per topic");
  struct {
    std::string model, topics_file, vocab, out, manifest;
    int n = 10;
  } tp;
  tw->add_option("--model", tp.model, "trained model file");
  tw->add_option("--topics-file", tp.topics_file, "topic matrix file");
  tw->add_option("--vocab", tp.vocab, "vocabulary file")->required();
  tw->add_option("--n", tp.n, "words per topic");
  tw->add_option("--out", tp.out, "report output path")->required();
  tw->add_option("--manifest", tp.manifest, "manifest output path");
  tw->callback([&] {
    if (tp.model.empty() == tp.topics_file.empty())
      throw EvalError("top-words: give exactly one of --model or --topics-file");
    Matrix topics = tp.model.empty() ? load_topics_file(tp.topics_file)
                                     : load_model(tp.model).params.topics();
    Vocabulary vocab = load_vocab(tp.vocab);
    auto words = top_words(topics, vocab, tp.n);
    std::ofstream out(tp.out);
    if (!out) throw ParseError("cannot write " + tp.out);
    for (size_t k = 0; k < words.size(); ++k) {
      out << "topic " << k << ":";
      for (const std::string& w : words[k].words) out << " " << w;
      out << "\n";
    }
    out.close();
    RunManifest m;
    m.command = "top-words";
    m.flags = {{"model", tp.model}, {"topics-file", tp.topics_file}, {"vocab", tp.vocab},
               {"n", tp.n}, {"out", tp.out}};
    m.inputs = {tp.model.empty() ? tp.topics_file : tp.model, tp.vocab};
    m.outputs = {tp.out};
    finish(m, tp.manifest);
  });

  // coherence ----------------------------------------------------------------
  auto* co = app.add_subcommand("coherence", "NPMI topic coherence report");
  struct {
    std::string model, topics_file, vocab, corpus, out, manifest;
    int n = 10;
  } ch;
  co->add_option("--model", ch.model, "trained model file");
  co->add_option("--topics-file", ch.topics_file, "topic matrix file");
  co->add_option("--vocab", ch.vocab, "vocabulary file")->required();
  co->add_option("--corpus", ch.corpus, "reference sparse counts file")->required();
  co->add_option("--n", ch.n, "words per topic");
  co->add_option("--out", ch.out, "report output path")->required();
  co->add_option("--manifest", ch.manifest, "manifest output path");
  co->callback([&] {
    if (ch.model.empty() == ch.topics_file.empty())
      throw EvalError("coherence: give exactly one of --model or --topics-file");
    std::vector<std::pair<int, int>> blocks;
    Matrix topics;
    if (ch.model.empty()) {
      topics = load_topics_file(ch.topics_file);
    } else {
      ModelBundle bundle = load_model(ch.model);
      topics = bundle.params.topics();
      blocks = component_blocks(bundle.params.layout);
    }
    Corpus reference = load_counts_corpus(ch.corpus, ch.vocab);
    auto words = top_words(topics, reference.vocabulary, ch.n);
    CoherenceResult res = npmi_coherence(words, reference);
    std::ofstream out(ch.out);
    if (!out) throw ParseError("cannot write " + ch.out);
    write_topic_report(out, words, res, blocks);
    out.close();
    std::cout << "mean npmi " << res.mean << " over " << topics.rows << " topics\n";
    RunManifest m;
    m.command = "coherence";
    m.flags = {{"model", ch.model}, {"topics-file", ch.topics_file}, {"vocab", ch.vocab},
               {"corpus", ch.corpus}, {"n", ch.n}, {"out", ch.out}};
    m.inputs = {ch.model.empty() ? ch.topics_file : ch.model, ch.vocab, ch.corpus};
    m.outputs = {ch.out};
    finish(m, ch.manifest);
  });

  // sample -------------------------------------------------------------------
  auto* sa = app.add_subcommand("sample", "generate documents from a trained model");
  struct {
    std::string model, vocab, out_counts, manifest;
    int docs = 100, len = 50;
    uint64_t seed = 0;
  } sm;
  sa->add_option("--model", sm.model, "trained model file")->required();
  sa->add_option("--vocab", sm.vocab, "vocabulary file (default: synthetic w<i> tokens)");
  sa->add_option("--docs", sm.docs, "number of documents");
  sa->add_option("--len", sm.len, "words per document");
  sa->add_option("--seed", sm.seed, "random seed");
  sa->add_option("--out-counts", sm.out_counts, "sparse counts output")->required();
  sa->add_option("--manifest", sm.manifest, "manifest output path");
  sa->callback([&] {
    ModelBundle bundle = load_model(sm.model);
    Vocabulary vocab;
    if (!sm.vocab.empty()) vocab = load_vocab(sm.vocab);
    Corpus corpus =
        sample_documents(bundle.params, node_priors(bundle.params.layout, bundle.config.alpha),
                         sm.docs, sm.len, sm.seed, sm.vocab.empty() ? nullptr : &vocab);
    save_corpus(corpus, sm.out_counts);
    RunManifest m;
    m.command = "sample";
    m.flags = {{"model", sm.model}, {"vocab", sm.vocab}, {"docs", sm.docs}, {"len", sm.len},
               {"seed", sm.seed}, {"out-counts", sm.out_counts}};
    m.seed = sm.seed;
    m.inputs = {sm.model};
    if (!sm.vocab.empty()) m.inputs.push_back(sm.vocab);
    m.outputs = {sm.out_counts};
    finish(m, sm.manifest);
  });

  // recover ------------------------------------------------------------------
  auto* re = app.add_subcommand("recover", "align learned topics with planted topics");
  struct {
    std::string learned, planted, out, manifest;
  } rc;
  re->add_option("--learned", rc.learned, "learned topic matrix file")->required();
  re->add_option("--planted", rc.planted, "planted topic matrix file")->required();
  re->add_option("--out", rc.out, "alignment report output")->required();
  re->add_option("--manifest", rc.manifest, "manifest output path");
  re->callback([&] {
    Matrix learned = load_topics_file(rc.learned);
    Matrix planted = load_topics_file(rc.planted);
    Alignment a = align_topics(learned, planted);
    std::ofstream out(rc.out);
    if (!out) throw ParseError("cannot write " + rc.out);
    char buf[32];
    for (size_t k = 0; k < a.permutation.size(); ++k) {
      std::snprintf(buf, sizeof(buf), "%.6f", a.tv[k]);
      out << "topic " << k << " -> planted " << a.permutation[k] << " tv=" << buf << "\n";
    }
    std::snprintf(buf, sizeof(buf), "%.6f", a.mean_tv);
    out << "mean_tv=" << buf << "\n";
    out.close();
    std::cout << "mean tv " << a.mean_tv << "\n";
    RunManifest m;
    m.command = "recover";
    m.flags = {{"learned", rc.learned}, {"planted", rc.planted}, {"out", rc.out}};
    m.inputs = {rc.learned, rc.planted};
    m.outputs = {rc.out};
    finish(m, rc.manifest);
  });

  // info ---------------------------------------------------------------------
  auto* in = app.add_subcommand("info", "summarize a model file");
  struct {
    std::string model, manifest;
  } nf;
  in->add_option("--model", nf.model, "trained model file")->required();
  in->add_option("--manifest", nf.manifest, "manifest output path");
  in->callback([&] {
    ModelBundle b = load_model(nf.model);
    const ArchLayout& lay = b.params.layout;
    std::cout << "architecture " << lay.arch.describe()
              << (lay.arch.is_mixture() ? " (mixture)" : "") << "\n"
              << "sub-topics " << lay.k_total << ", vocabulary " << lay.vocab << ", latent nodes "
              << lay.nodes.size() << ", encoder levels " << lay.levels.size() << "\n"
              << "norm " << norm_mode_name(b.config.norm) << ", hidden " << b.config.hidden
              << ", lr " << b.config.lr << ", alpha " << b.config.alpha << ", seed "
              << b.config.seed << "\n";
    RunManifest m;
    m.command = "info";
    m.flags = {{"model", nf.model}};
    m.inputs = {nf.model};
    finish(m, nf.manifest);
  });

  // rerun --------------------------------------------------------------------
  auto* rr = app.add_subcommand("rerun", "repeat a run recorded in a manifest");
  struct {
    std::string manifest;
  } rn;
  rr->add_option("--manifest", rn.manifest, "manifest of the run to repeat")->required();
  int rerun_code = 0;
  rr->callback([&] {
    std::ifstream min(rn.manifest);
    if (!min) throw ParseError("cannot open " + rn.manifest);
    nlohmann::json j = nlohmann::json::parse(min, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.contains("argv"))
      throw ParseError(rn.manifest + ": not a run manifest");
    std::vector<std::string> recorded = j["argv"].get<std::vector<std::string>>();
    rerun_code = run_cli(recorded);
  });

  std::vector<const char*> argv;
  argv.push_back("pachinko");
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rerun_code;
}

}  // namespace pachinko
