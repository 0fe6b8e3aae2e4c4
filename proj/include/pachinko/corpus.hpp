#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace pachinko {

struct IngestError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Vocabulary {
  std::vector<std::string> tokens;
  std::unordered_map<std::string, int> index;

  int size() const { return static_cast<int>(tokens.size()); }

  int id_of(const std::string& tok) const {
    auto it = index.find(tok);
    return it == index.end() ? -1 : it->second;
  }

  static Vocabulary from_tokens(std::vector<std::string> toks) {
    Vocabulary v;
    v.tokens = std::move(toks);
    for (size_t i = 0; i < v.tokens.size(); ++i) {
      if (v.tokens[i].empty()) throw IngestError("vocabulary: empty token at id " + std::to_string(i));
      if (!v.index.emplace(v.tokens[i], static_cast<int>(i)).second)
        throw IngestError("vocabulary: duplicate token '" + v.tokens[i] + "'");
    }
    if (v.size() < 2) throw IngestError("vocabulary: need at least 2 tokens");
    return v;
  }

  bool operator==(const Vocabulary& o) const { return tokens == o.tokens; }
};

struct Document {
  std::string id;
  std::map<int, int> counts;  // term id -> count, ordered for deterministic io

  int total_tokens() const {
    int n = 0;
    for (auto& [t, c] : counts) n += c;
    return n;
  }
  bool operator==(const Document& o) const { return id == o.id && counts == o.counts; }
};

struct Corpus {
  Vocabulary vocabulary;
  std::vector<Document> documents;
  int dropped_empty = 0;  // documents discarded during counting

  int num_docs() const { return static_cast<int>(documents.size()); }
  int vocab_size() const { return vocabulary.size(); }

  void validate() const {
    if (documents.empty()) throw IngestError("corpus: no documents");
    int V = vocabulary.size();
    for (const auto& d : documents) {
      if (d.counts.empty()) throw IngestError("corpus: empty document '" + d.id + "'");
      for (auto& [t, c] : d.counts) {
        if (t < 0 || t >= V) throw IngestError("corpus: term id out of range in '" + d.id + "'");
        if (c < 1) throw IngestError("corpus: non-positive count in '" + d.id + "'");
      }
    }
  }

  bool operator==(const Corpus& o) const { return vocabulary == o.vocabulary && documents == o.documents; }
};

// whitespace split, lowercase, strip non-alphanumeric edges
inline std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) {
    size_t b = 0, e = tok.size();
    while (b < e && !std::isalnum(static_cast<unsigned char>(tok[b]))) ++b;
    while (e > b && !std::isalnum(static_cast<unsigned char>(tok[e - 1]))) --e;
    if (e <= b) continue;
    std::string t = tok.substr(b, e - b);
    for (char& ch : t) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    out.push_back(std::move(t));
  }
  return out;
}

using RawDocs = std::vector<std::vector<std::string>>;

inline Vocabulary build_vocab(const RawDocs& raw_docs, int max_vocab,
                              const std::set<std::string>& stopwords = {}) {
  if (raw_docs.empty()) throw IngestError("build_vocab: no documents");
  if (max_vocab < 2) throw IngestError("build_vocab: max_vocab must be >= 2");
  std::map<std::string, long long> freq;  // ordered map gives the lexicographic tie-break
  for (const auto& doc : raw_docs)
    for (const auto& tok : doc) {
      if (tok.empty() || stopwords.count(tok)) continue;
      ++freq[tok];
    }
  if (freq.size() < 2) throw IngestError("build_vocab: fewer than 2 distinct eligible tokens");
  std::vector<std::pair<std::string, long long>> items(freq.begin(), freq.end());
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  int keep = std::min<int>(max_vocab, static_cast<int>(items.size()));
  std::vector<std::string> toks;
  toks.reserve(keep);
  for (int i = 0; i < keep; ++i) toks.push_back(items[i].first);
  return Vocabulary::from_tokens(std::move(toks));
}

inline Corpus count_docs(const RawDocs& raw_docs, const Vocabulary& vocab) {
  Corpus c;
  c.vocabulary = vocab;
  int idx = 0;
  for (const auto& doc : raw_docs) {
    Document d;
    d.id = "d" + std::to_string(idx++);
    for (const auto& tok : doc) {
      int t = vocab.id_of(tok);
      if (t >= 0) ++d.counts[t];
    }
    if (d.counts.empty()) {
      ++c.dropped_empty;
      continue;
    }
    c.documents.push_back(std::move(d));
  }
  if (c.documents.empty()) throw IngestError("count_docs: all documents empty after vocabulary filtering");
  return c;
}

// --- file formats ---------------------------------------------------------
// text-lines:    one document per line, tokens separated by spaces
// sparse-counts: header "#vocab <V>", then "<doc-id> <termid>:<count> ..."
// vocabulary:    one token per line, line number = term id

enum class CorpusFormat { TextLines, SparseCounts };

inline RawDocs load_text_docs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  RawDocs docs;
  std::string line;
  while (std::getline(in, line)) docs.push_back(tokenize(line));
  if (docs.empty()) throw ParseError(path + ": no lines");
  return docs;
}

inline void save_vocab(const Vocabulary& v, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  for (const auto& t : v.tokens) out << t << "\n";
}

inline Vocabulary load_vocab(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::vector<std::string> toks;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) throw ParseError(path + ": empty token at line " + std::to_string(toks.size() + 1));
    toks.push_back(line);
  }
  return Vocabulary::from_tokens(std::move(toks));
}

inline void save_corpus(const Corpus& c, const std::string& counts_path) {
  std::ofstream out(counts_path);
  if (!out) throw ParseError("cannot write " + counts_path);
  out << "#vocab " << c.vocab_size() << "\n";
  for (const auto& d : c.documents) {
    out << d.id;
    for (auto& [t, n] : d.counts) out << " " << t << ":" << n;
    out << "\n";
  }
}

inline Corpus load_sparse_counts(const std::string& counts_path, const Vocabulary& vocab) {
  std::ifstream in(counts_path);
  if (!in) throw ParseError("cannot open " + counts_path);
  std::string line;
  int lineno = 0;
  if (!std::getline(in, line)) throw ParseError(counts_path + ": empty file");
  ++lineno;
  int V = -1;
  {
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag >> V) || tag != "#vocab")
      throw ParseError(counts_path + ":1: expected '#vocab <V>' header");
  }
  if (V != vocab.size())
    throw ParseError(counts_path + ": header vocab size " + std::to_string(V) +
                     " does not match vocabulary (" + std::to_string(vocab.size()) + ")");
  Corpus c;
  c.vocabulary = vocab;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    Document d;
    if (!(ss >> d.id)) throw ParseError(counts_path + ":" + std::to_string(lineno) + ": missing doc id");
    std::string pair;
    while (ss >> pair) {
      auto colon = pair.find(':');
      if (colon == std::string::npos)
        throw ParseError(counts_path + ":" + std::to_string(lineno) + ": malformed entry '" + pair + "'");
      int t, n;
      try {
        t = std::stoi(pair.substr(0, colon));
        n = std::stoi(pair.substr(colon + 1));
      } catch (const std::exception&) {
        throw ParseError(counts_path + ":" + std::to_string(lineno) + ": malformed entry '" + pair + "'");
      }
      if (t < 0 || t >= V)
        throw ParseError(counts_path + ":" + std::to_string(lineno) + ": term id out of range");
      if (n < 1) throw ParseError(counts_path + ":" + std::to_string(lineno) + ": count must be >= 1");
      d.counts[t] += n;
    }
    if (d.counts.empty())
      throw ParseError(counts_path + ":" + std::to_string(lineno) + ": document has no terms");
    c.documents.push_back(std::move(d));
  }
  c.validate();
  return c;
}

inline Corpus load_corpus(const std::string& path, CorpusFormat fmt, const std::string& vocab_path,
                          int max_vocab = 0, const std::set<std::string>& stopwords = {}) {
  if (fmt == CorpusFormat::SparseCounts) return load_sparse_counts(path, load_vocab(vocab_path));
  RawDocs raw = load_text_docs(path);
  Vocabulary vocab = vocab_path.empty()
                         ? build_vocab(raw, max_vocab > 0 ? max_vocab : 1 << 30, stopwords)
                         : load_vocab(vocab_path);
  return count_docs(raw, vocab);
}

}  // namespace pachinko
