#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pachinko {

struct ArchitectureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Widths of an l-partite PAM DAG (root width 1, leaves V), or a word-level
// mixture of such DAGs sharing one root of width M = number of components.
struct PamArchitecture {
  enum class Kind { LPam, Mixture };
  Kind kind = Kind::LPam;
  std::vector<std::vector<int>> components;  // each [1, S1, ..., K_c, V]

  static PamArchitecture lpam(std::vector<int> widths) {
    PamArchitecture a;
    a.kind = Kind::LPam;
    a.components.push_back(std::move(widths));
    return a;
  }
  static PamArchitecture mixture(std::vector<std::vector<int>> comps) {
    PamArchitecture a;
    a.kind = Kind::Mixture;
    a.components = std::move(comps);
    return a;
  }

  bool is_mixture() const { return kind == Kind::Mixture; }
  int num_components() const { return static_cast<int>(components.size()); }
  int vocab_size() const { return components.at(0).back(); }

  int subtopic_count() const {
    int k = 0;
    for (const auto& w : components) k += w[w.size() - 2];
    return k;
  }

  std::string describe() const {
    std::ostringstream ss;
    for (size_t c = 0; c < components.size(); ++c) {
      if (c) ss << ";";
      for (size_t i = 0; i < components[c].size(); ++i) {
        if (i) ss << ",";
        ss << components[c][i];
      }
    }
    return ss.str();
  }
};

inline PamArchitecture validate_architecture(const PamArchitecture& arch) {
  if (arch.components.empty()) throw ArchitectureError("architecture: no components");
  if (arch.kind == PamArchitecture::Kind::LPam && arch.num_components() != 1)
    throw ArchitectureError("architecture: l-PAM must have exactly one width list");
  int V = -1;
  for (const auto& w : arch.components) {
    if (w.size() < 3) throw ArchitectureError("architecture: need at least 3 levels (root, topics, words)");
    if (w.front() != 1) throw ArchitectureError("architecture: root width must be 1");
    for (int x : w)
      if (x < 1) throw ArchitectureError("architecture: all level widths must be >= 1");
    if (V < 0)
      V = w.back();
    else if (w.back() != V)
      throw ArchitectureError("architecture: mixture components must share the vocabulary width");
  }
  if (V < 2) throw ArchitectureError("architecture: leaf width (vocabulary) must be >= 2");
  return arch;
}

// Flattened per-document latent node: one logistic-normal posterior each.
struct LatentNode {
  int component;  // -1 for the mixture root
  int level;      // level within its component (0 = component root)
  int index;      // node index within that level
  int fanout;
  int enc_level;  // virtual DAG level, = index into ArchLayout::levels
  int offset;     // slice start within the encoder level's output vector
};

struct LevelLayout {
  int total_dim = 0;              // sum of fanouts of the nodes at this level
  std::vector<int> node_ids;      // indices into ArchLayout::nodes
};

struct CompLevel {
  int nodes;
  int fanout;
};

// Precomputed index structure for one validated architecture.
struct ArchLayout {
  PamArchitecture arch;
  std::vector<LatentNode> nodes;
  std::vector<LevelLayout> levels;
  std::vector<std::vector<CompLevel>> comp_levels;  // per component, doc-level chain
  std::vector<int> beta_offset;                     // sub-topic row block start per component
  std::vector<std::vector<std::vector<int>>> comp_node_ids;  // [component][level][index] -> node id
  int mix_root_node = -1;                           // node id of the mixture root, or -1
  int k_total = 0;
  int vocab = 0;
  int total_latent_dim = 0;                         // sum of fanouts over all latent nodes

  // node id lookup for (component, level, index); mixture root is node 0.
  int node_id(int component, int level, int index) const {
    for (size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i].component == component && nodes[i].level == level && nodes[i].index == index)
        return static_cast<int>(i);
    throw std::out_of_range("node_id: no such latent node");
  }
};

inline ArchLayout make_layout(const PamArchitecture& arch_in) {
  ArchLayout lay;
  lay.arch = validate_architecture(arch_in);
  const auto& comps = lay.arch.components;
  lay.vocab = lay.arch.vocab_size();
  lay.k_total = lay.arch.subtopic_count();
  int off = 0;
  for (const auto& w : comps) {
    lay.beta_offset.push_back(off);
    off += w[w.size() - 2];
    std::vector<CompLevel> chain;
    for (size_t l = 0; l + 2 < w.size(); ++l) chain.push_back({w[l], w[l + 1]});
    lay.comp_levels.push_back(std::move(chain));
  }
  int depth = 0;
  for (const auto& ch : lay.comp_levels) depth = std::max(depth, static_cast<int>(ch.size()));
  int shift = lay.arch.is_mixture() ? 1 : 0;
  lay.levels.resize(depth + shift);
  lay.comp_node_ids.resize(comps.size());
  for (int c = 0; c < lay.arch.num_components(); ++c)
    lay.comp_node_ids[c].resize(lay.comp_levels[c].size());
  auto add_node = [&lay](int comp, int level, int index, int fanout, int enc_level) {
    LevelLayout& L = lay.levels[enc_level];
    int id = static_cast<int>(lay.nodes.size());
    lay.nodes.push_back({comp, level, index, fanout, enc_level, L.total_dim});
    L.node_ids.push_back(id);
    L.total_dim += fanout;
    lay.total_latent_dim += fanout;
    if (comp < 0)
      lay.mix_root_node = id;
    else
      lay.comp_node_ids[comp][level].push_back(id);
  };
  if (lay.arch.is_mixture()) add_node(-1, 0, 0, lay.arch.num_components(), 0);
  for (int l = 0; l < depth; ++l)
    for (int c = 0; c < lay.arch.num_components(); ++c) {
      if (l >= static_cast<int>(lay.comp_levels[c].size())) continue;
      const CompLevel& cl = lay.comp_levels[c][l];
      for (int i = 0; i < cl.nodes; ++i) add_node(c, l, i, cl.fanout, l + shift);
    }
  return lay;
}

// "1,2,50,2000" -> 4-PAM; "1,10,100;1,50,100" -> mixture of two 3-PAMs.
inline PamArchitecture parse_architecture(const std::string& spec) {
  std::vector<std::vector<int>> comps;
  std::istringstream comp_ss(spec);
  std::string comp;
  while (std::getline(comp_ss, comp, ';')) {
    std::vector<int> widths;
    std::istringstream ws(comp);
    std::string tok;
    while (std::getline(ws, tok, ',')) {
      try {
        widths.push_back(std::stoi(tok));
      } catch (const std::exception&) {
        throw ArchitectureError("architecture: cannot parse width '" + tok + "'");
      }
    }
    comps.push_back(std::move(widths));
  }
  if (comps.empty()) throw ArchitectureError("architecture: empty spec");
  PamArchitecture arch = comps.size() == 1 ? PamArchitecture::lpam(comps[0])
                                           : PamArchitecture::mixture(comps);
  return validate_architecture(arch);
}

}  // namespace pachinko
