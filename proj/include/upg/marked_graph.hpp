#pragma once
// Finite graphs with rational edge lengths, markings identifying the
// fundamental group with F_n, filtrations by one-edge extensions, and
// edge-path tightening.
//
// Oriented edges are nonzero ints: +(id+1) traverses unoriented edge id
// forwards, -(id+1) backwards — the same encoding words use for letters, so
// path tightening shares the word-reduction machinery.

#include <algorithm>
#include <optional>
#include <queue>
#include <vector>

#include "upg/aut.hpp"
#include "upg/detail/seq.hpp"
#include "upg/errors.hpp"
#include "upg/numeric.hpp"
#include "upg/subgroup.hpp"
#include "upg/word.hpp"

namespace upg {

struct Graph {
  struct Edge {
    int init = 0, term = 0;
    Rat length = 1;
    bool operator==(const Edge&) const = default;
  };

  int nv = 0;
  std::vector<Edge> edges;

  bool operator==(const Graph&) const = default;

  static int eid(int oriented) { return std::abs(oriented) - 1; }
  int num_edges() const { return static_cast<int>(edges.size()); }

  int init_of(int oriented) const {
    const Edge& e = edges[eid(oriented)];
    return oriented > 0 ? e.init : e.term;
  }
  int term_of(int oriented) const {
    const Edge& e = edges[eid(oriented)];
    return oriented > 0 ? e.term : e.init;
  }
  const Rat& length(int id) const { return edges[id].length; }

  int add_edge(int init, int term, Rat len = 1) {
    edges.push_back({init, term, std::move(len)});
    return static_cast<int>(edges.size()) - 1;
  }

  void validate() const {
    std::vector<int> deg(nv, 0);
    for (const Edge& e : edges) {
      require(e.init >= 0 && e.init < nv && e.term >= 0 && e.term < nv, "NotClosed",
              "edge endpoint out of range");
      require(e.length > 0, "NotClosed", "edge lengths must be positive");
      ++deg[e.init];
      ++deg[e.term];
    }
    for (int v = 0; v < nv; ++v)
      require(deg[v] > 0 || nv == 1, "NotClosed", "isolated vertex");
    // Connectivity.
    if (nv == 0) return;
    std::vector<bool> vis(nv, false);
    std::queue<int> q;
    q.push(0);
    vis[0] = true;
    int count = 1;
    while (!q.empty()) {
      int v = q.front();
      q.pop();
      for (const Edge& e : edges)
        for (int t : {e.init == v ? e.term : -1, e.term == v ? e.init : -1})
          if (t >= 0 && !vis[t]) {
            vis[t] = true;
            ++count;
            q.push(t);
          }
    }
    require(count == nv, "NotClosed", "graph is not connected");
  }
};

// A not-necessarily-tight edge path; tightness is established by tighten().
using EdgePath = std::vector<int>;

inline void check_concatenable(const Graph& g, const EdgePath& p) {
  for (size_t i = 0; i + 1 < p.size(); ++i)
    require(g.term_of(p[i]) == g.init_of(p[i + 1]), "NonConcatenablePath",
            "edges " + std::to_string(p[i]) + " and " + std::to_string(p[i + 1]) +
                " do not concatenate");
}

inline EdgePath tighten(const Graph& g, const EdgePath& p) {
  check_concatenable(g, p);
  return detail::seq_reduce(p);
}

// Tightens a closed path as a cyclic word of edges (wrap-around cancellation
// too); the result is the immersed loop in the free homotopy class.
inline EdgePath cyclic_tighten(const Graph& g, const EdgePath& p) {
  EdgePath t = tighten(g, p);
  if (!t.empty())
    require(g.term_of(t.back()) == g.init_of(t.front()), "NotClosed",
            "cyclic tightening needs a closed path");
  while (t.size() >= 2 && t.front() == -t.back()) {
    t.erase(t.begin());
    t.pop_back();
  }
  return t;
}

inline EdgePath path_inverse(const EdgePath& p) { return detail::seq_inverse(p); }

inline Rat path_metric_length(const Graph& g, const EdgePath& p) {
  Rat s = 0;
  for (int e : p) s += g.length(Graph::eid(e));
  return s;
}

struct Marking {
  int rank = 0;
  int base = 0;
  std::vector<bool> in_tree;  // per unoriented edge
  std::vector<Word> mu;       // per unoriented edge, positive orientation
  // Certificate inverting the marking: x_j -> mu(petal j), with certified
  // inverse.  Petal order: non-tree edges by ascending id.
  std::optional<Aut> cert;
};

inline Word mu_of(const Marking& m, int oriented) {
  const Word& w = m.mu[Graph::eid(oriented)];
  return oriented > 0 ? w : w.inverse();
}

inline std::vector<int> petal_edges(const Marking& m) {
  std::vector<int> out;
  for (size_t i = 0; i < m.in_tree.size(); ++i)
    if (!m.in_tree[i]) out.push_back(static_cast<int>(i));
  return out;
}

// Path between two vertices inside the spanning tree.
inline EdgePath tree_path(const Graph& g, const Marking& m, int from, int to) {
  if (from == to) return {};
  std::vector<std::pair<int, int>> parent(g.nv, {-1, 0});  // (prev vertex, oriented edge)
  std::queue<int> q;
  q.push(from);
  parent[from] = {from, 0};
  while (!q.empty()) {
    int v = q.front();
    q.pop();
    if (v == to) break;
    for (int id = 0; id < g.num_edges(); ++id) {
      if (!m.in_tree[id]) continue;
      for (int oe : {id + 1, -(id + 1)}) {
        if (g.init_of(oe) != v) continue;
        int t = g.term_of(oe);
        if (parent[t].first < 0) {
          parent[t] = {v, oe};
          q.push(t);
        }
      }
    }
  }
  require(parent[to].first >= 0, "NotClosed", "vertices not connected in spanning tree");
  EdgePath rev;
  for (int v = to; v != from; v = parent[v].first) rev.push_back(parent[v].second);
  std::reverse(rev.begin(), rev.end());
  return rev;
}

// The F_n element of a closed path: reduced product of edge labels.  Tree
// edges carry ε, so the value is basepoint-independent up to conjugacy and
// exactly the marking image for loops at the base.
inline Word loop_to_word(const Graph& g, const Marking& m, const EdgePath& loop) {
  if (loop.empty()) return Word();
  check_concatenable(g, loop);
  require(g.term_of(loop.back()) == g.init_of(loop.front()), "NotClosed",
          "loop_to_word needs a closed path");
  Word w;
  for (int e : loop) w = w * mu_of(m, e);
  return w;
}

// The embedded loop at the base crossing petal edge id once forwards.
inline EdgePath petal_loop(const Graph& g, const Marking& m, int id) {
  EdgePath p = tree_path(g, m, m.base, g.init_of(id + 1));
  p.push_back(id + 1);
  EdgePath back = tree_path(g, m, g.term_of(id + 1), m.base);
  p.insert(p.end(), back.begin(), back.end());
  return tighten(g, p);
}

// Accepts iff tree labels are trivial, the tree spans, non-tree labels form a
// basis of F_n (fold certificate: their core is the n-petal rose), and any
// attached certificate matches.
inline void validate_marking(const Graph& g, const Marking& m) {
  require(static_cast<int>(m.in_tree.size()) == g.num_edges() &&
              static_cast<int>(m.mu.size()) == g.num_edges(),
          "NotABasis", "marking tables sized differently from the edge list");
  int tree_edges = 0;
  for (int id = 0; id < g.num_edges(); ++id)
    if (m.in_tree[id]) {
      ++tree_edges;
      require(m.mu[id].empty(), "NotABasis", "tree edge carries a nontrivial label");
    }
  require(tree_edges == g.nv - 1, "NotABasis", "spanning tree size mismatch");
  // Tree connectivity: every vertex reachable from base inside the tree.
  for (int v = 0; v < g.nv; ++v) tree_path(g, m, m.base, v);
  std::vector<Word> basis;
  for (int id : petal_edges(m)) basis.push_back(m.mu[id]);
  require(static_cast<int>(basis.size()) == m.rank, "NotABasis",
          "petal count differs from the rank");
  // Fold certificate: the petal labels generate all of F_n exactly when their
  // folded core is the n-petal rose; with petal count n that makes a basis.
  SubgroupGraph core = SubgroupGraph::fold(m.rank, basis);
  require(core.num_vertices() == 1 && core.num_edges() == m.rank, "NotABasis",
          "petal labels do not fold to the full rose");
  if (m.cert) {
    require(m.cert->rank() == m.rank, "NotABasis", "certificate rank mismatch");
    for (int j = 0; j < m.rank; ++j)
      require(m.cert->images()[j] == basis[j], "NotABasis",
              "certificate does not match the petal labels");
  }
}

// Tries to attach a basis certificate to a marking lacking one.
inline bool attach_marking_cert(Marking& m) {
  if (m.cert) return true;
  std::vector<Word> basis;
  for (int id : petal_edges(m)) basis.push_back(m.mu[id]);
  auto a = aut_from_basis_tuple(basis);
  if (!a) return false;
  m.cert = *a;
  return true;
}

// Realizes a word as a tight loop at the base (inverse of loop_to_word on
// classes); requires the basis certificate.
inline EdgePath word_to_loop(const Graph& g, const Marking& m, const Word& w) {
  require(m.cert.has_value(), "WordNotRealizable",
          "marking carries no basis certificate");
  Word coords = m.cert->apply_inverse(w);
  std::vector<int> petals = petal_edges(m);
  EdgePath p;
  for (Letter x : coords.letters()) {
    EdgePath loop = petal_loop(g, m, petals[std::abs(x) - 1]);
    if (x < 0) loop = path_inverse(loop);
    p.insert(p.end(), loop.begin(), loop.end());
  }
  return tighten(g, p);
}

struct Filtration {
  std::vector<int> order;  // unoriented edge ids, bottom stratum first
};

inline void validate_filtration(const Graph& g, const Filtration& f) {
  std::vector<bool> seen(g.num_edges(), false);
  require(static_cast<int>(f.order.size()) == g.num_edges(), "NotClosed",
          "filtration order must list every edge once");
  for (int id : f.order) {
    require(id >= 0 && id < g.num_edges() && !seen[id], "NotClosed",
            "filtration order must be a permutation of the edges");
    seen[id] = true;
  }
}

// Stratum position of each edge: position[id] = index in the order.
inline std::vector<int> filtration_positions(const Graph& g, const Filtration& f) {
  std::vector<int> pos(g.num_edges(), -1);
  for (size_t i = 0; i < f.order.size(); ++i) pos[f.order[i]] = static_cast<int>(i);
  return pos;
}

struct FilteredGraph {
  Graph g;
  Marking m;
  Filtration f;

  void validate() const {
    g.validate();
    validate_marking(g, m);
    validate_filtration(g, f);
  }
};

// The standard rose: one vertex, petal j marked with the j-th generator.
inline FilteredGraph standard_rose(int rank) {
  FilteredGraph fg;
  fg.g.nv = 1;
  fg.m.rank = rank;
  fg.m.base = 0;
  for (int j = 0; j < rank; ++j) {
    fg.g.add_edge(0, 0);
    fg.m.in_tree.push_back(false);
    fg.m.mu.push_back(Word::one_letter(j + 1));
    fg.f.order.push_back(j);
  }
  fg.m.cert = Aut::identity(rank);
  return fg;
}

}  // namespace upg
