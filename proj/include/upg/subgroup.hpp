#pragma once
// Stallings graphs for finitely generated subgroups of F_n.  A subgroup is
// represented by its folded core rooted at a basepoint; membership, conjugacy
// of subgroups, fiber-product intersections and exact double-coset decisions
// are all graph computations on this form.
//
// The basepoint (with its possible degree-1 spur) is kept, so membership is
// exact for the subgroup itself; conjugacy tests work on the shaved core.

#include <algorithm>
#include <cassert>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <tuple>
#include <vector>

#include "upg/word.hpp"

namespace upg {

namespace detail {

// Mutable graph under folding: union-find on vertices plus a bag of
// positively-labeled edges.  Folding identifies targets of equal-label edges
// leaving (or entering) the same class until the graph is deterministic.
struct FoldState {
  int n;  // ambient rank (labels 1..n)
  std::vector<int> uf;
  std::vector<std::tuple<int, int, int>> edges;  // (u, g, v) with g in 1..n

  explicit FoldState(int rank) : n(rank) {}

  int fresh() {
    uf.push_back(static_cast<int>(uf.size()));
    return static_cast<int>(uf.size()) - 1;
  }

  int find(int x) {
    while (uf[x] != x) x = uf[x] = uf[uf[x]];
    return x;
  }

  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) uf[std::max(a, b)] = std::min(a, b);
  }

  void add_edge(int u, Letter x, int v) {
    // Edge from u to v labeled x; stored with positive label.
    if (x > 0)
      edges.emplace_back(u, x, v);
    else
      edges.emplace_back(v, -x, u);
  }

  // Appends a fresh path spelling w from vertex from; returns its endpoint.
  int add_path(int from, const Word& w) {
    int cur = from;
    for (Letter x : w.letters()) {
      int nxt = fresh();
      add_edge(cur, x, nxt);
      cur = nxt;
    }
    return cur;
  }

  void fold() {
    bool changed = true;
    while (changed) {
      changed = false;
      std::map<std::pair<int, int>, int> out, in;
      for (auto& [u0, g, v0] : edges) {
        int u = find(u0), v = find(v0);
        auto [io, ok1] = out.try_emplace({u, g}, v);
        if (!ok1 && io->second != v) {
          unite(io->second, v);
          changed = true;
        }
        auto [ii, ok2] = in.try_emplace({v, g}, u);
        if (!ok2 && ii->second != u) {
          unite(ii->second, u);
          changed = true;
        }
      }
    }
  }
};

}  // namespace detail

class SubgroupGraph {
 public:
  SubgroupGraph() = default;

  // Folded core of the subgroup generated by gens.
  static SubgroupGraph fold(int rank, const std::vector<Word>& gens) {
    detail::FoldState st(rank);
    int base = st.fresh();
    for (const Word& g : gens) {
      int end = st.add_path(base, g);
      st.unite(base, end);
    }
    st.fold();
    return from_fold_state(st, base);
  }

  int ambient_rank() const { return n_; }
  int base() const { return base_; }
  int num_vertices() const { return static_cast<int>(fwd_.size()); }

  int num_edges() const {
    int e = 0;
    for (const auto& row : fwd_)
      for (int t : row) e += (t >= 0);
    return e;
  }

  // rank of the subgroup: |E| - |V| + 1.
  int rank() const { return num_edges() - num_vertices() + 1; }
  bool is_trivial() const { return num_edges() == 0; }

  // Endpoint of the x-labeled edge leaving v, or -1.
  int next(int v, Letter x) const {
    return x > 0 ? fwd_[v][x - 1] : bwd_[v][-x - 1];
  }

  int degree(int v) const {
    int d = 0;
    for (int g = 1; g <= n_; ++g) {
      if (fwd_[v][g - 1] >= 0) ++d;
      if (bwd_[v][g - 1] >= 0) ++d;
    }
    return d;
  }

  // Vertex path of w read from v (length |w|+1), if w traces fully.
  std::optional<std::vector<int>> trace_from(int v, const Word& w) const {
    std::vector<int> path{v};
    for (Letter x : w.letters()) {
      v = next(v, x);
      if (v < 0) return std::nullopt;
      path.push_back(v);
    }
    return path;
  }

  // Membership: w is in the subgroup iff it traces a loop at the basepoint.
  std::optional<std::vector<int>> membership_path(const Word& w) const {
    auto p = trace_from(base_, w);
    if (p && p->back() == base_) return p;
    return std::nullopt;
  }

  bool contains(const Word& w) const { return membership_path(w).has_value(); }

  // Spanning-tree basis: for each non-tree edge, the loop
  // (base -> tail) edge (head -> base) through the tree.
  std::vector<Word> basis_words() const {
    auto [tree_parent, tree_letter] = spanning_tree();
    std::vector<Word> out;
    for (int v = 0; v < num_vertices(); ++v) {
      for (int g = 1; g <= n_; ++g) {
        int t = fwd_[v][g - 1];
        if (t < 0) continue;
        if (is_tree_edge(v, g, t, tree_parent, tree_letter)) continue;
        Word loop = path_from_base(v, tree_parent, tree_letter) * Word::one_letter(g) *
                    path_from_base(t, tree_parent, tree_letter).inverse();
        out.push_back(loop);
      }
    }
    return out;
  }

  // Rewrites w (a member) over the spanning-tree basis; letters of the output
  // index basis_words().  None if w is not a member.
  std::optional<Word> express_in_basis(const Word& w) const {
    auto p = membership_path(w);
    if (!p) return std::nullopt;
    auto [tree_parent, tree_letter] = spanning_tree();
    // Order basis edges exactly as basis_words() does.
    std::map<std::tuple<int, int, int>, int> index;
    int k = 0;
    for (int v = 0; v < num_vertices(); ++v)
      for (int g = 1; g <= n_; ++g) {
        int t = fwd_[v][g - 1];
        if (t < 0) continue;
        if (is_tree_edge(v, g, t, tree_parent, tree_letter)) continue;
        index[{v, g, t}] = ++k;
      }
    std::vector<Letter> out;
    const auto& ls = w.letters();
    for (size_t i = 0; i < ls.size(); ++i) {
      int u = (*p)[i], v = (*p)[i + 1];
      Letter x = ls[i];
      if (x > 0) {
        auto it = index.find({u, x, v});
        if (it != index.end()) out.push_back(it->second);
      } else {
        auto it = index.find({v, -x, u});
        if (it != index.end()) out.push_back(-it->second);
      }
    }
    return Word::from_letters(out);
  }

  // Substitutes basis_words() into a word over the basis alphabet.
  Word eval_basis_word(const Word& in_basis) const {
    std::vector<Word> bs = basis_words();
    Word out;
    for (Letter x : in_basis.letters()) {
      const Word& b = bs[std::abs(x) - 1];
      out = out * (x > 0 ? b : b.inverse());
    }
    return out;
  }

  // Structural equality of the canonical based form.
  bool same_graph(const SubgroupGraph& o) const {
    return n_ == o.n_ && base_ == o.base_ && fwd_ == o.fwd_ && bwd_ == o.bwd_;
  }

  // --- shaved view (true core, basepoint spur removed) ---
  struct Shaved {
    std::vector<std::vector<int>> fwd, bwd;  // -1 rows for removed vertices
    std::vector<bool> alive;
    int attach = 0;  // vertex of the core nearest the basepoint
    Word spur;       // word of the path basepoint -> attach
    int n = 0;
    int next(int v, Letter x) const { return x > 0 ? fwd[v][x - 1] : bwd[v][-x - 1]; }
    int degree(int v) const {
      int d = 0;
      for (int g = 1; g <= n; ++g) d += (fwd[v][g - 1] >= 0) + (bwd[v][g - 1] >= 0);
      return d;
    }
    std::vector<int> vertices() const {
      std::vector<int> out;
      for (size_t v = 0; v < alive.size(); ++v)
        if (alive[v]) out.push_back(static_cast<int>(v));
      return out;
    }
  };

  Shaved shaved() const {
    Shaved s;
    s.n = n_;
    s.fwd = fwd_;
    s.bwd = bwd_;
    s.alive.assign(num_vertices(), true);
    if (is_trivial()) {
      s.attach = base_;
      return s;
    }
    // Iteratively remove degree-1 vertices; only the basepoint spur can occur.
    std::vector<Letter> spur;
    int attach = base_;
    bool changed = true;
    while (changed) {
      changed = false;
      for (int v = 0; v < num_vertices(); ++v) {
        if (!s.alive[v] || s.degree(v) != 1) continue;
        assert(v == attach && "non-basepoint spur in folded core");
        for (int g = 1; g <= n_; ++g) {
          if (s.fwd[v][g - 1] >= 0) {
            int t = s.fwd[v][g - 1];
            spur.push_back(g);
            s.bwd[t][g - 1] = -1;
            attach = t;
          } else if (s.bwd[v][g - 1] >= 0) {
            int t = s.bwd[v][g - 1];
            spur.push_back(-g);
            s.fwd[t][g - 1] = -1;
            attach = t;
          } else {
            continue;
          }
          s.fwd[v].assign(n_, -1);
          s.bwd[v].assign(n_, -1);
          s.alive[v] = false;
          changed = true;
          break;
        }
      }
    }
    s.attach = attach;
    s.spur = Word::from_letters(spur);
    return s;
  }

  // Loop words of the core at an arbitrary shaved vertex y, conjugated back to
  // the subgroup's ambient coordinates:  pi_1(core, y) = r^-1 . H' . r style
  // bookkeeping is handled by callers via core_position_word.
  // Word of some path from the shaved attach vertex to y inside the core.
  static std::optional<Word> core_path_word(const Shaved& s, int from, int to) {
    std::map<int, std::pair<int, Letter>> parent;  // vertex -> (prev, letter)
    std::queue<int> q;
    q.push(from);
    parent[from] = {from, 0};
    while (!q.empty()) {
      int v = q.front();
      q.pop();
      if (v == to) break;
      for (int g = 1; g <= s.n; ++g) {
        for (Letter x : {g, -g}) {
          int t = s.next(v, x);
          if (t >= 0 && s.alive[t] && !parent.count(t)) {
            parent[t] = {v, x};
            q.push(t);
          }
        }
      }
    }
    if (!parent.count(to)) return std::nullopt;
    std::vector<Letter> rev;
    for (int v = to; v != from; v = parent[v].first) rev.push_back(parent[v].second);
    std::reverse(rev.begin(), rev.end());
    return Word::from_letters(rev);
  }

 private:
  int n_ = 0;
  int base_ = 0;
  std::vector<std::vector<int>> fwd_, bwd_;

  static bool is_tree_edge(int v, int g, int t, const std::vector<int>& parent,
                           const std::vector<int>& letter) {
    // The positive edge (v,g,t) can enter the tree traversed either way.
    return (parent[t] == v && letter[t] == g) || (parent[v] == t && letter[v] == -g);
  }

  std::pair<std::vector<int>, std::vector<int>> spanning_tree() const {
    // parent[v], letter[v]: the tree edge into v reads letter from parent.
    std::vector<int> parent(num_vertices(), -1), letter(num_vertices(), 0);
    parent[base_] = base_;
    std::queue<int> q;
    q.push(base_);
    while (!q.empty()) {
      int v = q.front();
      q.pop();
      for (int g = 1; g <= n_; ++g) {
        for (Letter x : {g, -g}) {
          int t = next(v, x);
          if (t >= 0 && parent[t] < 0) {
            parent[t] = v;
            letter[t] = x;
            q.push(t);
          }
        }
      }
    }
    return {parent, letter};
  }

  Word path_from_base(int v, const std::vector<int>& parent,
                      const std::vector<int>& letter) const {
    std::vector<Letter> rev;
    while (v != base_) {
      rev.push_back(letter[v]);
      v = parent[v];
    }
    std::reverse(rev.begin(), rev.end());
    return Word::from_letters(rev);
  }

 public:
  // Compacts a folded state into canonical form: vertices renumbered by BFS
  // from the basepoint (labels ascending, forward before backward), so equal
  // based graphs have equal encodings.
  static SubgroupGraph from_fold_state(detail::FoldState& st, int base0) {
    std::map<std::pair<int, int>, int> out, in;
    std::set<std::tuple<int, int, int>> edge_set;
    for (auto& [u0, g, v0] : st.edges) {
      int u = st.find(u0), v = st.find(v0);
      edge_set.insert({u, g, v});
      out[{u, g}] = v;
      in[{v, g}] = u;
    }
    int base = st.find(base0);
    std::map<int, int> id;
    id[base] = 0;
    std::vector<int> order{base};
    std::queue<int> q;
    q.push(base);
    while (!q.empty()) {
      int v = q.front();
      q.pop();
      for (int g = 1; g <= st.n; ++g) {
        for (bool forward : {true, false}) {
          auto& m = forward ? out : in;
          auto it = m.find({v, g});
          if (it == m.end()) continue;
          int t = it->second;
          if (!id.count(t)) {
            id[t] = static_cast<int>(order.size());
            order.push_back(t);
            q.push(t);
          }
        }
      }
    }
    SubgroupGraph sg;
    sg.n_ = st.n;
    sg.base_ = 0;
    int nv = static_cast<int>(order.size());
    sg.fwd_.assign(nv, std::vector<int>(st.n, -1));
    sg.bwd_.assign(nv, std::vector<int>(st.n, -1));
    for (auto& [u, g, v] : edge_set) {
      if (!id.count(u)) continue;  // unreachable (cannot happen when connected)
      sg.fwd_[id[u]][g - 1] = id[v];
      sg.bwd_[id[v]][g - 1] = id[u];
    }
    return sg;
  }

  friend std::optional<Word> conjugator(const SubgroupGraph&, const SubgroupGraph&);
  friend std::optional<Word> conjugate_container(const SubgroupGraph&, const SubgroupGraph&);
  friend std::vector<SubgroupGraph> intersect(const SubgroupGraph&, const SubgroupGraph&);
  friend SubgroupGraph graph_from_adjacency(int, const std::vector<std::vector<int>>&,
                                            const std::vector<std::vector<int>>&, int);
};

// Rebuilds a canonical SubgroupGraph from explicit folded adjacency.
inline SubgroupGraph graph_from_adjacency(int rank, const std::vector<std::vector<int>>& fwd,
                                          const std::vector<std::vector<int>>& bwd, int base) {
  detail::FoldState st(rank);
  for (size_t v = 0; v < fwd.size(); ++v) st.fresh();
  for (size_t v = 0; v < fwd.size(); ++v)
    for (int g = 1; g <= rank; ++g)
      if (fwd[v][g - 1] >= 0) st.edges.emplace_back(static_cast<int>(v), g, fwd[v][g - 1]);
  (void)bwd;
  return SubgroupGraph::from_fold_state(st, base);
}

namespace detail {

// Label-preserving isomorphism of shaved cores determined by one vertex pair;
// folded determinism spreads the map or kills it.
inline std::optional<std::map<int, int>> core_isomorphism(
    const SubgroupGraph::Shaved& A, const SubgroupGraph::Shaved& B, int a0, int b0) {
  std::map<int, int> m{{a0, b0}};
  std::queue<int> q;
  q.push(a0);
  while (!q.empty()) {
    int v = q.front();
    q.pop();
    for (int g = 1; g <= A.n; ++g) {
      for (Letter x : {g, -g}) {
        int t = A.next(v, x);
        int u = B.next(m[v], x);
        if ((t >= 0) != (u >= 0)) return std::nullopt;
        if (t < 0) continue;
        auto it = m.find(t);
        if (it != m.end()) {
          if (it->second != u) return std::nullopt;
        } else {
          m[t] = u;
          q.push(t);
        }
      }
    }
  }
  // Surjectivity: same vertex count suffices for injective label maps.
  std::set<int> image;
  for (auto& [a, b] : m) image.insert(b);
  if (image.size() != m.size()) return std::nullopt;
  if (m.size() != A.vertices().size() || m.size() != B.vertices().size()) return std::nullopt;
  return m;
}

// Deterministic immersion of core A into core B seeded by a0 -> b0.
inline bool core_immerses(const SubgroupGraph::Shaved& A, const SubgroupGraph::Shaved& B,
                          int a0, int b0, std::map<int, int>* out_map = nullptr) {
  std::map<int, int> m{{a0, b0}};
  std::queue<int> q;
  q.push(a0);
  while (!q.empty()) {
    int v = q.front();
    q.pop();
    for (int g = 1; g <= A.n; ++g) {
      for (Letter x : {g, -g}) {
        int t = A.next(v, x);
        if (t < 0) continue;
        int u = B.next(m[v], x);
        if (u < 0) return false;
        auto it = m.find(t);
        if (it != m.end()) {
          if (it->second != u) return false;
        } else {
          m[t] = u;
          q.push(t);
        }
      }
    }
  }
  if (out_map) *out_map = m;
  return true;
}

}  // namespace detail

// Some γ with γ⁻¹ H γ = K, or none.  When H is primitive the coset Hγ of
// valid conjugators is unique; we return the first in deterministic order.
inline std::optional<Word> conjugator(const SubgroupGraph& H, const SubgroupGraph& K) {
  if (H.is_trivial() && K.is_trivial()) return Word();
  if (H.is_trivial() != K.is_trivial()) return std::nullopt;
  if (H.rank() != K.rank()) return std::nullopt;
  auto A = H.shaved(), B = K.shaved();
  for (int b0 : B.vertices()) {
    auto iso = detail::core_isomorphism(A, B, A.attach, b0);
    if (!iso) continue;
    // H = uH . pi1(coreH, attachH) . uH^-1 with uH the spur word, and the
    // isomorphism carries pi1(coreH, attachH) to pi1(coreK, b0) verbatim.
    // pi1(coreK, b0) = q . pi1(coreK, attachK) . q^-1 for q = path b0->attachK,
    // so H = (uH q uK^-1) K (uH q uK^-1)^-1 and γ = uH q uK^-1 works.
    auto q = SubgroupGraph::core_path_word(B, b0, B.attach);
    if (!q) continue;  // cores are connected; cannot happen
    Word gamma = A.spur * *q * B.spur.inverse();
    // Verify γ⁻¹ H γ = K both ways on graph bases.
    bool ok = true;
    for (const Word& h : H.basis_words())
      if (!K.contains(h.conjugated_by(gamma.inverse()))) ok = false;
    for (const Word& k : K.basis_words())
      if (!H.contains(k.conjugated_by(gamma))) ok = false;
    if (ok) return gamma;
  }
  return std::nullopt;
}

// Some c with H ⊆ c V c⁻¹ (conjugate containment), or none.
inline std::optional<Word> conjugate_container(const SubgroupGraph& H, const SubgroupGraph& V) {
  if (H.is_trivial()) return Word();
  if (V.is_trivial()) return std::nullopt;
  auto A = H.shaved(), B = V.shaved();
  for (int b0 : B.vertices()) {
    std::map<int, int> m;
    if (!detail::core_immerses(A, B, A.attach, b0, &m)) continue;
    auto r = SubgroupGraph::core_path_word(B, b0, B.attach);
    if (!r) continue;
    Word c = A.spur * *r * B.spur.inverse();
    bool ok = true;
    for (const Word& h : H.basis_words())
      if (!V.contains(h.conjugated_by(c.inverse()))) ok = false;
    if (ok) return c;
  }
  return std::nullopt;
}

// Components of the fiber product of the shaved cores with nontrivial
// fundamental group; realizes the intersections H ∩ K^c over double cosets.
inline std::vector<SubgroupGraph> intersect(const SubgroupGraph& H, const SubgroupGraph& K) {
  auto A = H.shaved(), B = K.shaved();
  int n = H.ambient_rank();
  auto va = A.vertices(), vb = B.vertices();
  if (va.empty() || vb.empty()) return {};
  // Product states and transitions.
  std::map<std::pair<int, int>, int> id;
  std::vector<std::pair<int, int>> states;
  for (int a : va)
    for (int b : vb) {
      id[{a, b}] = static_cast<int>(states.size());
      states.emplace_back(a, b);
    }
  int nv = static_cast<int>(states.size());
  std::vector<std::vector<int>> fwd(nv, std::vector<int>(n, -1)),
      bwd(nv, std::vector<int>(n, -1));
  for (int s = 0; s < nv; ++s) {
    auto [a, b] = states[s];
    for (int g = 1; g <= n; ++g) {
      int ta = A.next(a, g), tb = B.next(b, g);
      if (ta >= 0 && tb >= 0 && A.alive[ta] && B.alive[tb]) {
        int t = id[{ta, tb}];
        fwd[s][g - 1] = t;
        bwd[t][g - 1] = s;
      }
    }
  }
  // Iteratively shave degree-1 vertices (no basepoint here).
  std::vector<bool> alive(nv, true);
  auto deg = [&](int v) {
    int d = 0;
    for (int g = 1; g <= n; ++g) d += (fwd[v][g - 1] >= 0) + (bwd[v][g - 1] >= 0);
    return d;
  };
  bool changed = true;
  while (changed) {
    changed = false;
    for (int v = 0; v < nv; ++v) {
      if (!alive[v] || deg(v) > 1) continue;
      for (int g = 1; g <= n; ++g) {
        if (fwd[v][g - 1] >= 0) bwd[fwd[v][g - 1]][g - 1] = -1;
        if (bwd[v][g - 1] >= 0) fwd[bwd[v][g - 1]][g - 1] = -1;
        fwd[v][g - 1] = bwd[v][g - 1] = -1;
      }
      alive[v] = false;
      changed = true;
    }
  }
  // Connected components of what survives.
  std::vector<int> comp(nv, -1);
  int ncomp = 0;
  for (int v = 0; v < nv; ++v) {
    if (!alive[v] || comp[v] >= 0) continue;
    std::queue<int> q;
    q.push(v);
    comp[v] = ncomp;
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      for (int g = 1; g <= n; ++g) {
        for (int t : {fwd[u][g - 1], bwd[u][g - 1]}) {
          if (t >= 0 && comp[t] < 0) {
            comp[t] = ncomp;
            q.push(t);
          }
        }
      }
    }
    ++ncomp;
  }
  std::vector<SubgroupGraph> out;
  for (int c = 0; c < ncomp; ++c) {
    detail::FoldState st(n);
    std::map<int, int> local;
    int root = -1;
    for (int v = 0; v < nv; ++v) {
      if (comp[v] != c) continue;
      local[v] = st.fresh();
      if (root < 0) root = v;
    }
    int ne = 0;
    for (int v = 0; v < nv; ++v) {
      if (comp[v] != c) continue;
      for (int g = 1; g <= n; ++g)
        if (fwd[v][g - 1] >= 0) {
          st.edges.emplace_back(local[v], g, local[fwd[v][g - 1]]);
          ++ne;
        }
    }
    if (ne - static_cast<int>(local.size()) + 1 < 1) continue;  // trivial pi1
    out.push_back(SubgroupGraph::from_fold_state(st, local[root]));
  }
  return out;
}

namespace detail {

// 2-pointed folded automaton for a coset language: graph plus start/end.
struct PointedAutomaton {
  SubgroupGraph g;
  int s = 0, t = 0;
};

inline FoldState graph_to_state(const SubgroupGraph& G) {
  FoldState st(G.ambient_rank());
  for (int v = 0; v < G.num_vertices(); ++v) st.fresh();
  for (int v = 0; v < G.num_vertices(); ++v)
    for (int g = 1; g <= G.ambient_rank(); ++g)
      if (G.next(v, g) >= 0) st.edges.emplace_back(v, g, G.next(v, g));
  return st;
}

// Automaton whose immersed s->t paths spell the reduced forms of H·w.
inline PointedAutomaton coset_automaton_right(const SubgroupGraph& H, const Word& w) {
  FoldState st = graph_to_state(H);
  st.add_path(H.base(), w);
  st.fold();
  // Canonical graph based at the start; the end is found by re-walking w.
  PointedAutomaton out{SubgroupGraph::from_fold_state(st, H.base()), 0, 0};
  auto p = out.g.trace_from(out.s, w);
  assert(p && "coset tail must trace in its own automaton");
  out.t = p->back();
  return out;
}

// Automaton whose immersed s->t paths spell the reduced forms of g·B.
inline PointedAutomaton coset_automaton_left(const Word& g, const SubgroupGraph& B) {
  FoldState st = graph_to_state(B);
  int start = st.add_path(B.base(), g.inverse());  // start reads g into base
  st.fold();
  PointedAutomaton out{SubgroupGraph::from_fold_state(st, start), 0, 0};
  auto p = out.g.trace_from(out.s, g);
  assert(p && "coset head must trace in its own automaton");
  out.t = p->back();
  return out;
}

}  // namespace detail

// Decides w ∈ A·g·B; returns the witness pair (a, b) with w = a·g·b.
// Exact: searches the product of the two coset automata for a common word
// v ∈ A·w ∩ g·B, then a = w v⁻¹, b = g⁻¹ v.
inline std::optional<std::pair<Word, Word>> in_double_coset(const SubgroupGraph& A,
                                                            const Word& g,
                                                            const SubgroupGraph& B,
                                                            const Word& w) {
  detail::PointedAutomaton P = detail::coset_automaton_right(A, w);
  detail::PointedAutomaton Q = detail::coset_automaton_left(g, B);
  int n = A.ambient_rank();
  // BFS on synchronized product from (P.s, Q.s) to (P.t, Q.t).
  std::map<std::pair<int, int>, std::pair<std::pair<int, int>, Letter>> parent;
  std::queue<std::pair<int, int>> q;
  auto start = std::make_pair(P.s, Q.s);
  parent[start] = {start, 0};
  q.push(start);
  auto goal = std::make_pair(P.t, Q.t);
  bool found = (start == goal);
  while (!q.empty() && !found) {
    auto [u1, u2] = q.front();
    q.pop();
    for (int gg = 1; gg <= n && !found; ++gg) {
      for (Letter x : {gg, -gg}) {
        int v1 = P.g.next(u1, x), v2 = Q.g.next(u2, x);
        if (v1 < 0 || v2 < 0) continue;
        auto state = std::make_pair(v1, v2);
        if (parent.count(state)) continue;
        parent[state] = {{u1, u2}, x};
        if (state == goal) {
          found = true;
          break;
        }
        q.push(state);
      }
    }
  }
  if (!found) return std::nullopt;
  std::vector<Letter> rev;
  for (auto s = goal; s != start; s = parent[s].first) rev.push_back(parent[s].second);
  std::reverse(rev.begin(), rev.end());
  Word v = Word::from_letters(rev);
  Word a = w * v.inverse();
  Word b = g.inverse() * v;
  assert(A.contains(a) && B.contains(b) && a * g * b == w);
  return std::make_pair(a, b);
}

}  // namespace upg
