#pragma once
// Simplicial trees in the collapse model: a marked graph with a collapsed
// subgraph whose components become vertex groups.  Provides exact translation
// lengths, the elliptic free factor system, isometric-fixedness certificates
// under automorphisms, vertex-group distances, and Nielsen pairs.

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include "upg/free_factor.hpp"
#include "upg/marked_graph.hpp"

namespace upg {

struct SimplicialTree {
  Graph g;
  Marking m;
  std::vector<bool> collapsed;  // per unoriented edge: true = zero-length orbit

  void validate() const {
    g.validate();
    validate_marking(g, m);
    require(m.cert.has_value(), "WordNotRealizable",
            "tree host marking needs its basis certificate");
    require(collapsed.size() == static_cast<size_t>(g.num_edges()), "DegenerateTree",
            "collapse flags must cover every edge");
    bool surviving = false;
    for (int id = 0; id < g.num_edges(); ++id)
      if (!collapsed[id]) {
        surviving = true;
        require(g.length(id) > 0, "DegenerateTree",
                "surviving edges need positive length");
      }
    require(surviving, "DegenerateTree", "every edge is collapsed");
  }
};

// ---------------------------------------------------------------------------
// Quotient graph of groups after collapsing.

struct QuotientVertex {
  std::vector<int> gvertices;  // host vertices in this collapsed component
  SubgroupGraph group;         // vertex group (trivial graph if free vertex)
  Word anchor;                 // marking word of a path base -> component basepoint
};

struct QuotientEdge {
  std::vector<int> chain;  // oriented host edges composing this edge
  int qinit = 0, qterm = 0;
  Rat len;
  Word tword;  // anchored marking word of the edge path
};

struct TreeQuotient {
  std::vector<QuotientVertex> verts;
  std::vector<QuotientEdge> edges;

  int degree(int qv) const {
    int d = 0;
    for (const QuotientEdge& e : edges) {
      if (e.qinit == qv) ++d;
      if (e.qterm == qv) ++d;
    }
    return d;
  }
};

namespace detail {

// Marking word along a path of oriented host edges.
inline Word mu_word(const Marking& m, const EdgePath& p) {
  Word w;
  for (int oe : p) w = w * mu_of(m, oe);
  return w;
}

// Breadth-first path inside a fixed edge set.
inline std::optional<EdgePath> path_inside(const Graph& g, const std::vector<int>& ids,
                                           int from, int to) {
  if (from == to) return EdgePath{};
  std::vector<int> prev(g.nv, -2), via(g.nv, 0);
  prev[from] = -1;
  std::vector<int> q{from};
  for (size_t qi = 0; qi < q.size(); ++qi)
    for (int id : ids)
      for (int oe : {id + 1, -id - 1})
        if (g.init_of(oe) == q[qi] && prev[g.term_of(oe)] == -2) {
          prev[g.term_of(oe)] = q[qi];
          via[g.term_of(oe)] = oe;
          q.push_back(g.term_of(oe));
        }
  if (prev[to] == -2) return std::nullopt;
  EdgePath rev;
  for (int v = to; v != from; v = prev[v]) rev.push_back(via[v]);
  std::reverse(rev.begin(), rev.end());
  return rev;
}

}  // namespace detail

// The quotient graph of groups; degree-2 trivial vertices are contracted away
// (chains merge, lengths add) so the combinatorics are canonical.
inline TreeQuotient quotient_of(const SimplicialTree& T) {
  const Graph& g = T.g;
  int rank = T.m.rank;
  // Components of the collapsed subgraph (isolated vertices included).
  std::vector<int> comp(g.nv, -1);
  std::vector<int> collapsed_ids;
  for (int id = 0; id < g.num_edges(); ++id)
    if (T.collapsed[id]) collapsed_ids.push_back(id);
  int nq = 0;
  for (int v = 0; v < g.nv; ++v) {
    if (comp[v] >= 0) continue;
    comp[v] = nq;
    std::vector<int> q{v};
    for (size_t qi = 0; qi < q.size(); ++qi)
      for (int id : collapsed_ids)
        for (int oe : {id + 1, -id - 1})
          if (g.init_of(oe) == q[qi] && comp[g.term_of(oe)] < 0) {
            comp[g.term_of(oe)] = nq;
            q.push_back(g.term_of(oe));
          }
    ++nq;
  }
  TreeQuotient Q;
  Q.verts.resize(nq);
  for (int v = 0; v < g.nv; ++v) Q.verts[comp[v]].gvertices.push_back(v);
  for (int qv = 0; qv < nq; ++qv) {
    QuotientVertex& V = Q.verts[qv];
    int p = V.gvertices.front();  // basepoint: least host vertex
    V.anchor = detail::mu_word(T.m, tree_path(g, T.m, T.m.base, p));
    // Component spanning tree; extra collapsed edges give group generators.
    std::set<int> in_comp(V.gvertices.begin(), V.gvertices.end());
    std::vector<int> comp_edges;
    for (int id : collapsed_ids)
      if (in_comp.count(g.init_of(id + 1))) comp_edges.push_back(id);
    std::vector<Word> gens;
    std::set<int> tree_ids;
    {
      std::set<int> seen{p};
      std::vector<int> q{p};
      for (size_t qi = 0; qi < q.size(); ++qi)
        for (int id : comp_edges)
          for (int oe : {id + 1, -id - 1})
            if (g.init_of(oe) == q[qi] && !seen.count(g.term_of(oe))) {
              seen.insert(g.term_of(oe));
              tree_ids.insert(id);
              q.push_back(g.term_of(oe));
            }
    }
    std::vector<int> tree_list(tree_ids.begin(), tree_ids.end());
    for (int id : comp_edges) {
      if (tree_ids.count(id)) continue;
      auto to_e = detail::path_inside(g, tree_list, p, g.init_of(id + 1));
      auto from_e = detail::path_inside(g, tree_list, g.term_of(id + 1), p);
      EdgePath loop = *to_e;
      loop.push_back(id + 1);
      loop.insert(loop.end(), from_e->begin(), from_e->end());
      gens.push_back(V.anchor * detail::mu_word(T.m, loop) * V.anchor.inverse());
    }
    V.group = SubgroupGraph::fold(rank, gens);
  }
  // Surviving edges as quotient edges with anchored words.
  for (int id = 0; id < g.num_edges(); ++id) {
    if (T.collapsed[id]) continue;
    QuotientEdge e;
    e.chain = {id + 1};
    e.qinit = comp[g.init_of(id + 1)];
    e.qterm = comp[g.term_of(id + 1)];
    e.len = g.length(id);
    const QuotientVertex& U = Q.verts[e.qinit];
    const QuotientVertex& W = Q.verts[e.qterm];
    std::vector<int> cid_U, cid_W;
    for (int cid : collapsed_ids) {
      if (std::count(U.gvertices.begin(), U.gvertices.end(), g.init_of(cid + 1)))
        cid_U.push_back(cid);
      if (std::count(W.gvertices.begin(), W.gvertices.end(), g.init_of(cid + 1)))
        cid_W.push_back(cid);
    }
    EdgePath head = *detail::path_inside(g, cid_U, U.gvertices.front(), g.init_of(id + 1));
    EdgePath tail = *detail::path_inside(g, cid_W, g.term_of(id + 1), W.gvertices.front());
    EdgePath p = head;
    p.push_back(id + 1);
    p.insert(p.end(), tail.begin(), tail.end());
    e.tword = U.anchor * detail::mu_word(T.m, p) * W.anchor.inverse();
    Q.edges.push_back(std::move(e));
  }
  for (int qv = 0; qv < nq; ++qv)
    require(!Q.verts[qv].group.is_trivial() || Q.degree(qv) >= 2, "DegenerateTree",
            "free valence-one vertex: the tree is not minimal");
  // Contract degree-2 trivial vertices: splice their two distinct edge ends.
  for (bool again = true; again;) {
    again = false;
    for (size_t qv = 0; qv < Q.verts.size(); ++qv) {
      if (!Q.verts[qv].group.is_trivial() || Q.degree(static_cast<int>(qv)) != 2)
        continue;
      // Locate the two oriented edge ends at qv.
      std::vector<std::pair<int, bool>> ends;  // (edge index, arrives-here)
      for (size_t ei = 0; ei < Q.edges.size(); ++ei) {
        if (Q.edges[ei].qterm == static_cast<int>(qv)) ends.emplace_back(ei, true);
        if (Q.edges[ei].qinit == static_cast<int>(qv)) ends.emplace_back(ei, false);
      }
      if (ends.size() != 2 || ends[0].first == ends[1].first) continue;  // loop stays
      // Merge: first edge arriving at qv, then second leaving qv.
      QuotientEdge a = Q.edges[ends[0].first];
      QuotientEdge b = Q.edges[ends[1].first];
      auto reversed = [](const QuotientEdge& e) {
        QuotientEdge r = e;
        r.chain = path_inverse(e.chain);
        std::swap(r.qinit, r.qterm);
        r.tword = e.tword.inverse();
        return r;
      };
      if (!ends[0].second) a = reversed(a);  // make a arrive at qv
      if (ends[1].second) b = reversed(b);   // make b leave qv
      QuotientEdge merged;
      merged.chain = a.chain;
      merged.chain.insert(merged.chain.end(), b.chain.begin(), b.chain.end());
      merged.qinit = a.qinit;
      merged.qterm = b.qterm;
      merged.len = a.len + b.len;
      merged.tword = a.tword * b.tword;
      size_t i0 = std::max(ends[0].first, ends[1].first);
      size_t i1 = std::min(ends[0].first, ends[1].first);
      Q.edges.erase(Q.edges.begin() + i0);
      Q.edges.erase(Q.edges.begin() + i1);
      Q.edges.push_back(std::move(merged));
      again = true;
      break;
    }
  }
  // Contracted vertices are now isolated; drop them and reindex.
  {
    std::vector<int> remap(Q.verts.size(), -1);
    std::vector<QuotientVertex> kept;
    for (size_t v = 0; v < Q.verts.size(); ++v)
      if (!Q.verts[v].group.is_trivial() || Q.degree(static_cast<int>(v)) > 0 ||
          Q.edges.empty()) {
        remap[v] = static_cast<int>(kept.size());
        kept.push_back(std::move(Q.verts[v]));
      }
    for (QuotientEdge& e : Q.edges) {
      e.qinit = remap[e.qinit];
      e.qterm = remap[e.qterm];
    }
    Q.verts = std::move(kept);
  }
  return Q;
}

// ---------------------------------------------------------------------------
// Length function.

// Exact translation length: realize the class as a cyclically tight loop and
// sum the lengths of surviving edges.  Tight collapsed segments are
// nontrivial in their component groups, so no further cancellation can occur
// after collapsing.
inline Rat translation_length(const SimplicialTree& T, const CyclicWord& w) {
  if (w.letters().empty()) return 0;
  EdgePath loop = word_to_loop(T.g, T.m, w.rep());
  loop = cyclic_tighten(T.g, loop);
  Rat s = 0;
  for (int oe : loop)
    if (!T.collapsed[Graph::eid(oe)]) s += T.g.length(Graph::eid(oe));
  return s;
}

struct LengthFunction {
  std::function<Rat(const CyclicWord&)> value;
  int degree = 0;          // polynomial degree tag of the scaling regime
  std::string provenance;  // human-readable origin
};

inline LengthFunction tree_length_function(std::shared_ptr<const SimplicialTree> T,
                                           std::string provenance = "tree") {
  LengthFunction f;
  f.value = [T](const CyclicWord& w) { return translation_length(*T, w); };
  f.degree = 0;
  f.provenance = std::move(provenance);
  return f;
}

// Point stabilizers of the tree as a free factor system.
inline FreeFactorSystem elliptic_system(const SimplicialTree& T) {
  TreeQuotient Q = quotient_of(T);
  std::vector<SubgroupGraph> factors;
  for (QuotientVertex& v : Q.verts) factors.push_back(std::move(v.group));
  return normalize_system(T.m.rank, std::move(factors));
}

// ---------------------------------------------------------------------------
// Fixedness under an automorphism.

struct FixednessResult {
  bool fixed = false;
  // Certificate: a quotient self-isomorphism with compatible conjugators.
  std::vector<int> vertex_map;           // quotient vertex bijection
  std::vector<int> edge_map;             // signed: edge i -> ±(edge_map[i]) orientation
  std::vector<Word> vertex_conjugators;  // γ_v with φ(V_v) = γ_v V_(ψv) γ_v^-1
  std::vector<std::pair<Word, Word>> edge_witnesses;  // (x,y): γ_U φ(t) γ_W^-1 = x t' y
  // Refutation: a class with a different translation length.
  std::optional<CyclicWord> witness;
};

namespace detail {

// Oriented view of a quotient edge.
struct OrientedQE {
  int qinit, qterm;
  Rat len;
  Word tword;
};

inline OrientedQE oriented_qe(const QuotientEdge& e, bool fwd) {
  if (fwd) return {e.qinit, e.qterm, e.len, e.tword};
  return {e.qterm, e.qinit, e.len, e.tword.inverse()};
}

}  // namespace detail

// Exact certificate search: over quotient self-isomorphisms, find vertex
// conjugators (unique up to the vertex group, which the double-coset test
// absorbs) and per-edge double-coset witnesses.  Complete whenever every
// quotient vertex group is nontrivial; free vertices are handled by
// propagating conjugators along a spanning tree with a bounded root sweep.
// On failure, searches for a translation-length refutation witness.
inline FixednessResult is_fixed_by(const SimplicialTree& T, const Aut& phi) {
  TreeQuotient Q = quotient_of(T);
  int nv = static_cast<int>(Q.verts.size());
  int ne = static_cast<int>(Q.edges.size());
  int rank = T.m.rank;

  // Images of vertex groups under φ, folded once.
  std::vector<SubgroupGraph> image_groups;
  for (const QuotientVertex& v : Q.verts) {
    std::vector<Word> im;
    for (const Word& b : v.group.basis_words()) im.push_back(phi.apply(b));
    image_groups.push_back(SubgroupGraph::fold(rank, im));
  }

  // Enumerate quotient self-isomorphisms: assign each edge an image edge and
  // orientation, developing the vertex bijection.
  std::vector<int> emap(ne, 0);         // signed 1-based target
  std::vector<int> vmap(nv, -1);
  std::vector<int> vused(nv, 0), eused(ne, 0);
  FixednessResult out;

  // Candidate conjugators for a vertex pair (v -> w): base conjugator of
  // φ(V_v) against V_w.  For trivial groups the word is free and filled in
  // during edge propagation instead.
  auto base_conj = [&](int v, int w) -> std::optional<Word> {
    return conjugator(image_groups[v], Q.verts[w].group);
  };

  std::function<bool(int)> assign = [&](int ei) -> bool {
    if (ei == ne) {
      // Vertex bijection must be total (isolated vertices can't appear since
      // the quotient is connected with at least one edge).
      for (int v = 0; v < nv; ++v)
        if (vmap[v] < 0) return false;
      // Conjugators: nontrivial groups from the conjugacy witness; free
      // vertices propagated along a spanning tree of the quotient.
      std::vector<std::optional<Word>> gam(nv);
      for (int v = 0; v < nv; ++v)
        if (!Q.verts[v].group.is_trivial()) {
          auto c = base_conj(v, vmap[v]);
          if (!c) return false;
          gam[v] = *c;
        }
      // Roots for propagation: prefer an anchored vertex; otherwise sweep
      // bounded centralizer powers of a first-edge witness below.
      auto propagate = [&](std::vector<std::optional<Word>> g) -> std::optional<
                            std::pair<std::vector<Word>, std::vector<std::pair<Word, Word>>>> {
        // Fill free vertices via tree edges where one endpoint is known:
        // γ_W := t'^-1 γ_U φ(t) forces the degenerate coset equation.
        bool progress = true;
        while (progress) {
          progress = false;
          for (int i = 0; i < ne; ++i) {
            const QuotientEdge& e = Q.edges[i];
            detail::OrientedQE src = detail::oriented_qe(e, true);
            const QuotientEdge& te = Q.edges[std::abs(emap[i]) - 1];
            detail::OrientedQE dst = detail::oriented_qe(te, emap[i] > 0);
            for (bool fwd : {true, false}) {
              detail::OrientedQE s = fwd ? src : detail::oriented_qe(e, false);
              detail::OrientedQE d = fwd ? dst : detail::oriented_qe(te, emap[i] < 0);
              int U = s.qinit, W = s.qterm;
              if (g[U] && !g[W] && Q.verts[W].group.is_trivial()) {
                // Degenerate coset equation g_U^-1 φ(t) g_W = t' solved for g_W
                // (nontrivial V_(ψU) freedom resolved at the base coset rep).
                g[W] = phi.apply(s.tword).inverse() * *g[U] * d.tword;
                progress = true;
              }
            }
          }
        }
        for (int v = 0; v < nv; ++v)
          if (!g[v]) return std::nullopt;
        // Verify group compatibility for trivial targets is vacuous; check
        // every edge by the double-coset test.
        std::vector<std::pair<Word, Word>> wit(ne);
        for (int i = 0; i < ne; ++i) {
          const QuotientEdge& e = Q.edges[i];
          const QuotientEdge& te = Q.edges[std::abs(emap[i]) - 1];
          detail::OrientedQE s = detail::oriented_qe(e, true);
          detail::OrientedQE d = detail::oriented_qe(te, emap[i] > 0);
          Word lhs = g[s.qinit]->inverse() * phi.apply(s.tword) * *g[s.qterm];
          auto dc = in_double_coset(Q.verts[d.qinit].group, d.tword,
                                    Q.verts[d.qterm].group, lhs);
          if (!dc) return std::nullopt;
          wit[i] = *dc;
        }
        std::vector<Word> gs;
        for (auto& x : g) gs.push_back(*x);
        return std::make_pair(gs, wit);
      };

      bool any_known = false;
      for (int v = 0; v < nv; ++v)
        if (gam[v]) any_known = true;
      if (any_known) {
        auto res = propagate(gam);
        if (!res) return false;
        out.fixed = true;
        out.vertex_map = vmap;
        out.edge_map = emap;
        out.vertex_conjugators = res->first;
        out.edge_witnesses = res->second;
        return true;
      }
      // All vertices free: seed from the first edge.  γ must conjugate
      // φ(t_0) to (a conjugate of) the target word; sweep bounded centralizer
      // powers of the seed witness.
      {
        const QuotientEdge& e = Q.edges[0];
        const QuotientEdge& te = Q.edges[std::abs(emap[0]) - 1];
        detail::OrientedQE s = detail::oriented_qe(e, true);
        detail::OrientedQE d = detail::oriented_qe(te, emap[0] > 0);
        if (s.qinit != s.qterm) {
          // Seed a non-loop edge: normalizing the initial conjugator to the
          // identity uses up the global inner freedom, and propagation forces
          // the rest of the spanning tree.
          auto gam2 = gam;
          gam2[s.qinit] = Word();
          auto res = propagate(gam2);
          if (res) {
            out.fixed = true;
            out.vertex_map = vmap;
            out.edge_map = emap;
            out.vertex_conjugators = res->first;
            out.edge_witnesses = res->second;
            return true;
          }
          return false;
        }
        // Loop edge at a free vertex: need g with g^-1 φ(t) g = t', so φ(t)
        // must be conjugate to t'; candidates fill the coset c0·Z(t').
        Word u = phi.apply(s.tword);
        auto c0 = conjugacy_witness(u, d.tword);
        if (!c0) return false;
        Word z = centralizer_root(d.tword);
        for (int k = -24; k <= 24; ++k) {
          Word gma = *c0 * z.pow(k);
          auto gam2 = gam;
          gam2[s.qinit] = gma;
          auto res = propagate(gam2);
          if (res) {
            out.fixed = true;
            out.vertex_map = vmap;
            out.edge_map = emap;
            out.vertex_conjugators = res->first;
            out.edge_witnesses = res->second;
            return true;
          }
        }
        return false;
      }
    }
    const QuotientEdge& e = Q.edges[ei];
    for (int tj = 0; tj < ne; ++tj) {
      if (eused[tj] || Q.edges[tj].len != e.len) continue;
      for (int sign : {1, -1}) {
        detail::OrientedQE d = detail::oriented_qe(Q.edges[tj], sign > 0);
        int u = e.qinit, w = e.qterm;
        int du = d.qinit, dw = d.qterm;
        // Vertex compatibility (group rank must match for conjugacy).
        auto okv = [&](int a, int b) {
          if (vmap[a] >= 0) return vmap[a] == b;
          if (vused[b]) return false;
          return Q.verts[a].group.rank() == Q.verts[b].group.rank();
        };
        if (!okv(u, du) || !okv(w, dw)) continue;
        if (u == w && du != dw) continue;
        std::vector<std::pair<int, int>> setv;
        auto setmap = [&](int a, int b) {
          if (vmap[a] < 0) {
            vmap[a] = b;
            vused[b] = 1;
            setv.emplace_back(a, b);
          }
        };
        setmap(u, du);
        setmap(w, dw);
        emap[ei] = sign * (tj + 1);
        eused[tj] = 1;
        if (assign(ei + 1)) return true;
        eused[tj] = 0;
        for (auto& [a, b] : setv) {
          vmap[a] = -1;
          vused[b] = 0;
        }
      }
    }
    return false;
  };

  if (ne > 0 && assign(0)) return out;

  // Refutation: hunt for a class whose length changes.
  auto ell = [&](const CyclicWord& w) { return translation_length(T, w); };
  auto try_word = [&](const Word& w) -> bool {
    if (w.empty()) return false;
    CyclicWord c = CyclicWord::of(w);
    if (c.letters().empty()) return false;
    if (ell(c) != ell(phi.apply_to_class(c))) {
      out.witness = c;
      return true;
    }
    return false;
  };
  // Systematic short words in breadth-first order (shortest witness first),
  // then seeded random longer ones.
  int depth = rank <= 3 ? 5 : 3;
  std::vector<Word> layer{Word()};
  for (int d = 0; d < depth; ++d) {
    std::vector<Word> next;
    for (const Word& w : layer)
      for (int l = 1; l <= rank; ++l)
        for (int s : {l, -l}) {
          Word nw = w * Word::one_letter(s);
          if (nw.size() <= w.size()) continue;
          if (try_word(nw)) return out;
          next.push_back(std::move(nw));
        }
    layer = std::move(next);
  }
  std::mt19937 rng(12345);
  for (int t = 0; t < 300; ++t) {
    Word w;
    int len = 2 + static_cast<int>(rng() % 7);
    while (static_cast<int>(w.size()) < len) {
      int l = 1 + static_cast<int>(rng() % rank);
      w = w * Word::one_letter(rng() % 2 ? l : -l);
    }
    if (try_word(w)) return out;
  }
  fail("FixednessUndecided",
       "no certificate found and no length refutation within the search bounds");
}

// ---------------------------------------------------------------------------
// Vertex-group distances and Nielsen pairs.

struct VertexDistances {
  Rat min;                                // least distance between group vertices
  std::vector<std::pair<int, int>> pairs;  // quotient vertex pairs realizing it
  std::vector<std::vector<Rat>> all;       // full distance matrix (group vertices)
  std::vector<int> group_vertices;         // quotient indices with nontrivial group
};

inline VertexDistances min_vertex_distance(const SimplicialTree& T) {
  TreeQuotient Q = quotient_of(T);
  int nv = static_cast<int>(Q.verts.size());
  std::vector<int> gv;
  for (int v = 0; v < nv; ++v)
    if (!Q.verts[v].group.is_trivial()) gv.push_back(v);
  require(gv.size() >= 2, "FewerThanTwoVertexGroups",
          "need two distinct vertex groups to measure");
  // All-pairs shortest paths over the quotient (small).
  std::vector<std::vector<std::optional<Rat>>> d(nv, std::vector<std::optional<Rat>>(nv));
  for (int v = 0; v < nv; ++v) d[v][v] = Rat(0);
  for (const QuotientEdge& e : Q.edges) {
    auto relax = [&](int a, int b) {
      if (!d[a][b] || *d[a][b] > e.len) d[a][b] = e.len;
    };
    relax(e.qinit, e.qterm);
    relax(e.qterm, e.qinit);
  }
  for (int k = 0; k < nv; ++k)
    for (int i = 0; i < nv; ++i)
      for (int j = 0; j < nv; ++j)
        if (d[i][k] && d[k][j]) {
          Rat via = *d[i][k] + *d[k][j];
          if (!d[i][j] || *d[i][j] > via) d[i][j] = via;
        }
  VertexDistances out;
  out.group_vertices = gv;
  out.all.assign(gv.size(), std::vector<Rat>(gv.size(), 0));
  bool first = true;
  for (size_t i = 0; i < gv.size(); ++i)
    for (size_t j = 0; j < gv.size(); ++j) {
      require(d[gv[i]][gv[j]].has_value(), "DegenerateTree", "quotient disconnected");
      out.all[i][j] = *d[gv[i]][gv[j]];
      if (i < j) {
        if (first || out.all[i][j] < out.min) {
          out.min = out.all[i][j];
          first = false;
        }
      }
    }
  for (size_t i = 0; i < gv.size(); ++i)
    for (size_t j = i + 1; j < gv.size(); ++j)
      if (out.all[i][j] == out.min) out.pairs.emplace_back(gv[i], gv[j]);
  return out;
}

// A pair of vertex groups fixed by every listed automorphism with a common
// conjugator: for each φ, some γ has φ(V) = V^γ and φ(W) = W^γ at once.
// With free-factor vertex groups the valid conjugator sets are single cosets
// Vγ_V and Wγ_W, so existence is one exact double-coset membership.
inline bool is_nielsen_pair(const SubgroupGraph& V, const SubgroupGraph& W,
                            const std::vector<Aut>& gens) {
  for (const Aut& phi : gens) {
    auto conj_of = [&](const SubgroupGraph& H) -> std::optional<Word> {
      std::vector<Word> im;
      for (const Word& b : H.basis_words()) im.push_back(phi.apply(b));
      SubgroupGraph image = SubgroupGraph::fold(H.ambient_rank(), im);
      // conjugator: image = γ H γ^-1, so φ(H) = H^(γ^-1) in exponent notation.
      return conjugator(image, H);
    };
    auto cv = conj_of(V), cw = conj_of(W);
    require(cv.has_value() && cw.has_value(), "ConjugatorMissing",
            "a listed generator does not preserve the vertex group class");
    // Valid γ sets (exponent convention): V cv^-1 and W cw^-1; they meet iff
    // cv^-1 cw lies in V^-1 W = V W.
    if (!in_double_coset(V, Word(), W, cv->inverse() * *cw)) return false;
  }
  return true;
}

}  // namespace upg
