#pragma once
// Upper-triangular homotopy equivalences of a filtered marked graph: each
// filtration edge maps to (prefix) E (suffix) with both circuits lying in
// strictly lower strata and all vertices fixed.  These normal forms compose,
// invert and iterate exactly; the module also provides eigenrays, Nielsen and
// exceptional paths, eventual splittings, and bounded-cancellation bounds.

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <vector>

#include "upg/errors.hpp"
#include "upg/marked_graph.hpp"

namespace upg {

class TriangularMap {
 public:
  TriangularMap() = default;

  // Certifies the triangular form: closed tight circuits at the matching
  // endpoints, strictly lower strata, and a certified induced automorphism.
  static TriangularMap validate_triangular(std::shared_ptr<const FilteredGraph> host,
                                           std::vector<EdgePath> prefixes,
                                           std::vector<EdgePath> suffixes) {
    host->validate();
    const Graph& g = host->g;
    require(static_cast<int>(prefixes.size()) == g.num_edges() &&
                static_cast<int>(suffixes.size()) == g.num_edges(),
            "NotClosed", "prefix/suffix tables sized differently from the edge list");
    TriangularMap f;
    f.host_ = std::move(host);
    f.v_ = std::move(prefixes);
    f.u_ = std::move(suffixes);
    std::vector<int> pos = filtration_positions(g, f.host_->f);
    for (int id = 0; id < g.num_edges(); ++id) {
      f.v_[id] = tighten(g, f.v_[id]);
      f.u_[id] = tighten(g, f.u_[id]);
      for (const EdgePath* c : {&f.v_[id], &f.u_[id]}) {
        bool is_prefix = (c == &f.v_[id]);
        if (c->empty()) continue;
        require(g.term_of(c->back()) == g.init_of(c->front()), "NotClosed",
                "prefix/suffix of edge " + std::to_string(id) + " is not a circuit");
        int at = g.init_of(c->front());
        int want = is_prefix ? g.init_of(id + 1) : g.term_of(id + 1);
        require(at == want, "VertexMoved",
                "circuit of edge " + std::to_string(id) + " based at the wrong vertex");
        for (int e : *c)
          require(pos[Graph::eid(e)] < pos[id], "PrefixSuffixNotLower",
                  "circuit of edge " + std::to_string(id) + " leaves the lower strata");
      }
    }
    f.ur_ = true;
    for (int id = 0; id < g.num_edges(); ++id)
      if (!f.v_[id].empty()) f.ur_ = false;
    // Induced automorphism with constructive inverse from the inductive
    // inversion formula; validation certifies bijectivity.  The petal images
    // express the map on the marking basis, so they are pulled back to the
    // standard generators through the marking automorphism.
    TriangularMap ginv = f.inverse_by_formula();
    std::vector<Word> im, inv, petal_words;
    for (int id : petal_edges(f.host_->m)) {
      EdgePath petal = petal_loop(g, f.host_->m, id);
      petal_words.push_back(loop_to_word(g, f.host_->m, petal));
      im.push_back(loop_to_word(g, f.host_->m, f.apply(petal)));
      inv.push_back(loop_to_word(g, f.host_->m, ginv.apply(petal)));
    }
    int rank = f.host_->m.rank;
    std::optional<Aut> psi = aut_from_basis_tuple(petal_words);
    require(psi.has_value(), "NotClosed", "marking words are not a basis");
    Aut psi_inv = psi->inverse();
    auto subst = [](const Word& w, const std::vector<Word>& table) {
      Word out;
      for (Letter l : w.letters())
        out = out * (l > 0 ? table[l - 1] : table[-l - 1].inverse());
      return out;
    };
    std::vector<Word> im_std, inv_std;
    for (int j = 1; j <= rank; ++j) {
      Word w = psi_inv.apply(Word::one_letter(j));
      im_std.push_back(subst(w, im));
      inv_std.push_back(subst(w, inv));
    }
    f.induced_ = Aut::validate(rank, im_std, inv_std);
    return f;
  }

  static TriangularMap identity(std::shared_ptr<const FilteredGraph> host) {
    int k = host->g.num_edges();
    return validate_triangular(std::move(host), std::vector<EdgePath>(k),
                               std::vector<EdgePath>(k));
  }

  const FilteredGraph& host() const { return *host_; }
  const std::shared_ptr<const FilteredGraph>& host_ptr() const { return host_; }
  const EdgePath& prefix(int id) const { return v_[id]; }
  const EdgePath& suffix(int id) const { return u_[id]; }
  bool ur() const { return ur_; }
  const Aut& induced() const { return induced_; }

  // Image of an oriented edge as a path.
  EdgePath edge_image(int oe) const {
    int id = Graph::eid(oe);
    EdgePath out;
    if (oe > 0) {
      out = v_[id];
      out.push_back(oe);
      out.insert(out.end(), u_[id].begin(), u_[id].end());
    } else {
      out = path_inverse(u_[id]);
      out.push_back(oe);
      EdgePath vi = path_inverse(v_[id]);
      out.insert(out.end(), vi.begin(), vi.end());
    }
    return out;
  }

  // Tightened image of a path.
  EdgePath apply(const EdgePath& p) const {
    EdgePath out;
    for (int oe : p) {
      EdgePath im = edge_image(oe);
      out.insert(out.end(), im.begin(), im.end());
    }
    return tighten(host_->g, out);
  }

  bool same_host(const TriangularMap& o) const {
    return host_ == o.host_ ||
           (host_->g == o.host_->g && host_->f.order == o.host_->f.order &&
            host_->m.mu == o.host_->m.mu && host_->m.in_tree == o.host_->m.in_tree &&
            host_->m.base == o.host_->m.base);
  }

  bool same_map(const TriangularMap& o) const { return v_ == o.v_ && u_ == o.u_; }

  bool is_identity_map() const {
    for (const EdgePath& p : v_)
      if (!p.empty()) return false;
    for (const EdgePath& p : u_)
      if (!p.empty()) return false;
    return true;
  }

 private:
  // Inverse by the inductive formula, processing strata bottom-up: if
  // f(E) = v E u then g(E) = [g(v)]^-1 E [g(u)]^-1, which only needs g on
  // lower strata.  No validation (used during validation itself).
  TriangularMap inverse_by_formula() const {
    const Graph& g = host_->g;
    TriangularMap out;
    out.host_ = host_;
    out.v_.assign(g.num_edges(), {});
    out.u_.assign(g.num_edges(), {});
    out.ur_ = ur_;
    for (int id : host_->f.order) {
      out.v_[id] = path_inverse(out.apply(v_[id]));
      out.u_[id] = path_inverse(out.apply(u_[id]));
    }
    return out;
  }

  friend TriangularMap invert_Q(const TriangularMap&);
  friend TriangularMap compose_Q(const TriangularMap&, const TriangularMap&);

  std::shared_ptr<const FilteredGraph> host_;
  std::vector<EdgePath> v_, u_;
  bool ur_ = false;
  Aut induced_;
};

// Apply the left argument after the right: compose_Q(f,g) acts as f∘g.
inline TriangularMap compose_Q(const TriangularMap& f, const TriangularMap& g) {
  require(f.same_host(g), "HostMismatch", "compose_Q needs a common host graph");
  const Graph& gr = f.host().g;
  std::vector<EdgePath> pre(gr.num_edges()), suf(gr.num_edges());
  for (int id = 0; id < gr.num_edges(); ++id) {
    EdgePath image = f.apply(g.edge_image(id + 1));
    // The edge survives tightening: everything else lies in lower strata.
    int at = -1;
    for (size_t i = 0; i < image.size(); ++i)
      if (image[i] == id + 1) {
        require(at < 0, "HostMismatch", "edge image lost triangular form");
        at = static_cast<int>(i);
      }
    require(at >= 0, "HostMismatch", "edge image lost triangular form");
    pre[id] = EdgePath(image.begin(), image.begin() + at);
    suf[id] = EdgePath(image.begin() + at + 1, image.end());
  }
  return TriangularMap::validate_triangular(f.host_ptr(), std::move(pre), std::move(suf));
}

inline TriangularMap invert_Q(const TriangularMap& f) {
  TriangularMap g = f.inverse_by_formula();
  TriangularMap out = TriangularMap::validate_triangular(
      f.host_ptr(), std::move(g.v_), std::move(g.u_));
  assert(compose_Q(f, out).is_identity_map());
  assert(compose_Q(out, f).is_identity_map());
  return out;
}

// [f^k(p)] by repeated tightened application.
inline EdgePath iterate(const TriangularMap& f, const EdgePath& p, int k) {
  EdgePath out = tighten(f.host().g, p);
  for (int i = 0; i < k; ++i) out = f.apply(out);
  return out;
}

struct EigenrayPrefix {
  int edge = 0;              // unoriented edge id
  EdgePath path;             // E_i u_i [f(u_i)] ... up to the requested length
  std::vector<int> blocks;   // start index of each block [f^j(u_i)] in path
  bool degenerate = false;   // suffix empty: the ray is the single edge
};

// Prefix of the eigenray associated to edge id, of length >= min_len edges
// (when not degenerate), computed blockwise and checked against iteration.
inline EigenrayPrefix eigenray_prefix(const TriangularMap& f, int id, int min_len) {
  require(f.prefix(id).empty(), "NotUR",
          "eigenray needs a trivial prefix on edge " + std::to_string(id));
  EigenrayPrefix out;
  out.edge = id;
  out.path = {id + 1};
  if (f.suffix(id).empty()) {
    out.degenerate = true;
    return out;
  }
  EdgePath block = f.suffix(id);
  int k = 0;
  while (static_cast<int>(out.path.size()) < min_len) {
    out.blocks.push_back(static_cast<int>(out.path.size()));
    out.path.insert(out.path.end(), block.begin(), block.end());
    block = f.apply(block);
    ++k;
  }
  EdgePath check = iterate(f, {id + 1}, k);
  require(check == out.path, "NotUR",
          "blockwise ray disagrees with iteration; suffix cancellation present");
  return out;
}

// [f(p)] = p, with p tight.
inline bool is_nielsen(const TriangularMap& f, const EdgePath& p) {
  return f.apply(p) == tighten(f.host().g, p);
}

struct ExceptionalData {
  int i = 0, j = 0;  // unoriented edge ids (first and last edge of the path)
  int m = 0;         // middle exponent, may be any integer
  EdgePath tau;      // common Nielsen root of both suffixes
};

// Matches p against the exceptional form E_i τ^m E_j^-1 where τ is Nielsen
// and both suffixes are nonzero powers of τ.
inline std::optional<ExceptionalData> classify_exceptional(const TriangularMap& f,
                                                           const EdgePath& p) {
  if (p.size() < 2 || p.front() < 0 || p.back() > 0) return std::nullopt;
  int i = Graph::eid(p.front()), j = Graph::eid(p.back());
  if (!f.prefix(i).empty() || !f.prefix(j).empty()) return std::nullopt;
  const EdgePath& ui = f.suffix(i);
  const EdgePath& uj = f.suffix(j);
  if (ui.empty() || uj.empty()) return std::nullopt;  // the exponents must be defined
  size_t d = detail::seq_period(ui);
  EdgePath tau(ui.begin(), ui.begin() + d);
  auto q = detail::seq_as_power_of(uj, tau);
  if (!q || *q == 0) return std::nullopt;
  EdgePath mid(p.begin() + 1, p.end() - 1);
  auto m = detail::seq_as_power_of(mid, tau);
  if (!m) return std::nullopt;
  if (!is_nielsen(f, tau)) return std::nullopt;
  return ExceptionalData{i, j, *m, tau};
}

struct Splitting {
  int m = 0;                     // number of iterations applied before splitting
  EdgePath whole;                // [f^m(p)]
  std::vector<EdgePath> pieces;  // concatenation equals whole
};

namespace detail {

// Greedy structural decomposition: cut at initial endpoints of top-edge
// occurrences and terminal endpoints of inverse occurrences, keep exceptional
// or single-edge segments, peel lone top edges and recurse into lower strata.
inline bool split_segment(const TriangularMap& f, const std::vector<int>& pos,
                          const EdgePath& seg, std::vector<EdgePath>& out) {
  if (seg.empty()) return true;
  if (seg.size() == 1) {
    out.push_back(seg);
    return true;
  }
  if (classify_exceptional(f, seg)) {
    out.push_back(seg);
    return true;
  }
  // Topmost stratum present in the segment.
  int top = -1, top_pos = -1;
  for (int e : seg)
    if (pos[Graph::eid(e)] > top_pos) {
      top_pos = pos[Graph::eid(e)];
      top = Graph::eid(e);
    }
  // Cut points: before each +top, after each -top.
  std::set<size_t> cuts;
  for (size_t k = 0; k < seg.size(); ++k) {
    if (seg[k] == top + 1) cuts.insert(k);
    if (seg[k] == -(top + 1)) cuts.insert(k + 1);
  }
  cuts.erase(0);
  cuts.erase(seg.size());
  if (!cuts.empty()) {
    size_t prev = 0;
    std::vector<EdgePath> segs;
    for (size_t c : cuts) {
      segs.emplace_back(seg.begin() + prev, seg.begin() + c);
      prev = c;
    }
    segs.emplace_back(seg.begin() + prev, seg.end());
    for (const EdgePath& s : segs)
      if (!split_segment(f, pos, s, out)) return false;
    return true;
  }
  // Single chunk: any +top sits at the front and any -top at the back (a cut
  // point would exist otherwise).  Peel those edges off and recurse on the
  // strictly lower interior; the certificate vetoes bad peels afterwards.
  EdgePath inner = seg;
  bool head = false, tail = false;
  if (inner.front() == top + 1) {
    head = true;
    inner.erase(inner.begin());
  }
  if (!inner.empty() && inner.back() == -(top + 1)) {
    tail = true;
    inner.pop_back();
  }
  if (!head && !tail) return false;  // top edge buried mid-segment: no cut known
  if (head) out.push_back({top + 1});
  if (!split_segment(f, pos, inner, out)) return false;
  if (tail) out.push_back({-(top + 1)});
  return true;
}

inline bool certify_splitting(const TriangularMap& f, const EdgePath& whole,
                              const std::vector<EdgePath>& pieces, int k_max = 5) {
  for (int k = 1; k <= k_max; ++k) {
    EdgePath cat;
    for (const EdgePath& piece : pieces) {
      EdgePath it = iterate(f, piece, k);
      if (!cat.empty() && !it.empty() && cat.back() == -it.front())
        return false;  // cancellation at a seam: not a genuine splitting
      cat.insert(cat.end(), it.begin(), it.end());
    }
    if (cat != iterate(f, whole, k)) return false;
  }
  return true;
}

}  // namespace detail

// Searches m = 0..m_max for an iterate [f^m(p)] that splits into single edges
// and exceptional paths, certified by piecewise iteration.
inline Splitting split(const TriangularMap& f, const EdgePath& p, int m_max) {
  require(f.ur(), "NotUR", "splitting requires the suffix-only form");
  std::vector<int> pos = filtration_positions(f.host().g, f.host().f);
  EdgePath cur = tighten(f.host().g, p);
  for (int m = 0; m <= m_max; ++m) {
    std::vector<EdgePath> pieces;
    if (detail::split_segment(f, pos, cur, pieces) &&
        detail::certify_splitting(f, cur, pieces)) {
      return {m, cur, pieces};
    }
    cur = f.apply(cur);
  }
  fail("NoSplitWithinBound",
       "no certified splitting of the path within " + std::to_string(m_max) +
           " iterations");
}

// Lipschitz bound: BCC(f) <= (L-1)·cov with L the maximal metric stretch of
// an edge and cov the total edge length of the graph.
inline Rat bcc_bound(const TriangularMap& f) {
  const Graph& g = f.host().g;
  Rat L = 0, cov = 0;
  for (int id = 0; id < g.num_edges(); ++id) {
    cov += g.length(id);
    Rat stretch = path_metric_length(g, f.apply({id + 1})) / g.length(id);
    L = std::max(L, stretch);
  }
  return L * cov - cov;
}

// Brute force over the ball of the given radius (in edges): maximal metric
// cancellation between images of two paths leaving a common vertex through
// distinct edges.  Never exceeds bcc_bound for genuine homotopy equivalences.
inline Rat bcc_bruteforce(const TriangularMap& f, int radius) {
  const Graph& g = f.host().g;
  if (g.num_edges() == 0) return 0;
  Rat minlen = g.length(0);
  for (int id = 1; id < g.num_edges(); ++id) minlen = std::min(minlen, g.length(id));
  Rat bound = bcc_bound(f);
  // Truncation cap: enough edges to certify any cancellation up to the bound.
  int cap = 3;
  for (Rat acc = 0; acc < bound; acc += minlen) ++cap;

  Rat best = 0;
  for (int beta = 0; beta < g.nv; ++beta) {
    // Oriented first edges leaving beta.
    std::vector<int> firsts;
    for (int id = 0; id < g.num_edges(); ++id)
      for (int oe : {id + 1, -id - 1})
        if (g.init_of(oe) == beta) firsts.push_back(oe);
    // For each first edge, the truncated images of all reduced paths.
    std::vector<std::vector<EdgePath>> cones(firsts.size());
    for (size_t fi = 0; fi < firsts.size(); ++fi) {
      std::vector<EdgePath>& cone = cones[fi];
      // DFS with incremental image.
      struct Frame {
        int vertex;
        int last;
        EdgePath image;
        int depth;
      };
      std::vector<Frame> stack;
      EdgePath img0 = f.apply({firsts[fi]});
      stack.push_back({g.term_of(firsts[fi]), firsts[fi], img0, 1});
      while (!stack.empty()) {
        Frame fr = std::move(stack.back());
        stack.pop_back();
        EdgePath trunc(fr.image.begin(),
                       fr.image.begin() + std::min<size_t>(fr.image.size(), cap));
        cone.push_back(std::move(trunc));
        if (fr.depth >= radius) continue;
        for (int id = 0; id < g.num_edges(); ++id)
          for (int oe : {id + 1, -id - 1}) {
            if (g.init_of(oe) != fr.vertex || oe == -fr.last) continue;
            EdgePath img = fr.image;
            EdgePath step = f.apply({oe});
            img.insert(img.end(), step.begin(), step.end());
            img = detail::seq_reduce(img);
            stack.push_back({g.term_of(oe), oe, std::move(img), fr.depth + 1});
          }
      }
      std::sort(cone.begin(), cone.end());
      cone.erase(std::unique(cone.begin(), cone.end()), cone.end());
    }
    // Pairwise: longest common image prefix across distinct first edges,
    // via sorted-neighbour lookup in the opposite cone.
    for (size_t a = 0; a < firsts.size(); ++a)
      for (size_t b = a + 1; b < firsts.size(); ++b) {
        const auto& A = cones[a];
        for (const EdgePath& w : cones[b]) {
          auto it = std::lower_bound(A.begin(), A.end(), w);
          for (int probe = 0; probe < 2; ++probe) {
            auto cand = it;
            if (probe == 1) {
              if (cand == A.begin()) continue;
              --cand;
            }
            if (cand == A.end()) continue;
            size_t lcp = detail::seq_common_prefix(*cand, w);
            Rat metric = 0;
            for (size_t t = 0; t < lcp; ++t) metric += g.length(Graph::eid(w[t]));
            best = std::max(best, metric);
          }
        }
      }
  }
  return best;
}

}  // namespace upg
