#pragma once
// Bouncing-sequence driver.  Given a finite set of unipotent polynomially
// growing outer automorphisms, iterate limit steps over the generators,
// enlarging an invariant free factor system on the two failure modes
// (hyperbolic fixed suffixes; persistently shrinking loops), until a common
// fixed simplicial tree with trivial edge stabilizers is certified.  The
// fixed tree is then assembled into a common filtered marked graph carrying
// one certified triangular lift per generator, together with the unique
// edge-fixing lifts to the automorphism group and a solvability report from
// the stage-wise prefix/suffix homomorphisms.

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "upg/errors.hpp"
#include "upg/free_factor.hpp"
#include "upg/growth.hpp"
#include "upg/tree.hpp"
#include "upg/triangular.hpp"
#include "upg/unipotent.hpp"

namespace upg {

// ---------------------------------------------------------------------------
// Configuration.

struct RunConfig {
  int window = 40;               // iteration window for limit fits
  int margin = 5;                // confirmation margin for eventual fits
  int d_max = -1;                // fit degree cap; negative = per-tree default
  int whitehead_depth = 6;       // support search depth
  int marking_length_bound = 8;  // candidate marking words and final sweeps
  int max_cycles = 24;           // full generator cycles before giving up
  int max_enlargements = 16;     // strict complexity chain safety bound
};

// ---------------------------------------------------------------------------
// Bounce state and outcomes.

enum class StepKind { FixedAlready, Advanced, EnlargeFFS, Blocked };

struct StepOutcome {
  StepKind kind = StepKind::Blocked;
  std::optional<SimplicialTree> advanced;     // Advanced
  std::vector<Word> witnesses;                // EnlargeFFS
  std::string reason;                         // mode tag / blockage text
  std::optional<FixednessResult> certificate; // FixedAlready
};

struct BounceState {
  int rank = 0;
  RunConfig cfg;
  std::vector<Aut> gens;
  std::vector<TriangularMap> reps;  // one triangular representative per gen
  FreeFactorSystem F;
  SimplicialTree T;
  std::vector<CyclicWord> tracked;             // persistent length queries
  std::vector<std::vector<Rat>> cycle_records; // tracked lengths at cycle ends
};

struct BounceHistory {
  std::vector<std::string> log;
  std::vector<CyclicWord> tracked;
  std::vector<std::vector<Rat>> cycle_lengths;
  std::vector<FreeFactorSystem> systems;        // after each enlargement
  std::vector<std::string> enlargement_reasons; // parallel to systems
  int cycles = 0;
};

// ---------------------------------------------------------------------------
// Small word helpers.

namespace detail {

inline std::string rat_str(const Rat& r) {
  std::ostringstream os;
  os << r;
  return os.str();
}

inline std::string class_str(const CyclicWord& c) {
  Word w = c.rep();
  return w.empty() ? "1" : w.str();
}

inline void push_class(std::vector<CyclicWord>& out, const CyclicWord& c) {
  if (c.trivial()) return;
  for (const CyclicWord& x : out)
    if (x == c) return;
  out.push_back(c);
}

inline void push_word(std::vector<Word>& out, const Word& w) {
  if (w.empty()) return;
  for (const Word& x : out)
    if (x == w) return;
  out.push_back(w);
}

// Signed generators in the fixed sweep order a, a^-1, b, b^-1, ...
inline std::vector<Letter> signed_letters(int rank) {
  std::vector<Letter> out;
  for (int g = 1; g <= rank; ++g) {
    out.push_back(g);
    out.push_back(-g);
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Canonical trees of a free factor system.

// Extends the given subgroup basis to a global basis by greedily appending
// short words that each raise the rank of the fold; n generators of F_n form
// a basis, so the greedy completion is always a valid marking.
inline std::vector<Word> complete_to_basis(int rank, const std::vector<Word>& seed) {
  std::vector<Word> have = seed;
  std::vector<Word> added;
  int r = seed.empty() ? 0 : SubgroupGraph::fold(rank, seed).rank();
  if (r == rank) return added;
  std::vector<Word> candidates;
  for (int g = 1; g <= rank; ++g) candidates.push_back(Word::one_letter(g));
  for (Letter a : detail::signed_letters(rank))
    for (Letter b : detail::signed_letters(rank)) {
      if (a == -b) continue;
      candidates.push_back(Word::one_letter(a) * Word::one_letter(b));
    }
  for (const Word& c : candidates) {
    if (r == rank) break;
    std::vector<Word> trial = have;
    trial.push_back(c);
    if (SubgroupGraph::fold(rank, trial).rank() == r + 1) {
      have = trial;
      added.push_back(c);
      ++r;
    }
  }
  require(r == rank, "RealizationFailed",
          "could not complete the factor bases to a global basis");
  return added;
}

// The canonical tree of a free factor system: for a single factor, a wedge of
// complement loops at the factor vertex (factor petals collapsed); for
// several factors, a star with the factors at the leaves and complement loops
// at the trivial centre; for the empty system, the free rose.  All surviving
// edges get unit length.
inline SimplicialTree canonical_tree(int rank, const FreeFactorSystem& F) {
  SimplicialTree T;
  if (F.factors.empty()) {
    FilteredGraph fg = standard_rose(rank);
    T.g = fg.g;
    T.m = fg.m;
    T.collapsed.assign(rank, false);
    T.validate();
    return T;
  }
  std::vector<Word> all_basis;
  for (const SubgroupGraph& A : F.factors)
    for (const Word& b : A.basis_words()) all_basis.push_back(b);
  std::vector<Word> comp = complete_to_basis(rank, all_basis);
  T.m.rank = rank;
  if (F.factors.size() == 1) {
    T.g.nv = 1;
    T.m.base = 0;
    for (const Word& b : F.factors[0].basis_words()) {
      T.g.add_edge(0, 0);
      T.m.in_tree.push_back(false);
      T.m.mu.push_back(b);
      T.collapsed.push_back(true);
    }
    for (const Word& c : comp) {
      T.g.add_edge(0, 0);
      T.m.in_tree.push_back(false);
      T.m.mu.push_back(c);
      T.collapsed.push_back(false);
    }
  } else {
    int k = static_cast<int>(F.factors.size());
    T.g.nv = k + 1;
    T.m.base = 0;
    for (int i = 0; i < k; ++i) {  // arcs first: centre 0 to leaf i+1
      T.g.add_edge(0, i + 1);
      T.m.in_tree.push_back(true);
      T.m.mu.push_back(Word());
      T.collapsed.push_back(false);
    }
    for (int i = 0; i < k; ++i)
      for (const Word& b : F.factors[i].basis_words()) {
        T.g.add_edge(i + 1, i + 1);
        T.m.in_tree.push_back(false);
        T.m.mu.push_back(b);
        T.collapsed.push_back(true);
      }
    for (const Word& c : comp) {
      T.g.add_edge(0, 0);
      T.m.in_tree.push_back(false);
      T.m.mu.push_back(c);
      T.collapsed.push_back(false);
    }
  }
  require(attach_marking_cert(T.m), "RealizationFailed",
          "canonical tree marking is not a basis");
  T.validate();
  return T;
}

// ---------------------------------------------------------------------------
// Triangular representatives on a signed-basis rose.

// Deterministic search for a triangular rose presentation of φ: enumerate
// generator orders lexicographically and sign flips in binary order; a
// presentation with all prefixes empty is preferred.  A depth-one inner
// twist is tried before giving up.  The returned map's induced automorphism
// represents the outer class of φ.
inline std::optional<TriangularMap> triangular_representative(const Aut& phi) {
  int n = phi.rank();
  auto attempt = [&](const Aut& f)
      -> std::optional<std::pair<std::vector<int>, std::vector<int>>> {
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i + 1;
    std::optional<std::pair<std::vector<int>, std::vector<int>>> fallback;
    std::vector<int> p = perm;
    do {
      for (int mask = 0; mask < (1 << n); ++mask) {
        std::vector<int> sign(n);
        for (int j = 0; j < n; ++j) sign[j] = (mask >> j) & 1 ? -1 : 1;
        // position of each generator in the order
        std::vector<int> pos(n + 1, 0);
        for (int j = 0; j < n; ++j) pos[p[j]] = j;
        bool ok = true, ur = true;
        for (int j = 0; j < n && ok; ++j) {
          Word img = f.apply(Word::one_letter(sign[j] * p[j]));
          int hits = 0, at = -1;
          const auto& ls = img.letters();
          for (size_t t = 0; t < ls.size(); ++t) {
            if (std::abs(ls[t]) == p[j]) {
              ++hits;
              at = static_cast<int>(t);
              // the strand must come back in the same orientation
              if (ls[t] != sign[j] * p[j]) ok = false;
            }
          }
          if (hits != 1) ok = false;
          if (!ok) break;
          for (size_t t = 0; t < ls.size(); ++t) {
            if (static_cast<int>(t) == at) continue;
            if (pos[std::abs(ls[t])] >= j) ok = false;
          }
          if (ok && at != 0) ur = false;
        }
        if (!ok) continue;
        if (ur) return std::make_pair(p, sign);
        if (!fallback) fallback = std::make_pair(p, sign);
      }
    } while (std::next_permutation(p.begin(), p.end()));
    return fallback;
  };

  std::vector<Letter> twists = {0};  // 0 = no inner twist
  for (Letter c : detail::signed_letters(n)) twists.push_back(c);
  for (Letter c : twists) {
    Aut f = phi;
    if (c != 0) {
      // i_c ∘ φ, with inverse x -> φ^-1(c^-1 x c)
      Word cw = Word::one_letter(c);
      Aut phi_inv = phi.inverse();
      Word d = phi_inv.apply(cw).inverse();
      std::vector<Word> im, inv;
      for (int i = 1; i <= n; ++i) {
        im.push_back(phi.apply(Word::one_letter(i)).conjugated_by(cw));
        inv.push_back(phi_inv.apply(Word::one_letter(i)).conjugated_by(d));
      }
      f = Aut::validate(n, im, inv);
    }
    auto found = attempt(f);
    if (!found) continue;
    const auto& [p, sign] = *found;
    FilteredGraph fg;
    fg.g.nv = 1;
    fg.m.rank = n;
    fg.m.base = 0;
    for (int j = 0; j < n; ++j) {
      fg.g.add_edge(0, 0);
      fg.m.in_tree.push_back(false);
      fg.m.mu.push_back(Word::one_letter(sign[j] * p[j]));
      fg.f.order.push_back(j);
    }
    if (!attach_marking_cert(fg.m)) continue;
    std::vector<int> pos(n + 1, 0);
    for (int j = 0; j < n; ++j) pos[p[j]] = j;
    auto to_path = [&](const Word& w) {
      EdgePath out;
      for (Letter l : w.letters()) {
        int j = pos[std::abs(l)];
        int oriented = j + 1;
        // account for the petal's own sign
        int dir = (l > 0 ? 1 : -1) * sign[j];
        out.push_back(dir * oriented);
      }
      return out;
    };
    std::vector<EdgePath> pre(n), suf(n);
    bool ok = true;
    for (int j = 0; j < n && ok; ++j) {
      Word img = f.apply(Word::one_letter(sign[j] * p[j]));
      const auto& ls = img.letters();
      int at = -1;
      for (size_t t = 0; t < ls.size(); ++t)
        if (std::abs(ls[t]) == p[j]) at = static_cast<int>(t);
      std::vector<Letter> before(ls.begin(), ls.begin() + at);
      std::vector<Letter> after(ls.begin() + at + 1, ls.end());
      pre[j] = to_path(Word::from_letters(before));
      suf[j] = to_path(Word::from_letters(after));
    }
    if (!ok) continue;
    auto host = std::make_shared<FilteredGraph>(std::move(fg));
    return TriangularMap::validate_triangular(host, std::move(pre), std::move(suf));
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Invariant enlargement.

// Closure loop: the support of the current factor bases together with the
// witness words, enlarged by generator images until the system is invariant
// under every generator.  The complexity must strictly increase.
inline FreeFactorSystem enlarge_system(int rank, const FreeFactorSystem& F,
                                       const std::vector<Word>& witnesses,
                                       const std::vector<Aut>& gens,
                                       const RunConfig& cfg) {
  std::vector<Word> words;
  for (const SubgroupGraph& A : F.factors)
    for (const Word& b : A.basis_words()) detail::push_word(words, b);
  for (const Word& w : witnesses) detail::push_word(words, w);
  require(!words.empty(), "SupportSearchExhausted", "no witnesses to enlarge by");
  for (int round = 0; round < 8; ++round) {
    std::vector<CyclicWord> classes;
    for (const Word& w : words) detail::push_class(classes, CyclicWord::of(w));
    FreeFactorSystem S = free_factor_support(rank, classes, cfg.whitehead_depth);
    bool inv = true;
    for (const Aut& phi : gens)
      if (!is_invariant(S, phi, /*upg=*/true).invariant) inv = false;
    if (inv) {
      require(complexity(F) < complexity(S), "Blocked",
              "enlargement did not strictly increase the complexity");
      return S;
    }
    std::vector<Word> next = words;
    for (const Aut& phi : gens)
      for (const Word& w : words) detail::push_word(next, phi.apply(w));
    require(next.size() > words.size(), "SupportSearchExhausted",
            "invariant closure stalled without converging");
    words = std::move(next);
  }
  fail("SupportSearchExhausted", "invariant closure exceeded the round bound");
}

// ---------------------------------------------------------------------------
// Limit realization.

namespace detail {

// Per-surviving-edge crossing counts of a class, after cyclic tightening.
inline std::map<int, int> crossings(const SimplicialTree& T, const CyclicWord& c) {
  std::map<int, int> out;
  for (int id = 0; id < T.g.num_edges(); ++id)
    if (!T.collapsed[id]) out[id] = 0;
  if (c.trivial()) return out;
  EdgePath loop = word_to_loop(T.g, T.m, c.rep());
  loop = cyclic_tighten(T.g, loop);
  for (int oe : loop) {
    int id = Graph::eid(oe);
    if (!T.collapsed[id]) ++out[id];
  }
  return out;
}

// Exact solver: unique solution demanded, every unknown strictly positive.
inline std::optional<std::vector<Rat>> solve_unique_positive(
    std::vector<std::vector<Rat>> A, std::vector<Rat> b) {
  size_t rows = A.size(), cols = rows ? A[0].size() : 0;
  std::vector<int> pivot_col;
  size_t r = 0;
  for (size_t c = 0; c < cols && r < rows; ++c) {
    size_t sel = r;
    while (sel < rows && A[sel][c] == 0) ++sel;
    if (sel == rows) continue;
    std::swap(A[sel], A[r]);
    std::swap(b[sel], b[r]);
    for (size_t i = 0; i < rows; ++i) {
      if (i == r || A[i][c] == 0) continue;
      Rat f = A[i][c] / A[r][c];
      for (size_t j = c; j < cols; ++j) A[i][j] -= f * A[r][j];
      b[i] -= f * b[r];
    }
    pivot_col.push_back(static_cast<int>(c));
    ++r;
  }
  if (pivot_col.size() != cols) return std::nullopt;  // underdetermined
  for (size_t i = r; i < rows; ++i)
    if (b[i] != 0) return std::nullopt;  // inconsistent
  std::vector<Rat> x(cols);
  for (size_t i = 0; i < cols; ++i) {
    x[pivot_col[i]] = b[i] / A[i][pivot_col[i]];
    if (!(x[pivot_col[i]] > 0)) return std::nullopt;
  }
  return x;
}

// Solve the edge lengths of a candidate shape against the limit table; the
// shape is accepted only if the linear system is uniquely solvable with
// positive lengths and consistent on every probe.
inline std::optional<SimplicialTree> solve_shape(const SimplicialTree& shape,
                                                 const std::vector<CyclicWord>& probes,
                                                 const std::vector<Rat>& values) {
  std::vector<int> unknown;  // surviving edge ids
  for (int id = 0; id < shape.g.num_edges(); ++id)
    if (!shape.collapsed[id]) unknown.push_back(id);
  std::vector<std::vector<Rat>> A;
  std::vector<Rat> b;
  for (size_t i = 0; i < probes.size(); ++i) {
    std::map<int, int> cr = crossings(shape, probes[i]);
    std::vector<Rat> row;
    for (int id : unknown) row.push_back(Rat(cr[id]));
    A.push_back(std::move(row));
    b.push_back(values[i]);
  }
  auto x = solve_unique_positive(std::move(A), std::move(b));
  if (!x) return std::nullopt;
  SimplicialTree out = shape;
  for (size_t j = 0; j < unknown.size(); ++j)
    out.g.edges[unknown[j]].length = (*x)[j];
  out.validate();
  return out;
}

}  // namespace detail

// Realizes an eventually-constant limit length table as a simplicial tree
// over the current vertex system: first the current shape with re-solved
// lengths, then wedge/star shapes with loop markings drawn from the word
// pool in deterministic order.  Certification is the full probe table.
inline std::optional<SimplicialTree> realize_limit(const SimplicialTree& T,
                                                   const FreeFactorSystem& F,
                                                   const std::vector<CyclicWord>& probes,
                                                   const std::vector<Rat>& values,
                                                   const std::vector<Word>& pool) {
  if (auto same = detail::solve_shape(T, probes, values)) return same;
  int rank = T.m.rank;
  int total_r = 0;
  for (const SubgroupGraph& A : F.factors) total_r += A.rank();
  int loops = rank - total_r;
  if (loops <= 0 || F.factors.empty()) return std::nullopt;
  // enumerate loop-marking combinations in lexicographic index order
  std::vector<int> idx(loops);
  std::function<std::optional<SimplicialTree>(int, int)> rec =
      [&](int at, int from) -> std::optional<SimplicialTree> {
    if (at == loops) {
      SimplicialTree cand;
      cand.m.rank = rank;
      int k = static_cast<int>(F.factors.size());
      if (k == 1) {
        cand.g.nv = 1;
        for (const Word& b : F.factors[0].basis_words()) {
          cand.g.add_edge(0, 0);
          cand.m.in_tree.push_back(false);
          cand.m.mu.push_back(b);
          cand.collapsed.push_back(true);
        }
        for (int j = 0; j < loops; ++j) {
          cand.g.add_edge(0, 0);
          cand.m.in_tree.push_back(false);
          cand.m.mu.push_back(pool[idx[j]]);
          cand.collapsed.push_back(false);
        }
      } else {
        cand.g.nv = k + 1;
        for (int i = 0; i < k; ++i) {
          cand.g.add_edge(0, i + 1);
          cand.m.in_tree.push_back(true);
          cand.m.mu.push_back(Word());
          cand.collapsed.push_back(false);
        }
        for (int i = 0; i < k; ++i)
          for (const Word& b : F.factors[i].basis_words()) {
            cand.g.add_edge(i + 1, i + 1);
            cand.m.in_tree.push_back(false);
            cand.m.mu.push_back(b);
            cand.collapsed.push_back(true);
          }
        for (int j = 0; j < loops; ++j) {
          cand.g.add_edge(0, 0);
          cand.m.in_tree.push_back(false);
          cand.m.mu.push_back(pool[idx[j]]);
          cand.collapsed.push_back(false);
        }
      }
      if (!attach_marking_cert(cand.m)) return std::nullopt;
      try {
        cand.validate();
      } catch (const Error&) {
        return std::nullopt;
      }
      return detail::solve_shape(cand, probes, values);
    }
    for (int i = from; i < static_cast<int>(pool.size()); ++i) {
      idx[at] = i;
      if (auto got = rec(at + 1, i + 1)) return got;
    }
    return std::nullopt;
  };
  return rec(0, 0);
}

// ---------------------------------------------------------------------------
// One bounce step.

// Probe classes for the limit of T: tracked queries, marking words, and
// pairwise products of marking words (products pin arc lengths and detect
// cancellation).
inline std::vector<CyclicWord> limit_probes(const BounceState& st) {
  std::vector<CyclicWord> probes;
  for (const CyclicWord& c : st.tracked) detail::push_class(probes, c);
  std::vector<Word> mus;
  for (const Word& w : st.T.m.mu) detail::push_word(mus, w);
  for (const Word& w : mus) detail::push_class(probes, CyclicWord::of(w));
  for (size_t i = 0; i < mus.size(); ++i)
    for (size_t j = i + 1; j < mus.size(); ++j)
      detail::push_class(probes, CyclicWord::of(mus[i] * mus[j]));
  return probes;
}

inline StepOutcome bounce_step(const BounceState& st, int i) {
  const Aut& phi = st.gens[i];
  StepOutcome out;
  FixednessResult fr = is_fixed_by(st.T, phi);
  if (fr.fixed) {
    out.kind = StepKind::FixedAlready;
    out.certificate = std::move(fr);
    return out;
  }
  GrowthClass gc;
  try {
    gc = classify_tree_growth(st.T, st.reps[i]);
  } catch (const Error& e) {
    if (std::string(e.code()) == "HypothesisUnverified") {
      out.kind = StepKind::Blocked;
      out.reason = std::string("growth classification blocked: ") + e.what();
      return out;
    }
    throw;
  }
  if (gc.grower) {
    std::vector<Word> cands =
        limit_edge_stabilizer_candidates(st.T, st.reps[i]);
    if (cands.empty() && gc.witness) cands.push_back(gc.witness->rep());
    if (cands.empty()) {
      out.kind = StepKind::Blocked;
      out.reason = "grower without a fixed-suffix witness";
      return out;
    }
    out.kind = StepKind::EnlargeFFS;
    out.witnesses = std::move(cands);
    out.reason = "mode A: hyperbolic fixed suffix (limit edge stabilizer)";
    return out;
  }
  // Nongrower: fit the limit table over the probes and re-realize it.
  std::vector<CyclicWord> probes = limit_probes(st);
  std::vector<Rat> values;
  int d_max = st.cfg.d_max >= 0 ? st.cfg.d_max : st.T.g.num_edges();
  for (const CyclicWord& q : probes) {
    GrowthFit fit;
    try {
      fit = iterate_length_fit(st.T, phi, q, st.cfg.window, d_max, st.cfg.margin);
    } catch (const Error& e) {
      fail("WindowExhausted", std::string("limit fit failed: ") + e.what());
    }
    require(fit.degree == 0, "Blocked",
            "nongrowing classification contradicted by unbounded class " +
                detail::class_str(q));
    values.push_back(fit.eval(fit.onset));
    // limit elliptics stay elliptic: a vanishing limit needs a vanishing start
    if (values.back() == 0)
      require(translation_length(st.T, q) == 0, "Blocked",
              "limit created a new elliptic class " + detail::class_str(q));
  }
  std::vector<Word> pool;
  for (const CyclicWord& c : st.tracked)
    if (c.rep().size() <= st.cfg.marking_length_bound)
      detail::push_word(pool, c.rep());
  for (const Word& w : st.T.m.mu)
    if (w.size() <= st.cfg.marking_length_bound) detail::push_word(pool, w);
  auto newT = realize_limit(st.T, st.F, probes, values, pool);
  if (!newT) fail("RealizationFailed", "no candidate tree matches the limit table");
  // minimal distance between vertex groups never shrinks along accepted steps
  try {
    VertexDistances before = min_vertex_distance(st.T);
    VertexDistances after = min_vertex_distance(*newT);
    require(!(after.min < before.min), "Blocked",
            "minimal vertex distance decreased across a nongrowing step");
  } catch (const Error& e) {
    if (std::string(e.code()) != "FewerThanTwoVertexGroups") throw;
  }
  out.kind = StepKind::Advanced;
  out.advanced = std::move(newT);
  out.reason = "nongrower: limit re-realized";
  return out;
}

// Strictly decreasing ratio over the last three cycle records; returns the
// (numerator, denominator) tracked indices of the first firing pair.
inline std::optional<std::pair<int, int>> shrinking_pair(
    const std::vector<std::vector<Rat>>& records) {
  if (records.size() < 3) return std::nullopt;
  const auto& r1 = records[records.size() - 3];
  const auto& r2 = records[records.size() - 2];
  const auto& r3 = records[records.size() - 1];
  size_t m = std::min({r1.size(), r2.size(), r3.size()});
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < m; ++j) {
      if (i == j) continue;
      if (r1[j] == 0 || r2[j] == 0 || r3[j] == 0) continue;
      if (r1[i] == 0) continue;
      Rat a = r1[i] / r1[j], b = r2[i] / r2[j], c = r3[i] / r3[j];
      if (b < a && c < b) return std::make_pair(static_cast<int>(i),
                                                static_cast<int>(j));
    }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Assembly of the common filtered marked graph.

struct AssembledGraph {
  std::shared_ptr<const FilteredGraph> host;
  std::vector<TriangularMap> lifts;  // one per generator
};

namespace detail {

// Basis-change data for a vertex group: a global automorphism carrying the
// standard generators to (factor basis, completion), so membership rewriting
// is an inverse image with a letter-range check.
struct FactorChart {
  std::vector<Word> basis;  // the factor's own basis words
  Aut psi;                  // x_j -> basis[j] for j < r, completion above
  Aut psi_inv;
  int r = 0;
};

inline FactorChart chart_of(int rank, const SubgroupGraph& V) {
  FactorChart ch;
  ch.basis = V.basis_words();
  ch.r = static_cast<int>(ch.basis.size());
  std::vector<Word> tuple = ch.basis;
  for (const Word& c : complete_to_basis(rank, ch.basis)) tuple.push_back(c);
  auto psi = aut_from_basis_tuple(tuple);
  require(psi.has_value(), "RestrictionNotCertified",
          "factor basis does not extend to a global basis");
  ch.psi = *psi;
  ch.psi_inv = psi->inverse();
  return ch;
}

// Rewrites a member of the factor in the factor's own letters.
inline Word to_sub_word(const FactorChart& ch, const Word& w) {
  Word s = ch.psi_inv.apply(w);
  for (Letter l : s.letters())
    require(std::abs(l) <= ch.r, "RestrictionNotCertified",
            "word is not carried by the vertex group: " + w.str());
  return s;
}

// The restriction of g^-1 φ(·) g to the factor, as an automorphism of F_r,
// re-certified unipotent on homology.
inline Aut restrict_to_factor(const FactorChart& ch, const Aut& phi,
                              const Word& g) {
  std::vector<Word> images;
  for (int j = 0; j < ch.r; ++j) {
    Word v = g.inverse() * phi.apply(ch.basis[j]) * g;
    images.push_back(to_sub_word(ch, v));
  }
  auto sub = aut_from_basis_tuple(images);
  require(sub.has_value(), "RestrictionNotCertified",
          "restricted images do not form a basis");
  require(is_unipotent(abelianization(*sub)), "RestrictionNotCertified",
          "restriction is not unipotent on homology");
  return *sub;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Solvability report.

struct SolvabilityStage {
  int edge = 0;           // host edge id (filtration order)
  int suffix_rank = 0;    // rank of the fold of all generators' suffix words
  std::vector<Word> suffix_words;
  int prefix_rank = 0;
  std::vector<Word> prefix_words;
};

struct SolvabilityReport {
  std::vector<SolvabilityStage> stages;
  int derived_series_bound = 0;   // stages capped by (3n-2)/2
  bool contains_f2_witness = false;
};

inline SolvabilityReport solvability_report(const AssembledGraph& A) {
  SolvabilityReport rep;
  const FilteredGraph& fg = *A.host;
  int n = fg.m.rank;
  for (int id : fg.f.order) {
    SolvabilityStage st;
    st.edge = id;
    std::vector<Word> sufs, pres;
    for (const TriangularMap& f : A.lifts) {
      const EdgePath& u = f.suffix(id);
      if (!u.empty()) detail::push_word(sufs, loop_to_word(fg.g, fg.m, u));
      const EdgePath& v = f.prefix(id);
      if (!v.empty()) detail::push_word(pres, loop_to_word(fg.g, fg.m, v));
    }
    if (!sufs.empty()) {
      SubgroupGraph H = SubgroupGraph::fold(n, sufs);
      st.suffix_rank = H.rank();
      st.suffix_words = H.basis_words();
    }
    if (!pres.empty()) {
      SubgroupGraph H = SubgroupGraph::fold(n, pres);
      st.prefix_rank = H.rank();
      st.prefix_words = H.basis_words();
    }
    if (st.suffix_rank >= 2 || st.prefix_rank >= 2) rep.contains_f2_witness = true;
    rep.stages.push_back(std::move(st));
  }
  int bound = n > 1 ? (3 * n - 2) / 2 : 1;
  rep.derived_series_bound = std::min(static_cast<int>(rep.stages.size()), bound);
  return rep;
}

// ---------------------------------------------------------------------------
// Full run.

struct KolchinResult {
  int rank = 0;
  SimplicialTree tree;
  FreeFactorSystem system;
  std::vector<FixednessResult> certificates;  // per generator, on tree
  std::shared_ptr<const FilteredGraph> graph;
  std::vector<TriangularMap> lifts;           // per generator, on graph
  std::vector<Aut> lift_auts;                 // unique edge-fixing lifts
  SolvabilityReport solvability;
  BounceHistory history;
};

inline KolchinResult kolchin_run(int rank, const std::vector<Aut>& gens,
                                 RunConfig cfg = {}, int depth = 0);

namespace detail {

// Collapse every surviving edge orbit except the one with the longest edge
// (ties to the lowest index); the collapsed tree must remain fixed.
inline SimplicialTree collapse_to_single_orbit(const SimplicialTree& T,
                                               const std::vector<Aut>& gens) {
  TreeQuotient Q = quotient_of(T);
  if (Q.edges.size() <= 1) return T;
  size_t keep = 0;
  for (size_t i = 1; i < Q.edges.size(); ++i)
    if (Q.edges[i].len > Q.edges[keep].len) keep = i;
  SimplicialTree T2 = T;
  for (size_t i = 0; i < Q.edges.size(); ++i) {
    if (i == keep) continue;
    for (int oe : Q.edges[i].chain) T2.collapsed[Graph::eid(oe)] = true;
  }
  T2.validate();
  for (const Aut& phi : gens)
    require(is_fixed_by(T2, phi).fixed, "Blocked",
            "collapsed tree lost the fixedness certificate");
  return T2;
}

}  // namespace detail

// Assembles the common filtered marked graph of a certified fixed tree: the
// tree is first collapsed to one edge orbit; vertex groups are handled by
// recursive runs on the certified restrictions; the final edge is attached
// as the topmost stratum (loop case directly, arc case as a disjoint union,
// with a rank-one side turned into a loop to keep the edge count low).
inline AssembledGraph assemble_filtered_graph(const SimplicialTree& T_in,
                                              const std::vector<Aut>& gens,
                                              const RunConfig& cfg, int depth) {
  int rank = T_in.m.rank;
  // recursion terminates: every vertex-group restriction strictly lowers rank
  require(depth <= 64, "Blocked", "assembly recursion exceeded its bound");
  TreeQuotient Q0 = quotient_of(T_in);
  bool any_group = false;
  for (const QuotientVertex& v : Q0.verts)
    if (!v.group.is_trivial()) any_group = true;

  if (!any_group) {
    // Free action: every generator must be in the trivial outer class.
    for (const Aut& phi : gens)
      require(outer_conjugator(phi, Aut::identity(rank)).has_value(), "Blocked",
              "a nontrivial outer class cannot fix a free tree");
    FilteredGraph fg;
    fg.g = T_in.g;
    fg.m = T_in.m;
    for (int id = 0; id < fg.g.num_edges(); ++id) fg.f.order.push_back(id);
    auto host = std::make_shared<FilteredGraph>(std::move(fg));
    AssembledGraph out;
    out.host = host;
    for (size_t i = 0; i < gens.size(); ++i)
      out.lifts.push_back(TriangularMap::identity(host));
    return out;
  }

  SimplicialTree T = detail::collapse_to_single_orbit(T_in, gens);
  TreeQuotient Q = quotient_of(T);
  require(Q.edges.size() == 1, "Blocked", "collapse left more than one orbit");
  const QuotientEdge& e = Q.edges[0];
  std::vector<FixednessResult> certs;
  for (const Aut& phi : gens) {
    FixednessResult fr = is_fixed_by(T, phi);
    require(fr.fixed, "Blocked", "assembly needs a fixedness certificate");
    require(fr.edge_map.size() == 1 && fr.edge_map[0] == 1, "Blocked",
            "assembly needs an orientation-preserving certificate");
    certs.push_back(std::move(fr));
  }

  if (e.qinit == e.qterm) {
    // Loop at one vertex group V: F_n = V * <t>.
    int vq = e.qinit;
    const SubgroupGraph& V = Q.verts[vq].group;
    require(!V.is_trivial(), "Blocked", "loop vertex group is trivial here");
    detail::FactorChart ch = detail::chart_of(rank, V);
    std::vector<Aut> sub_gens;
    for (size_t i = 0; i < gens.size(); ++i)
      sub_gens.push_back(detail::restrict_to_factor(
          ch, gens[i], certs[i].vertex_conjugators[vq]));
    KolchinResult sub = kolchin_run(ch.r, sub_gens, cfg, depth + 1);
    const FilteredGraph& sg = *sub.graph;
    FilteredGraph fg;
    fg.g = sg.g;
    fg.m.rank = rank;
    fg.m.base = sg.m.base;
    fg.m.in_tree = sg.m.in_tree;
    for (const Word& w : sg.m.mu) fg.m.mu.push_back(ch.psi.apply(w));
    int E = fg.g.num_edges();
    fg.g.add_edge(sg.m.base, sg.m.base);
    fg.m.in_tree.push_back(false);
    fg.m.mu.push_back(e.tword);
    fg.f.order = sg.f.order;
    fg.f.order.push_back(E);
    require(attach_marking_cert(fg.m), "Blocked",
            "assembled marking is not a basis");
    auto host = std::make_shared<FilteredGraph>(std::move(fg));
    AssembledGraph out;
    out.host = host;
    for (size_t i = 0; i < gens.size(); ++i) {
      std::vector<EdgePath> pre, suf;
      for (int id = 0; id < E; ++id) {
        pre.push_back(sub.lifts[i].prefix(id));
        suf.push_back(sub.lifts[i].suffix(id));
      }
      const auto& [x, y] = certs[i].edge_witnesses[0];
      pre.push_back(word_to_loop(sg.g, sg.m, detail::to_sub_word(ch, x)));
      suf.push_back(word_to_loop(sg.g, sg.m, detail::to_sub_word(ch, y)));
      TriangularMap lift =
          TriangularMap::validate_triangular(host, std::move(pre), std::move(suf));
      require(outer_conjugator(lift.induced(), gens[i]).has_value(), "Blocked",
              "assembled lift left the generator's outer class");
      out.lifts.push_back(std::move(lift));
    }
    return out;
  }

  // Arc between two vertex groups U and W: F_n = U * W (W anchored).
  int uq = e.qinit, wq = e.qterm;
  const SubgroupGraph& VU = Q.verts[uq].group;
  const SubgroupGraph& VW = Q.verts[wq].group;
  require(!VU.is_trivial() && !VW.is_trivial(), "Blocked",
          "arc endpoints must both carry groups");
  detail::FactorChart chU = detail::chart_of(rank, VU);
  detail::FactorChart chW = detail::chart_of(rank, VW);
  std::vector<Aut> gensU, gensW;
  for (size_t i = 0; i < gens.size(); ++i) {
    gensU.push_back(detail::restrict_to_factor(chU, gens[i],
                                               certs[i].vertex_conjugators[uq]));
    gensW.push_back(detail::restrict_to_factor(chW, gens[i],
                                               certs[i].vertex_conjugators[wq]));
  }
  KolchinResult subU = kolchin_run(chU.r, gensU, cfg, depth + 1);
  KolchinResult subW = kolchin_run(chW.r, gensW, cfg, depth + 1);
  const FilteredGraph& gU = *subU.graph;
  const FilteredGraph& gW = *subW.graph;

  int bound2 = 3 * rank - 2;  // twice the allowed edge count
  bool balloonU = chU.r == 1 && gU.g.num_edges() == 1;
  int plain_edges = gU.g.num_edges() + gW.g.num_edges() + 1;
  if (!(2 * plain_edges > bound2)) balloonU = false;  // only when needed

  FilteredGraph fg;
  fg.m.rank = rank;
  AssembledGraph out;
  if (balloonU) {
    // Replace the rank-one side and the arc by a single loop at the other
    // side, marked with the rank-one generator.
    fg.g = gW.g;
    fg.m.base = gW.m.base;
    fg.m.in_tree = gW.m.in_tree;
    for (const Word& w : gW.m.mu) fg.m.mu.push_back(chW.psi.apply(w));
    int E = fg.g.num_edges();
    fg.g.add_edge(gW.m.base, gW.m.base);
    fg.m.in_tree.push_back(false);
    fg.m.mu.push_back(chU.basis[0]);
    fg.f.order = gW.f.order;
    fg.f.order.push_back(E);
    require(attach_marking_cert(fg.m), "Blocked",
            "assembled marking is not a basis");
    auto host = std::make_shared<FilteredGraph>(std::move(fg));
    out.host = host;
    for (size_t i = 0; i < gens.size(); ++i) {
      const Word& gw = certs[i].vertex_conjugators[wq];
      Word img = gw.inverse() * gens[i].apply(chU.basis[0]) * gw;
      auto dc = in_double_coset(VW, chU.basis[0], VW, img);
      require(dc.has_value(), "Blocked",
              "rank-one side does not carry a triangular image");
      std::vector<EdgePath> pre, suf;
      for (int id = 0; id < E; ++id) {
        pre.push_back(subW.lifts[i].prefix(id));
        suf.push_back(subW.lifts[i].suffix(id));
      }
      pre.push_back(word_to_loop(gW.g, gW.m, detail::to_sub_word(chW, dc->first)));
      suf.push_back(word_to_loop(gW.g, gW.m, detail::to_sub_word(chW, dc->second)));
      TriangularMap lift =
          TriangularMap::validate_triangular(host, std::move(pre), std::move(suf));
      require(outer_conjugator(lift.induced(), gens[i]).has_value(), "Blocked",
              "assembled lift left the generator's outer class");
      out.lifts.push_back(std::move(lift));
    }
    return out;
  }

  // Plain disjoint union with the arc as topmost tree edge.
  int nvU = gU.g.nv, kU = gU.g.num_edges();
  fg.g.nv = nvU + gW.g.nv;
  fg.m.base = gU.m.base;
  for (int id = 0; id < kU; ++id) {
    fg.g.add_edge(gU.g.edges[id].init, gU.g.edges[id].term);
    fg.m.in_tree.push_back(gU.m.in_tree[id]);
    fg.m.mu.push_back(chU.psi.apply(gU.m.mu[id]));
  }
  for (int id = 0; id < gW.g.num_edges(); ++id) {
    fg.g.add_edge(nvU + gW.g.edges[id].init, nvU + gW.g.edges[id].term);
    fg.m.in_tree.push_back(gW.m.in_tree[id]);
    fg.m.mu.push_back(chW.psi.apply(gW.m.mu[id]));
  }
  int E = fg.g.num_edges();
  fg.g.add_edge(gU.m.base, nvU + gW.m.base);
  fg.m.in_tree.push_back(true);
  fg.m.mu.push_back(Word());
  for (int id : gU.f.order) fg.f.order.push_back(id);
  for (int id : gW.f.order) fg.f.order.push_back(kU + id);
  fg.f.order.push_back(E);
  require(attach_marking_cert(fg.m), "Blocked", "assembled marking is not a basis");
  auto host = std::make_shared<FilteredGraph>(std::move(fg));
  out.host = host;
  auto shift = [&](const EdgePath& p) {
    EdgePath q;
    for (int oe : p) q.push_back(oe > 0 ? oe + kU : oe - kU);
    return q;
  };
  for (size_t i = 0; i < gens.size(); ++i) {
    std::vector<EdgePath> pre, suf;
    for (int id = 0; id < kU; ++id) {
      pre.push_back(subU.lifts[i].prefix(id));
      suf.push_back(subU.lifts[i].suffix(id));
    }
    for (int id = 0; id < gW.g.num_edges(); ++id) {
      pre.push_back(shift(subW.lifts[i].prefix(id)));
      suf.push_back(shift(subW.lifts[i].suffix(id)));
    }
    const auto& [x, y] = certs[i].edge_witnesses[0];
    pre.push_back(word_to_loop(gU.g, gU.m, detail::to_sub_word(chU, x)));
    suf.push_back(shift(word_to_loop(gW.g, gW.m, detail::to_sub_word(chW, y))));
    TriangularMap lift =
        TriangularMap::validate_triangular(host, std::move(pre), std::move(suf));
    require(outer_conjugator(lift.induced(), gens[i]).has_value(), "Blocked",
            "assembled lift left the generator's outer class");
    out.lifts.push_back(std::move(lift));
  }
  return out;
}

// The unique lift of φ to the automorphism group fixing a chosen edge of the
// (single-orbit collapse of the) fixed tree: compose φ with the inner
// automorphism by the inverse of (vertex conjugator · left witness); freeness
// of the factor decomposition makes the choice unique.
inline Aut lift_to_aut(const SimplicialTree& T, const Aut& phi) {
  int rank = T.m.rank;
  TreeQuotient Q0 = quotient_of(T);
  bool any_group = false;
  for (const QuotientVertex& v : Q0.verts)
    if (!v.group.is_trivial()) any_group = true;
  if (!any_group) {
    require(outer_conjugator(phi, Aut::identity(rank)).has_value(), "Blocked",
            "a nontrivial outer class cannot fix a free tree");
    return Aut::identity(rank);
  }
  SimplicialTree T1 = detail::collapse_to_single_orbit(T, {phi});
  FixednessResult fr = is_fixed_by(T1, phi);
  require(fr.fixed, "Blocked", "lift needs a fixedness certificate");
  TreeQuotient Q = quotient_of(T1);
  const QuotientEdge& e = Q.edges[0];
  Word g = fr.vertex_conjugators[e.qinit];
  Word c = (g * fr.edge_witnesses[0].first).inverse();
  std::vector<Word> im, inv;
  Word ci = c.inverse();
  Aut phi_inv = phi.inverse();
  for (int i = 1; i <= rank; ++i) {
    im.push_back(phi.apply(Word::one_letter(i)).conjugated_by(c));
    inv.push_back(phi_inv.apply(Word::one_letter(i).conjugated_by(ci)));
  }
  return Aut::validate(rank, im, inv);
}

// ---------------------------------------------------------------------------
// Driver.

namespace detail {

inline std::string quotient_summary(const SimplicialTree& T) {
  TreeQuotient Q = quotient_of(T);
  std::ostringstream os;
  os << Q.verts.size() << " vertex(es), edges:";
  for (const QuotientEdge& e : Q.edges) {
    os << " [" << (e.tword.empty() ? "1" : e.tword.str()) << ":" << e.len << "]";
  }
  return os.str();
}

// Every edge of the quotient must have trivial stabilizer: the endpoint
// groups meet trivially across the edge word.  Fiber-product components
// range over double cosets; the stabilizer is the identity-coset one, which
// is the component lying inside both groups.
inline void check_trivial_edge_stabilizers(const SimplicialTree& T) {
  TreeQuotient Q = quotient_of(T);
  int rank = T.m.rank;
  for (const QuotientEdge& e : Q.edges) {
    const SubgroupGraph& A = Q.verts[e.qinit].group;
    const SubgroupGraph& B = Q.verts[e.qterm].group;
    if (A.is_trivial() || B.is_trivial()) continue;
    std::vector<Word> conj;
    for (const Word& b : B.basis_words()) conj.push_back(b.conjugated_by(e.tword));
    SubgroupGraph Bc = SubgroupGraph::fold(rank, conj);
    for (const SubgroupGraph& C : intersect(A, Bc)) {
      bool inside = true;
      for (const Word& b : C.basis_words())
        if (!A.contains(b) || !Bc.contains(b)) inside = false;
      require(!inside || C.is_trivial(), "Blocked",
              "edge stabilizer is nontrivial");
    }
  }
}

// Canonical representatives of all nontrivial conjugacy classes with reduced
// length at most L (rotations and inversions identified).
inline std::vector<CyclicWord> short_classes(int rank, int L) {
  std::vector<CyclicWord> out;
  std::vector<Letter> stack;
  std::function<void()> rec = [&]() {
    if (!stack.empty()) {
      Word w = Word::from_letters(stack);
      if (w.size() == static_cast<int>(stack.size())) {
        CyclicWord c = CyclicWord::of(w);
        if (!c.trivial() && c.rep() == w) {
          CyclicWord ci = CyclicWord::of(w.inverse());
          if (!(ci < c)) out.push_back(c);
        }
      }
    }
    if (static_cast<int>(stack.size()) == L) return;
    for (Letter l : signed_letters(rank)) {
      if (!stack.empty() && stack.back() == -l) continue;
      stack.push_back(l);
      rec();
      stack.pop_back();
    }
  };
  rec();
  return out;
}

inline int sweep_length(int rank, int bound) {
  // keep the exhaustive sweep near 10^5 classes
  int L = bound;
  auto count = [&](int len) {
    double c = 2.0 * rank;
    double total = c;
    for (int i = 1; i < len; ++i) total = total * (c - 1) + c;
    return total;
  };
  while (L > 2 && count(L) > 200000.0) --L;
  return L;
}

}  // namespace detail

inline KolchinResult kolchin_run(int rank, const std::vector<Aut>& gens,
                                 RunConfig cfg, int depth) {
  require(rank >= 1, "Blocked", "rank must be positive");
  require(!gens.empty(), "Blocked", "need at least one generator");
  for (const Aut& phi : gens) {
    require(phi.rank() == rank, "Blocked", "generator rank mismatch");
    require(is_unipotent(abelianization(phi)), "NotUnipotentOnHomology",
            "generator is not unipotent on homology");
  }

  BounceState st;
  st.rank = rank;
  st.cfg = cfg;
  st.gens = gens;
  for (const Aut& phi : gens) {
    auto rep = triangular_representative(phi);
    require(rep.has_value(), "Blocked",
            "no triangular presentation found for a generator");
    st.reps.push_back(std::move(*rep));
  }
  st.F = FreeFactorSystem{rank, {}};
  st.T = canonical_tree(rank, st.F);
  for (int g = 1; g <= rank; ++g)
    detail::push_class(st.tracked, CyclicWord::of(Word::one_letter(g)));
  for (int g = 1; g <= rank; ++g)
    for (int h = g + 1; h <= rank; ++h)
      detail::push_class(st.tracked,
                         CyclicWord::of(Word::one_letter(g) * Word::one_letter(h)));

  BounceHistory hist;
  auto log = [&](const std::string& s) { hist.log.push_back(s); };
  log("start: rank " + std::to_string(rank) + ", " +
      std::to_string(gens.size()) + " generator(s), trivial system");

  auto apply_enlargement = [&](const std::vector<Word>& wit,
                               const std::string& reason) {
    FreeFactorSystem S = enlarge_system(rank, st.F, wit, st.gens, st.cfg);
    require(static_cast<int>(hist.systems.size()) < cfg.max_enlargements,
            "SupportSearchExhausted", "enlargement budget exhausted");
    st.F = S;
    st.T = canonical_tree(rank, st.F);
    st.cycle_records.clear();
    hist.systems.push_back(st.F);
    hist.enlargement_reasons.push_back(reason);
    std::ostringstream os;
    os << "enlarged system (" << reason << "):";
    for (const SubgroupGraph& A : st.F.factors) {
      os << " <";
      bool first = true;
      for (const Word& b : A.basis_words()) {
        if (!first) os << ",";
        os << b.str();
        first = false;
      }
      os << ">";
    }
    log(os.str());
    log("restart on " + detail::quotient_summary(st.T));
  };

  bool converged = false;
  for (int cycle = 1; cycle <= cfg.max_cycles && !converged; ++cycle) {
    ++hist.cycles;
    bool all_fixed = true;
    bool enlarged = false;
    for (size_t i = 0; i < st.gens.size() && !enlarged; ++i) {
      StepOutcome out = bounce_step(st, static_cast<int>(i));
      std::ostringstream os;
      os << "cycle " << cycle << " generator " << (i + 1) << ": ";
      switch (out.kind) {
        case StepKind::FixedAlready:
          os << "fixed already";
          log(os.str());
          break;
        case StepKind::Advanced:
          all_fixed = false;
          st.T = *out.advanced;
          for (const Word& w : st.T.m.mu)
            if (!w.empty() && static_cast<int>(st.tracked.size()) < 32)
              detail::push_class(st.tracked, CyclicWord::of(w));
          os << out.reason << "; now " << detail::quotient_summary(st.T);
          log(os.str());
          break;
        case StepKind::EnlargeFFS: {
          all_fixed = false;
          os << out.reason << "; witnesses:";
          for (const Word& w : out.witnesses) os << " " << w.str();
          log(os.str());
          apply_enlargement(out.witnesses, out.reason);
          enlarged = true;
          break;
        }
        case StepKind::Blocked:
          fail("Blocked", out.reason);
      }
    }
    if (enlarged) continue;
    if (all_fixed) {
      converged = true;
      log("converged: every generator fixes " + detail::quotient_summary(st.T));
      break;
    }
    std::vector<Rat> rec;
    for (const CyclicWord& q : st.tracked)
      rec.push_back(translation_length(st.T, q));
    st.cycle_records.push_back(rec);
    hist.cycle_lengths.push_back(rec);
    if (auto pair = shrinking_pair(st.cycle_records)) {
      Word wit = st.tracked[pair->first].rep();
      std::ostringstream os;
      os << "mode B: ratio l(" << detail::class_str(st.tracked[pair->first])
         << ")/l(" << detail::class_str(st.tracked[pair->second])
         << ") strictly decreased across two full cycles";
      log(os.str());
      apply_enlargement({wit}, "mode B: persistently shrinking loop " + wit.str());
    }
  }
  require(converged, "WindowExhausted",
          "cycle budget exhausted without convergence");

  KolchinResult res;
  res.rank = rank;
  res.tree = st.T;
  res.system = elliptic_system(st.T);
  hist.tracked = st.tracked;
  res.history = std::move(hist);

  for (const Aut& phi : st.gens) {
    FixednessResult fr = is_fixed_by(st.T, phi);
    require(fr.fixed, "Blocked", "final certificate vanished");
    res.certificates.push_back(std::move(fr));
  }
  detail::check_trivial_edge_stabilizers(st.T);

  // Exhaustive short-class length invariance for every generator.
  int L = detail::sweep_length(rank, cfg.marking_length_bound);
  std::vector<CyclicWord> sweep = detail::short_classes(rank, L);
  for (const Aut& phi : st.gens)
    for (const CyclicWord& c : sweep)
      require(translation_length(st.T, c) ==
                  translation_length(st.T, phi.apply_to_class(c)),
              "Blocked", "certified tree failed length invariance on " +
                             detail::class_str(c));

  AssembledGraph A = assemble_filtered_graph(st.T, st.gens, cfg, depth);
  int edge_count = A.host->g.num_edges();
  if (rank > 1)
    require(2 * edge_count <= 3 * rank - 2, "Blocked",
            "assembled graph exceeds the edge bound");
  res.graph = A.host;
  res.lifts = A.lifts;
  res.solvability = solvability_report(A);

  for (const Aut& phi : st.gens) res.lift_auts.push_back(lift_to_aut(st.T, phi));
  // lift group property on sampled pairs
  for (size_t i = 0; i < st.gens.size(); ++i)
    for (size_t j = 0; j < st.gens.size(); ++j) {
      Aut comp = compose(st.gens[i], st.gens[j]);
      Aut lifted = lift_to_aut(st.T, comp);
      require(lifted == compose(res.lift_auts[i], res.lift_auts[j]), "Blocked",
              "lift group is not closed under composition");
    }
  res.history.log.push_back("certified: graph with " +
                            std::to_string(edge_count) + " edge(s), " +
                            std::to_string(res.solvability.stages.size()) +
                            " stage(s)");
  return res;
}

}  // namespace upg
