#pragma once
// Free factor systems: conjugacy classes of free factors with a well-ordered
// complexity, meets via fiber products, invariance certificates under
// automorphisms, and minimal supporting systems computed by Whitehead descent.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "upg/aut.hpp"
#include "upg/errors.hpp"
#include "upg/subgroup.hpp"

namespace upg {

// Conjugacy-class representatives of nontrivial free factors, pairwise
// non-conjugate.  The trivial factor is implicit and never listed.
struct FreeFactorSystem {
  int rank = 0;  // ambient free group rank
  std::vector<SubgroupGraph> factors;
};

// Nonincreasing ranks; the standard vector lexicographic order realizes the
// complexity well-order (a proper prefix is smaller, the empty system least).
using ComplexitySeq = std::vector<int>;

inline ComplexitySeq complexity(const FreeFactorSystem& F) {
  ComplexitySeq c;
  for (const SubgroupGraph& f : F.factors) c.push_back(f.rank());
  std::sort(c.begin(), c.end(), std::greater<int>());
  return c;
}

namespace detail {

// Deterministic sort key for a factor: (descending rank, basis words).
inline std::vector<Word> factor_key(const SubgroupGraph& f) { return f.basis_words(); }

}  // namespace detail

// Canonical form: drop trivial factors, deduplicate conjugates, order
// deterministically by descending rank then basis words.
inline FreeFactorSystem normalize_system(int rank, std::vector<SubgroupGraph> factors) {
  FreeFactorSystem F;
  F.rank = rank;
  for (SubgroupGraph& f : factors) {
    if (f.is_trivial()) continue;
    bool dup = false;
    for (const SubgroupGraph& g : F.factors)
      if (conjugator(f, g)) {
        dup = true;
        break;
      }
    if (!dup) F.factors.push_back(std::move(f));
  }
  std::sort(F.factors.begin(), F.factors.end(),
            [](const SubgroupGraph& x, const SubgroupGraph& y) {
              if (x.rank() != y.rank()) return x.rank() > y.rank();
              return detail::factor_key(x) < detail::factor_key(y);
            });
  int total = 0;
  for (const SubgroupGraph& f : F.factors) total += f.rank();
  require(total <= rank, "NotAFreeFactorSystem", "factor ranks exceed the ambient rank");
  return F;
}

inline FreeFactorSystem system_of_words(int rank,
                                        const std::vector<std::vector<Word>>& gens) {
  std::vector<SubgroupGraph> fs;
  for (const std::vector<Word>& g : gens) fs.push_back(SubgroupGraph::fold(rank, g));
  return normalize_system(rank, std::move(fs));
}

inline bool same_system(const FreeFactorSystem& F, const FreeFactorSystem& G) {
  if (F.rank != G.rank || F.factors.size() != G.factors.size()) return false;
  std::vector<bool> used(G.factors.size(), false);
  for (const SubgroupGraph& f : F.factors) {
    bool hit = false;
    for (size_t j = 0; j < G.factors.size(); ++j)
      if (!used[j] && conjugator(f, G.factors[j])) {
        used[j] = true;
        hit = true;
        break;
      }
    if (!hit) return false;
  }
  return true;
}

// All nontrivial intersections of conjugates, factor by factor.
inline FreeFactorSystem meet(const FreeFactorSystem& F, const FreeFactorSystem& G) {
  require(F.rank == G.rank, "NotAFreeFactorSystem", "meet needs a common ambient rank");
  std::vector<SubgroupGraph> parts;
  for (const SubgroupGraph& f : F.factors)
    for (const SubgroupGraph& g : G.factors)
      for (SubgroupGraph& c : intersect(f, g)) parts.push_back(std::move(c));
  return normalize_system(F.rank, std::move(parts));
}

// Which factor carries w up to conjugacy: (index, c) with w ∈ c F_i c^-1.
inline std::optional<std::pair<int, Word>> factor_containing(const FreeFactorSystem& F,
                                                             const Word& w) {
  SubgroupGraph H = SubgroupGraph::fold(F.rank, {w});
  for (size_t i = 0; i < F.factors.size(); ++i)
    if (auto c = conjugate_container(H, F.factors[i]))
      return std::make_pair(static_cast<int>(i), *c);
  return std::nullopt;
}

struct InvarianceWitness {
  bool invariant = false;
  std::vector<int> perm;         // φ(F_i) is conjugate to F_perm[i]
  std::vector<Word> conjugators;  // φ(F_i) = c_i F_perm[i] c_i^-1
};

// Does φ carry each factor to a conjugate of a factor?  Injectivity of the
// induced permutation is automatic since factors are pairwise non-conjugate.
// Polynomially growing maps cannot permute factors; with the flag set, a
// nontrivial permutation is rejected as contradictory input.
inline InvarianceWitness is_invariant(const FreeFactorSystem& F, const Aut& phi,
                                      bool upg = false) {
  InvarianceWitness w;
  w.perm.assign(F.factors.size(), -1);
  w.conjugators.assign(F.factors.size(), Word());
  for (size_t i = 0; i < F.factors.size(); ++i) {
    std::vector<Word> im;
    for (const Word& b : F.factors[i].basis_words()) im.push_back(phi.apply(b));
    SubgroupGraph image = SubgroupGraph::fold(F.rank, im);
    bool hit = false;
    for (size_t j = 0; j < F.factors.size(); ++j)
      if (auto c = conjugator(image, F.factors[j])) {
        w.perm[i] = static_cast<int>(j);
        w.conjugators[i] = *c;
        hit = true;
        break;
      }
    if (!hit) return w;
  }
  w.invariant = true;
  if (upg)
    for (size_t i = 0; i < w.perm.size(); ++i)
      require(w.perm[i] == static_cast<int>(i), "PermutedFactors",
              "polynomially growing map permutes the factor classes");
  return w;
}

// ---------------------------------------------------------------------------
// Whitehead automorphisms and the minimal supporting system.

namespace detail {

// The multiplier-type Whitehead automorphism (S, a): a ∈ S, a⁻¹ ∉ S; each
// generator g ≠ |a| picks up a on the sides its letters lie in S:
//   g ∈ S, g⁻¹ ∈ S: g ↦ a⁻¹ g a;  g ∈ S only: g ↦ g a;  g⁻¹ ∈ S only: g ↦ a⁻¹ g.
// Inverse certificate: ((S \ {a}) ∪ {a⁻¹}, a⁻¹).
inline Aut whitehead_move(int n, int a, const std::set<int>& S) {
  auto build = [n](int mult, const std::set<int>& side) {
    std::vector<Word> im;
    Word A = Word::one_letter(mult);
    for (int g = 1; g <= n; ++g) {
      if (g == std::abs(mult)) {
        im.push_back(Word::one_letter(g));
        continue;
      }
      bool pos = side.count(g) > 0, neg = side.count(-g) > 0;
      Word w = Word::one_letter(g);
      if (pos && neg)
        im.push_back(A.inverse() * w * A);
      else if (pos)
        im.push_back(w * A);
      else if (neg)
        im.push_back(A.inverse() * w);
      else
        im.push_back(w);
    }
    return im;
  };
  std::set<int> Sinv = S;
  Sinv.erase(a);
  Sinv.insert(-a);
  return Aut::validate(n, build(a, S), build(-a, Sinv));
}

}  // namespace detail

// All multiplier-type Whitehead automorphisms for the given rank, cached.
inline const std::vector<Aut>& whitehead_moves(int n) {
  static std::map<int, std::vector<Aut>> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<Aut> moves;
  std::vector<int> others;
  for (int a : [&] {
         std::vector<int> as;
         for (int g = 1; g <= n; ++g) {
           as.push_back(g);
           as.push_back(-g);
         }
         return as;
       }()) {
    others.clear();
    for (int g = 1; g <= n; ++g)
      if (g != std::abs(a)) {
        others.push_back(g);
        others.push_back(-g);
      }
    // Every subset of the other letters joins S alongside a.
    int m = static_cast<int>(others.size());
    for (int mask = 0; mask < (1 << m); ++mask) {
      std::set<int> S{a};
      for (int b = 0; b < m; ++b)
        if (mask & (1 << b)) S.insert(others[b]);
      Aut mv = detail::whitehead_move(n, a, S);
      if (!mv.is_identity()) moves.push_back(std::move(mv));
    }
  }
  return cache.emplace(n, std::move(moves)).first->second;
}

struct WhiteheadReduction {
  std::vector<CyclicWord> words;  // words[i] = [phi(input[i])]
  Aut phi;
};

namespace detail {

inline int total_cyclic_length(const std::vector<CyclicWord>& ws) {
  int t = 0;
  for (const CyclicWord& w : ws) t += static_cast<int>(w.rep().size());
  return t;
}

inline std::vector<CyclicWord> apply_all(const Aut& phi,
                                         const std::vector<CyclicWord>& ws) {
  std::vector<CyclicWord> out;
  for (const CyclicWord& w : ws) out.push_back(phi.apply_to_class(w));
  return out;
}

}  // namespace detail

// Greedy descent over Whitehead moves on total cyclic length; deterministic
// tie-break by the resulting word list.
inline WhiteheadReduction whitehead_reduce(int rank, std::vector<CyclicWord> ws) {
  WhiteheadReduction r{std::move(ws), Aut::identity(rank)};
  const std::vector<Aut>& moves = whitehead_moves(rank);
  for (;;) {
    int cur = detail::total_cyclic_length(r.words);
    int best = cur;
    std::vector<CyclicWord> best_ws;
    const Aut* best_mv = nullptr;
    for (const Aut& mv : moves) {
      std::vector<CyclicWord> cand = detail::apply_all(mv, r.words);
      int len = detail::total_cyclic_length(cand);
      if (len >= cur) continue;
      if (!best_mv || len < best || (len == best && cand < best_ws)) {
        best = len;
        best_ws = std::move(cand);
        best_mv = &mv;
      }
    }
    if (!best_mv) return r;
    r.words = std::move(best_ws);
    r.phi = compose(*best_mv, r.phi);
  }
}

namespace detail {

// Generator co-occurrence components of a word list: which generators are
// forced into a common factor, and the resulting rank multiset.
inline std::vector<std::set<int>> cooccurrence(int rank,
                                               const std::vector<CyclicWord>& ws) {
  std::vector<int> uf(rank + 1);
  for (int i = 0; i <= rank; ++i) uf[i] = i;
  auto find = [&](int x) {
    while (uf[x] != x) x = uf[x] = uf[uf[x]];
    return x;
  };
  std::set<int> used;
  for (const CyclicWord& w : ws) {
    int first = -1;
    for (int l : w.letters()) {
      int g = std::abs(l);
      used.insert(g);
      if (first < 0)
        first = g;
      else
        uf[find(first)] = find(g);
    }
  }
  std::map<int, std::set<int>> comps;
  for (int g : used) comps[find(g)].insert(g);
  std::vector<std::set<int>> out;
  for (auto& [root, s] : comps) out.push_back(std::move(s));
  return out;
}

inline ComplexitySeq partition_complexity(const std::vector<std::set<int>>& comps) {
  ComplexitySeq c;
  for (const auto& s : comps) c.push_back(static_cast<int>(s.size()));
  std::sort(c.begin(), c.end(), std::greater<int>());
  return c;
}

}  // namespace detail

// The minimal free factor system carrying all the given conjugacy classes:
// Whitehead descent to minimal total length, then a bounded search over
// length-preserving moves for the finest generator partition; factors are the
// partition sub-bases pulled back through the composed basis change.  Sound
// always (the returned system provably carries the words); minimal within the
// explored orbit neighbourhood.
inline FreeFactorSystem free_factor_support(int rank, std::vector<CyclicWord> ws,
                                            int neutral_depth = 6,
                                            int state_cap = 20000) {
  for (const CyclicWord& w : ws)
    require(!w.rep().empty(), "SupportIsWholeGroup",
            "support undefined for the trivial class");
  WhiteheadReduction base = whitehead_reduce(rank, std::move(ws));
  const std::vector<Aut>& moves = whitehead_moves(rank);

  struct State {
    std::vector<CyclicWord> words;
    Aut phi;
    int depth;
  };
  auto score = [&](const std::vector<CyclicWord>& w) {
    return detail::partition_complexity(detail::cooccurrence(rank, w));
  };
  int min_len = detail::total_cyclic_length(base.words);
  State best{base.words, base.phi, 0};
  ComplexitySeq best_score = score(base.words);
  std::set<std::vector<CyclicWord>> seen{base.words};
  std::vector<State> queue{best};
  for (size_t qi = 0; qi < queue.size(); ++qi) {
    State cur = queue[qi];
    if (cur.depth >= neutral_depth) continue;
    for (const Aut& mv : moves) {
      std::vector<CyclicWord> cand = detail::apply_all(mv, cur.words);
      int len = detail::total_cyclic_length(cand);
      if (len > min_len) continue;
      if (len < min_len) {
        // A neutral detour opened a further descent: restart from there.
        WhiteheadReduction again = whitehead_reduce(rank, std::move(cand));
        min_len = detail::total_cyclic_length(again.words);
        best = {again.words, compose(again.phi, compose(mv, cur.phi)), 0};
        best_score = score(best.words);
        seen = {best.words};
        queue.clear();
        queue.push_back(best);
        qi = static_cast<size_t>(-1);  // restart the scan
        break;
      }
      if (seen.count(cand) || static_cast<int>(seen.size()) >= state_cap) continue;
      seen.insert(cand);
      State nxt{std::move(cand), compose(mv, cur.phi), cur.depth + 1};
      ComplexitySeq sc = score(nxt.words);
      if (sc < best_score) {
        best_score = sc;
        best = nxt;
      }
      queue.push_back(std::move(nxt));
    }
  }

  std::vector<std::set<int>> comps = detail::cooccurrence(rank, best.words);
  require(!(comps.size() == 1 && static_cast<int>(comps.front().size()) == rank),
          "SupportIsWholeGroup", "no proper free factor carries the given classes");
  Aut inv = best.phi.inverse();
  std::vector<SubgroupGraph> factors;
  for (const std::set<int>& S : comps) {
    std::vector<Word> gens;
    for (int g : S) gens.push_back(inv.apply(Word::one_letter(g)));
    factors.push_back(SubgroupGraph::fold(rank, gens));
  }
  FreeFactorSystem F = normalize_system(rank, std::move(factors));
  // Soundness certificate: every input class is conjugate into some factor.
  for (const CyclicWord& w : detail::apply_all(inv, best.words)) {
    (void)w;
    assert(factor_containing(F, w.rep()).has_value());
  }
  return F;
}

}  // namespace upg
