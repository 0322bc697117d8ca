#pragma once
// Eventually-polynomial growth of translation lengths under iteration:
// exact difference-table fits, limit length functions obtained by degree
// normalization, grower classification of trees, and candidate generators
// for edge stabilizers of the limit.

#include <memory>
#include <string>
#include <vector>

#include "upg/tree.hpp"
#include "upg/triangular.hpp"

namespace upg {

struct GrowthFit {
  int onset = 0;             // least k from which the polynomial matches
  int degree = 0;            // polynomial degree
  std::vector<Rat> coeffs;   // ascending powers of k; degree + 1 entries
  int confirmations = 0;     // vanishing high-order differences observed

  Rat eval(int k) const {
    Rat v = 0, p = 1;
    for (const Rat& c : coeffs) {
      v += c * p;
      p *= k;
    }
    return v;
  }
  Rat leading() const { return coeffs.back(); }
};

// Least (onset, degree) - onset first - such that the order-(degree+1)
// finite differences vanish from the onset on, with at least `margin`
// vanishing entries as confirmation.  Coefficients are exact rationals
// recovered from the Newton forward-difference form; never extrapolates
// beyond the sampled window.
inline GrowthFit fit_eventual_polynomial(const std::vector<Rat>& samples, int d_max,
                                         int margin) {
  int n = static_cast<int>(samples.size());
  require(d_max >= 0 && margin >= 1, "NoPolynomialWithinWindow",
          "degree bound and margin must be positive");
  require(n >= d_max + margin + 2, "NoPolynomialWithinWindow",
          "window too small for the requested degree bound and margin");
  std::vector<std::vector<Rat>> diff{samples};
  for (int j = 1; j <= d_max + 1; ++j) {
    const std::vector<Rat>& prev = diff.back();
    std::vector<Rat> next(prev.size() - 1);
    for (size_t i = 0; i + 1 < prev.size(); ++i) next[i] = prev[i + 1] - prev[i];
    diff.push_back(std::move(next));
  }
  for (int k0 = 0; k0 < n; ++k0) {
    for (int d = 0; d <= d_max; ++d) {
      const std::vector<Rat>& D = diff[d + 1];
      int count = static_cast<int>(D.size()) - k0;
      if (count < margin) continue;
      bool ok = true;
      for (int i = k0; i < static_cast<int>(D.size()); ++i)
        if (D[i] != 0) {
          ok = false;
          break;
        }
      if (!ok) continue;
      GrowthFit fit;
      fit.onset = k0;
      fit.degree = d;
      fit.confirmations = count;
      // Newton form at base k0: p(k0+t) = Σ_j Δ^j[k0] · C(t, j); expand the
      // falling factorials in t, then shift t = k - k0 to the power basis.
      std::vector<Rat> pt(d + 1, Rat(0));
      std::vector<Rat> falling{Rat(1)};
      Rat factj = 1;
      for (int j = 0; j <= d; ++j) {
        if (j > 0) {
          factj *= j;
          std::vector<Rat> nf(falling.size() + 1, Rat(0));
          for (size_t i = 0; i < falling.size(); ++i) {
            nf[i + 1] += falling[i];
            nf[i] += falling[i] * Rat(-(j - 1));
          }
          falling = std::move(nf);
        }
        Rat coef = diff[j][k0] / factj;
        for (size_t i = 0; i < falling.size(); ++i) pt[i] += coef * falling[i];
      }
      std::vector<Rat> pk(d + 1, Rat(0));
      std::vector<Rat> shiftpow{Rat(1)};
      for (int i = 0; i <= d; ++i) {
        for (size_t s = 0; s < shiftpow.size(); ++s) pk[s] += pt[i] * shiftpow[s];
        std::vector<Rat> ns(shiftpow.size() + 1, Rat(0));
        for (size_t s = 0; s < shiftpow.size(); ++s) {
          ns[s + 1] += shiftpow[s];
          ns[s] += shiftpow[s] * Rat(-k0);
        }
        shiftpow = std::move(ns);
      }
      fit.coeffs = std::move(pk);
      for (int k = k0; k < n; ++k) assert(fit.eval(k) == samples[k]);
      return fit;
    }
  }
  fail("NoPolynomialWithinWindow",
       "no eventually-polynomial pattern within the sampled window");
}

struct LimitOptions {
  int window = 40;
  int margin = 5;
  int d_max = -1;  // negative: use the number of host edges
};

// Fit of k ↦ ℓ_T(φ^k(w)); the error names the offending class.
inline GrowthFit iterate_length_fit(const SimplicialTree& T, const Aut& phi,
                                    const CyclicWord& w, int window, int d_max,
                                    int margin) {
  std::vector<Rat> samples;
  CyclicWord c = w;
  for (int k = 0; k < window; ++k) {
    samples.push_back(translation_length(T, c));
    c = phi.apply_to_class(c);
  }
  try {
    return fit_eventual_polynomial(samples, d_max, margin);
  } catch (const Error&) {
    fail("NoPolynomialWithinWindow",
         "no eventually-polynomial growth for class " + w.rep().str());
  }
}

// Normalized limit of T under iteration of f: the scaling degree d is the
// maximum fitted degree over a probe set (edge marking words, suffix words,
// the queries, and pairwise products — products catch cancellation-driven
// degree drops), and ℓ∞(w) is the leading coefficient of w's fit when its
// degree attains d, else zero.  All values exact rationals.
inline LengthFunction limit_length_function(const SimplicialTree& T,
                                            const TriangularMap& f,
                                            const std::vector<CyclicWord>& queries,
                                            LimitOptions opt = {}) {
  const FilteredGraph& host = f.host();
  int d_max = opt.d_max >= 0 ? opt.d_max : host.g.num_edges();
  Aut phi = f.induced();
  std::vector<Word> seeds;
  for (int id = 0; id < host.g.num_edges(); ++id)
    if (!host.m.mu[id].empty()) seeds.push_back(host.m.mu[id]);
  for (int id = 0; id < host.g.num_edges(); ++id)
    if (!f.suffix(id).empty())
      seeds.push_back(loop_to_word(host.g, host.m, f.suffix(id)));
  for (const CyclicWord& q : queries) seeds.push_back(q.rep());
  std::vector<CyclicWord> probes;
  auto add_probe = [&probes](const Word& w) {
    CyclicWord c = CyclicWord::of(w);
    if (!c.trivial()) probes.push_back(c);
  };
  for (const Word& w : seeds) add_probe(w);
  for (size_t i = 0; i < seeds.size(); ++i)
    for (size_t j = i + 1; j < seeds.size(); ++j) add_probe(seeds[i] * seeds[j]);
  int d = 0;
  for (const CyclicWord& p : probes) {
    GrowthFit fit = iterate_length_fit(T, phi, p, opt.window, d_max, opt.margin);
    d = std::max(d, fit.degree);
  }
  auto Tc = std::make_shared<SimplicialTree>(T);
  LengthFunction out;
  out.degree = d;
  out.provenance = "limit of iterated images";
  out.value = [Tc, phi, opt, d_max, d](const CyclicWord& w) -> Rat {
    if (w.trivial()) return 0;
    GrowthFit fit = iterate_length_fit(*Tc, phi, w, opt.window, d_max, opt.margin);
    require(fit.degree <= d, "NoPolynomialWithinWindow",
            "class grows faster than the calibrated degree");
    if (fit.degree != d) return 0;
    Rat lead = fit.leading();
    // Persistence: a class hyperbolic in the limit has positive sampled
    // lengths past the onset.
    if (lead > 0)
      for (int k = fit.onset; k < opt.window; ++k) assert(fit.eval(k) > 0);
    return lead;
  };
  return out;
}

struct GrowthClass {
  bool grower = false;
  std::optional<CyclicWord> witness;  // hyperbolic suffix class when growing
};

// A tree grows under an upper-triangular map iff some suffix is hyperbolic.
// The elliptic converse needs the suffix hypothesis: every non-fixed suffix
// keeps all its iterates elliptic, checked by sampling and by carrying the
// whole orbit subgroup into one elliptic factor; violations are reported,
// never guessed.
inline GrowthClass classify_tree_growth(const SimplicialTree& T, const TriangularMap& f,
                                        int sample_window = 12) {
  require(f.ur(), "NotUR",
          "growth classification needs an upper-triangular representative");
  const FilteredGraph& host = f.host();
  Aut phi = f.induced();
  struct Suffix {
    int id;
    CyclicWord cls;
  };
  std::vector<Suffix> suffixes;
  for (int id = 0; id < host.g.num_edges(); ++id) {
    const EdgePath& s = f.suffix(id);
    if (s.empty()) continue;
    CyclicWord c = CyclicWord::of(loop_to_word(host.g, host.m, s));
    if (c.trivial()) continue;
    suffixes.push_back({id, c});
  }
  for (const Suffix& s : suffixes)
    if (translation_length(T, s.cls) > 0) return {true, s.cls};
  FreeFactorSystem E = elliptic_system(T);
  for (const Suffix& s : suffixes) {
    if (phi.apply_to_class(s.cls) == s.cls) continue;
    // Sampled iterates must stay elliptic...
    CyclicWord it = s.cls;
    for (int k = 0; k < sample_window; ++k) {
      require(translation_length(T, it) == 0, "HypothesisUnverified",
              "a non-fixed suffix has a hyperbolic iterate: " + it.rep().str());
      it = phi.apply_to_class(it);
    }
    // ... and the orbit subgroup must share one elliptic fixed point.
    std::vector<Word> orbit;
    EdgePath p = f.suffix(s.id);
    for (int k = 0; k < 8; ++k) {
      orbit.push_back(loop_to_word(host.g, host.m, p));
      p = f.apply(p);
    }
    SubgroupGraph H = SubgroupGraph::fold(host.m.rank, orbit);
    bool carried = false;
    for (const SubgroupGraph& V : E.factors)
      if (conjugate_container(H, V)) {
        carried = true;
        break;
      }
    require(carried, "HypothesisUnverified",
            "suffix orbit subgroup is not carried by one elliptic factor: " +
                s.cls.rep().str());
  }
  return {false, std::nullopt};
}

// Fixed hyperbolic suffixes: the candidate generators of edge stabilizers in
// the limit, one representative per conjugacy class (inverses identified).
inline std::vector<Word> limit_edge_stabilizer_candidates(const SimplicialTree& T,
                                                          const TriangularMap& f) {
  const FilteredGraph& host = f.host();
  std::vector<Word> out;
  std::vector<CyclicWord> seen;
  for (int id = 0; id < host.g.num_edges(); ++id) {
    const EdgePath& s = f.suffix(id);
    if (s.empty() || f.apply(s) != s) continue;
    Word w = loop_to_word(host.g, host.m, s);
    CyclicWord c = CyclicWord::of(w);
    if (c.trivial() || !(translation_length(T, c) > 0)) continue;
    CyclicWord ci = CyclicWord::of(w.inverse());
    CyclicWord canon = ci < c ? ci : c;
    bool dup = false;
    for (const CyclicWord& x : seen)
      if (x == canon) dup = true;
    if (dup) continue;
    seen.push_back(canon);
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace upg
