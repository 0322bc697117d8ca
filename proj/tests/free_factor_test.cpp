#include "upg/free_factor.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <random>

using namespace upg;

namespace {

FreeFactorSystem sys(int rank, const std::vector<std::vector<std::string>>& gens) {
  std::vector<std::vector<Word>> ws;
  for (const auto& g : gens) {
    ws.emplace_back();
    for (const std::string& s : g) ws.back().push_back(Word::parse(s, rank));
  }
  return system_of_words(rank, ws);
}

CyclicWord cyc(const std::string& s, int rank) {
  return CyclicWord::parse(s, rank);
}

}  // namespace

TEST_CASE("complexity reads sorted ranks and orders lexicographically") {
  CHECK(complexity(sys(3, {{"a", "b"}, {"c"}})) == ComplexitySeq{2, 1});
  CHECK(complexity(sys(3, {})) == ComplexitySeq{});
  CHECK(ComplexitySeq{5, 3, 3, 1} > ComplexitySeq{4, 4, 4, 4, 4, 4});
  CHECK(ComplexitySeq{4} > ComplexitySeq{});
  CHECK(ComplexitySeq{4, 1} > ComplexitySeq{4});
  CHECK(ComplexitySeq{1, 1} < ComplexitySeq{2});
}

TEST_CASE("normalization deduplicates conjugate factors") {
  // <a> and b<a>b^-1 are the same class.
  FreeFactorSystem F = sys(2, {{"a"}, {"baB"}});
  CHECK(F.factors.size() == 1);
  CHECK(complexity(F) == ComplexitySeq{1});
  CHECK(same_system(F, sys(2, {{"a"}})));
}

TEST_CASE("meet intersects factorwise over conjugates") {
  FreeFactorSystem ab = sys(3, {{"a", "b"}});
  FreeFactorSystem bc = sys(3, {{"b", "c"}});
  CHECK(same_system(meet(ab, bc), sys(3, {{"b"}})));

  FreeFactorSystem two = sys(3, {{"a", "b"}, {"c"}});
  CHECK(same_system(meet(two, two), two));

  CHECK(meet(sys(2, {{"a"}}), sys(2, {{"b"}})).factors.empty());

  // Complexity of a meet never exceeds either input.
  std::mt19937 rng(77);
  std::vector<FreeFactorSystem> pool = {
      sys(3, {{"a", "b"}}),          sys(3, {{"b", "c"}}),
      sys(3, {{"a"}, {"b"}}),        sys(3, {{"a", "b"}, {"c"}}),
      sys(3, {{"baB", "c"}}),        sys(3, {{"ab"}}),
  };
  for (int t = 0; t < 12; ++t) {
    const FreeFactorSystem& F = pool[rng() % pool.size()];
    const FreeFactorSystem& G = pool[rng() % pool.size()];
    FreeFactorSystem M = meet(F, G);
    CHECK(complexity(M) <= complexity(F));
    CHECK(complexity(M) <= complexity(G));
  }
}

TEST_CASE("invariance under an automorphism with conjugator witnesses") {
  Aut phi = Aut::validate(2, {Word::parse("a", 2), Word::parse("ba", 2)},
                          {Word::parse("a", 2), Word::parse("bA", 2)});
  FreeFactorSystem Fa = sys(2, {{"a"}});
  InvarianceWitness wa = is_invariant(Fa, phi, /*upg=*/true);
  CHECK(wa.invariant);
  CHECK(wa.perm == std::vector<int>{0});

  FreeFactorSystem Fb = sys(2, {{"b"}});
  CHECK_FALSE(is_invariant(Fb, phi).invariant);

  // Second map of the two-map worked example fixes <a,b> as a class.
  auto h2 = aut_from_basis_tuple(
      {Word::parse("a", 3), Word::parse("ba", 3), Word::parse("Babc", 3)});
  REQUIRE(h2.has_value());
  FreeFactorSystem Fab = sys(3, {{"a", "b"}});
  InvarianceWitness w2 = is_invariant(Fab, *h2, /*upg=*/true);
  CHECK(w2.invariant);
  // Witness property: each basis image lands in the conjugated factor.
  for (size_t i = 0; i < Fab.factors.size(); ++i)
    for (const Word& b : Fab.factors[i].basis_words()) {
      Word image = h2->apply(b);
      CHECK(Fab.factors[w2.perm[i]].contains(
          image.conjugated_by(w2.conjugators[i].inverse())));
    }

  // A swap is invariance with a nontrivial permutation; the polynomial-growth
  // flag rejects it.
  Aut swap = Aut::validate(2, {Word::parse("b", 2), Word::parse("a", 2)},
                           {Word::parse("b", 2), Word::parse("a", 2)});
  FreeFactorSystem Fab2 = sys(2, {{"a"}, {"b"}});
  InvarianceWitness ws = is_invariant(Fab2, swap);
  CHECK(ws.invariant);
  CHECK(ws.perm == std::vector<int>{1, 0});
  CHECK_THROWS_WITH(is_invariant(Fab2, swap, /*upg=*/true),
                    Catch::Matchers::ContainsSubstring("PermutedFactors"));
}

TEST_CASE("whitehead moves are automorphisms and reduce greedily") {
  const std::vector<Aut>& mv2 = whitehead_moves(2);
  CHECK(mv2.size() > 4);

  WhiteheadReduction r1 = whitehead_reduce(2, {cyc("ab", 2)});
  CHECK(r1.words.size() == 1);
  CHECK(r1.words[0].rep().size() == 1);
  CHECK(r1.phi.apply_to_class(cyc("ab", 2)) == r1.words[0]);

  WhiteheadReduction r2 = whitehead_reduce(2, {cyc("a", 2)});
  CHECK(r2.words[0] == cyc("a", 2));
  CHECK(r2.phi.is_identity());

  // The commutator class is already minimal at length 4.
  WhiteheadReduction r3 = whitehead_reduce(2, {cyc("abAB", 2)});
  CHECK(r3.words[0].rep().size() == 4);
  CHECK(r3.phi.is_identity());
}

TEST_CASE("free factor support finds the minimal carrying system") {
  CHECK(same_system(free_factor_support(2, {cyc("a", 2)}), sys(2, {{"a"}})));
  CHECK(same_system(free_factor_support(2, {cyc("ab", 2)}), sys(2, {{"ab"}})));
  CHECK_THROWS_WITH(free_factor_support(2, {cyc("abAB", 2)}),
                    Catch::Matchers::ContainsSubstring("SupportIsWholeGroup"));

  // Words of a sub-basis merge into one factor.
  CHECK(same_system(free_factor_support(3, {cyc("a", 3), cyc("b", 3), cyc("ba", 3)}),
                    sys(3, {{"a", "b"}})));
  // Disjoint letters stay in separate factors.
  FreeFactorSystem F = free_factor_support(3, {cyc("a", 3), cyc("c", 3)});
  CHECK(complexity(F) == ComplexitySeq{1, 1});
  CHECK(same_system(F, sys(3, {{"a"}, {"c"}})));
  // A primitive word and a disjoint generator.
  FreeFactorSystem G = free_factor_support(3, {cyc("ab", 3), cyc("c", 3)});
  CHECK(complexity(G) == ComplexitySeq{1, 1});
  CHECK(same_system(G, sys(3, {{"ab"}, {"c"}})));
  // Conjugates supported by the base factor.
  FreeFactorSystem H = free_factor_support(3, {cyc("caC", 3)});
  CHECK(complexity(H) == ComplexitySeq{1});
  CHECK(same_system(H, sys(3, {{"a"}})));
}

TEST_CASE("support systems carry their defining words") {
  std::mt19937 rng(2025);
  for (int t = 0; t < 10; ++t) {
    int rank = 2 + static_cast<int>(rng() % 2);
    std::vector<CyclicWord> ws;
    int k = 1 + static_cast<int>(rng() % 2);
    for (int i = 0; i < k; ++i) {
      Word w;
      int len = 1 + static_cast<int>(rng() % 4);
      while (static_cast<int>(w.size()) < len) {
        int l = 1 + static_cast<int>(rng() % rank);
        w = w * Word::one_letter(rng() % 2 ? l : -l);
      }
      if (!CyclicWord::of(w).rep().empty()) ws.push_back(CyclicWord::of(w));
    }
    if (ws.empty()) continue;
    try {
      FreeFactorSystem F = free_factor_support(rank, ws);
      for (const CyclicWord& w : ws) CHECK(factor_containing(F, w.rep()).has_value());
      CHECK(complexity(F) < ComplexitySeq{rank});
    } catch (const Error& e) {
      CHECK(std::string(e.code()) == "SupportIsWholeGroup");
    }
  }
}
