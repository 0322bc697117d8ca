#include "upg/subgroup.hpp"

#include <random>

#include <catch2/catch_amalgamated.hpp>

using namespace upg;

namespace {

Word W(const std::string& s, int rank = 3) { return Word::parse(s, rank); }

SubgroupGraph SG(std::initializer_list<std::string> gens, int rank = 3) {
  std::vector<Word> ws;
  for (const auto& s : gens) ws.push_back(W(s, rank));
  return SubgroupGraph::fold(rank, ws);
}

// Oracle: all products of generators and inverses up to the given length.
std::vector<Word> products_up_to(const std::vector<Word>& gens, int len) {
  std::vector<Word> cur{Word()}, all{Word()};
  for (int l = 1; l <= len; ++l) {
    std::vector<Word> nxt;
    for (const Word& w : cur)
      for (const Word& g : gens)
        for (const Word& f : {g, g.inverse()}) nxt.push_back(w * f);
    for (const Word& w : nxt) all.push_back(w);
    cur = std::move(nxt);
  }
  return all;
}

Word random_word(std::mt19937& rng, int rank, int len) {
  std::uniform_int_distribution<int> gen(1, rank), sign(0, 1);
  std::vector<Letter> raw;
  for (int i = 0; i < len; ++i) raw.push_back(gen(rng) * (sign(rng) ? 1 : -1));
  return Word::from_letters(raw);
}

}  // namespace

TEST_CASE("folding produces the expected cores") {
  auto a = SG({"a"});
  CHECK(a.num_vertices() == 1);
  CHECK(a.num_edges() == 1);
  CHECK(a.rank() == 1);

  auto rose = SG({"a", "b"}, 2);
  CHECK(rose.num_vertices() == 1);
  CHECK(rose.rank() == 2);

  // <a, bab^-1>: two vertices joined by a b-edge, a-loops at both.
  auto h = SG({"a", "baB"}, 2);
  CHECK(h.num_vertices() == 2);
  CHECK(h.num_edges() == 3);
  CHECK(h.rank() == 2);

  auto trivial = SG({}, 2);
  CHECK(trivial.is_trivial());
  CHECK(trivial.rank() == 0);
}

TEST_CASE("fold is confluent under generator permutations") {
  std::mt19937 rng(9001);
  for (int t = 0; t < 40; ++t) {
    std::vector<Word> gens;
    int k = 1 + t % 4;
    for (int i = 0; i < k; ++i) gens.push_back(random_word(rng, 3, 1 + t % 7));
    auto ref = SubgroupGraph::fold(3, gens);
    std::vector<Word> perm = gens;
    std::shuffle(perm.begin(), perm.end(), rng);
    CHECK(SubgroupGraph::fold(3, perm).same_graph(ref));
  }
}

TEST_CASE("membership accepts exactly the subgroup") {
  auto h = SG({"a", "baB"}, 2);
  CHECK(h.contains(W("abaB", 2)));
  CHECK(!h.contains(W("b", 2)));
  CHECK(SG({"a", "b"}, 2).contains(W("BBaab", 2)));

  // Every product of generators up to length 4 is accepted.
  std::vector<std::vector<Word>> samples = {
      {W("ab"), W("ca")}, {W("aa"), W("b"), W("cac")}, {W("abc")}};
  for (const auto& gens : samples) {
    auto g = SubgroupGraph::fold(3, gens);
    for (const Word& w : products_up_to(gens, 4)) CHECK(g.contains(w));
  }
}

TEST_CASE("membership path is a genuine vertex walk") {
  auto h = SG({"ab", "ca"});
  Word w = W("ab") * W("ca").inverse() * W("ab");
  auto p = h.membership_path(w);
  REQUIRE(p.has_value());
  CHECK(p->size() == static_cast<size_t>(w.size() + 1));
  CHECK(p->front() == h.base());
  CHECK(p->back() == h.base());
  for (int i = 0; i < w.size(); ++i) CHECK(h.next((*p)[i], w.letters()[i]) == (*p)[i + 1]);
}

TEST_CASE("spanning-tree basis generates and expresses members") {
  std::mt19937 rng(777);
  for (int t = 0; t < 30; ++t) {
    std::vector<Word> gens;
    for (int i = 0; i < 1 + t % 3; ++i) gens.push_back(random_word(rng, 3, 1 + t % 6));
    auto h = SubgroupGraph::fold(3, gens);
    auto basis = h.basis_words();
    CHECK(static_cast<int>(basis.size()) == h.rank());
    for (const Word& b : basis) CHECK(h.contains(b));
    // express/eval are mutually inverse on members.
    for (const Word& w : products_up_to(gens, 2)) {
      auto e = h.express_in_basis(w);
      REQUIRE(e.has_value());
      CHECK(h.eval_basis_word(*e) == w);
    }
  }
  CHECK(!SG({"a"}, 2).express_in_basis(W("b", 2)).has_value());
}

TEST_CASE("rank matches a greedy Nielsen count on samples") {
  // Oracle: greedily replace g_i by a strictly shorter product with another
  // generator, drop identities; for these benign samples the surviving count
  // is the subgroup rank.
  auto nielsen_count = [](std::vector<Word> gs) {
    bool changed = true;
    while (changed) {
      changed = false;
      gs.erase(std::remove_if(gs.begin(), gs.end(), [](const Word& w) { return w.empty(); }),
               gs.end());
      for (size_t i = 0; i < gs.size() && !changed; ++i)
        for (size_t j = 0; j < gs.size() && !changed; ++j) {
          if (i == j) continue;
          for (const Word& c :
               {gs[i] * gs[j], gs[i] * gs[j].inverse(), gs[j] * gs[i], gs[j].inverse() * gs[i]}) {
            if (c.size() < gs[i].size()) {
              gs[i] = c;
              changed = true;
              break;
            }
          }
        }
    }
    return static_cast<int>(gs.size());
  };
  std::vector<std::vector<Word>> samples = {
      {W("a"), W("b"), W("ab")},
      {W("ab"), W("ba")},
      {W("aba"), W("ab"), W("a")},
      {W("aa"), W("ab"), W("ac")},
  };
  for (const auto& gens : samples)
    CHECK(SubgroupGraph::fold(3, gens).rank() == nielsen_count(gens));
}

TEST_CASE("conjugator finds and certifies subgroup conjugacy") {
  auto g1 = conjugator(SG({"a"}, 2), SG({"baB"}, 2));
  REQUIRE(g1.has_value());
  CHECK(g1->str() == "B");

  CHECK(!conjugator(SG({"a"}, 2), SG({"b"}, 2)).has_value());

  auto h = SG({"ab", "cb"});
  auto e = conjugator(h, h);
  REQUIRE(e.has_value());
  CHECK(e->empty());

  // Random conjugates are detected with a valid certificate.
  std::mt19937 rng(4242);
  for (int t = 0; t < 30; ++t) {
    std::vector<Word> gens;
    for (int i = 0; i < 1 + t % 2; ++i) gens.push_back(random_word(rng, 3, 1 + t % 5));
    Word c = random_word(rng, 3, t % 6);
    auto H = SubgroupGraph::fold(3, gens);
    std::vector<Word> conj_gens;
    for (const Word& g : gens) conj_gens.push_back(g.conjugated_by(c.inverse()));
    auto K = SubgroupGraph::fold(3, conj_gens);  // K = c^-1 H c
    auto gamma = conjugator(H, K);
    REQUIRE(gamma.has_value());
    for (const Word& g : gens) CHECK(K.contains(g.conjugated_by(gamma->inverse())));
    for (const Word& g : conj_gens) CHECK(H.contains(g.conjugated_by(*gamma)));
  }
}

TEST_CASE("conjugate containment finds an embedding conjugator") {
  // <aa> sits inside <a>^c for any c.
  auto c1 = conjugate_container(SG({"aa"}, 2), SG({"a"}, 2));
  REQUIRE(c1.has_value());
  // b^-1 a b lies in <a,c> conjugated by b^-1? No: it needs the full witness.
  auto H = SG({"BaB" /* b^-1 a b^-1 is reduced */});
  (void)H;
  auto c2 = conjugate_container(SG({"Bab"}), SG({"a", "c"}));
  REQUIRE(c2.has_value());
  for (const Word& h : SG({"Bab"}).basis_words())
    CHECK(SG({"a", "c"}).contains(h.conjugated_by(c2->inverse())));
  CHECK(!conjugate_container(SG({"b"}), SG({"a", "c"})).has_value());
  CHECK(conjugate_container(SG({}, 3), SG({"a"})).has_value());  // trivial subgroup
}

TEST_CASE("intersection via fiber products") {
  auto i1 = intersect(SG({"a", "b"}), SG({"b", "c"}));
  REQUIRE(i1.size() == 1);
  CHECK(i1[0].rank() == 1);
  CHECK(i1[0].contains(W("b")));

  CHECK(intersect(SG({"a"}), SG({"b"})).empty());

  auto i3 = intersect(SG({"aa", "b"}, 2), SG({"a"}, 2));
  REQUIRE(i3.size() == 1);
  CHECK(i3[0].rank() == 1);
  CHECK(i3[0].contains(W("aa", 2)));
  CHECK(!i3[0].contains(W("a", 2)));
}

TEST_CASE("intersection components cover exactly the common elements") {
  // Brute force: every word of length <= 6 lies in H∩K iff some component
  // (conjugated suitably) contains it; for the basepoint component the
  // bookkeeping conjugator is trivial, so compare against that one directly.
  auto hs = std::vector<std::vector<Word>>{{W("ab", 2), W("ba", 2)}, {W("aa", 2), W("bb", 2)}};
  auto ks = std::vector<std::vector<Word>>{{W("a", 2)}, {W("ab", 2)}};
  std::mt19937 rng(5);
  for (const auto& hg : hs)
    for (const auto& kg : ks) {
      auto H = SubgroupGraph::fold(2, hg), K = SubgroupGraph::fold(2, kg);
      auto comps = intersect(H, K);
      for (int t = 0; t < 400; ++t) {
        Word w = random_word(rng, 2, 1 + t % 6);
        if (w.empty()) continue;  // only nontrivial elements are realized
        bool in_both = H.contains(w) && K.contains(w);
        if (in_both) {
          bool covered = false;
          for (const auto& c : comps)
            if (conjugate_container(SubgroupGraph::fold(2, {w}), c)) covered = true;
          CHECK(covered);
        }
      }
      // Soundness: each component embeds in both inputs up to conjugacy.
      for (const auto& c : comps) {
        CHECK(conjugate_container(c, H).has_value());
        CHECK(conjugate_container(c, K).has_value());
      }
    }
}

TEST_CASE("double coset membership with witness") {
  auto A = SG({"a"}, 2);
  auto d1 = in_double_coset(A, W("b", 2), A, W("ba", 2));
  REQUIRE(d1.has_value());
  CHECK(d1->first * W("b", 2) * d1->second == W("ba", 2));

  CHECK(!in_double_coset(A, W("b", 2), A, W("bb", 2)).has_value());

  auto d3 = in_double_coset(A, W("b", 2), A, W("aabA", 2));
  REQUIRE(d3.has_value());
  CHECK(d3->first == W("aa", 2));
  CHECK(d3->second == W("A", 2));

  // Oracle: brute-force a^i b a^j sweep agrees with the automaton answer.
  std::mt19937 rng(60);
  for (int t = 0; t < 60; ++t) {
    Word w = random_word(rng, 2, t % 7);
    bool oracle = false;
    for (int i = -6; i <= 6 && !oracle; ++i)
      for (int j = -6; j <= 6 && !oracle; ++j)
        if (W("a", 2).pow(i) * W("b", 2) * W("a", 2).pow(j) == w) oracle = true;
    auto got = in_double_coset(A, W("b", 2), A, w);
    CHECK(got.has_value() == oracle);
    if (got) CHECK(got->first * W("b", 2) * got->second == w);
  }

  // Mixed-rank case: Bab ∈ <a,b>·c-free setting with nontrivial factors.
  auto AB = SG({"a", "b"});
  auto d4 = in_double_coset(AB, W("c"), AB, W("BabcA"));
  REQUIRE(d4.has_value());
  CHECK(d4->first * W("c") * d4->second == W("BabcA"));
}
