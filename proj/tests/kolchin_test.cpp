#include <catch2/catch_amalgamated.hpp>

#include "upg/kolchin.hpp"

using namespace upg;

namespace {

Word W(const std::string& s, int rank = 3) { return Word::parse(s, rank); }
CyclicWord C(const std::string& s, int rank = 3) { return CyclicWord::of(W(s, rank)); }

Aut aut(int rank, const std::vector<std::string>& images) {
  std::vector<Word> ws;
  for (const auto& s : images) ws.push_back(W(s, rank));
  auto a = aut_from_basis_tuple(ws);
  REQUIRE(a.has_value());
  return *a;
}

// x -> x, y -> yx on F_2.
Aut grower2() { return aut(2, {"a", "ba"}); }
// x -> x, y -> yx, z -> z on F_3.
Aut h_one() { return aut(3, {"a", "ba", "c"}); }
// x -> x, y -> y, z -> y^-1 x y z on F_3.
Aut h_two() { return aut(3, {"a", "b", "Babc"}); }

// Wedge of a collapsed petal a and a surviving loop b at one vertex.
SimplicialTree loop_at_a() {
  SimplicialTree T;
  T.g.nv = 1;
  T.g.add_edge(0, 0);
  T.g.add_edge(0, 0);
  T.m.rank = 2;
  T.m.base = 0;
  T.m.in_tree = {false, false};
  T.m.mu = {W("a", 2), W("b", 2)};
  REQUIRE(attach_marking_cert(T.m));
  T.collapsed = {true, false};
  T.validate();
  return T;
}

int tracked_index(const BounceHistory& h, const CyclicWord& c) {
  for (size_t i = 0; i < h.tracked.size(); ++i)
    if (h.tracked[i] == c) return static_cast<int>(i);
  return -1;
}

}  // namespace

TEST_CASE("triangular representatives are found deterministically", "[kolchin]") {
  SECTION("identity is upper triangular") {
    auto rep = triangular_representative(Aut::identity(3));
    REQUIRE(rep.has_value());
    CHECK(rep->ur());
    for (int id = 0; id < 3; ++id) CHECK(rep->suffix(id).empty());
  }
  SECTION("single-suffix growth map") {
    auto rep = triangular_representative(grower2());
    REQUIRE(rep.has_value());
    CHECK(rep->ur());
    // exactly one nonempty suffix, spelling the lowest generator
    int nonempty = 0;
    for (int id = 0; id < 2; ++id)
      if (!rep->suffix(id).empty()) ++nonempty;
    CHECK(nonempty == 1);
  }
  SECTION("prefix map needs an orientation flip to become upper triangular") {
    Aut f = aut(2, {"a", "ab"});  // y -> yx only after inverting y
    auto rep = triangular_representative(f);
    REQUIRE(rep.has_value());
    CHECK(rep->ur());
  }
  SECTION("mid-word occurrence needs the flip too") {
    auto rep = triangular_representative(h_two());
    REQUIRE(rep.has_value());
    CHECK(rep->ur());
  }
  SECTION("a finite-order map has no triangular presentation") {
    Aut swap = aut(2, {"b", "a"});
    CHECK_FALSE(triangular_representative(swap).has_value());
  }
}

TEST_CASE("factor bases complete to global bases greedily", "[kolchin]") {
  std::vector<Word> comp = complete_to_basis(3, {W("a")});
  REQUIRE(comp.size() == 2);
  CHECK(comp[0] == W("b"));
  CHECK(comp[1] == W("c"));
  std::vector<Word> comp2 = complete_to_basis(2, {W("ab", 2)});
  REQUIRE(comp2.size() == 1);
  CHECK(comp2[0] == W("a", 2));
  CHECK(complete_to_basis(2, {W("a", 2), W("b", 2)}).empty());
}

TEST_CASE("canonical trees realize free factor systems", "[kolchin]") {
  SECTION("empty system gives the free rose") {
    SimplicialTree T = canonical_tree(2, FreeFactorSystem{2, {}});
    CHECK(T.g.num_edges() == 2);
    CHECK(std::count(T.collapsed.begin(), T.collapsed.end(), true) == 0);
    CHECK(elliptic_system(T).factors.empty());
  }
  SECTION("single factor gives a wedge at the group vertex") {
    FreeFactorSystem F{2, {SubgroupGraph::fold(2, {W("a", 2)})}};
    SimplicialTree T = canonical_tree(2, F);
    TreeQuotient Q = quotient_of(T);
    REQUIRE(Q.verts.size() == 1);
    CHECK(Q.verts[0].group.rank() == 1);
    REQUIRE(Q.edges.size() == 1);
    CHECK(CyclicWord::of(Q.edges[0].tword) == C("b", 2));
    CHECK(Q.edges[0].len == 1);
  }
  SECTION("two factors give a contracted arc") {
    FreeFactorSystem F{2, {SubgroupGraph::fold(2, {W("a", 2)}),
                           SubgroupGraph::fold(2, {W("b", 2)})}};
    SimplicialTree T = canonical_tree(2, F);
    TreeQuotient Q = quotient_of(T);
    REQUIRE(Q.edges.size() == 1);
    CHECK(Q.edges[0].qinit != Q.edges[0].qterm);
    CHECK(min_vertex_distance(T).min == 2);
  }
}

TEST_CASE("bounce steps classify the three outcomes", "[kolchin]") {
  RunConfig cfg;
  BounceState st;
  st.rank = 2;
  st.cfg = cfg;
  st.gens = {grower2()};
  auto rep = triangular_representative(st.gens[0]);
  REQUIRE(rep.has_value());
  st.reps = {*rep};
  st.F = FreeFactorSystem{2, {}};
  for (int g = 1; g <= 2; ++g)
    st.tracked.push_back(CyclicWord::of(Word::one_letter(g)));

  SECTION("a hyperbolic fixed suffix forces an enlargement") {
    st.T = canonical_tree(2, st.F);
    StepOutcome out = bounce_step(st, 0);
    REQUIRE(out.kind == StepKind::EnlargeFFS);
    REQUIRE_FALSE(out.witnesses.empty());
    CHECK(out.witnesses[0] == W("a", 2));
    CHECK(out.reason.find("mode A") != std::string::npos);
  }
  SECTION("an already fixed tree is certified") {
    st.F = FreeFactorSystem{2, {SubgroupGraph::fold(2, {W("a", 2)})}};
    st.T = loop_at_a();
    StepOutcome out = bounce_step(st, 0);
    REQUIRE(out.kind == StepKind::FixedAlready);
    REQUIRE(out.certificate.has_value());
    CHECK(out.certificate->fixed);
  }
}

TEST_CASE("nongrowing steps re-realize the limit tree", "[kolchin]") {
  RunConfig cfg;
  BounceState st;
  st.rank = 3;
  st.cfg = cfg;
  st.gens = {h_one(), h_two()};
  for (const Aut& g : st.gens) {
    auto rep = triangular_representative(g);
    REQUIRE(rep.has_value());
    st.reps.push_back(*rep);
  }
  st.F = FreeFactorSystem{3, {SubgroupGraph::fold(3, {W("a")})}};
  st.T = canonical_tree(3, st.F);
  for (int g = 1; g <= 3; ++g)
    st.tracked.push_back(CyclicWord::of(Word::one_letter(g)));
  st.tracked.push_back(C("ab"));
  st.tracked.push_back(C("ac"));
  st.tracked.push_back(C("bc"));

  StepOutcome out = bounce_step(st, 1);  // the mid-word generator
  REQUIRE(out.kind == StepKind::Advanced);
  REQUIRE(out.advanced.has_value());
  const SimplicialTree& T1 = *out.advanced;
  TreeQuotient Q = quotient_of(T1);
  REQUIRE(Q.verts.size() == 1);
  CHECK(Q.verts[0].group.rank() == 1);
  REQUIRE(Q.edges.size() == 2);
  // loops marked b (length 1) and bc (length 2)
  std::vector<std::pair<std::string, Rat>> got;
  for (const QuotientEdge& e : Q.edges)
    got.emplace_back(CyclicWord::of(e.tword).rep().str(), e.len);
  std::sort(got.begin(), got.end());
  REQUIRE(got.size() == 2);
  CHECK(got[0] == std::make_pair(std::string("b"), Rat(1)));
  CHECK(got[1] == std::make_pair(std::string("bc"), Rat(2)));
  // limit lengths are realized exactly
  CHECK(translation_length(T1, C("c")) == 3);
  CHECK(translation_length(T1, C("ac")) == 3);
}

TEST_CASE("persistently shrinking ratios are detected", "[kolchin]") {
  std::vector<std::vector<Rat>> recs = {{1, 2}, {1, 4}, {1, 6}};
  auto p = shrinking_pair(recs);
  REQUIRE(p.has_value());
  CHECK(p->first == 0);
  CHECK(p->second == 1);
  CHECK_FALSE(shrinking_pair({{1, 2}, {1, 2}, {1, 2}}).has_value());
  CHECK_FALSE(shrinking_pair({{1, 2}, {1, 1}, {1, 2}}).has_value());
  CHECK_FALSE(shrinking_pair({{1, 2}, {1, 4}}).has_value());
  // zero lengths never participate
  CHECK_FALSE(shrinking_pair({{0, 2}, {0, 4}, {0, 6}}).has_value());
}

TEST_CASE("limit realization solves edge lengths exactly", "[kolchin]") {
  SimplicialTree T = loop_at_a();
  FreeFactorSystem F{2, {SubgroupGraph::fold(2, {W("a", 2)})}};
  std::vector<CyclicWord> probes = {C("b", 2), C("ab", 2)};
  SECTION("consistent same-shape tables rescale the tree") {
    auto got = realize_limit(T, F, probes, {Rat(2), Rat(2)}, {W("b", 2)});
    REQUIRE(got.has_value());
    CHECK(translation_length(*got, C("b", 2)) == 2);
  }
  SECTION("inconsistent tables are rejected") {
    auto got = realize_limit(T, F, probes, {Rat(1), Rat(3)}, {W("b", 2)});
    CHECK_FALSE(got.has_value());
  }
}

TEST_CASE("a growing generator converges through one enlargement", "[kolchin]") {
  KolchinResult res = kolchin_run(2, {grower2()});

  // free factor system enlarged once, by the fixed suffix witness
  REQUIRE(res.history.systems.size() == 1);
  REQUIRE(res.history.enlargement_reasons.size() == 1);
  CHECK(res.history.enlargement_reasons[0].find("mode A") != std::string::npos);
  REQUIRE(res.system.factors.size() == 1);
  CHECK(res.system.factors[0].contains(W("a", 2)));
  CHECK(res.system.factors[0].rank() == 1);

  // fixed tree: one loop marked b at the vertex <a>
  TreeQuotient Q = quotient_of(res.tree);
  REQUIRE(Q.verts.size() == 1);
  CHECK(Q.verts[0].group.rank() == 1);
  REQUIRE(Q.edges.size() == 1);
  CHECK(CyclicWord::of(Q.edges[0].tword) == C("b", 2));

  // filtered graph: a two-petal rose with the loop on top
  REQUIRE(res.graph->g.num_edges() == 2);
  REQUIRE(res.lifts.size() == 1);
  CHECK(res.lifts[0].induced() == grower2());
  CHECK(res.lifts[0].prefix(res.graph->f.order[1]).empty());

  // solvability: bottom stage trivial, top stage cyclic
  REQUIRE(res.solvability.stages.size() == 2);
  CHECK(res.solvability.stages[0].suffix_rank == 0);
  CHECK(res.solvability.stages[1].suffix_rank == 1);
  CHECK_FALSE(res.solvability.contains_f2_witness);
  CHECK(res.solvability.derived_series_bound == 2);

  // the unique edge-fixing lift is the map itself
  REQUIRE(res.lift_auts.size() == 1);
  CHECK(res.lift_auts[0] == grower2());
}

TEST_CASE("a commuting pair bounces to a common fixed tree", "[kolchin]") {
  KolchinResult res = kolchin_run(3, {h_one(), h_two()});

  // two enlargements: first the fixed suffix, then the shrinking loop
  REQUIRE(res.history.systems.size() == 2);
  CHECK(res.history.enlargement_reasons[0].find("mode A") != std::string::npos);
  CHECK(res.history.enlargement_reasons[1].find("mode B") != std::string::npos);
  REQUIRE(res.system.factors.size() == 1);
  CHECK(res.system.factors[0].rank() == 2);
  CHECK(res.system.factors[0].contains(W("a")));
  CHECK(res.system.factors[0].contains(W("b")));

  // the observed ratio of tracked loop lengths strictly decreased
  int ib = tracked_index(res.history, C("b"));
  int ibc = tracked_index(res.history, C("bc"));
  REQUIRE(ib >= 0);
  REQUIRE(ibc >= 0);
  REQUIRE(res.history.cycle_lengths.size() >= 3);
  std::vector<Rat> ratios;
  for (const auto& rec : res.history.cycle_lengths)
    ratios.push_back(rec[ib] / rec[ibc]);
  CHECK(ratios[0] == Rat(1, 2));
  CHECK(ratios[1] == Rat(1, 4));
  CHECK(ratios[2] == Rat(1, 6));

  // fixed tree: one loop marked c at the vertex <a,b>
  TreeQuotient Q = quotient_of(res.tree);
  REQUIRE(Q.verts.size() == 1);
  CHECK(Q.verts[0].group.rank() == 2);
  REQUIRE(Q.edges.size() == 1);
  CHECK(CyclicWord::of(Q.edges[0].tword) == C("c"));

  // filtered graph: a three-petal rose; the mid-word generator keeps its
  // conjugating prefix on the top petal
  REQUIRE(res.graph->g.num_edges() == 3);
  REQUIRE(res.lifts.size() == 2);
  CHECK(res.lifts[0].induced() == h_one());
  CHECK(res.lifts[1].induced() == h_two());
  int top = res.graph->f.order[2];
  CHECK(res.lifts[0].prefix(top).empty());
  CHECK_FALSE(res.lifts[1].prefix(top).empty());
  CHECK(loop_to_word(res.graph->g, res.graph->m, res.lifts[1].prefix(top)) ==
        W("Bab"));

  // unique edge-fixing lifts: the first is its own lift, the second is
  // corrected by the inner automorphism of the prefix
  REQUIRE(res.lift_auts.size() == 2);
  CHECK(res.lift_auts[0] == h_one());
  Word c = W("Bab").inverse();
  std::vector<Word> im;
  for (int i = 1; i <= 3; ++i)
    im.push_back(h_two().apply(Word::one_letter(i)).conjugated_by(c));
  auto expect = aut_from_basis_tuple(im);
  REQUIRE(expect.has_value());
  CHECK(res.lift_auts[1] == *expect);
}

TEST_CASE("identity generators converge without moving", "[kolchin]") {
  KolchinResult res = kolchin_run(2, {Aut::identity(2)});
  CHECK(res.history.cycles == 1);
  CHECK(res.history.systems.empty());
  CHECK(res.graph->g.num_edges() == 2);
  CHECK(res.lift_auts[0] == Aut::identity(2));
  for (const auto& st : res.solvability.stages) {
    CHECK(st.suffix_rank == 0);
    CHECK(st.prefix_rank == 0);
  }
}

TEST_CASE("non-unipotent generators are rejected up front", "[kolchin]") {
  Aut swap = aut(2, {"b", "a"});
  CHECK_THROWS_WITH(kolchin_run(2, {swap}),
                    Catch::Matchers::ContainsSubstring("unipotent"));
  Aut inv = aut(2, {"A", "b"});
  CHECK_THROWS_AS(kolchin_run(2, {inv}), Error);
}

TEST_CASE("assembly lifts a fixed loop to a filtered rose", "[kolchin]") {
  SimplicialTree T = loop_at_a();
  AssembledGraph A = assemble_filtered_graph(T, {grower2()}, RunConfig{}, 0);
  REQUIRE(A.host->g.num_edges() == 2);
  CHECK(A.host->f.order == std::vector<int>{0, 1});
  REQUIRE(A.lifts.size() == 1);
  CHECK(A.lifts[0].induced() == grower2());
  CHECK(A.lifts[0].prefix(1).empty());
  CHECK(loop_to_word(A.host->g, A.host->m, A.lifts[0].suffix(1)) == W("a", 2));
}

TEST_CASE("assembly turns a two-group arc into a two-petal rose", "[kolchin]") {
  FreeFactorSystem F{2, {SubgroupGraph::fold(2, {W("a", 2)}),
                         SubgroupGraph::fold(2, {W("b", 2)})}};
  SimplicialTree T = canonical_tree(2, F);
  AssembledGraph A = assemble_filtered_graph(T, {Aut::identity(2)}, RunConfig{}, 0);
  // the rank-one side becomes a loop: two petals total, within the edge bound
  CHECK(A.host->g.num_edges() == 2);
  CHECK(2 * A.host->g.num_edges() <= 3 * 2 - 2);
  REQUIRE(A.lifts.size() == 1);
  CHECK(A.lifts[0].induced() == Aut::identity(2));
}

TEST_CASE("edge-fixing lifts are normalized uniquely", "[kolchin]") {
  SimplicialTree T = loop_at_a();
  Aut h = grower2();
  CHECK(lift_to_aut(T, h) == h);
  // an inner-twisted representative of the same outer class lifts identically
  std::vector<Word> im;
  for (int i = 1; i <= 2; ++i)
    im.push_back(h.apply(Word::one_letter(i)).conjugated_by(W("b", 2)));
  auto twisted = aut_from_basis_tuple(im);
  REQUIRE(twisted.has_value());
  CHECK_FALSE(*twisted == h);
  CHECK(lift_to_aut(T, *twisted) == h);
}

TEST_CASE("solvability reports surface free subgroups of suffixes", "[kolchin]") {
  // two triangular maps over one rose whose top-edge suffixes generate F_2
  FilteredGraph fg;
  fg.g.nv = 1;
  fg.m.rank = 3;
  fg.m.base = 0;
  for (int j = 0; j < 3; ++j) {
    fg.g.add_edge(0, 0);
    fg.m.in_tree.push_back(false);
    fg.m.mu.push_back(Word::one_letter(j + 1));
    fg.f.order.push_back(j);
  }
  REQUIRE(attach_marking_cert(fg.m));
  auto host = std::make_shared<FilteredGraph>(std::move(fg));
  TriangularMap f1 = TriangularMap::validate_triangular(
      host, {{}, {}, {}}, {{}, {}, {1}});
  TriangularMap f2 = TriangularMap::validate_triangular(
      host, {{}, {}, {}}, {{}, {}, {2}});
  AssembledGraph A{host, {f1, f2}};
  SolvabilityReport rep = solvability_report(A);
  REQUIRE(rep.stages.size() == 3);
  CHECK(rep.stages[2].suffix_rank == 2);
  CHECK(rep.contains_f2_witness);
  CHECK(rep.derived_series_bound == 3);
}

TEST_CASE("a stabilized triod stays elliptic while the tree moves", "[kolchin]") {
  // x -> x and y_i -> y_i x on F_4, over the tree with <x> at the centre and
  // the <y_i> at the leaves of a triod
  Aut phi = aut(4, {"a", "ba", "ca", "da"});
  SimplicialTree T;
  T.g.nv = 4;
  T.m.rank = 4;
  T.m.base = 0;
  for (int i = 1; i <= 3; ++i) {
    T.g.add_edge(0, i);
    T.m.in_tree.push_back(true);
    T.m.mu.push_back(Word());
    T.collapsed.push_back(false);
  }
  T.g.add_edge(0, 0);
  T.m.in_tree.push_back(false);
  T.m.mu.push_back(W("a", 4));
  T.collapsed.push_back(true);
  for (int i = 1; i <= 3; ++i) {
    T.g.add_edge(i, i);
    T.m.in_tree.push_back(false);
    T.m.mu.push_back(Word::one_letter(i + 1));
    T.collapsed.push_back(true);
  }
  REQUIRE(attach_marking_cert(T.m));
  T.validate();

  FixednessResult fr = is_fixed_by(T, phi);
  CHECK_FALSE(fr.fixed);
  REQUIRE(fr.witness.has_value());
  CHECK(translation_length(T, *fr.witness) !=
        translation_length(T, phi.apply_to_class(*fr.witness)));
  CHECK(translation_length(T, C("b", 4)) == 0);
  CHECK(translation_length(T, phi.apply_to_class(C("b", 4))) == 2);

  auto rep = triangular_representative(phi);
  REQUIRE(rep.has_value());
  REQUIRE(rep->ur());
  GrowthClass gc = classify_tree_growth(T, *rep);
  CHECK_FALSE(gc.grower);
}
