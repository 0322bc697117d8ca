#include "upg/triangular.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <memory>
#include <random>

#include "upg/word.hpp"

using namespace upg;

namespace {

using Host = std::shared_ptr<const FilteredGraph>;

Host rose(int rank) { return std::make_shared<const FilteredGraph>(standard_rose(rank)); }

// On a rose, edge ids coincide with generators, so paths parse as words.
EdgePath ep(const std::string& s, int rank) { return Word::parse(s, rank).letters(); }

// Suffix-only map on a rose from suffix words, lowest stratum first.
TriangularMap ur_rose_map(const Host& h, const std::vector<std::string>& suffixes) {
  int n = h->g.num_edges();
  std::vector<EdgePath> pre(n), suf(n);
  for (int i = 0; i < n; ++i) suf[i] = ep(suffixes[i], n);
  return TriangularMap::validate_triangular(h, pre, suf);
}

// Independent image oracle: raw substitution plus free reduction, no reuse of
// TriangularMap::apply.
EdgePath naive_image(const Graph& g, const std::vector<EdgePath>& pre,
                     const std::vector<EdgePath>& suf, EdgePath p, int k) {
  for (int r = 0; r < k; ++r) {
    EdgePath out;
    for (int oe : p) {
      int id = Graph::eid(oe);
      EdgePath piece;
      if (oe > 0) {
        piece = pre[id];
        piece.push_back(oe);
        piece.insert(piece.end(), suf[id].begin(), suf[id].end());
      } else {
        piece = path_inverse(suf[id]);
        piece.push_back(oe);
        EdgePath vi = path_inverse(pre[id]);
        piece.insert(piece.end(), vi.begin(), vi.end());
      }
      out.insert(out.end(), piece.begin(), piece.end());
    }
    p = tighten(g, out);
  }
  return p;
}

bool contains_subpath(const EdgePath& hay, const EdgePath& needle) {
  if (needle.empty()) return true;
  if (hay.size() < needle.size()) return false;
  for (size_t i = 0; i + needle.size() <= hay.size(); ++i)
    if (std::equal(needle.begin(), needle.end(), hay.begin() + i)) return true;
  return false;
}

// Two-vertex graph with a loop at each end of a bridge; basis is the two
// loops, the bridge spans.
Host barbell() {
  FilteredGraph fg;
  fg.g.nv = 2;
  fg.g.add_edge(0, 0);  // e0: loop at 0
  fg.g.add_edge(0, 1);  // e1: bridge
  fg.g.add_edge(1, 1);  // e2: loop at 1
  fg.m.rank = 2;
  fg.m.base = 0;
  fg.m.in_tree = {false, true, false};
  fg.m.mu = {Word::one_letter(1), Word(), Word::one_letter(2)};
  fg.f.order = {0, 2, 1};  // both loops below the bridge
  FilteredGraph copy = fg;
  copy.validate();
  return std::make_shared<const FilteredGraph>(std::move(fg));
}

// Two vertices joined by three parallel edges.
Host theta() {
  FilteredGraph fg;
  fg.g.nv = 2;
  fg.g.add_edge(0, 1);
  fg.g.add_edge(0, 1);
  fg.g.add_edge(0, 1);
  fg.m.rank = 2;
  fg.m.base = 0;
  fg.m.in_tree = {true, false, false};
  fg.m.mu = {Word(), Word::one_letter(1), Word::one_letter(2)};
  fg.f.order = {0, 1, 2};
  FilteredGraph copy = fg;
  copy.validate();
  return std::make_shared<const FilteredGraph>(std::move(fg));
}

// Random triangular map on an arbitrary filtered host: each circuit is a
// random walk in the lower strata closed up by a path found inside them.
TriangularMap random_map(const Host& h, std::mt19937& rng, bool suffix_only = false) {
  const Graph& g = h->g;
  std::vector<int> pos = filtration_positions(g, h->f);
  auto random_circuit = [&](int at, int below) -> EdgePath {
    std::vector<int> allowed;  // oriented edges in strata below the given one
    for (int id = 0; id < g.num_edges(); ++id)
      if (pos[id] < below) {
        allowed.push_back(id + 1);
        allowed.push_back(-id - 1);
      }
    if (allowed.empty() || rng() % 2 == 0) return {};
    EdgePath walk;
    int v = at;
    int steps = 1 + static_cast<int>(rng() % 4);
    for (int s = 0; s < steps; ++s) {
      std::vector<int> outs;
      for (int oe : allowed)
        if (g.init_of(oe) == v) outs.push_back(oe);
      if (outs.empty()) break;
      int oe = outs[rng() % outs.size()];
      walk.push_back(oe);
      v = g.term_of(oe);
    }
    // Close up with a breadth-first path back through the allowed subgraph.
    std::vector<int> prev(g.nv, -2), via(g.nv, 0);
    std::vector<int> q{v};
    prev[v] = -1;
    for (size_t qi = 0; qi < q.size(); ++qi)
      for (int oe : allowed)
        if (g.init_of(oe) == q[qi] && prev[g.term_of(oe)] == -2) {
          prev[g.term_of(oe)] = q[qi];
          via[g.term_of(oe)] = oe;
          q.push_back(g.term_of(oe));
        }
    if (prev[at] == -2) return {};
    EdgePath back;
    for (int w = at; w != v; w = prev[w]) back.push_back(via[w]);
    std::reverse(back.begin(), back.end());
    walk.insert(walk.end(), back.begin(), back.end());
    return tighten(g, walk);
  };
  std::vector<EdgePath> pre(g.num_edges()), suf(g.num_edges());
  for (int id = 0; id < g.num_edges(); ++id) {
    if (!suffix_only) pre[id] = random_circuit(g.init_of(id + 1), pos[id]);
    suf[id] = random_circuit(g.term_of(id + 1), pos[id]);
  }
  return TriangularMap::validate_triangular(h, pre, suf);
}

}  // namespace

TEST_CASE("triangular validation certifies the suffix-only form") {
  Host h = rose(2);
  TriangularMap f = ur_rose_map(h, {"", "a"});
  CHECK(f.ur());
  CHECK(f.prefix(1).empty());
  CHECK(f.suffix(1) == EdgePath{1});
  CHECK(f.induced().apply(Word::one_letter(2)).str() == "ba");
  CHECK(f.induced().apply(Word::one_letter(1)).str() == "a");

  TriangularMap id = TriangularMap::identity(h);
  CHECK(id.ur());
  CHECK(id.is_identity_map());
  CHECK(id.induced().is_identity());

  // Prefixes kill the flag.
  std::vector<EdgePath> pre(2), suf(2);
  pre[1] = {1};
  TriangularMap fp = TriangularMap::validate_triangular(h, pre, suf);
  CHECK_FALSE(fp.ur());
  CHECK(fp.induced().apply(Word::one_letter(2)).str() == "ab");
}

TEST_CASE("triangular validation rejects malformed circuit data") {
  Host h3 = rose(3);
  // Suffix of c contains c itself: not in the lower strata.
  {
    std::vector<EdgePath> pre(3), suf(3);
    suf[2] = ep("cb", 3);
    CHECK_THROWS_WITH(TriangularMap::validate_triangular(h3, pre, suf),
                      Catch::Matchers::ContainsSubstring("PrefixSuffixNotLower"));
  }
  // Suffix of b lives in a strictly higher stratum.
  {
    std::vector<EdgePath> pre(3), suf(3);
    suf[1] = ep("c", 3);
    CHECK_THROWS_WITH(TriangularMap::validate_triangular(h3, pre, suf),
                      Catch::Matchers::ContainsSubstring("PrefixSuffixNotLower"));
  }
  Host bb = barbell();
  // Suffix of the bridge must sit at the far vertex: a circuit at the near
  // loop vertex moves the attaching point.
  {
    std::vector<EdgePath> pre(3), suf(3);
    suf[1] = {1};  // loop at vertex 0, but term(bridge) = 1
    CHECK_THROWS_WITH(TriangularMap::validate_triangular(bb, pre, suf),
                      Catch::Matchers::ContainsSubstring("VertexMoved"));
  }
  // Non-closed suffix path.
  {
    std::vector<EdgePath> pre(3), suf(3);
    suf[1] = {1, 2};  // loop then bridge: runs 0 -> 0 -> 1
    CHECK_THROWS_WITH(TriangularMap::validate_triangular(bb, pre, suf),
                      Catch::Matchers::ContainsSubstring("NotClosed"));
  }
  // Valid on the barbell: bridge picks up the far loop.
  {
    std::vector<EdgePath> pre(3), suf(3);
    suf[1] = {3};
    TriangularMap f = TriangularMap::validate_triangular(bb, pre, suf);
    CHECK(f.ur());
    CHECK(f.induced().apply(Word::one_letter(1)).str() == "a");
  }
}

TEST_CASE("composition applies the left map after the right") {
  Host h = rose(2);
  TriangularMap f = ur_rose_map(h, {"", "a"});

  TriangularMap ff = compose_Q(f, f);
  CHECK(ff.suffix(1) == ep("aa", 2));
  CHECK(ff.prefix(1).empty());
  CHECK(ff.induced() == compose(f.induced(), f.induced()));

  TriangularMap finv = invert_Q(f);
  CHECK(compose_Q(f, finv).is_identity_map());
  CHECK(compose_Q(finv, f).is_identity_map());

  // Prefix on the right factor: f(g(b)) = f(a b) = a . ba
  std::vector<EdgePath> pre(2), suf(2);
  pre[1] = {1};
  TriangularMap g = TriangularMap::validate_triangular(h, pre, suf);
  TriangularMap fg = compose_Q(f, g);
  CHECK(fg.prefix(1) == EdgePath{1});
  CHECK(fg.suffix(1) == EdgePath{1});
  CHECK(fg.induced().apply(Word::one_letter(2)).str() == "aba");
  CHECK(fg.induced() == compose(f.induced(), g.induced()));
}

TEST_CASE("inversion follows the inductive formula") {
  Host h = rose(2);
  TriangularMap f = ur_rose_map(h, {"", "a"});
  TriangularMap g = invert_Q(f);
  CHECK(g.suffix(1) == EdgePath{-1});
  CHECK(g.prefix(1).empty());

  CHECK(invert_Q(TriangularMap::identity(h)).is_identity_map());

  Host h3 = rose(3);
  TriangularMap f3 = ur_rose_map(h3, {"", "a", "b"});
  TriangularMap g3 = invert_Q(f3);
  CHECK(g3.suffix(1) == EdgePath{-1});
  // g(c) = c [g(b)]^-1 = c (bA)^-1 = c a B
  CHECK(g3.suffix(2) == ep("aB", 3));
  CHECK(compose_Q(f3, g3).is_identity_map());
  CHECK(compose_Q(g3, f3).is_identity_map());
  CHECK(g3.induced() == f3.induced().inverse());
}

TEST_CASE("iteration agrees with raw substitution") {
  Host h = rose(2);
  TriangularMap f = ur_rose_map(h, {"", "a"});
  CHECK(iterate(f, {2}, 3) == ep("baaa", 2));
  CHECK(iterate(f, ep("bAB", 2), 0) == ep("bAB", 2));
  // The commutator-shaped loop is fixed: ba.A.AB tightens back.
  CHECK(iterate(f, ep("bAB", 2), 1) == ep("bAB", 2));

  std::mt19937 rng(2026);
  for (Host host : {rose(2), rose(3), barbell(), theta()}) {
    for (int trial = 0; trial < 8; ++trial) {
      TriangularMap m = random_map(host, rng);
      std::vector<EdgePath> pre, suf;
      for (int id = 0; id < host->g.num_edges(); ++id) {
        pre.push_back(m.prefix(id));
        suf.push_back(m.suffix(id));
      }
      // Random tight path: a short random walk.
      EdgePath p;
      int v = static_cast<int>(rng() % host->g.nv);
      for (int s = 0; s < 6; ++s) {
        std::vector<int> outs;
        for (int id = 0; id < host->g.num_edges(); ++id)
          for (int oe : {id + 1, -id - 1})
            if (host->g.init_of(oe) == v && (p.empty() || oe != -p.back()))
              outs.push_back(oe);
        if (outs.empty()) break;
        p.push_back(outs[rng() % outs.size()]);
        v = host->g.term_of(p.back());
      }
      int k = static_cast<int>(rng() % 5);
      CHECK(iterate(m, p, k) == naive_image(host->g, pre, suf, p, k));
      int j = static_cast<int>(rng() % 4);
      CHECK(iterate(m, p, j + k) == iterate(m, iterate(m, p, j), k));
    }
  }
}

TEST_CASE("eigenray prefixes grow blockwise") {
  Host h = rose(2);
  TriangularMap f = ur_rose_map(h, {"", "a"});
  EigenrayPrefix r = eigenray_prefix(f, 1, 4);
  CHECK(r.path == ep("baaa", 2));
  CHECK(r.blocks == std::vector<int>{1, 2, 3});
  CHECK_FALSE(r.degenerate);

  EigenrayPrefix ra = eigenray_prefix(f, 0, 4);
  CHECK(ra.degenerate);
  CHECK(ra.path == EdgePath{1});

  Host h3 = rose(3);
  TriangularMap f3 = ur_rose_map(h3, {"", "a", "b"});
  EigenrayPrefix rc = eigenray_prefix(f3, 2, 12);
  CHECK(rc.path == ep("c b ba baa baaa baaaa", 3));
  CHECK(rc.path == iterate(f3, {3}, 5));
  CHECK(rc.blocks.size() == 5);

  // A nontrivial prefix disqualifies the edge.
  std::vector<EdgePath> pre(2), suf(2);
  pre[1] = {1};
  TriangularMap fp = TriangularMap::validate_triangular(h, pre, suf);
  CHECK_THROWS_WITH(eigenray_prefix(fp, 1, 4),
                    Catch::Matchers::ContainsSubstring("NotUR"));

  // Suffixes may cancel internally; the blockwise ray still matches iteration.
  TriangularMap fz = ur_rose_map(h3, {"", "a", "bA"});
  EigenrayPrefix rz = eigenray_prefix(fz, 2, 6);
  CHECK(rz.path == ep("c bA b ba", 3));
  CHECK(rz.path == iterate(f3, ep("c bA b ba", 3), 0));  // tight as written
  CHECK(rz.path == iterate(fz, {3}, 3));
}

TEST_CASE("iterates of paths through a growing edge contain the eigenray") {
  Host h3 = rose(3);
  TriangularMap f3 = ur_rose_map(h3, {"", "a", "b"});
  EdgePath ray = eigenray_prefix(f3, 2, 12).path;
  EdgePath yar = path_inverse(ray);
  for (const std::string s : {"c", "bc", "aCa", "Cb"}) {
    EdgePath p = ep(s, 3);
    bool fwd = contains_subpath(iterate(f3, p, 40), ray);
    bool bwd = contains_subpath(iterate(f3, p, 40), yar);
    CHECK((fwd || bwd));
  }
}

TEST_CASE("nielsen paths are the fixed tight paths") {
  Host h3 = rose(3);
  TriangularMap f = ur_rose_map(h3, {"", "a", "a"});
  CHECK(is_nielsen(f, ep("bC", 3)));
  CHECK_FALSE(is_nielsen(f, ep("b", 3)));
  CHECK(is_nielsen(f, ep("a", 3)));
  Host h = rose(2);
  TriangularMap f2 = ur_rose_map(h, {"", "a"});
  CHECK(is_nielsen(f2, ep("bAB", 2)));
  CHECK_FALSE(is_nielsen(f2, ep("bA", 2)));
}

TEST_CASE("exceptional paths decompose as edge, twist power, inverse edge") {
  Host h3 = rose(3);
  TriangularMap f = ur_rose_map(h3, {"", "a", "a"});
  for (int m : {0, 1, 3}) {
    EdgePath p = {2};
    for (int t = 0; t < m; ++t) p.push_back(1);
    p.push_back(-3);
    auto e = classify_exceptional(f, p);
    REQUIRE(e.has_value());
    CHECK(e->i == 1);
    CHECK(e->j == 2);
    CHECK(e->m == m);
    CHECK(e->tau == EdgePath{1});
  }
  auto neg = classify_exceptional(f, ep("bAAC", 3));
  REQUIRE(neg.has_value());
  CHECK(neg->m == -2);
  auto same = classify_exceptional(f, ep("baaaB", 3));
  REQUIRE(same.has_value());
  CHECK(same->i == 1);
  CHECK(same->j == 1);
  CHECK(same->m == 3);

  // No suffix relation on c: the twist exponent is undefined.
  TriangularMap g = ur_rose_map(h3, {"", "a", ""});
  CHECK_FALSE(classify_exceptional(g, ep("baC", 3)).has_value());
  CHECK_FALSE(classify_exceptional(f, ep("b", 3)).has_value());
  CHECK_FALSE(classify_exceptional(f, ep("ba", 3)).has_value());
}

TEST_CASE("paths split after finitely many iterations") {
  Host h = rose(2);
  TriangularMap f = ur_rose_map(h, {"", "a"});

  Splitting s = split(f, ep("bAAAAAAAAAAbaB", 2), 20);
  CHECK(s.m == 10);
  CHECK(s.whole == ep("bbaB", 2));
  REQUIRE(s.pieces.size() == 2);
  CHECK(s.pieces[0] == EdgePath{2});
  CHECK(s.pieces[1] == ep("baB", 2));

  Splitting se = split(f, {2}, 5);
  CHECK(se.m == 0);
  CHECK(se.pieces == std::vector<EdgePath>{{2}});

  Splitting sb = split(f, ep("ba", 2), 5);
  CHECK(sb.m == 0);
  CHECK(sb.pieces == std::vector<EdgePath>{{2}, {1}});

  Splitting sn = split(f, ep("bAB", 2), 5);
  CHECK(sn.m == 0);
  CHECK(sn.pieces == std::vector<EdgePath>{ep("bAB", 2)});

  // Independent certificate check on a returned splitting.
  for (int k = 1; k <= 5; ++k) {
    EdgePath cat;
    for (const EdgePath& piece : s.pieces) {
      EdgePath it = iterate(f, piece, k);
      if (!cat.empty()) CHECK(cat.back() != -it.front());
      cat.insert(cat.end(), it.begin(), it.end());
    }
    CHECK(cat == iterate(f, s.whole, k));
  }

  // A suffix whose image keeps eating the neighbouring edge never splits.
  Host h3 = rose(3);
  TriangularMap fz = ur_rose_map(h3, {"", "a", "bA"});
  CHECK_THROWS_WITH(split(fz, ep("cbA", 3), 50),
                    Catch::Matchers::ContainsSubstring("NoSplitWithinBound"));
}

TEST_CASE("bounded cancellation: formula bound dominates brute force") {
  Host h = rose(2);
  TriangularMap f = ur_rose_map(h, {"", "a"});
  CHECK(bcc_bound(f) == Rat(2));
  CHECK(bcc_bruteforce(f, 6) == Rat(1));

  TriangularMap id = TriangularMap::identity(h);
  CHECK(bcc_bound(id) == Rat(0));
  CHECK(bcc_bruteforce(id, 6) == Rat(0));

  Host h3 = rose(3);
  TriangularMap f3 = ur_rose_map(h3, {"", "a", "b"});
  CHECK(bcc_bound(f3) == Rat(3));
  CHECK(bcc_bruteforce(f3, 5) <= bcc_bound(f3));

  std::mt19937 rng(515);
  for (Host host : {rose(2), barbell(), theta()}) {
    for (int trial = 0; trial < 5; ++trial) {
      TriangularMap m = random_map(host, rng);
      CHECK(bcc_bruteforce(m, 5) <= bcc_bound(m));
    }
  }
}

TEST_CASE("triangular maps form a group under composition") {
  std::mt19937 rng(99);
  for (Host host : {rose(2), rose(3), barbell(), theta()}) {
    TriangularMap id = TriangularMap::identity(host);
    for (int trial = 0; trial < 6; ++trial) {
      TriangularMap a = random_map(host, rng);
      TriangularMap b = random_map(host, rng);
      TriangularMap c = random_map(host, rng);
      CHECK(compose_Q(compose_Q(a, b), c).same_map(compose_Q(a, compose_Q(b, c))));
      CHECK(compose_Q(a, id).same_map(a));
      CHECK(compose_Q(id, a).same_map(a));
      TriangularMap ai = invert_Q(a);
      CHECK(compose_Q(a, ai).is_identity_map());
      CHECK(compose_Q(ai, a).is_identity_map());
      // The induced map on the fundamental group is a homomorphism of the
      // composition in the same order.
      CHECK(compose_Q(a, b).induced() == compose(a.induced(), b.induced()));
    }
  }
}
