// upg — exact tools for polynomially growing free-group automorphisms.
//
// Subcommands
//   fold      Stallings subgroup graph of a finitely generated subgroup
//   auto      automorphism utilities (currently: `auto check`)
//   growth    eventual polynomial fit of word length under iteration
//   limit     the same fit measured on a collapsed tree for a factor system
//   support   smallest invariant free factor system carrying given classes
//   kolchin   bouncing-sequence search for a common fixed tree and a
//             simultaneous filtered-graph realization
//
// Output is deterministic: a single JSON document on stdout (keys sorted),
// or a plain-text rendering of the same data with `--format text`.
// Exit codes: 0 success, 1 usage error (diagnostic on stderr),
// 2 analytic failure (structured JSON error document on stdout).

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "upg/aut.hpp"
#include "upg/errors.hpp"
#include "upg/free_factor.hpp"
#include "upg/growth.hpp"
#include "upg/kolchin.hpp"
#include "upg/marked_graph.hpp"
#include "upg/numeric.hpp"
#include "upg/subgroup.hpp"
#include "upg/tree.hpp"
#include "upg/triangular.hpp"
#include "upg/unipotent.hpp"
#include "upg/word.hpp"

namespace {

using nlohmann::json;  // std::map-backed: object keys serialize sorted.
using namespace upg;

// Thrown for malformed command lines / inputs; rendered on stderr, exit 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<Word> parse_words(const std::string& csv, int rank) {
  std::vector<Word> out;
  for (const std::string& s : split(csv, ',')) {
    try {
      out.push_back(Word::parse(s, rank));
    } catch (const Error& e) {
      throw UsageError("cannot read word '" + s + "': " + e.what());
    }
  }
  return out;
}

json words_json(const std::vector<Word>& ws) {
  json a = json::array();
  for (const Word& w : ws) a.push_back(w.str());
  return a;
}

json path_json(const EdgePath& p) {
  json a = json::array();
  for (int e : p) a.push_back(e);
  return a;
}

Aut build_aut(int rank, const std::vector<Word>& images,
              const std::vector<Word>& inverses) {
  if (!inverses.empty()) return Aut::validate(rank, images, inverses);
  std::optional<Aut> f = aut_from_basis_tuple(images);
  require(f.has_value(), "NotABasis",
          "the image tuple does not define an automorphism");
  require(f->rank() == rank, "NotABasis",
          "the image tuple lives in a different rank");
  return *f;
}

json aut_json(const Aut& f) {
  std::vector<Word> inv;
  Aut g = f.inverse();
  for (int i = 1; i <= f.rank(); ++i) inv.push_back(g.apply(Word::one_letter(i)));
  return json{{"images", words_json(f.images())},
              {"inverse_images", words_json(inv)},
              {"rank", f.rank()}};
}

json matrix_json(const IntMatrix& m) {
  json rows = json::array();
  for (int i = 0; i < m.n; ++i) {
    json row = json::array();
    for (int j = 0; j < m.n; ++j) row.push_back(m.at(i, j).str());
    rows.push_back(row);
  }
  return rows;
}

json graph_json(const Graph& g) {
  json edges = json::array();
  for (int id = 0; id < g.num_edges(); ++id)
    edges.push_back(json{{"id", id},
                         {"init", g.init_of(id + 1)},
                         {"length", rat_str(g.length(id))},
                         {"term", g.term_of(id + 1)}});
  return json{{"edges", edges}, {"vertices", g.nv}};
}

json marking_json(const Marking& m) {
  json tree = json::array();
  json mu = json::array();
  for (size_t id = 0; id < m.in_tree.size(); ++id) {
    if (m.in_tree[id]) tree.push_back(static_cast<int>(id));
    mu.push_back(m.mu[id].str());
  }
  return json{{"base", m.base}, {"mu", mu}, {"tree_edges", tree}};
}

json filtered_graph_json(const FilteredGraph& fg) {
  return json{{"filtration", fg.f.order},
              {"graph", graph_json(fg.g)},
              {"marking", marking_json(fg.m)}};
}

json factor_system_json(const FreeFactorSystem& F) {
  json factors = json::array();
  for (const SubgroupGraph& H : F.factors) factors.push_back(words_json(H.basis_words()));
  return json{{"complexity", complexity(F)}, {"factors", factors}, {"rank", F.rank}};
}

json quotient_json(const TreeQuotient& Q) {
  json verts = json::array();
  for (const QuotientVertex& v : Q.verts)
    verts.push_back(json{{"anchor", v.anchor.str()},
                         {"group", words_json(v.group.basis_words())}});
  json edges = json::array();
  for (const QuotientEdge& e : Q.edges)
    edges.push_back(json{{"init", e.qinit},
                         {"length", rat_str(e.len)},
                         {"term", e.qterm},
                         {"word", e.tword.str()}});
  return json{{"edges", edges}, {"vertices", verts}};
}

json tree_json(const SimplicialTree& T) {
  json collapsed = json::array();
  for (int id = 0; id < T.g.num_edges(); ++id)
    if (T.collapsed[id]) collapsed.push_back(id);
  return json{{"collapsed", collapsed},
              {"graph", graph_json(T.g)},
              {"marking", marking_json(T.m)},
              {"quotient", quotient_json(quotient_of(T))}};
}

json lift_json(const TriangularMap& f) {
  int ne = f.host().g.num_edges();
  json pre = json::array(), suf = json::array();
  for (int id = 0; id < ne; ++id) {
    pre.push_back(path_json(f.prefix(id)));
    suf.push_back(path_json(f.suffix(id)));
  }
  return json{{"induced_images", words_json(f.induced().images())},
              {"prefixes", pre},
              {"suffixes", suf},
              {"upper_reduced", f.ur()}};
}

json fit_json(const CyclicWord& q, const GrowthFit& fit) {
  json coeffs = json::array();
  for (const Rat& c : fit.coeffs) coeffs.push_back(rat_str(c));
  return json{{"coefficients", coeffs},
              {"confirmations", fit.confirmations},
              {"degree", fit.degree},
              {"k0", fit.onset},
              {"query", q.rep().str()}};
}

void emit_json(const json& doc) { std::cout << doc.dump(2) << "\n"; }

SimplicialTree rose_tree(int rank) {
  FilteredGraph fg = standard_rose(rank);
  SimplicialTree T{fg.g, fg.m, std::vector<bool>(fg.g.num_edges(), false)};
  T.validate();
  return T;
}

// ---------------------------------------------------------------------------
// fold

int run_fold(int rank, const std::string& words_csv, const std::string& contains_csv,
             const std::string& format) {
  std::vector<Word> gens = parse_words(words_csv, rank);
  std::vector<Word> queries;
  if (!contains_csv.empty()) queries = parse_words(contains_csv, rank);

  SubgroupGraph H = SubgroupGraph::fold(rank, gens);
  const auto& core = H.shaved();
  json edges = json::array();
  for (int v : core.vertices())
    for (int g = 1; g <= rank; ++g)
      if (core.fwd[v][g - 1] >= 0)
        edges.push_back(json{{"from", v},
                             {"label", Word::one_letter(g).str()},
                             {"to", core.fwd[v][g - 1]}});
  json contains = json::object();
  for (const Word& q : queries) contains[q.str()] = H.contains(q);

  json doc{{"ambient_rank", H.ambient_rank()},
           {"basis", words_json(H.basis_words())},
           {"contains", contains},
           {"graph", json{{"basepoint", core.attach},
                          {"edges", edges},
                          {"spur", core.spur.str()}}},
           {"rank", H.rank()},
           {"schema", "1"}};
  if (format == "json") {
    emit_json(doc);
  } else {
    std::cout << "rank: " << H.rank() << "\n";
    std::cout << "basis:";
    for (const json& b : doc["basis"]) std::cout << " " << b.get<std::string>();
    std::cout << "\n";
    for (auto it = contains.begin(); it != contains.end(); ++it)
      std::cout << "contains " << it.key() << ": "
                << (it.value().get<bool>() ? "true" : "false") << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// auto check

int run_auto_check(int rank, const std::string& images_csv,
                   const std::string& inverse_csv, const std::string& format) {
  std::vector<Word> images = parse_words(images_csv, rank);
  std::vector<Word> inverses;
  if (!inverse_csv.empty()) inverses = parse_words(inverse_csv, rank);

  Aut f = build_aut(rank, images, inverses);
  IntMatrix M = abelianization(f);
  bool uni = is_unipotent(M);
  bool mod3 = trivial_mod3(M);
  bool tri = false;
  if (uni) tri = triangular_representative(f).has_value();

  json doc{{"abelianization", matrix_json(M)},
           {"automorphism", aut_json(f)},
           {"schema", "1"},
           {"triangular", tri},
           {"trivial_mod3", mod3},
           {"unipotent", uni}};
  if (format == "json") {
    emit_json(doc);
  } else {
    std::cout << "rank: " << rank << "\n"
              << "unipotent: " << (uni ? "true" : "false") << "\n"
              << "trivial_mod3: " << (mod3 ? "true" : "false") << "\n"
              << "triangular: " << (tri ? "true" : "false") << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// growth / limit

void print_fits_text(const json& reports) {
  for (const json& r : reports)
    std::cout << r["query"].get<std::string>() << ": degree " << r["degree"]
              << ", k0 " << r["k0"] << ", coefficients "
              << r["coefficients"].dump() << "\n";
}

int run_fit(const SimplicialTree& T, const Aut& f, const std::vector<Word>& queries,
            int window, int d_max, int margin, json extra, const std::string& format) {
  if (d_max < 0) d_max = T.g.num_edges();
  json reports = json::array();
  for (const Word& q : queries) {
    CyclicWord c = CyclicWord::of(q);
    require(!c.trivial(), "NoPolynomialWithinWindow",
            "query '" + q.str() + "' has no nontrivial cyclic part");
    reports.push_back(fit_json(c, iterate_length_fit(T, f, c, window, d_max, margin)));
  }
  json doc{{"d_max", d_max},  {"margin", margin},   {"reports", reports},
           {"schema", "1"},   {"window", window}};
  for (auto it = extra.begin(); it != extra.end(); ++it) doc[it.key()] = it.value();
  if (format == "json")
    emit_json(doc);
  else
    print_fits_text(reports);
  return 0;
}

int run_growth(int rank, const std::string& images_csv, const std::string& inverse_csv,
               const std::string& query_csv, int window, int d_max, int margin,
               const std::string& format) {
  std::vector<Word> images = parse_words(images_csv, rank);
  std::vector<Word> inverses;
  if (!inverse_csv.empty()) inverses = parse_words(inverse_csv, rank);
  std::vector<Word> queries = parse_words(query_csv, rank);
  Aut f = build_aut(rank, images, inverses);
  return run_fit(rose_tree(rank), f, queries, window, d_max, margin, json::object(),
                 format);
}

int run_limit(int rank, const std::string& images_csv, const std::string& inverse_csv,
              const std::string& query_csv, const std::string& factors_arg, int window,
              int d_max, int margin, const std::string& format) {
  std::vector<Word> images = parse_words(images_csv, rank);
  std::vector<Word> inverses;
  if (!inverse_csv.empty()) inverses = parse_words(inverse_csv, rank);
  std::vector<Word> queries = parse_words(query_csv, rank);
  Aut f = build_aut(rank, images, inverses);

  FreeFactorSystem F{rank, {}};
  if (!factors_arg.empty())
    for (const std::string& one : split(factors_arg, ';'))
      F.factors.push_back(SubgroupGraph::fold(rank, parse_words(one, rank)));
  SimplicialTree T = canonical_tree(rank, F);
  return run_fit(T, f, queries, window, d_max, margin,
                 json{{"factors", factor_system_json(F)["factors"]}}, format);
}

// ---------------------------------------------------------------------------
// support

int run_support(int rank, const std::string& words_csv, int depth, int state_cap,
                const std::string& format) {
  std::vector<CyclicWord> classes;
  for (const Word& w : parse_words(words_csv, rank)) {
    CyclicWord c = CyclicWord::of(w);
    if (!c.trivial()) classes.push_back(c);
  }
  FreeFactorSystem F = free_factor_support(rank, classes, depth, state_cap);
  json doc = factor_system_json(F);
  doc["schema"] = "1";
  if (format == "json") {
    emit_json(doc);
  } else {
    std::cout << "complexity: " << doc["complexity"].dump() << "\n";
    for (const json& fac : doc["factors"]) {
      std::cout << "factor:";
      for (const json& b : fac) std::cout << " " << b.get<std::string>();
      std::cout << "\n";
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// kolchin

json history_json(const BounceHistory& h) {
  json tracked = json::array();
  for (const CyclicWord& c : h.tracked) tracked.push_back(c.rep().str());
  json rows = json::array();
  for (const auto& row : h.cycle_lengths) {
    json r = json::array();
    for (const Rat& x : row) r.push_back(rat_str(x));
    rows.push_back(r);
  }
  json enlargements = json::array();
  for (size_t i = 0; i < h.systems.size(); ++i)
    enlargements.push_back(json{{"reason", h.enlargement_reasons[i]},
                                {"system", factor_system_json(h.systems[i])}});
  return json{{"cycle_lengths", rows},
              {"cycles", h.cycles},
              {"enlargements", enlargements},
              {"log", h.log},
              {"tracked", tracked}};
}

json solvability_json(const SolvabilityReport& rep) {
  json stages = json::array();
  for (const SolvabilityStage& s : rep.stages)
    stages.push_back(json{{"edge", s.edge},
                          {"prefix_rank", s.prefix_rank},
                          {"prefix_words", words_json(s.prefix_words)},
                          {"suffix_rank", s.suffix_rank},
                          {"suffix_words", words_json(s.suffix_words)}});
  return json{{"contains_f2_witness", rep.contains_f2_witness},
              {"derived_series_bound", rep.derived_series_bound},
              {"stages", stages}};
}

json certificate_json(const FixednessResult& c) {
  json witnesses = json::array();
  for (const auto& [x, y] : c.edge_witnesses)
    witnesses.push_back(json{{"x", x.str()}, {"y", y.str()}});
  return json{{"edge_map", c.edge_map},
              {"edge_witnesses", witnesses},
              {"fixed", c.fixed},
              {"vertex_conjugators", words_json(c.vertex_conjugators)},
              {"vertex_map", c.vertex_map}};
}

int run_kolchin(const std::string& input_path, const std::string& format) {
  json in;
  try {
    if (input_path.empty() || input_path == "-") {
      in = json::parse(std::cin);
    } else {
      std::ifstream is(input_path);
      if (!is) throw UsageError("cannot open input file '" + input_path + "'");
      in = json::parse(is);
    }
  } catch (const json::exception& e) {
    throw UsageError(std::string("malformed JSON input: ") + e.what());
  }

  int rank = 0;
  std::vector<std::vector<Word>> image_tuples, inverse_tuples;
  RunConfig cfg;
  try {
    rank = in.at("rank").get<int>();
    for (const json& g : in.at("generators")) {
      std::vector<std::string> ims = g.at("images").get<std::vector<std::string>>();
      image_tuples.push_back({});
      for (const std::string& s : ims) image_tuples.back().push_back(Word::parse(s, rank));
      inverse_tuples.push_back({});
      if (g.contains("inverse_images"))
        for (const std::string& s :
             g.at("inverse_images").get<std::vector<std::string>>())
          inverse_tuples.back().push_back(Word::parse(s, rank));
    }
    if (in.contains("config")) {
      const json& c = in["config"];
      if (c.contains("window")) cfg.window = c["window"].get<int>();
      if (c.contains("margin")) cfg.margin = c["margin"].get<int>();
      if (c.contains("d_max")) cfg.d_max = c["d_max"].get<int>();
      if (c.contains("whitehead_depth")) cfg.whitehead_depth = c["whitehead_depth"].get<int>();
      if (c.contains("marking_length_bound"))
        cfg.marking_length_bound = c["marking_length_bound"].get<int>();
      if (c.contains("max_cycles")) cfg.max_cycles = c["max_cycles"].get<int>();
      if (c.contains("max_enlargements"))
        cfg.max_enlargements = c["max_enlargements"].get<int>();
    }
  } catch (const json::exception& e) {
    throw UsageError(std::string("input does not match the expected shape: ") + e.what());
  } catch (const Error& e) {
    throw UsageError(std::string("cannot read generator words: ") + e.what());
  }

  std::vector<Aut> gens;
  for (size_t i = 0; i < image_tuples.size(); ++i)
    gens.push_back(build_aut(rank, image_tuples[i], inverse_tuples[i]));

  KolchinResult res = kolchin_run(rank, gens, cfg);

  json lifts = json::array();
  for (const TriangularMap& f : res.lifts) lifts.push_back(lift_json(f));
  json lift_auts = json::array();
  for (const Aut& f : res.lift_auts) lift_auts.push_back(words_json(f.images()));
  json certs = json::array();
  for (const FixednessResult& c : res.certificates) certs.push_back(certificate_json(c));

  json doc{{"certificates", certs},
           {"graph", filtered_graph_json(*res.graph)},
           {"history", history_json(res.history)},
           {"lift_automorphisms", lift_auts},
           {"lifts", lifts},
           {"rank", res.rank},
           {"schema", "1"},
           {"solvability", solvability_json(res.solvability)},
           {"system", factor_system_json(res.system)},
           {"tree", tree_json(res.tree)}};
  if (format == "json") {
    emit_json(doc);
    return 0;
  }

  for (const std::string& line : res.history.log) std::cout << line << "\n";
  std::cout << "cycles: " << res.history.cycles << "\n";
  std::cout << "system:";
  for (const json& fac : doc["system"]["factors"]) {
    std::cout << " <";
    for (size_t i = 0; i < fac.size(); ++i)
      std::cout << (i ? "," : "") << fac[i].get<std::string>();
    std::cout << ">";
  }
  std::cout << "\n";
  TreeQuotient Q = quotient_of(res.tree);
  std::cout << "tree: " << Q.verts.size() << " vertex groups, " << Q.edges.size()
            << " edge orbits\n";
  for (const QuotientEdge& e : Q.edges)
    std::cout << "  edge " << e.qinit << " -> " << e.qterm << " word "
              << (e.tword.empty() ? std::string("1") : e.tword.str()) << " length "
              << rat_str(e.len) << "\n";
  const FilteredGraph& fg = *res.graph;
  std::cout << "graph: " << fg.g.num_edges() << " edges, filtration";
  for (int id : fg.f.order) std::cout << " " << id;
  std::cout << "\n";
  std::cout << "solvability bound: " << res.solvability.derived_series_bound << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"exact tools for polynomially growing free-group automorphisms"};
  app.require_subcommand(1);
  std::string format = "json";
  app.add_option("--format", format, "output format")
      ->check(CLI::IsMember({"json", "text"}));

  int rank = 0, window = 40, d_max = -1, margin = 5, depth = 6, state_cap = 20000;
  std::string words, contains, images, inverse, query, factors, input;

  CLI::App* fold = app.add_subcommand("fold", "Stallings graph of a subgroup");
  fold->fallthrough();
  fold->add_option("--rank", rank, "ambient free rank")->required();
  fold->add_option("--words", words, "comma-separated generators")->required();
  fold->add_option("--contains", contains, "comma-separated membership queries");

  CLI::App* aut_cmd = app.add_subcommand("auto", "automorphism utilities");
  aut_cmd->fallthrough();
  aut_cmd->require_subcommand(1);
  CLI::App* check = aut_cmd->add_subcommand("check", "unipotence report");
  check->fallthrough();
  check->add_option("--rank", rank, "free rank")->required();
  check->add_option("--images", images, "comma-separated generator images")->required();
  check->add_option("--inverse", inverse, "comma-separated inverse images");

  CLI::App* growth = app.add_subcommand("growth", "word-length growth fit");
  growth->fallthrough();
  growth->add_option("--rank", rank, "free rank")->required();
  growth->add_option("--images", images, "comma-separated generator images")->required();
  growth->add_option("--inverse", inverse, "comma-separated inverse images");
  growth->add_option("--query", query, "comma-separated classes to fit")->required();
  growth->add_option("--window", window, "iteration window");
  growth->add_option("--d-max", d_max, "degree cap (negative: automatic)");
  growth->add_option("--margin", margin, "confirmation margin");

  CLI::App* limit = app.add_subcommand("limit", "growth fit on a collapsed tree");
  limit->fallthrough();
  limit->add_option("--rank", rank, "free rank")->required();
  limit->add_option("--images", images, "comma-separated generator images")->required();
  limit->add_option("--inverse", inverse, "comma-separated inverse images");
  limit->add_option("--query", query, "comma-separated classes to fit")->required();
  limit->add_option("--factors", factors,
                    "collapsed factors: words comma-separated, factors by ';'");
  limit->add_option("--window", window, "iteration window");
  limit->add_option("--d-max", d_max, "degree cap (negative: automatic)");
  limit->add_option("--margin", margin, "confirmation margin");

  CLI::App* support = app.add_subcommand("support", "invariant factor support");
  support->fallthrough();
  support->add_option("--rank", rank, "free rank")->required();
  support->add_option("--words", words, "comma-separated classes")->required();
  support->add_option("--depth", depth, "search depth");
  support->add_option("--state-cap", state_cap, "search state cap");

  CLI::App* kolchin = app.add_subcommand("kolchin", "common fixed tree search");
  kolchin->fallthrough();
  kolchin->add_option("input", input, "input JSON file ('-' or empty: stdin)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the diagnostic
    return 1;
  }

  try {
    if (fold->parsed()) return run_fold(rank, words, contains, format);
    if (check->parsed()) return run_auto_check(rank, images, inverse, format);
    if (growth->parsed())
      return run_growth(rank, images, inverse, query, window, d_max, margin, format);
    if (limit->parsed())
      return run_limit(rank, images, inverse, query, factors, window, d_max, margin,
                       format);
    if (support->parsed()) return run_support(rank, words, depth, state_cap, format);
    if (kolchin->parsed()) return run_kolchin(input, format);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    emit_json(json{{"error", json{{"code", e.code()}, {"detail", e.what()}}},
                   {"schema", "1"}});
    return 2;
  } catch (const std::exception& e) {
    emit_json(json{{"error", json{{"code", "Internal"}, {"detail", e.what()}}},
                   {"schema", "1"}});
    return 2;
  }
  std::cerr << "error: no subcommand given\n";
  return 1;
}
