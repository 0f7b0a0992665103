#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "oracles.hpp"
#include "spargcp/common.hpp"
#include "spargcp/graph.hpp"
#include "spargcp/mfg.hpp"

using namespace spargcp;

namespace {

std::vector<std::pair<std::uint32_t, std::uint32_t>> directed_edges(
    const AttributedGraph& g) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  for (std::uint32_t u = 0; u < g.num_nodes; ++u)
    for (std::uint32_t v : g.out_neighbors(u)) out.emplace_back(u, v);
  return out;
}

std::filesystem::path temp_dir(const char* name) {
  auto p = std::filesystem::temp_directory_path() / name;
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("undirected ingestion symmetrizes the edge list") {
  AttributedGraph g = make_graph(3, {{0, 1}, {1, 2}}, Matrix(3, 2), {}, 0,
                                 true);
  CHECK(g.num_edges() == 4);
  CHECK(g.out_degree(1) == 2);
  CHECK(g.in_degree(1) == 2);
}

TEST_CASE("edgeless graphs are valid") {
  AttributedGraph g = make_graph(5, {}, Matrix(5, 2), {}, 0, false);
  CHECK(g.num_nodes == 5);
  CHECK(g.num_edges() == 0);
}

TEST_CASE("duplicate and self-loop edges are discarded") {
  AttributedGraph g =
      make_graph(3, {{0, 1}, {0, 1}, {2, 2}}, Matrix(3, 1), {}, 0, false);
  CHECK(g.num_edges() == 1);
}

TEST_CASE("both CSR directions index the same edge multiset") {
  Rng rng(31);
  for (int it = 0; it < 30; ++it) {
    AttributedGraph g = oracles::random_graph(rng, 2 + rng.bounded(30), 0.2,
                                              3, 3, rng.bounded(2) == 0);
    auto from_out = directed_edges(g);
    std::vector<std::pair<std::uint32_t, std::uint32_t>> from_in;
    for (std::uint32_t v = 0; v < g.num_nodes; ++v)
      for (std::uint32_t u : g.in_neighbors(v)) from_in.emplace_back(u, v);
    std::sort(from_out.begin(), from_out.end());
    std::sort(from_in.begin(), from_in.end());
    CHECK(from_out == from_in);
  }
}

TEST_CASE("dataset save and load round-trips exactly") {
  Rng rng(32);
  AttributedGraph g = oracles::random_graph(rng, 17, 0.15, 4, 3, true);
  // Quantize to float up front: the binary feature format stores 32-bit.
  for (std::size_t i = 0; i < g.features.size(); ++i)
    g.features[i] = static_cast<double>(static_cast<float>(g.features[i]));
  g.labels[5] = kUnlabeled;

  for (bool binary : {true, false}) {
    auto dir = temp_dir(binary ? "spargcp_rt_bin" : "spargcp_rt_csv");
    save_dataset(g, dir.string(), binary);
    AttributedGraph h = load_graph(
        (dir / "edges.tsv").string(),
        (dir / (binary ? "features.fmat" : "features.csv")).string(),
        (dir / "labels.tsv").string(), false, g.num_classes);
    CHECK(h.num_nodes == g.num_nodes);
    CHECK(directed_edges(h) == directed_edges(g));
    CHECK(h.labels == g.labels);
    CHECK(max_abs_diff(h.features, g.features) == 0.0);
    CHECK(h.num_classes == g.num_classes);
  }
}

TEST_CASE("edge file parser reports malformed lines and bad ids") {
  auto dir = temp_dir("spargcp_badfiles");
  {
    std::ofstream f(dir / "feat.csv");
    f << "0.5,1.0\n0.25,2.0\n";
  }
  {
    std::ofstream f(dir / "lab.tsv");
    f << "0\t1\n";
  }
  {
    std::ofstream f(dir / "bad.tsv");
    f << "# comment\n0\t1\nnot an edge\n";
  }
  CHECK_THROWS_WITH_AS((void)load_graph((dir / "bad.tsv").string(),
                                        (dir / "feat.csv").string(),
                                        (dir / "lab.tsv").string(), false),
                       doctest::Contains(":3"), ParseError);
  {
    std::ofstream f(dir / "oor.tsv");
    f << "0\t7\n";
  }
  CHECK_THROWS_AS((void)load_graph((dir / "oor.tsv").string(),
                                   (dir / "feat.csv").string(),
                                   (dir / "lab.tsv").string(), false),
                  ValidationError);
  CHECK_THROWS_AS((void)load_graph((dir / "missing.tsv").string(),
                                   (dir / "feat.csv").string(),
                                   (dir / "lab.tsv").string(), false),
                  IoError);
}

TEST_CASE("split sizes follow the floor rule with the remainder in test") {
  Rng rng(33);
  AttributedGraph g = oracles::random_graph(rng, 100, 0.05, 2, 4, true);
  NodeSplit s = split_nodes(g, {0.3, 0.1, 0.1}, 7);
  CHECK(s.train.size() == 30);
  CHECK(s.valid.size() == 10);
  CHECK(s.calib.size() == 10);
  CHECK(s.test.size() == 50);

  NodeSplit again = split_nodes(g, {0.3, 0.1, 0.1}, 7);
  CHECK(again.train == s.train);
  CHECK(again.valid == s.valid);
  CHECK(again.calib == s.calib);
  CHECK(again.test == s.test);

  std::set<std::uint32_t> all;
  for (const auto* part : {&s.train, &s.valid, &s.calib, &s.test})
    for (std::uint32_t v : *part) CHECK(all.insert(v).second);
  for (std::uint32_t v : all) CHECK(g.labels[v] != kUnlabeled);

  CHECK_THROWS_AS((void)split_nodes(g, {0.5, 0.3, 0.3}, 7), ConfigError);
  CHECK_THROWS_AS((void)split_nodes(g, {-0.1, 0.3, 0.3}, 7), ConfigError);
}

TEST_CASE("splits only cover labeled nodes") {
  Matrix feats(10, 1);
  std::vector<std::int32_t> labels(10, kUnlabeled);
  for (std::size_t v = 0; v < 8; ++v)
    labels[v] = static_cast<std::int32_t>(v % 2);
  AttributedGraph g = make_graph(10, {}, feats, labels, 2, false);
  NodeSplit s = split_nodes(g, {0.3, 0.2, 0.2}, 5);
  CHECK(s.train.size() + s.valid.size() + s.calib.size() + s.test.size() == 8);
}

TEST_CASE("resplit shuffles calib and test but nothing else") {
  Rng rng(34);
  AttributedGraph g = oracles::random_graph(rng, 60, 0.05, 2, 3, true);
  NodeSplit base = split_nodes(g, {0.3, 0.1, 0.2}, 11);

  std::vector<std::uint32_t> base_pool = base.calib;
  base_pool.insert(base_pool.end(), base.test.begin(), base.test.end());
  std::sort(base_pool.begin(), base_pool.end());

  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    NodeSplit r = resplit_calib_test(base, seed);
    CHECK(r.train == base.train);
    CHECK(r.valid == base.valid);
    CHECK(r.calib.size() == base.calib.size());
    CHECK(r.test.size() == base.test.size());
    std::vector<std::uint32_t> pool = r.calib;
    pool.insert(pool.end(), r.test.begin(), r.test.end());
    std::sort(pool.begin(), pool.end());
    CHECK(pool == base_pool);
    NodeSplit r2 = resplit_calib_test(base, seed);
    CHECK(r2.calib == r.calib);
  }
}

TEST_CASE("k-core keeps the triangle and peels the pendant") {
  AttributedGraph g = make_graph(4, {{0, 1}, {1, 2}, {2, 0}, {0, 3}},
                                 Matrix(4, 1), {}, 0, true);
  KcoreResult res = kcore_subgraph(g, 2);
  CHECK(res.node_ids == std::vector<std::uint32_t>{0, 1, 2});
  CHECK_FALSE(res.retained[3]);
  CHECK(res.core.num_nodes == 3);
  CHECK(res.core.num_edges() == 6);
}

TEST_CASE("0-core is the whole graph and a path has no 2-core") {
  Rng rng(35);
  AttributedGraph g = oracles::random_graph(rng, 20, 0.2, 2, 3, true);
  KcoreResult all = kcore_subgraph(g, 0);
  CHECK(all.core.num_nodes == g.num_nodes);
  CHECK(directed_edges(all.core) == directed_edges(g));

  AttributedGraph path =
      make_graph(3, {{0, 1}, {1, 2}}, Matrix(3, 1), {}, 0, true);
  KcoreResult empty = kcore_subgraph(path, 2);
  CHECK(empty.core.num_nodes == 0);
  CHECK(empty.node_ids.empty());
}

TEST_CASE("k-core matches fixpoint peeling on random graphs") {
  Rng rng(36);
  for (int it = 0; it < 1000; ++it) {
    const std::size_t n = 1 + rng.bounded(50);
    const double prob = 0.5 * rng.uniform01();
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    for (std::uint32_t u = 0; u < n; ++u)
      for (std::uint32_t v = 0; v < n; ++v)
        if (u != v && rng.uniform01() < prob) edges.emplace_back(u, v);
    const std::size_t k = rng.bounded(7);
    AttributedGraph g =
        make_graph(n, edges, Matrix(n, 1), {}, 0, false);
    KcoreResult res = kcore_subgraph(g, k);
    std::vector<bool> alive = oracles::kcore_naive(n, edges, k);
    REQUIRE(res.retained.size() == alive.size());
    for (std::size_t v = 0; v < n; ++v) CHECK(res.retained[v] == alive[v]);
  }
}

TEST_CASE("restrict_edges_to keeps the node set and filters edges") {
  AttributedGraph g = make_graph(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}},
                                 Matrix(4, 1), {}, 0, true);
  std::vector<bool> keep = {true, true, true, false};
  AttributedGraph h = restrict_edges_to(g, keep);
  CHECK(h.num_nodes == 4);
  for (const auto& [u, v] : directed_edges(h)) {
    CHECK(keep[u]);
    CHECK(keep[v]);
  }
  CHECK(h.num_edges() == 4);  // 0-1 and 1-2, both directions
}

TEST_CASE("MFG stacks chain exactly and end at the seeds") {
  Rng rng(41);
  for (int it = 0; it < 30; ++it) {
    AttributedGraph g = oracles::random_graph(rng, 3 + rng.bounded(25), 0.15,
                                              2, 3, true);
    std::vector<std::uint32_t> ids(g.num_nodes);
    for (std::uint32_t v = 0; v < g.num_nodes; ++v) ids[v] = v;
    auto seeds = sample_without_replacement(ids, 1 + rng.bounded(4), rng);
    const std::size_t layers = 1 + rng.bounded(3);
    const bool sampled = rng.bounded(2) == 0;
    std::vector<std::size_t> fanouts;
    if (sampled) fanouts.assign(layers, 1 + rng.bounded(3));
    auto stack = build_mfgs(g, seeds, layers, fanouts, it);

    REQUIRE(stack.size() == layers);
    CHECK(stack.back().right_nodes == seeds);
    for (std::size_t i = 1; i < layers; ++i)
      CHECK(stack[i].left_nodes == stack[i - 1].right_nodes);
    for (const auto& mfg : stack) {
      // Right nodes are the prefix of the left list.
      REQUIRE(mfg.left_nodes.size() >= mfg.right_nodes.size());
      for (std::size_t j = 0; j < mfg.right_nodes.size(); ++j)
        CHECK(mfg.left_nodes[j] == mfg.right_nodes[j]);
      // Per right node: first edge is the self-edge, groups in order.
      std::size_t e = 0;
      for (std::uint32_t j = 0; j < mfg.right_nodes.size(); ++j) {
        REQUIRE(e < mfg.num_edges());
        CHECK(mfg.edge_right[e] == j);
        CHECK(mfg.edge_left[e] == j);
        ++e;
        while (e < mfg.num_edges() && mfg.edge_right[e] == j) {
          CHECK_FALSE(mfg.is_self_edge(e));
          ++e;
        }
      }
      CHECK(e == mfg.num_edges());
      for (std::size_t ei = 0; ei < mfg.num_edges(); ++ei)
        CHECK(mfg.edge_left[ei] < mfg.left_nodes.size());
      REQUIRE(mfg.left_graph_out_degree.size() == mfg.left_nodes.size());
      for (std::size_t j = 0; j < mfg.left_nodes.size(); ++j)
        CHECK(mfg.left_graph_out_degree[j] ==
              g.out_degree(mfg.left_nodes[j]));
    }
  }
}

TEST_CASE("full-fanout MFG edges reproduce every in-neighbor once") {
  Rng rng(42);
  AttributedGraph g = oracles::random_graph(rng, 20, 0.2, 2, 3, false);
  std::vector<std::uint32_t> seeds = {3, 7, 11};
  auto stack = build_mfgs(g, seeds, 1, {}, 0);
  const auto& mfg = stack[0];
  for (std::size_t j = 0; j < seeds.size(); ++j) {
    std::multiset<std::uint32_t> want(g.in_neighbors(seeds[j]).begin(),
                                      g.in_neighbors(seeds[j]).end());
    std::multiset<std::uint32_t> got;
    for (std::size_t e = 0; e < mfg.num_edges(); ++e)
      if (mfg.edge_right[e] == j && !mfg.is_self_edge(e))
        got.insert(mfg.left_nodes[mfg.edge_left[e]]);
    CHECK(got == want);
  }
}

TEST_CASE("an isolated seed yields a single self-edge MFG") {
  AttributedGraph g = make_graph(3, {{0, 1}}, Matrix(3, 1), {}, 0, true);
  auto stack = build_mfgs(g, {2}, 2, {}, 0);
  for (const auto& mfg : stack) {
    CHECK(mfg.left_nodes == std::vector<std::uint32_t>{2});
    CHECK(mfg.right_nodes == std::vector<std::uint32_t>{2});
    REQUIRE(mfg.num_edges() == 1);
    CHECK(mfg.is_self_edge(0));
  }
}

TEST_CASE("fanout caps sampled in-edges per right node") {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (std::uint32_t leaf = 1; leaf <= 10; ++leaf) edges.emplace_back(leaf, 0);
  AttributedGraph g = make_graph(11, edges, Matrix(11, 1), {}, 0, false);
  auto stack = build_mfgs(g, {0}, 1, {3}, 99);
  const auto& mfg = stack[0];
  CHECK(mfg.num_edges() == 4);  // self-edge + 3 sampled
  CHECK(mfg.num_nonself_edges() == 3);
  std::set<std::uint32_t> sampled;
  for (std::size_t e = 1; e < 4; ++e)
    sampled.insert(mfg.left_nodes[mfg.edge_left[e]]);
  CHECK(sampled.size() == 3);  // without replacement

  auto again = build_mfgs(g, {0}, 1, {3}, 99);
  CHECK(again[0].edge_left == mfg.edge_left);
  CHECK(again[0].left_nodes == mfg.left_nodes);
}

TEST_CASE("build_mfgs rejects bad seeds and fanout shapes") {
  AttributedGraph g = make_graph(4, {{0, 1}}, Matrix(4, 1), {}, 0, true);
  CHECK_THROWS_AS((void)build_mfgs(g, {}, 2, {}, 0), ValidationError);
  CHECK_THROWS_AS((void)build_mfgs(g, {9}, 2, {}, 0), ValidationError);
  CHECK_THROWS_AS((void)build_mfgs(g, {1, 1}, 2, {}, 0), ValidationError);
  CHECK_THROWS_AS((void)build_mfgs(g, {1}, 2, {5}, 0), ConfigError);
}

TEST_CASE("drop_edges removes a binomial share of non-self edges") {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (std::uint32_t leaf = 1; leaf <= 10000; ++leaf)
    edges.emplace_back(leaf, 0);
  AttributedGraph g = make_graph(10001, edges, Matrix(10001, 1), {}, 0, false);
  auto mfg = build_mfgs(g, {0}, 1, {}, 0)[0];
  REQUIRE(mfg.num_nonself_edges() == 10000);

  MessageFlowGraph dropped = drop_edges(mfg, 0.3, 4242);
  const double kept = static_cast<double>(dropped.num_nonself_edges());
  const double sigma = std::sqrt(10000 * 0.3 * 0.7);
  CHECK(std::abs(kept - 7000.0) <= 3.0 * sigma);
  CHECK(dropped.num_edges() == dropped.num_nonself_edges() + 1);

  MessageFlowGraph same = drop_edges(mfg, 0.3, 4242);
  CHECK(same.edge_left == dropped.edge_left);

  MessageFlowGraph unchanged = drop_edges(mfg, 0.0, 7);
  CHECK(unchanged.edge_left == mfg.edge_left);
  CHECK(unchanged.edge_right == mfg.edge_right);
}

TEST_CASE("drop_edges never touches self-edges") {
  AttributedGraph g = make_graph(3, {}, Matrix(3, 1), {}, 0, false);
  auto mfg = build_mfgs(g, {0, 1, 2}, 1, {}, 0)[0];
  REQUIRE(mfg.num_edges() == 3);
  MessageFlowGraph dropped = drop_edges(mfg, 0.9, 1);
  CHECK(dropped.edge_left == mfg.edge_left);
  CHECK_THROWS_AS((void)drop_edges(mfg, 1.0, 1), ConfigError);
  CHECK_THROWS_AS((void)drop_edges(mfg, -0.1, 1), ConfigError);
}
