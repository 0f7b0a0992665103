#include "spargcp/graph.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "spargcp/common.hpp"

namespace spargcp {

namespace {

void build_csr(std::size_t n,
               const std::vector<std::pair<std::uint32_t, std::uint32_t>>& es,
               std::vector<std::size_t>& offsets,
               std::vector<std::uint32_t>& targets, bool by_source) {
  offsets.assign(n + 1, 0);
  for (const auto& [u, v] : es) ++offsets[(by_source ? u : v) + 1];
  for (std::size_t i = 0; i < n; ++i) offsets[i + 1] += offsets[i];
  targets.resize(es.size());
  std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
  for (const auto& [u, v] : es) {
    const std::uint32_t key = by_source ? u : v;
    targets[cursor[key]++] = by_source ? v : u;
  }
}

}  // namespace

std::size_t AttributedGraph::num_labeled() const {
  std::size_t n = 0;
  for (std::int32_t y : labels)
    if (y != kUnlabeled) ++n;
  return n;
}

std::vector<std::uint32_t> AttributedGraph::labeled_nodes() const {
  std::vector<std::uint32_t> out;
  for (std::size_t v = 0; v < labels.size(); ++v)
    if (labels[v] != kUnlabeled) out.push_back(static_cast<std::uint32_t>(v));
  return out;
}

AttributedGraph make_graph(
    std::size_t num_nodes,
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges,
    Matrix features, std::vector<std::int32_t> labels,
    std::int32_t num_classes, bool undirected) {
  for (const auto& [u, v] : edges) {
    if (u >= num_nodes || v >= num_nodes)
      throw ValidationError("make_graph: edge endpoint out of range");
  }
  if (undirected) {
    const std::size_t m = edges.size();
    edges.reserve(2 * m);
    for (std::size_t i = 0; i < m; ++i)
      edges.emplace_back(edges[i].second, edges[i].first);
  }
  std::erase_if(edges, [](const auto& e) { return e.first == e.second; });
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  if (features.empty() && features.rows() == 0)
    features = Matrix(num_nodes, 0);
  if (features.rows() != num_nodes)
    throw ValidationError("make_graph: feature rows != num_nodes");
  if (!features.all_finite())
    throw NumericError("make_graph: non-finite feature value");

  if (labels.empty()) labels.assign(num_nodes, kUnlabeled);
  if (labels.size() != num_nodes)
    throw ValidationError("make_graph: label count != num_nodes");
  std::int32_t max_label = -1;
  for (std::int32_t y : labels) {
    if (y < kUnlabeled) throw ValidationError("make_graph: negative label");
    max_label = std::max(max_label, y);
  }
  if (num_classes == 0) num_classes = max_label + 1;
  if (max_label >= num_classes)
    throw ValidationError("make_graph: label >= num_classes");

  AttributedGraph g;
  g.num_nodes = num_nodes;
  g.features = std::move(features);
  g.labels = std::move(labels);
  g.num_classes = num_classes;
  build_csr(num_nodes, edges, g.out_offsets, g.out_dst, true);
  build_csr(num_nodes, edges, g.in_offsets, g.in_src, false);
  return g;
}

namespace {

std::vector<std::pair<std::uint32_t, std::uint32_t>> parse_edge_file(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open edge file: " + path);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::uint64_t u, v;
    char extra;
    const int got =
        std::sscanf(line.c_str(), "%lu\t%lu %c", &u, &v, &extra);
    if (got != 2)
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": expected 'u<TAB>v'");
    if (u > UINT32_MAX || v > UINT32_MAX)
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": node id too large");
    edges.emplace_back(static_cast<std::uint32_t>(u),
                       static_cast<std::uint32_t>(v));
  }
  return edges;
}

std::uint64_t read_u64_le(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t x = 0;
  for (int i = 7; i >= 0; --i) x = (x << 8) | b[i];
  return x;
}

void write_u64_le(std::ostream& out, std::uint64_t x) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(x >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

Matrix parse_feature_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open feature file: " + path);
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() == 4 && std::memcmp(magic, "FMAT", 4) == 0) {
    const std::uint64_t rows = read_u64_le(in);
    const std::uint64_t cols = read_u64_le(in);
    if (!in) throw ParseError(path + ": truncated FMAT header");
    Matrix m(rows, cols);
    std::vector<unsigned char> buf(4 * cols);
    for (std::uint64_t r = 0; r < rows; ++r) {
      in.read(reinterpret_cast<char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()));
      if (!in) throw ParseError(path + ": truncated FMAT payload");
      for (std::uint64_t c = 0; c < cols; ++c) {
        std::uint32_t bits = 0;
        for (int i = 3; i >= 0; --i)
          bits = (bits << 8) | buf[4 * c + static_cast<std::size_t>(i)];
        float f;
        std::memcpy(&f, &bits, 4);
        m(r, c) = static_cast<double>(f);
      }
    }
    return m;
  }

  in.clear();
  in.seekg(0);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        while (used < cell.size() &&
               (cell[used] == ' ' || cell[used] == '\r'))
          ++used;
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(lineno) +
                         ": bad numeric cell '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": ragged feature row");
    rows.push_back(std::move(row));
  }
  Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  return m;
}

std::vector<std::int32_t> parse_label_file(const std::string& path,
                                           std::size_t num_nodes) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open label file: " + path);
  std::vector<std::int32_t> labels(num_nodes, kUnlabeled);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::uint64_t node;
    long long label;
    char extra;
    const int got =
        std::sscanf(line.c_str(), "%lu\t%lld %c", &node, &label, &extra);
    if (got != 2)
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": expected 'node<TAB>label'");
    if (node >= num_nodes)
      throw ValidationError(path + ":" + std::to_string(lineno) +
                            ": node id out of range");
    if (label < 0)
      throw ValidationError(path + ":" + std::to_string(lineno) +
                            ": negative label");
    labels[node] = static_cast<std::int32_t>(label);
  }
  return labels;
}

}  // namespace

AttributedGraph load_graph(const std::string& edge_path,
                           const std::string& feature_path,
                           const std::string& label_path, bool undirected,
                           std::int32_t num_classes) {
  Matrix features = parse_feature_file(feature_path);
  const std::size_t n = features.rows();
  auto edges = parse_edge_file(edge_path);
  for (const auto& [u, v] : edges)
    if (u >= n || v >= n)
      throw ValidationError(edge_path + ": node id out of range for " +
                            std::to_string(n) + " nodes");
  auto labels = parse_label_file(label_path, n);
  return make_graph(n, std::move(edges), std::move(features),
                    std::move(labels), num_classes, undirected);
}

void save_dataset(const AttributedGraph& g, const std::string& dir,
                  bool binary_features) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  {
    std::ofstream out(fs::path(dir) / "edges.tsv");
    if (!out) throw IoError("cannot write edges.tsv under " + dir);
    for (std::size_t u = 0; u < g.num_nodes; ++u)
      for (std::uint32_t v : g.out_neighbors(u)) out << u << '\t' << v << '\n';
  }

  if (binary_features) {
    std::ofstream out(fs::path(dir) / "features.fmat", std::ios::binary);
    if (!out) throw IoError("cannot write features.fmat under " + dir);
    out.write("FMAT", 4);
    write_u64_le(out, g.features.rows());
    write_u64_le(out, g.features.cols());
    for (std::size_t r = 0; r < g.features.rows(); ++r)
      for (std::size_t c = 0; c < g.features.cols(); ++c) {
        const float f = static_cast<float>(g.features(r, c));
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        unsigned char b[4];
        for (int i = 0; i < 4; ++i)
          b[i] = static_cast<unsigned char>(bits >> (8 * i));
        out.write(reinterpret_cast<const char*>(b), 4);
      }
  } else {
    std::ofstream out(fs::path(dir) / "features.csv");
    if (!out) throw IoError("cannot write features.csv under " + dir);
    out.precision(17);
    for (std::size_t r = 0; r < g.features.rows(); ++r) {
      for (std::size_t c = 0; c < g.features.cols(); ++c) {
        if (c) out << ',';
        out << g.features(r, c);
      }
      out << '\n';
    }
  }

  {
    std::ofstream out(fs::path(dir) / "labels.tsv");
    if (!out) throw IoError("cannot write labels.tsv under " + dir);
    for (std::size_t v = 0; v < g.num_nodes; ++v)
      if (g.labels[v] != kUnlabeled) out << v << '\t' << g.labels[v] << '\n';
  }
}

NodeSplit split_nodes(const AttributedGraph& g, const SplitRatios& ratios,
                      std::uint64_t seed) {
  if (ratios.train <= 0.0 || ratios.valid <= 0.0 || ratios.calib <= 0.0)
    throw ConfigError("split_nodes: ratios must be positive");
  if (ratios.train + ratios.valid + ratios.calib >= 1.0)
    throw ConfigError("split_nodes: ratios must sum to less than 1");
  std::vector<std::uint32_t> pool = g.labeled_nodes();
  if (pool.empty()) throw ValidationError("split_nodes: no labeled nodes");

  Rng rng(seed);
  shuffle(pool, rng);

  const std::size_t L = pool.size();
  const std::size_t nt = static_cast<std::size_t>(ratios.train * L);
  const std::size_t nv = static_cast<std::size_t>(ratios.valid * L);
  const std::size_t nc = static_cast<std::size_t>(ratios.calib * L);

  NodeSplit s;
  s.train.assign(pool.begin(), pool.begin() + nt);
  s.valid.assign(pool.begin() + nt, pool.begin() + nt + nv);
  s.calib.assign(pool.begin() + nt + nv, pool.begin() + nt + nv + nc);
  s.test.assign(pool.begin() + nt + nv + nc, pool.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.valid.begin(), s.valid.end());
  std::sort(s.calib.begin(), s.calib.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

NodeSplit resplit_calib_test(const NodeSplit& split, std::uint64_t seed) {
  if (split.calib.empty() || split.test.empty())
    throw ValidationError("resplit_calib_test: calib and test must be nonempty");
  std::vector<std::uint32_t> pool = split.calib;
  pool.insert(pool.end(), split.test.begin(), split.test.end());
  std::sort(pool.begin(), pool.end());

  Rng rng(seed);
  shuffle(pool, rng);

  NodeSplit s;
  s.train = split.train;
  s.valid = split.valid;
  s.calib.assign(pool.begin(), pool.begin() + split.calib.size());
  s.test.assign(pool.begin() + split.calib.size(), pool.end());
  std::sort(s.calib.begin(), s.calib.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

KcoreResult kcore_subgraph(const AttributedGraph& g, std::size_t k) {
  const std::size_t n = g.num_nodes;

  // Distinct-neighbor adjacency (in- and out-neighbors pooled).
  std::vector<std::vector<std::uint32_t>> adj(n);
  for (std::size_t v = 0; v < n; ++v) {
    auto& a = adj[v];
    a.insert(a.end(), g.out_neighbors(v).begin(), g.out_neighbors(v).end());
    a.insert(a.end(), g.in_neighbors(v).begin(), g.in_neighbors(v).end());
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
  }

  std::vector<std::size_t> deg(n);
  std::vector<bool> removed(n, false);
  std::vector<std::uint32_t> queue;
  for (std::size_t v = 0; v < n; ++v) {
    deg[v] = adj[v].size();
    if (deg[v] < k) {
      removed[v] = true;
      queue.push_back(static_cast<std::uint32_t>(v));
    }
  }
  while (!queue.empty()) {
    const std::uint32_t v = queue.back();
    queue.pop_back();
    for (std::uint32_t w : adj[v]) {
      if (removed[w]) continue;
      if (--deg[w] < k) {
        removed[w] = true;
        queue.push_back(w);
      }
    }
  }

  KcoreResult res;
  res.retained.assign(n, false);
  std::vector<std::uint32_t> local_of(n, UINT32_MAX);
  for (std::size_t v = 0; v < n; ++v) {
    if (removed[v]) continue;
    res.retained[v] = true;
    local_of[v] = static_cast<std::uint32_t>(res.node_ids.size());
    res.node_ids.push_back(static_cast<std::uint32_t>(v));
  }

  const std::size_t nc = res.node_ids.size();
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  Matrix feats(nc, g.features.cols());
  std::vector<std::int32_t> labels(nc, kUnlabeled);
  for (std::size_t j = 0; j < nc; ++j) {
    const std::uint32_t v = res.node_ids[j];
    for (std::size_t c = 0; c < g.features.cols(); ++c)
      feats(j, c) = g.features(v, c);
    labels[j] = g.labels[v];
    for (std::uint32_t w : g.out_neighbors(v))
      if (res.retained[w])
        edges.emplace_back(static_cast<std::uint32_t>(j), local_of[w]);
  }
  res.core = make_graph(nc, std::move(edges), std::move(feats),
                        std::move(labels), g.num_classes, false);
  return res;
}

AttributedGraph restrict_edges_to(const AttributedGraph& g,
                                  const std::vector<bool>& keep_node) {
  if (keep_node.size() != g.num_nodes)
    throw DimensionError("restrict_edges_to: mask size != num_nodes");
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (std::size_t u = 0; u < g.num_nodes; ++u) {
    if (!keep_node[u]) continue;
    for (std::uint32_t v : g.out_neighbors(u))
      if (keep_node[v])
        edges.emplace_back(static_cast<std::uint32_t>(u), v);
  }
  return make_graph(g.num_nodes, std::move(edges), g.features, g.labels,
                    g.num_classes, false);
}

}  // namespace spargcp
