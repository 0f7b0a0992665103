#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spargcp/matrix.hpp"

namespace spargcp {

inline constexpr std::int32_t kUnlabeled = -1;

/// Directed graph in CSR form (both directions), with node features and
/// optional integer labels. Stored edges are deduplicated and never include
/// self-loops; message-passing self-edges are materialized later, during
/// MFG construction.
struct AttributedGraph {
  std::size_t num_nodes = 0;
  std::vector<std::size_t> out_offsets;  // size num_nodes + 1
  std::vector<std::uint32_t> out_dst;
  std::vector<std::size_t> in_offsets;
  std::vector<std::uint32_t> in_src;
  Matrix features;                   // num_nodes x d
  std::vector<std::int32_t> labels;  // kUnlabeled where absent
  std::int32_t num_classes = 0;

  std::size_t num_edges() const { return out_dst.size(); }
  std::size_t feature_dim() const { return features.cols(); }

  std::span<const std::uint32_t> out_neighbors(std::size_t u) const {
    return {out_dst.data() + out_offsets[u],
            out_offsets[u + 1] - out_offsets[u]};
  }
  std::span<const std::uint32_t> in_neighbors(std::size_t v) const {
    return {in_src.data() + in_offsets[v], in_offsets[v + 1] - in_offsets[v]};
  }
  std::size_t out_degree(std::size_t u) const {
    return out_offsets[u + 1] - out_offsets[u];
  }
  std::size_t in_degree(std::size_t v) const {
    return in_offsets[v + 1] - in_offsets[v];
  }

  std::size_t num_labeled() const;
  std::vector<std::uint32_t> labeled_nodes() const;
};

/// Build a graph from an edge-pair list. Ids are validated against
/// num_nodes; duplicates and self-loops are discarded; `undirected` adds
/// the reverse of every edge before deduplication. Labels may be empty
/// (all nodes unlabeled); num_classes 0 derives the count from the labels.
AttributedGraph make_graph(
    std::size_t num_nodes,
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges,
    Matrix features, std::vector<std::int32_t> labels,
    std::int32_t num_classes = 0, bool undirected = false);

/// Read the documented three-file dataset layout. The node count comes from
/// the feature file (CSV rows, or the FMAT header when the file starts with
/// that magic).
AttributedGraph load_graph(const std::string& edge_path,
                           const std::string& feature_path,
                           const std::string& label_path, bool undirected,
                           std::int32_t num_classes = 0);

/// Write edges.tsv, features.fmat (or features.csv), labels.tsv into dir.
void save_dataset(const AttributedGraph& g, const std::string& dir,
                  bool binary_features = true);

struct NodeSplit {
  std::vector<std::uint32_t> train, valid, calib, test;
};

struct SplitRatios {
  double train = 0.30;
  double valid = 0.10;
  double calib = 0.10;
};

/// Partition the labeled nodes: floor(ratio * #labeled) for the first three
/// sets, remainder to test. Deterministic in the seed; each set is returned
/// sorted ascending.
NodeSplit split_nodes(const AttributedGraph& g, const SplitRatios& ratios,
                      std::uint64_t seed);

/// Reshuffle calib ∪ test into new sets of the same sizes; train and valid
/// pass through unchanged.
NodeSplit resplit_calib_test(const NodeSplit& split, std::uint64_t seed);

struct KcoreResult {
  AttributedGraph core;                // compacted to the retained nodes
  std::vector<std::uint32_t> node_ids; // core-local index -> original id
  std::vector<bool> retained;          // size = original num_nodes
};

/// Iterative peeling. Degree counts distinct neighbors (in- and
/// out-neighbors pooled). k = 0 returns the graph unchanged; an empty core
/// is a valid result.
KcoreResult kcore_subgraph(const AttributedGraph& g, std::size_t k);

/// Same node set as g, keeping only edges whose both endpoints are marked.
AttributedGraph restrict_edges_to(const AttributedGraph& g,
                                  const std::vector<bool>& keep_node);

}  // namespace spargcp
