#pragma once

#include <cstdint>
#include <vector>

#include "spargcp/graph.hpp"

namespace spargcp {

/// One layer's directed bipartite message graph. right_nodes is always a
/// prefix of left_nodes (kept in the same order), so the edge (j, j) is the
/// materialized self-edge of right node j. Edges are grouped by right
/// position, self-edge first within each group.
struct MessageFlowGraph {
  std::size_t layer_index = 0;  // 1-based within the stack
  std::vector<std::uint32_t> left_nodes;   // global ids
  std::vector<std::uint32_t> right_nodes;  // global ids, prefix of left_nodes
  std::vector<std::uint32_t> edge_left;    // local positions into left_nodes
  std::vector<std::uint32_t> edge_right;   // local positions into right_nodes
  /// Non-self out-degree of each left node in the graph the MFG was built
  /// from; drives the source-side normalization factor and is not altered
  /// by edge dropping or sparsification.
  std::vector<std::uint32_t> left_graph_out_degree;

  std::size_t num_edges() const { return edge_left.size(); }
  bool is_self_edge(std::size_t e) const {
    return edge_left[e] == edge_right[e];
  }
  std::size_t num_nonself_edges() const;
};

/// Build the per-layer MFG stack for a seed batch, constructed last layer
/// to first. Element 0 of the result feeds the first GNN layer and has the
/// widest left set; chaining guarantee: result[i].left_nodes equals
/// result[i-1].right_nodes exactly (same order) for every i >= 1, and
/// result.back().right_nodes == seeds. An empty `fanouts` means full
/// neighborhoods; otherwise fanouts[i] caps the sampled in-neighbors per
/// right node of layer i+1 (uniform, without replacement). Seeds must be
/// distinct, valid node ids.
std::vector<MessageFlowGraph> build_mfgs(const AttributedGraph& g,
                                         const std::vector<std::uint32_t>& seeds,
                                         std::size_t num_layers,
                                         const std::vector<std::size_t>& fanouts,
                                         std::uint64_t seed);

/// Remove each non-self edge independently with probability p; self-edges
/// are never removed. Surviving edges keep their relative order.
MessageFlowGraph drop_edges(const MessageFlowGraph& mfg, double p,
                            std::uint64_t seed);

}  // namespace spargcp
