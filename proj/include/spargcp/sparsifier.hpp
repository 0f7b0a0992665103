#pragma once

#include <cstdint>
#include <vector>

#include "spargcp/mfg.hpp"
#include "spargcp/tape.hpp"

namespace spargcp {

struct SparsifyResult {
  MessageFlowGraph mfg;  // self-edges plus survivors, original relative order
  /// Indices into the input MFG's edge list of the retained non-self edges.
  std::vector<std::size_t> retained_edge_indices;
  /// Score of the cheapest retained edge under the (score, index) order;
  /// -infinity when nothing was dropped.
  double threshold = 0.0;
  /// One score per retained non-self edge, aligned with
  /// retained_edge_indices; differentiable back into the raw scores.
  Tensor retained_scores;
  /// One weight per edge of the output MFG: the retained score for survivor
  /// edges, constant 1 for self-edges. Feed this to the layer forward.
  Tensor edge_weights;
  std::size_t num_nonself_input = 0;
  std::size_t num_dropped = 0;
};

/// Drop the floor(gamma * #non-self) lowest-scored non-self edges, ordering
/// by (score ascending, edge index ascending). Self-edges always survive.
/// `scores` must be a column tensor with one row per non-self edge of `mfg`,
/// in edge order.
SparsifyResult sparsify_mfg(const MessageFlowGraph& mfg, const Tensor& scores,
                            double gamma);

/// Dropped / total non-self edges pooled across layers. Zero when no layer
/// had any non-self edge.
double sparsified_edge_fraction(const std::vector<SparsifyResult>& results);

/// floor(gamma * count) with the product snapped to the integer it
/// represents mathematically when floating point lands within 1e-9 of one.
std::size_t drop_count(double gamma, std::size_t count);

}  // namespace spargcp
