#include "spargcp/sparsifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "spargcp/common.hpp"
#include "spargcp/ops.hpp"

namespace spargcp {

std::size_t drop_count(double gamma, std::size_t count) {
  const double x = snap_integer(gamma * static_cast<double>(count));
  return static_cast<std::size_t>(std::floor(x));
}

SparsifyResult sparsify_mfg(const MessageFlowGraph& mfg, const Tensor& scores,
                            double gamma) {
  if (gamma < 0.0 || gamma >= 1.0)
    throw ConfigError("sparsify_mfg: gamma must lie in [0, 1)");

  std::vector<std::size_t> nonself;  // edge index per score row
  for (std::size_t e = 0; e < mfg.num_edges(); ++e)
    if (!mfg.is_self_edge(e)) nonself.push_back(e);

  const Matrix& sv = scores.value();
  if (sv.rows() != nonself.size() || (sv.cols() != 1 && !nonself.empty()))
    throw ValidationError(
        "sparsify_mfg: scores must be one column row per non-self edge");

  const std::size_t m_ns = nonself.size();
  // gamma < 1 bounds the true floor by m_ns - 1; the snap inside
  // drop_count can only overshoot that, never undershoot.
  const std::size_t m_drop =
      m_ns == 0 ? 0 : std::min(drop_count(gamma, m_ns), m_ns - 1);

  // (score asc, edge index asc); `order` holds score-row indices and edge
  // index order coincides with score-row order.
  std::vector<std::size_t> order(m_ns);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return sv(a, 0) < sv(b, 0);
  });

  std::vector<bool> keep(m_ns, true);
  for (std::size_t i = 0; i < m_drop; ++i) keep[order[i]] = false;

  SparsifyResult res;
  res.num_nonself_input = m_ns;
  res.num_dropped = m_drop;
  res.threshold = m_drop == 0 ? -std::numeric_limits<double>::infinity()
                              : sv(order[m_drop], 0);

  res.mfg.layer_index = mfg.layer_index;
  res.mfg.left_nodes = mfg.left_nodes;
  res.mfg.right_nodes = mfg.right_nodes;
  res.mfg.left_graph_out_degree = mfg.left_graph_out_degree;

  std::vector<std::size_t> retained_rows;      // score rows kept, in order
  std::vector<std::size_t> survivor_position;  // their rows in the new MFG
  std::size_t score_row = 0;
  for (std::size_t e = 0; e < mfg.num_edges(); ++e) {
    if (mfg.is_self_edge(e)) {
      res.mfg.edge_left.push_back(mfg.edge_left[e]);
      res.mfg.edge_right.push_back(mfg.edge_right[e]);
      continue;
    }
    if (keep[score_row]) {
      survivor_position.push_back(res.mfg.num_edges());
      res.mfg.edge_left.push_back(mfg.edge_left[e]);
      res.mfg.edge_right.push_back(mfg.edge_right[e]);
      res.retained_edge_indices.push_back(e);
      retained_rows.push_back(score_row);
    }
    ++score_row;
  }

  res.retained_scores = row_gather(scores, retained_rows);
  res.edge_weights = row_scatter(res.retained_scores, survivor_position,
                                 res.mfg.num_edges(), 1.0);
  return res;
}

double sparsified_edge_fraction(const std::vector<SparsifyResult>& results) {
  if (results.empty())
    throw ValidationError("sparsified_edge_fraction: empty result list");
  std::size_t dropped = 0, total = 0;
  for (const auto& r : results) {
    dropped += r.num_dropped;
    total += r.num_nonself_input;
  }
  return total == 0 ? 0.0 : static_cast<double>(dropped) / static_cast<double>(total);
}

}  // namespace spargcp
