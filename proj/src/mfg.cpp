#include "spargcp/mfg.hpp"

#include <algorithm>

#include "spargcp/common.hpp"

namespace spargcp {

std::size_t MessageFlowGraph::num_nonself_edges() const {
  std::size_t n = 0;
  for (std::size_t e = 0; e < num_edges(); ++e)
    if (!is_self_edge(e)) ++n;
  return n;
}

std::vector<MessageFlowGraph> build_mfgs(
    const AttributedGraph& g, const std::vector<std::uint32_t>& seeds,
    std::size_t num_layers, const std::vector<std::size_t>& fanouts,
    std::uint64_t seed) {
  if (seeds.empty()) throw ValidationError("build_mfgs: empty seed set");
  if (num_layers == 0) throw ValidationError("build_mfgs: zero layers");
  if (!fanouts.empty() && fanouts.size() != num_layers)
    throw ConfigError("build_mfgs: fanout count != num_layers");

  std::vector<std::uint32_t> pos_of(g.num_nodes, UINT32_MAX);
  for (std::uint32_t s : seeds) {
    if (s >= g.num_nodes)
      throw ValidationError("build_mfgs: seed id out of range");
    if (pos_of[s] != UINT32_MAX)
      throw ValidationError("build_mfgs: duplicate seed id");
    pos_of[s] = 0;  // occupancy marker only; real positions set per layer
  }
  for (std::uint32_t s : seeds) pos_of[s] = UINT32_MAX;

  std::vector<MessageFlowGraph> stack(num_layers);
  std::vector<std::uint32_t> right = seeds;

  for (std::size_t layer = num_layers; layer-- > 0;) {
    MessageFlowGraph& mfg = stack[layer];
    mfg.layer_index = layer + 1;
    mfg.right_nodes = right;
    mfg.left_nodes = right;
    for (std::size_t j = 0; j < mfg.left_nodes.size(); ++j)
      pos_of[mfg.left_nodes[j]] = static_cast<std::uint32_t>(j);

    const bool sampled = !fanouts.empty();
    Rng rng(Rng::derive(seed, "mfg-layer", layer));

    for (std::size_t j = 0; j < mfg.right_nodes.size(); ++j) {
      const std::uint32_t v = mfg.right_nodes[j];
      mfg.edge_left.push_back(static_cast<std::uint32_t>(j));
      mfg.edge_right.push_back(static_cast<std::uint32_t>(j));

      auto in = g.in_neighbors(v);
      std::vector<std::uint32_t> chosen(in.begin(), in.end());
      if (sampled && chosen.size() > fanouts[layer])
        chosen = sample_without_replacement(std::move(chosen), fanouts[layer],
                                            rng);
      for (std::uint32_t u : chosen) {
        if (pos_of[u] == UINT32_MAX) {
          pos_of[u] = static_cast<std::uint32_t>(mfg.left_nodes.size());
          mfg.left_nodes.push_back(u);
        }
        mfg.edge_left.push_back(pos_of[u]);
        mfg.edge_right.push_back(static_cast<std::uint32_t>(j));
      }
    }

    mfg.left_graph_out_degree.reserve(mfg.left_nodes.size());
    for (std::uint32_t u : mfg.left_nodes)
      mfg.left_graph_out_degree.push_back(
          static_cast<std::uint32_t>(g.out_degree(u)));

    for (std::uint32_t u : mfg.left_nodes) pos_of[u] = UINT32_MAX;
    right = mfg.left_nodes;
  }
  return stack;
}

MessageFlowGraph drop_edges(const MessageFlowGraph& mfg, double p,
                            std::uint64_t seed) {
  if (p < 0.0 || p >= 1.0)
    throw ConfigError("drop_edges: p must lie in [0, 1)");
  MessageFlowGraph out;
  out.layer_index = mfg.layer_index;
  out.left_nodes = mfg.left_nodes;
  out.right_nodes = mfg.right_nodes;
  out.left_graph_out_degree = mfg.left_graph_out_degree;

  Rng rng(seed);
  for (std::size_t e = 0; e < mfg.num_edges(); ++e) {
    if (!mfg.is_self_edge(e) && rng.uniform01() < p) continue;
    out.edge_left.push_back(mfg.edge_left[e]);
    out.edge_right.push_back(mfg.edge_right[e]);
  }
  return out;
}

}  // namespace spargcp
