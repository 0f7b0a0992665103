#include "spargcp/synthetic.hpp"

#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "spargcp/common.hpp"

namespace spargcp {

AttributedGraph generate_sbm(const SbmSpec& spec) {
  if (spec.blocks == 0 || spec.nodes_per_block == 0)
    throw ConfigError("generate_sbm: blocks and nodes_per_block must be positive");
  if (spec.p_intra < 0.0 || spec.p_intra > 1.0 || spec.p_inter < 0.0 ||
      spec.p_inter > 1.0)
    throw ConfigError("generate_sbm: edge probabilities must lie in [0, 1]");
  if (spec.feature_dim < spec.blocks)
    throw ConfigError("generate_sbm: feature_dim must be >= blocks for orthogonal class means");
  if (spec.sigma < 0.0 || !std::isfinite(spec.sigma))
    throw ConfigError("generate_sbm: sigma must be finite and non-negative");
  if (spec.noise_edge_fraction < 0.0 || !std::isfinite(spec.noise_edge_fraction))
    throw ConfigError("generate_sbm: noise_edge_fraction must be finite and non-negative");

  const std::size_t n = spec.blocks * spec.nodes_per_block;
  auto block_of = [&](std::uint32_t v) { return v / spec.nodes_per_block; };

  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  std::set<std::pair<std::uint32_t, std::uint32_t>> present;
  Rng edge_rng(Rng::derive(spec.seed, "sbm-edges"));
  for (std::uint32_t u = 0; u < n; ++u) {
    for (std::uint32_t v = u + 1; v < n; ++v) {
      const double p =
          block_of(u) == block_of(v) ? spec.p_intra : spec.p_inter;
      if (edge_rng.uniform01() < p) {
        edges.push_back({u, v});
        present.insert({u, v});
      }
    }
  }

  const std::size_t planted = edges.size();
  const std::size_t extra = static_cast<std::size_t>(std::floor(
      snap_integer(spec.noise_edge_fraction * static_cast<double>(planted))));
  const std::size_t max_pairs = n * (n - 1) / 2;
  if (planted + extra > max_pairs)
    throw ConfigError("generate_sbm: noise_edge_fraction asks for " +
                      std::to_string(extra) + " extra edges but only " +
                      std::to_string(max_pairs - planted) +
                      " unconnected pairs remain");
  Rng noise_rng(Rng::derive(spec.seed, "sbm-noise"));
  std::size_t added = 0;
  while (added < extra) {
    std::uint32_t u = static_cast<std::uint32_t>(noise_rng.bounded(n));
    std::uint32_t v = static_cast<std::uint32_t>(noise_rng.bounded(n));
    if (u == v) continue;
    if (u > v) std::swap(u, v);
    if (!present.insert({u, v}).second) continue;
    edges.push_back({u, v});
    ++added;
  }

  Matrix features(n, spec.feature_dim);
  std::vector<std::int32_t> labels(n);
  Rng feat_rng(Rng::derive(spec.seed, "sbm-features"));
  for (std::uint32_t v = 0; v < n; ++v) {
    const std::size_t c = block_of(v);
    labels[v] = static_cast<std::int32_t>(c);
    for (std::size_t d = 0; d < spec.feature_dim; ++d)
      features(v, d) = (d == c ? 1.0 : 0.0) + spec.sigma * feat_rng.normal();
  }

  return make_graph(n, std::move(edges), std::move(features),
                    std::move(labels), static_cast<std::int32_t>(spec.blocks),
                    true);
}

}  // namespace spargcp
