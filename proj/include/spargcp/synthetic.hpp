#pragma once

#include <cstdint>

#include "spargcp/graph.hpp"

namespace spargcp {

/// Stochastic block model with class-conditional Gaussian features. Node
/// labels follow block membership; the class mean vectors are orthogonal
/// unit basis vectors, so feature_dim must be at least `blocks`.
struct SbmSpec {
  std::size_t blocks = 2;
  std::size_t nodes_per_block = 50;
  double p_intra = 0.1;
  double p_inter = 0.01;
  std::size_t feature_dim = 8;
  double sigma = 1.0;
  double noise_edge_fraction = 0.0;
  std::uint64_t seed = 0;
};

/// Planted undirected block edges plus floor(noise_edge_fraction * planted)
/// uniformly random extra edges over previously unconnected pairs.
/// Deterministic per spec.seed.
AttributedGraph generate_sbm(const SbmSpec& spec);

}  // namespace spargcp
