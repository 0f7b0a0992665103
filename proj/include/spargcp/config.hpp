#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spargcp/synthetic.hpp"

namespace spargcp {

/// Where the experiment graph comes from: on-disk files or the SBM
/// generator. Exactly one source is set.
struct DatasetPaths {
  std::string edges;
  std::string features;
  std::string labels;
  bool undirected = true;
};

struct ExperimentConfig {
  bool use_synthetic = false;
  DatasetPaths dataset;
  SbmSpec synthetic;

  std::string method = "vanilla";  // vanilla | kcore | dropedge | spargcp
  std::string backbone = "gcn";    // gcn | gat

  double alpha = 0.1;
  double alpha_train = 0.1;
  double gamma = 0.0;   // spargcp drop fraction
  double lambda = 0.0;  // spargcp cp-loss weight
  std::size_t k = 0;    // kcore order
  double p = 0.0;       // dropedge probability

  std::size_t hidden_dim = 16;
  std::size_t num_layers = 2;
  std::size_t heads = 2;
  std::vector<std::size_t> fanouts;  // empty = full neighborhoods
  std::size_t epochs = 50;
  std::size_t batch_size = 256;
  double learning_rate = 0.01;

  std::size_t num_train_splits = 20;
  std::size_t num_resplits = 50;
  std::uint64_t base_seed = 0;

  std::string output = "results";
  std::size_t threads = 1;
  bool record_timing = false;
};

/// Parse and validate a config document. Unknown keys raise ConfigError.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config_file(const std::string& path);

/// Parse just an SBM generator spec document. Unknown keys raise
/// ConfigError.
SbmSpec parse_sbm_spec(const std::string& json_text);
SbmSpec load_sbm_spec_file(const std::string& path);

/// Re-check cross-field rules (used after programmatic edits).
void validate_config(const ExperimentConfig& cfg);

/// Every effective field, canonically ordered and formatted; equal configs
/// produce equal strings.
std::string canonical_config_json(const ExperimentConfig& cfg);

/// 16-hex-digit digest of canonical_config_json.
std::string config_fingerprint(const ExperimentConfig& cfg);

}  // namespace spargcp
