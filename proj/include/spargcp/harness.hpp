#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spargcp/config.hpp"
#include "spargcp/graph.hpp"
#include "spargcp/trainer.hpp"

namespace spargcp {

struct ResultRecord {
  std::string config_hash;
  std::size_t train_split = 0;
  std::size_t resplit = 0;
  std::string method;
  std::string backbone;
  double alpha = 0.0;
  double gamma = 0.0;
  double lambda = 0.0;
  double coverage_value = 0.0;
  double efficiency_value = 0.0;
  double edge_drop_frac = 0.0;
  double seconds = 0.0;
};

struct Summary {
  std::string config_hash;
  std::string method;
  std::string backbone;
  double alpha = 0.0;
  double gamma = 0.0;
  double lambda = 0.0;
  std::size_t records = 0;
  double coverage_mean = 0.0;
  double coverage_std = 0.0;
  double efficiency_mean = 0.0;
  double efficiency_std = 0.0;
  double edge_drop_mean = 0.0;
};

struct ExperimentOutput {
  std::vector<ResultRecord> records;  // ordered by (train_split, resplit)
  Summary summary;
  std::vector<std::vector<EpochLog>> train_logs;  // one per train split
};

AttributedGraph load_experiment_graph(const ExperimentConfig& cfg);

/// Full split/train/calibrate/predict grid for one config. Train splits may
/// run on cfg.threads workers; output order is schedule-independent.
ExperimentOutput run_experiment(const ExperimentConfig& cfg,
                                const AttributedGraph& g);

/// Mean and sample standard deviation over the records (std is 0 for a
/// single record).
Summary summarize(const ExperimentConfig& cfg,
                  const std::vector<ResultRecord>& records);

/// One run_experiment per value of `param` (gamma, lambda, k, or p; the
/// parameter must apply to cfg.method). Returns outputs in value order.
std::vector<ExperimentOutput> sweep(const ExperimentConfig& cfg,
                                    const std::string& param,
                                    const std::vector<double>& values,
                                    const AttributedGraph& g);

void write_records_csv(const std::vector<ResultRecord>& records,
                       const std::string& path);
void write_summary_csv(const std::vector<Summary>& rows,
                       const std::string& path);

}  // namespace spargcp
