#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spargcp/graph.hpp"
#include "spargcp/models.hpp"

namespace spargcp {

/// Adam over a fixed parameter list. step() consumes the gradients
/// currently stored on the parameters.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, double learning_rate,
       double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);

  void zero_grad();
  void step();

 private:
  std::vector<Parameter*> params_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

/// Batch quantile of the per-node cumulative-mass scores, computed inside
/// the differentiable graph. Ranking positions are fixed by the forward
/// values; gradients flow through the summed probabilities only.
Tensor cp_loss(const Tensor& logits, const std::vector<std::int32_t>& labels,
               double alpha_train);

struct TrainOptions {
  double gamma = 0.0;
  double lambda = 0.0;
  double alpha_train = 0.1;
  double dropedge_p = 0.0;
  std::size_t epochs = 50;
  std::size_t batch_size = 256;
  double learning_rate = 0.01;
  std::vector<std::size_t> fanouts;  // empty = full neighborhood
  std::uint64_t seed = 0;
  bool record_timing = false;
};

struct EpochLog {
  std::size_t epoch = 0;
  double loss_ce = 0.0;
  double loss_cp = 0.0;
  double loss = 0.0;
  double valid_ce = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  std::size_t best_epoch = 0;  // 0 denotes the untrained snapshot
  double best_valid_ce = 0.0;
  std::vector<EpochLog> log;   // one row per trained epoch
};

/// Mini-batch training of L = ce + lambda * cp over shuffled train nodes.
/// The model is left holding the parameters of the best-validation epoch.
/// Fully deterministic for a fixed options.seed.
TrainResult train(GnnModel& model, const AttributedGraph& g,
                  const std::vector<std::uint32_t>& train_nodes,
                  const std::vector<std::uint32_t>& valid_nodes,
                  const TrainOptions& opts);

/// CSV with columns epoch,L_ce,L_cp,L,valid_ce,seconds.
void write_training_log(const std::vector<EpochLog>& log,
                        const std::string& path);

/// Softmax class probabilities for `nodes`, full-fanout deterministic
/// forward (the sparsifier still runs when gamma > 0 and the model has
/// scorers).
Matrix predict_probs(GnnModel& model, const AttributedGraph& g,
                     const std::vector<std::uint32_t>& nodes, double gamma,
                     ForwardStats* stats = nullptr);

/// Mean cross-entropy of `nodes` under the same forward as predict_probs.
double validation_ce(GnnModel& model, const AttributedGraph& g,
                     const std::vector<std::uint32_t>& nodes, double gamma);

}  // namespace spargcp
