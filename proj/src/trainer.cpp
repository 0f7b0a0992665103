#include "spargcp/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "spargcp/common.hpp"
#include "spargcp/mfg.hpp"
#include "spargcp/ops.hpp"

namespace spargcp {

Adam::Adam(std::vector<Parameter*> params, double learning_rate,
           double beta1, double beta2, double epsilon)
    : params_(std::move(params)),
      lr_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      eps_(epsilon) {
  if (!(lr_ > 0.0)) throw ConfigError("Adam: learning rate must be positive");
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Parameter* p : params_) {
    m_.emplace_back(p->value.rows(), p->value.cols());
    v_.emplace_back(p->value.rows(), p->value.cols());
  }
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double g = p.grad[j];
      m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
      v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
      p.value[j] -=
          lr_ * (m_[i][j] / bc1) / (std::sqrt(v_[i][j] / bc2) + eps_);
    }
  }
}

Tensor cp_loss(const Tensor& logits, const std::vector<std::int32_t>& labels,
               double alpha_train) {
  if (!(alpha_train > 0.0) || !(alpha_train < 1.0))
    throw ConfigError("cp_loss: alpha_train must lie in (0, 1)");
  if (logits.rows() == 0) throw ValidationError("cp_loss: empty batch");
  if (labels.size() != logits.rows())
    throw ValidationError("cp_loss: " + std::to_string(logits.rows()) +
                          " rows but " + std::to_string(labels.size()) +
                          " labels");
  Tensor p = exp(log_softmax_rows(logits));
  // Copy: emplacing downstream nodes can reallocate the tape's node
  // storage and invalidate references into it.
  const Matrix pv = p.value();
  Matrix mask(pv.rows(), pv.cols());
  for (std::size_t r = 0; r < pv.rows(); ++r) {
    const std::int32_t y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= pv.cols())
      throw ValidationError("cp_loss: label " + std::to_string(y) +
                            " out of range at row " + std::to_string(r));
    const double py = pv(r, static_cast<std::size_t>(y));
    for (std::size_t c = 0; c < pv.cols(); ++c) {
      const double pc = pv(r, c);
      if (pc > py || (pc == py && static_cast<std::int32_t>(c) <= y))
        mask(r, c) = 1.0;
    }
  }
  return quantile_value(row_sums(mul_const(p, mask)), 1.0 - alpha_train);
}

namespace {

std::vector<std::int32_t> labels_of(const AttributedGraph& g,
                                    const std::vector<std::uint32_t>& nodes,
                                    const char* who) {
  std::vector<std::int32_t> out;
  out.reserve(nodes.size());
  for (std::uint32_t v : nodes) {
    if (v >= g.num_nodes)
      throw ValidationError(std::string(who) + ": node " + std::to_string(v) +
                            " out of range");
    if (g.labels[v] == kUnlabeled)
      throw ValidationError(std::string(who) + ": node " + std::to_string(v) +
                            " has no label");
    out.push_back(g.labels[v]);
  }
  return out;
}

double mean_ce(GnnModel& model, const AttributedGraph& g,
               const std::vector<MessageFlowGraph>& mfgs,
               const std::vector<std::int32_t>& labels, double gamma) {
  Tape t;
  Tensor logits = model.forward(t, mfgs, g.features, gamma);
  return cross_entropy(logits, labels).value()(0, 0);
}

}  // namespace

TrainResult train(GnnModel& model, const AttributedGraph& g,
                  const std::vector<std::uint32_t>& train_nodes,
                  const std::vector<std::uint32_t>& valid_nodes,
                  const TrainOptions& opts) {
  if (train_nodes.empty()) throw ValidationError("train: no training nodes");
  if (valid_nodes.empty()) throw ValidationError("train: no validation nodes");
  if (opts.batch_size == 0)
    throw ConfigError("train: batch_size must be positive");
  if (opts.lambda < 0.0 || !std::isfinite(opts.lambda))
    throw ConfigError("train: lambda must be finite and non-negative");
  if (opts.gamma < 0.0 || opts.gamma >= 1.0)
    throw ConfigError("train: gamma must lie in [0, 1)");
  if (opts.dropedge_p < 0.0 || opts.dropedge_p >= 1.0)
    throw ConfigError("train: dropedge_p must lie in [0, 1)");

  const std::vector<std::int32_t> train_labels =
      labels_of(g, train_nodes, "train");
  const std::vector<std::int32_t> valid_labels =
      labels_of(g, valid_nodes, "train(valid)");
  const std::size_t depth = model.config().num_layers;
  const auto valid_mfgs = build_mfgs(g, valid_nodes, depth, {}, 0);

  auto params = model.parameters();
  Adam adam(params, opts.learning_rate);

  auto snapshot = [&params] {
    std::vector<Matrix> s;
    s.reserve(params.size());
    for (const Parameter* p : params) s.push_back(p->value);
    return s;
  };

  TrainResult result;
  result.best_valid_ce = mean_ce(model, g, valid_mfgs, valid_labels,
                                 opts.gamma);
  std::vector<Matrix> best_params = snapshot();

  for (std::size_t epoch = 1; epoch <= opts.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::uint32_t> order = train_nodes;
    Rng shuffle_rng(Rng::derive(opts.seed, "shuffle", epoch));
    shuffle(order, shuffle_rng);

    double sum_ce = 0.0, sum_cp = 0.0, sum_l = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += opts.batch_size) {
      const std::size_t stop =
          std::min(start + opts.batch_size, order.size());
      const std::vector<std::uint32_t> seeds(order.begin() + start,
                                             order.begin() + stop);
      const std::uint64_t cell = epoch * 1000003ull + batches;
      auto mfgs =
          build_mfgs(g, seeds, depth, opts.fanouts,
                     Rng::derive(opts.seed, "mfg", cell));
      if (opts.dropedge_p > 0.0)
        for (std::size_t layer = 0; layer < mfgs.size(); ++layer)
          mfgs[layer] = drop_edges(
              mfgs[layer], opts.dropedge_p,
              Rng::derive(opts.seed, "dropedge", cell * 64 + layer));

      std::vector<std::int32_t> batch_labels;
      batch_labels.reserve(seeds.size());
      for (std::uint32_t v : seeds) batch_labels.push_back(g.labels[v]);

      Tape t;
      Tensor logits = model.forward(t, mfgs, g.features, opts.gamma);
      Tensor l_ce = cross_entropy(logits, batch_labels);
      Tensor l_cp = cp_loss(logits, batch_labels, opts.alpha_train);
      Tensor total =
          opts.lambda == 0.0 ? l_ce : add(l_ce, smul(l_cp, opts.lambda));

      const double ce = l_ce.value()(0, 0);
      const double cp = l_cp.value()(0, 0);
      const double l = total.value()(0, 0);
      if (!std::isfinite(l))
        throw NumericError("train: non-finite loss at epoch " +
                           std::to_string(epoch) + " batch " +
                           std::to_string(batches) + " (ce=" +
                           std::to_string(ce) + ", cp=" + std::to_string(cp) +
                           ")");
      adam.zero_grad();
      t.backward(total);
      adam.step();
      sum_ce += ce;
      sum_cp += cp;
      sum_l += l;
      ++batches;
    }

    const double vce = mean_ce(model, g, valid_mfgs, valid_labels,
                               opts.gamma);
    if (!std::isfinite(vce))
      throw NumericError("train: non-finite validation loss after epoch " +
                         std::to_string(epoch));
    if (vce < result.best_valid_ce) {
      result.best_valid_ce = vce;
      result.best_epoch = epoch;
      best_params = snapshot();
    }

    EpochLog row;
    row.epoch = epoch;
    const double nb = static_cast<double>(batches);
    row.loss_ce = sum_ce / nb;
    row.loss_cp = sum_cp / nb;
    row.loss = sum_l / nb;
    row.valid_ce = vce;
    if (opts.record_timing) {
      row.seconds = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    }
    result.log.push_back(row);
  }

  for (std::size_t i = 0; i < params.size(); ++i)
    params[i]->value = best_params[i];
  return result;
}

void write_training_log(const std::vector<EpochLog>& log,
                        const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "epoch,L_ce,L_cp,L,valid_ce,seconds\n";
  char buf[160];
  for (const EpochLog& row : log) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f,%.6f,%.3f\n",
                  row.epoch, row.loss_ce, row.loss_cp, row.loss,
                  row.valid_ce, row.seconds);
    out << buf;
  }
  if (!out) throw IoError("failed while writing " + path);
}

Matrix predict_probs(GnnModel& model, const AttributedGraph& g,
                     const std::vector<std::uint32_t>& nodes, double gamma,
                     ForwardStats* stats) {
  const auto mfgs = build_mfgs(g, nodes, model.config().num_layers, {}, 0);
  Tape t;
  Tensor logp =
      log_softmax_rows(model.forward(t, mfgs, g.features, gamma, stats));
  Matrix probs = logp.value();
  for (std::size_t i = 0; i < probs.size(); ++i)
    probs[i] = std::exp(probs[i]);
  return probs;
}

double validation_ce(GnnModel& model, const AttributedGraph& g,
                     const std::vector<std::uint32_t>& nodes, double gamma) {
  const auto labels = labels_of(g, nodes, "validation_ce");
  const auto mfgs = build_mfgs(g, nodes, model.config().num_layers, {}, 0);
  return mean_ce(model, g, mfgs, labels, gamma);
}

}  // namespace spargcp
