#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "spargcp/mfg.hpp"
#include "spargcp/sparsifier.hpp"
#include "spargcp/tape.hpp"

namespace spargcp {

enum class Backbone { gcn, gat };

Backbone backbone_from_string(const std::string& name);

struct GcnLayer {
  Parameter weight;  // d_in x d_out
  Parameter bias;    // 1 x d_out
};

inline constexpr std::size_t kGatHeads = 2;

struct GatLayer {
  std::array<Parameter, kGatHeads> weight;    // d_in x d_out per head
  std::array<Parameter, kGatHeads> attn_src;  // d_out x 1
  std::array<Parameter, kGatHeads> attn_dst;  // d_out x 1
  double negative_slope = 0.2;
};

struct EdgeScorer {
  Parameter w1;  // 2*d_in x hidden
  Parameter b1;  // 1 x hidden
  Parameter w2;  // hidden x 1
  Parameter b2;  // 1 x 1
};

/// Symmetric-normalized graph convolution over one MFG. The destination
/// factor 1/sqrt(#in-edges including self) is recomputed from the MFG's
/// current edge set; the source factor 1/sqrt(out-degree + 1) reads the
/// graph out-degrees stored on the MFG. `edge_weights` (one column row per
/// MFG edge) multiplies each message when provided.
Tensor gcn_forward(Tape& t, GcnLayer& layer, const MessageFlowGraph& mfg,
                   const Tensor& h_prev, const Tensor* edge_weights,
                   bool apply_activation);

/// Two-head attention layer; per right node the coefficients over its
/// in-edges (self included) softmax-normalize to 1. Provided edge_weights
/// multiply the unnormalized attention mass. Head outputs are averaged;
/// hidden layers use ELU.
Tensor gat_forward(Tape& t, GatLayer& layer, const MessageFlowGraph& mfg,
                   const Tensor& h_prev, const Tensor* edge_weights,
                   bool apply_activation);

/// One sigmoid score per non-self edge of the MFG, in edge order:
/// sigmoid(W2 * relu(W1 * [h(u) ; h(v)] + b1) + b2).
Tensor score_edges(Tape& t, EdgeScorer& scorer, const MessageFlowGraph& mfg,
                   const Tensor& h_prev);

struct ModelConfig {
  Backbone backbone = Backbone::gcn;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 16;
  std::size_t output_dim = 0;
  std::size_t num_layers = 2;
  bool with_scorers = false;
  double gat_negative_slope = 0.2;
};

struct ForwardStats {
  std::size_t nonself_edges = 0;
  std::size_t dropped_edges = 0;
  double edge_drop_fraction() const {
    return nonself_edges == 0
               ? 0.0
               : static_cast<double>(dropped_edges) /
                     static_cast<double>(nonself_edges);
  }
};

/// The full node-classification model: a stack of GNN layers and, when
/// sparsification is on, one edge scorer per layer. Parameter storage is
/// fixed at construction so Parameter pointers stay stable for training.
class GnnModel {
 public:
  GnnModel(const ModelConfig& cfg, std::uint64_t init_seed);

  /// Run the stack over per-layer MFGs; returns |seeds| x output_dim
  /// logits. With scorers, each layer scores its non-self edges, drops the
  /// lowest gamma fraction, and weights surviving messages by their scores.
  Tensor forward(Tape& t, const std::vector<MessageFlowGraph>& mfgs,
                 const Matrix& features, double gamma,
                 ForwardStats* stats = nullptr);

  std::vector<Parameter*> parameters();
  const ModelConfig& config() const { return cfg_; }

 private:
  ModelConfig cfg_;
  std::vector<GcnLayer> gcn_layers_;
  std::vector<GatLayer> gat_layers_;
  std::vector<EdgeScorer> scorers_;
};

}  // namespace spargcp
