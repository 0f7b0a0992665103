#include "spargcp/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spargcp/common.hpp"
#include "spargcp/ops.hpp"

namespace spargcp {

namespace {

Matrix xavier_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  const double limit =
      std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i)
    m[i] = (2.0 * rng.uniform01() - 1.0) * limit;
  return m;
}

std::vector<std::size_t> as_size_t(const std::vector<std::uint32_t>& v) {
  return std::vector<std::size_t>(v.begin(), v.end());
}

/// 1/sqrt((#in-edges of dest incl. self) * (graph out-degree of src + 1))
/// per MFG edge.
std::vector<double> gcn_edge_norms(const MessageFlowGraph& mfg) {
  std::vector<double> in_count(mfg.right_nodes.size(), 0.0);
  for (std::size_t e = 0; e < mfg.num_edges(); ++e)
    in_count[mfg.edge_right[e]] += 1.0;
  std::vector<double> norm(mfg.num_edges());
  for (std::size_t e = 0; e < mfg.num_edges(); ++e) {
    const double dl =
        static_cast<double>(mfg.left_graph_out_degree[mfg.edge_left[e]]) + 1.0;
    norm[e] = 1.0 / std::sqrt(dl * in_count[mfg.edge_right[e]]);
  }
  return norm;
}

void check_alignment(const MessageFlowGraph& mfg, const Tensor& h_prev,
                     const Tensor* edge_weights, const char* op) {
  if (h_prev.rows() != mfg.left_nodes.size())
    throw DimensionError(std::string(op) + ": h_prev rows != MFG left nodes");
  if (edge_weights &&
      (edge_weights->rows() != mfg.num_edges() || edge_weights->cols() != 1))
    throw DimensionError(std::string(op) +
                         ": edge_weights must be one column row per edge");
}

}  // namespace

Backbone backbone_from_string(const std::string& name) {
  if (name == "gcn") return Backbone::gcn;
  if (name == "gat") return Backbone::gat;
  throw ConfigError("unknown backbone: " + name);
}

Tensor gcn_forward(Tape& t, GcnLayer& layer, const MessageFlowGraph& mfg,
                   const Tensor& h_prev, const Tensor* edge_weights,
                   bool apply_activation) {
  check_alignment(mfg, h_prev, edge_weights, "gcn_forward");
  Tensor hw = matmul(h_prev, t.param(layer.weight));
  Tensor messages = row_gather(hw, as_size_t(mfg.edge_left));
  messages = scale_rows_const(messages, gcn_edge_norms(mfg));
  if (edge_weights) messages = scale_rows(messages, *edge_weights);
  Tensor agg =
      segment_sum(messages, mfg.edge_right, mfg.right_nodes.size());
  Tensor out = add_bias(agg, t.param(layer.bias));
  return apply_activation ? relu(out) : out;
}

Tensor gat_forward(Tape& t, GatLayer& layer, const MessageFlowGraph& mfg,
                   const Tensor& h_prev, const Tensor* edge_weights,
                   bool apply_activation) {
  check_alignment(mfg, h_prev, edge_weights, "gat_forward");
  const std::size_t num_right = mfg.right_nodes.size();
  const auto edge_left = as_size_t(mfg.edge_left);
  const auto edge_right_rows = as_size_t(mfg.edge_right);

  Tensor head_sum;
  for (std::size_t k = 0; k < kGatHeads; ++k) {
    Tensor hw = matmul(h_prev, t.param(layer.weight[k]));
    Tensor a_src = matmul(hw, t.param(layer.attn_src[k]));  // left x 1
    // Right nodes are the prefix of the left list, so their transformed
    // states are the first rows of hw.
    std::vector<std::size_t> right_prefix(num_right);
    for (std::size_t j = 0; j < num_right; ++j) right_prefix[j] = j;
    Tensor a_dst = matmul(row_gather(hw, right_prefix),
                          t.param(layer.attn_dst[k]));  // right x 1

    Tensor logits = leaky_relu(add(row_gather(a_src, edge_left),
                                   row_gather(a_dst, edge_right_rows)),
                               layer.negative_slope);

    // Detached per-destination max shift keeps exp in range without
    // entering the gradient.
    std::vector<double> seg_max(num_right,
                                -std::numeric_limits<double>::infinity());
    const Matrix& lv = logits.value();
    for (std::size_t e = 0; e < mfg.num_edges(); ++e)
      seg_max[mfg.edge_right[e]] =
          std::max(seg_max[mfg.edge_right[e]], lv(e, 0));
    Matrix shift(mfg.num_edges(), 1);
    for (std::size_t e = 0; e < mfg.num_edges(); ++e)
      shift(e, 0) = -seg_max[mfg.edge_right[e]];

    Tensor mass = exp(add_const(logits, std::move(shift)));
    if (edge_weights) mass = mul(mass, *edge_weights);
    Tensor denom = segment_sum(mass, mfg.edge_right, num_right);
    Tensor coeff = div(mass, row_gather(denom, edge_right_rows));

    Tensor messages = scale_rows(row_gather(hw, edge_left), coeff);
    Tensor head_out = segment_sum(messages, mfg.edge_right, num_right);
    head_sum = k == 0 ? head_out : add(head_sum, head_out);
  }
  Tensor out = smul(head_sum, 1.0 / static_cast<double>(kGatHeads));
  return apply_activation ? elu(out) : out;
}

Tensor score_edges(Tape& t, EdgeScorer& scorer, const MessageFlowGraph& mfg,
                   const Tensor& h_prev) {
  if (h_prev.rows() != mfg.left_nodes.size())
    throw DimensionError("score_edges: h_prev rows != MFG left nodes");
  std::vector<std::size_t> src_rows, dst_rows;
  for (std::size_t e = 0; e < mfg.num_edges(); ++e) {
    if (mfg.is_self_edge(e)) continue;
    src_rows.push_back(mfg.edge_left[e]);
    dst_rows.push_back(mfg.edge_right[e]);  // right prefix shares row ids
  }
  Tensor pair = concat_cols(row_gather(h_prev, src_rows),
                            row_gather(h_prev, dst_rows));
  Tensor hidden = relu(add_bias(matmul(pair, t.param(scorer.w1)),
                                t.param(scorer.b1)));
  return sigmoid(
      add_bias(matmul(hidden, t.param(scorer.w2)), t.param(scorer.b2)));
}

GnnModel::GnnModel(const ModelConfig& cfg, std::uint64_t init_seed)
    : cfg_(cfg) {
  if (cfg.input_dim == 0 || cfg.output_dim == 0 || cfg.num_layers == 0 ||
      cfg.hidden_dim == 0)
    throw ConfigError("GnnModel: dimensions and layer count must be positive");

  for (std::size_t i = 0; i < cfg.num_layers; ++i) {
    const std::size_t d_in = i == 0 ? cfg.input_dim : cfg.hidden_dim;
    const std::size_t d_out =
        i + 1 == cfg.num_layers ? cfg.output_dim : cfg.hidden_dim;
    const std::string prefix = "layer" + std::to_string(i);
    Rng rng(Rng::derive(init_seed, "layer", i));
    if (cfg.backbone == Backbone::gcn) {
      GcnLayer layer;
      layer.weight = Parameter(prefix + ".weight",
                               xavier_uniform(d_in, d_out, rng));
      layer.bias = Parameter(prefix + ".bias", Matrix(1, d_out));
      gcn_layers_.push_back(std::move(layer));
    } else {
      GatLayer layer;
      layer.negative_slope = cfg.gat_negative_slope;
      for (std::size_t k = 0; k < kGatHeads; ++k) {
        const std::string head = prefix + ".head" + std::to_string(k);
        layer.weight[k] =
            Parameter(head + ".weight", xavier_uniform(d_in, d_out, rng));
        layer.attn_src[k] =
            Parameter(head + ".attn_src", xavier_uniform(d_out, 1, rng));
        layer.attn_dst[k] =
            Parameter(head + ".attn_dst", xavier_uniform(d_out, 1, rng));
      }
      gat_layers_.push_back(std::move(layer));
    }
  }

  if (cfg.with_scorers) {
    for (std::size_t i = 0; i < cfg.num_layers; ++i) {
      const std::size_t d_in = i == 0 ? cfg.input_dim : cfg.hidden_dim;
      const std::string prefix = "scorer" + std::to_string(i);
      Rng rng(Rng::derive(init_seed, "scorer", i));
      EdgeScorer s;
      s.w1 = Parameter(prefix + ".w1",
                       xavier_uniform(2 * d_in, cfg.hidden_dim, rng));
      s.b1 = Parameter(prefix + ".b1", Matrix(1, cfg.hidden_dim));
      s.w2 = Parameter(prefix + ".w2", xavier_uniform(cfg.hidden_dim, 1, rng));
      s.b2 = Parameter(prefix + ".b2", Matrix(1, 1));
      scorers_.push_back(std::move(s));
    }
  }
}

Tensor GnnModel::forward(Tape& t, const std::vector<MessageFlowGraph>& mfgs,
                         const Matrix& features, double gamma,
                         ForwardStats* stats) {
  if (mfgs.size() != cfg_.num_layers)
    throw DimensionError("forward: MFG count != layer count");
  if (features.cols() != cfg_.input_dim)
    throw DimensionError("forward: feature dim != model input dim");

  const auto& first = mfgs.front();
  Matrix h0(first.left_nodes.size(), features.cols());
  for (std::size_t j = 0; j < first.left_nodes.size(); ++j)
    for (std::size_t c = 0; c < features.cols(); ++c)
      h0(j, c) = features(first.left_nodes[j], c);
  Tensor h = t.constant(std::move(h0));

  for (std::size_t i = 0; i < cfg_.num_layers; ++i) {
    const bool last = i + 1 == cfg_.num_layers;
    const MessageFlowGraph* mfg = &mfgs[i];
    SparsifyResult sparsified;
    const Tensor* weights = nullptr;
    if (cfg_.with_scorers) {
      Tensor scores = score_edges(t, scorers_[i], *mfg, h);
      sparsified = sparsify_mfg(*mfg, scores, gamma);
      mfg = &sparsified.mfg;
      weights = &sparsified.edge_weights;
      if (stats) {
        stats->nonself_edges += sparsified.num_nonself_input;
        stats->dropped_edges += sparsified.num_dropped;
      }
    } else if (stats) {
      stats->nonself_edges += mfgs[i].num_nonself_edges();
    }
    h = cfg_.backbone == Backbone::gcn
            ? gcn_forward(t, gcn_layers_[i], *mfg, h, weights, !last)
            : gat_forward(t, gat_layers_[i], *mfg, h, weights, !last);
  }
  return h;
}

std::vector<Parameter*> GnnModel::parameters() {
  std::vector<Parameter*> out;
  for (auto& layer : gcn_layers_) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  for (auto& layer : gat_layers_) {
    for (std::size_t k = 0; k < kGatHeads; ++k) {
      out.push_back(&layer.weight[k]);
      out.push_back(&layer.attn_src[k]);
      out.push_back(&layer.attn_dst[k]);
    }
  }
  for (auto& s : scorers_) {
    out.push_back(&s.w1);
    out.push_back(&s.b1);
    out.push_back(&s.w2);
    out.push_back(&s.b2);
  }
  return out;
}

}  // namespace spargcp
