#include "spargcp/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

namespace spargcp {

namespace {

Tape& tape_of(const Tensor& a, const char* op) {
  if (!a.valid()) throw UsageError(std::string(op) + ": empty tensor");
  return *a.tape();
}

Tape& same_tape(const Tensor& a, const Tensor& b, const char* op) {
  Tape& t = tape_of(a, op);
  if (b.tape() != &t)
    throw UsageError(std::string(op) + ": tensors on different tapes");
  return t;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.value().same_shape(b.value()))
    throw DimensionError(std::string(op) + ": shape mismatch");
}

// Elementwise unary op helper: f(value) and df(value, out_value).
template <typename F, typename DF>
Tensor unary_op(const char* name, const Tensor& a, F f, DF df) {
  Tape& t = tape_of(a, name);
  const Matrix& av = a.value();
  Matrix out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  const std::size_t pa = a.id();
  return t.emplace(name, std::move(out),
                   [pa, df](Tape& tp, std::size_t self) {
                     const Matrix& g = tp.grad_of(self);
                     const Matrix& av = tp.value_of(pa);
                     const Matrix& ov = tp.value_of(self);
                     Matrix ga(g.rows(), g.cols());
                     for (std::size_t i = 0; i < g.size(); ++i)
                       ga[i] = g[i] * df(av[i], ov[i]);
                     tp.accumulate(pa, ga);
                   });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  Tape& t = same_tape(a, b, "matmul");
  Matrix out = matmul_nn(a.value(), b.value());
  const std::size_t pa = a.id(), pb = b.id();
  return t.emplace("matmul", std::move(out),
                   [pa, pb](Tape& tp, std::size_t self) {
                     const Matrix& g = tp.grad_of(self);
                     tp.accumulate(pa, matmul_nt(g, tp.value_of(pb)));
                     tp.accumulate(pb, matmul_tn(tp.value_of(pa), g));
                   });
}

Tensor add(const Tensor& a, const Tensor& b) {
  Tape& t = same_tape(a, b, "add");
  require_same_shape(a, b, "add");
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  Matrix out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  const std::size_t pa = a.id(), pb = b.id();
  return t.emplace("add", std::move(out),
                   [pa, pb](Tape& tp, std::size_t self) {
                     tp.accumulate(pa, tp.grad_of(self));
                     tp.accumulate(pb, tp.grad_of(self));
                   });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  Tape& t = same_tape(a, b, "sub");
  require_same_shape(a, b, "sub");
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  Matrix out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
  const std::size_t pa = a.id(), pb = b.id();
  return t.emplace("sub", std::move(out),
                   [pa, pb](Tape& tp, std::size_t self) {
                     const Matrix& g = tp.grad_of(self);
                     tp.accumulate(pa, g);
                     Matrix gb(g.rows(), g.cols());
                     for (std::size_t i = 0; i < g.size(); ++i) gb[i] = -g[i];
                     tp.accumulate(pb, gb);
                   });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  Tape& t = same_tape(a, b, "mul");
  require_same_shape(a, b, "mul");
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  Matrix out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  const std::size_t pa = a.id(), pb = b.id();
  return t.emplace("mul", std::move(out),
                   [pa, pb](Tape& tp, std::size_t self) {
                     const Matrix& g = tp.grad_of(self);
                     const Matrix& av = tp.value_of(pa);
                     const Matrix& bv = tp.value_of(pb);
                     Matrix ga(g.rows(), g.cols());
                     Matrix gb(g.rows(), g.cols());
                     for (std::size_t i = 0; i < g.size(); ++i) {
                       ga[i] = g[i] * bv[i];
                       gb[i] = g[i] * av[i];
                     }
                     tp.accumulate(pa, ga);
                     tp.accumulate(pb, gb);
                   });
}

Tensor div(const Tensor& a, const Tensor& b) {
  Tape& t = same_tape(a, b, "div");
  require_same_shape(a, b, "div");
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  Matrix out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] / bv[i];
  const std::size_t pa = a.id(), pb = b.id();
  return t.emplace("div", std::move(out),
                   [pa, pb](Tape& tp, std::size_t self) {
                     const Matrix& g = tp.grad_of(self);
                     const Matrix& ov = tp.value_of(self);
                     const Matrix& bv = tp.value_of(pb);
                     Matrix ga(g.rows(), g.cols());
                     Matrix gb(g.rows(), g.cols());
                     for (std::size_t i = 0; i < g.size(); ++i) {
                       ga[i] = g[i] / bv[i];
                       gb[i] = -g[i] * ov[i] / bv[i];
                     }
                     tp.accumulate(pa, ga);
                     tp.accumulate(pb, gb);
                   });
}

Tensor smul(const Tensor& a, double c) {
  Tape& t = tape_of(a, "smul");
  const Matrix& av = a.value();
  Matrix out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * c;
  const std::size_t pa = a.id();
  return t.emplace("smul", std::move(out),
                   [pa, c](Tape& tp, std::size_t self) {
                     const Matrix& g = tp.grad_of(self);
                     Matrix ga(g.rows(), g.cols());
                     for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * c;
                     tp.accumulate(pa, ga);
                   });
}

Tensor add_const(const Tensor& a, Matrix c) {
  Tape& t = tape_of(a, "add_const");
  const Matrix& av = a.value();
  if (!av.same_shape(c)) throw DimensionError("add_const: shape mismatch");
  Matrix out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + c[i];
  const std::size_t pa = a.id();
  return t.emplace("add_const", std::move(out),
                   [pa](Tape& tp, std::size_t self) {
                     tp.accumulate(pa, tp.grad_of(self));
                   });
}

Tensor mul_const(const Tensor& a, Matrix c) {
  Tape& t = tape_of(a, "mul_const");
  const Matrix& av = a.value();
  if (!av.same_shape(c)) throw DimensionError("mul_const: shape mismatch");
  Matrix out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * c[i];
  const std::size_t pa = a.id();
  auto cp = std::make_shared<Matrix>(std::move(c));
  return t.emplace("mul_const", std::move(out),
                   [pa, cp](Tape& tp, std::size_t self) {
                     const Matrix& g = tp.grad_of(self);
                     Matrix ga(g.rows(), g.cols());
                     for (std::size_t i = 0; i < g.size(); ++i)
                       ga[i] = g[i] * (*cp)[i];
                     tp.accumulate(pa, ga);
                   });
}

Tensor scale_rows(const Tensor& a, const Tensor& s) {
  Tape& t = same_tape(a, s, "scale_rows");
  const Matrix& av = a.value();
  const Matrix& sv = s.value();
  if (sv.cols() != 1 || sv.rows() != av.rows())
    throw DimensionError("scale_rows: scale must be rows(a) x 1");
  Matrix out(av.rows(), av.cols());
  for (std::size_t r = 0; r < av.rows(); ++r)
    for (std::size_t c = 0; c < av.cols(); ++c) out(r, c) = av(r, c) * sv(r, 0);
  const std::size_t pa = a.id(), ps = s.id();
  return t.emplace("scale_rows", std::move(out),
                   [pa, ps](Tape& tp, std::size_t self) {
                     const Matrix& g = tp.grad_of(self);
                     const Matrix& av = tp.value_of(pa);
                     const Matrix& sv = tp.value_of(ps);
                     Matrix ga(g.rows(), g.cols());
                     Matrix gs(g.rows(), 1);
                     for (std::size_t r = 0; r < g.rows(); ++r) {
                       double acc = 0.0;
                       for (std::size_t c = 0; c < g.cols(); ++c) {
                         ga(r, c) = g(r, c) * sv(r, 0);
                         acc += g(r, c) * av(r, c);
                       }
                       gs(r, 0) = acc;
                     }
                     tp.accumulate(pa, ga);
                     tp.accumulate(ps, gs);
                   });
}

Tensor scale_rows_const(const Tensor& a, std::vector<double> s) {
  Tape& t = tape_of(a, "scale_rows_const");
  const Matrix& av = a.value();
  if (s.size() != av.rows())
    throw DimensionError("scale_rows_const: factor count != rows");
  Matrix out(av.rows(), av.cols());
  for (std::size_t r = 0; r < av.rows(); ++r)
    for (std::size_t c = 0; c < av.cols(); ++c) out(r, c) = av(r, c) * s[r];
  const std::size_t pa = a.id();
  auto sp = std::make_shared<std::vector<double>>(std::move(s));
  return t.emplace("scale_rows_const", std::move(out),
                   [pa, sp](Tape& tp, std::size_t self) {
                     const Matrix& g = tp.grad_of(self);
                     Matrix ga(g.rows(), g.cols());
                     for (std::size_t r = 0; r < g.rows(); ++r)
                       for (std::size_t c = 0; c < g.cols(); ++c)
                         ga(r, c) = g(r, c) * (*sp)[r];
                     tp.accumulate(pa, ga);
                   });
}

Tensor add_bias(const Tensor& a, const Tensor& bias) {
  Tape& t = same_tape(a, bias, "add_bias");
  const Matrix& av = a.value();
  const Matrix& bv = bias.value();
  if (bv.rows() != 1 || bv.cols() != av.cols())
    throw DimensionError("add_bias: bias must be 1 x cols(a)");
  Matrix out(av.rows(), av.cols());
  for (std::size_t r = 0; r < av.rows(); ++r)
    for (std::size_t c = 0; c < av.cols(); ++c) out(r, c) = av(r, c) + bv(0, c);
  const std::size_t pa = a.id(), pb = bias.id();
  return t.emplace("add_bias", std::move(out),
                   [pa, pb](Tape& tp, std::size_t self) {
                     const Matrix& g = tp.grad_of(self);
                     tp.accumulate(pa, g);
                     Matrix gb(1, g.cols());
                     for (std::size_t r = 0; r < g.rows(); ++r)
                       for (std::size_t c = 0; c < g.cols(); ++c)
                         gb(0, c) += g(r, c);
                     tp.accumulate(pb, gb);
                   });
}

Tensor relu(const Tensor& a) {
  return unary_op("relu", a,
                  [](double x) { return x > 0.0 ? x : 0.0; },
                  [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double negative_slope) {
  return unary_op(
      "leaky_relu", a,
      [negative_slope](double x) { return x > 0.0 ? x : negative_slope * x; },
      [negative_slope](double x, double) {
        return x > 0.0 ? 1.0 : negative_slope;
      });
}

Tensor elu(const Tensor& a) {
  return unary_op("elu", a,
                  [](double x) { return x > 0.0 ? x : std::expm1(x); },
                  [](double x, double y) { return x > 0.0 ? 1.0 : y + 1.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op("sigmoid", a,
                  [](double x) {
                    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
                    const double e = std::exp(x);
                    return e / (1.0 + e);
                  },
                  [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& a) {
  return unary_op("exp", a, [](double x) { return std::exp(x); },
                  [](double, double y) { return y; });
}

Tensor log_softmax_rows(const Tensor& a) {
  Tape& t = tape_of(a, "log_softmax_rows");
  const Matrix& av = a.value();
  if (av.cols() == 0)
    throw DimensionError("log_softmax_rows: zero columns");
  Matrix out(av.rows(), av.cols());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    double m = av(r, 0);
    for (std::size_t c = 1; c < av.cols(); ++c) m = std::max(m, av(r, c));
    double z = 0.0;
    for (std::size_t c = 0; c < av.cols(); ++c) z += std::exp(av(r, c) - m);
    const double lz = m + std::log(z);
    for (std::size_t c = 0; c < av.cols(); ++c) out(r, c) = av(r, c) - lz;
  }
  const std::size_t pa = a.id();
  return t.emplace("log_softmax_rows", std::move(out),
                   [pa](Tape& tp, std::size_t self) {
                     const Matrix& g = tp.grad_of(self);
                     const Matrix& ov = tp.value_of(self);
                     Matrix ga(g.rows(), g.cols());
                     for (std::size_t r = 0; r < g.rows(); ++r) {
                       double gsum = 0.0;
                       for (std::size_t c = 0; c < g.cols(); ++c)
                         gsum += g(r, c);
                       for (std::size_t c = 0; c < g.cols(); ++c)
                         ga(r, c) = g(r, c) - std::exp(ov(r, c)) * gsum;
                     }
                     tp.accumulate(pa, ga);
                   });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  Tape& t = same_tape(a, b, "concat_cols");
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.rows() != bv.rows())
    throw DimensionError("concat_cols: row counts disagree");
  Matrix out(av.rows(), av.cols() + bv.cols());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    for (std::size_t c = 0; c < av.cols(); ++c) out(r, c) = av(r, c);
    for (std::size_t c = 0; c < bv.cols(); ++c)
      out(r, av.cols() + c) = bv(r, c);
  }
  const std::size_t pa = a.id(), pb = b.id();
  const std::size_t acols = av.cols(), bcols = bv.cols();
  return t.emplace("concat_cols", std::move(out),
                   [pa, pb, acols, bcols](Tape& tp, std::size_t self) {
                     const Matrix& g = tp.grad_of(self);
                     Matrix ga(g.rows(), acols);
                     Matrix gb(g.rows(), bcols);
                     for (std::size_t r = 0; r < g.rows(); ++r) {
                       for (std::size_t c = 0; c < acols; ++c)
                         ga(r, c) = g(r, c);
                       for (std::size_t c = 0; c < bcols; ++c)
                         gb(r, c) = g(r, acols + c);
                     }
                     tp.accumulate(pa, ga);
                     tp.accumulate(pb, gb);
                   });
}

Tensor row_gather(const Tensor& a, std::vector<std::size_t> rows) {
  Tape& t = tape_of(a, "row_gather");
  const Matrix& av = a.value();
  for (std::size_t r : rows)
    if (r >= av.rows())
      throw ValidationError("row_gather: row index out of range");
  Matrix out(rows.size(), av.cols());
  for (std::size_t j = 0; j < rows.size(); ++j)
    for (std::size_t c = 0; c < av.cols(); ++c) out(j, c) = av(rows[j], c);
  const std::size_t pa = a.id();
  auto rp = std::make_shared<std::vector<std::size_t>>(std::move(rows));
  return t.emplace("row_gather", std::move(out),
                   [pa, rp](Tape& tp, std::size_t self) {
                     const Matrix& g = tp.grad_of(self);
                     for (std::size_t j = 0; j < rp->size(); ++j)
                       tp.accumulate_row(pa, (*rp)[j],
                                         g.data() + j * g.cols(), g.cols());
                   });
}

Tensor row_scatter(const Tensor& v, std::vector<std::size_t> rows,
                   std::size_t num_rows, double fill) {
  Tape& t = tape_of(v, "row_scatter");
  const Matrix& vv = v.value();
  if (rows.size() != vv.rows())
    throw DimensionError("row_scatter: index count != rows(v)");
  std::vector<bool> seen(num_rows, false);
  for (std::size_t r : rows) {
    if (r >= num_rows)
      throw ValidationError("row_scatter: row index out of range");
    if (seen[r]) throw ValidationError("row_scatter: duplicate row index");
    seen[r] = true;
  }
  Matrix out(num_rows, vv.cols(), fill);
  for (std::size_t j = 0; j < rows.size(); ++j)
    for (std::size_t c = 0; c < vv.cols(); ++c) out(rows[j], c) = vv(j, c);
  const std::size_t pv = v.id();
  auto rp = std::make_shared<std::vector<std::size_t>>(std::move(rows));
  return t.emplace("row_scatter", std::move(out),
                   [pv, rp](Tape& tp, std::size_t self) {
                     const Matrix& g = tp.grad_of(self);
                     Matrix gv(rp->size(), g.cols());
                     for (std::size_t j = 0; j < rp->size(); ++j)
                       for (std::size_t c = 0; c < g.cols(); ++c)
                         gv(j, c) = g((*rp)[j], c);
                     tp.accumulate(pv, gv);
                   });
}

Tensor segment_sum(const Tensor& messages, std::vector<std::uint32_t> dest,
                   std::size_t num_segments) {
  Tape& t = tape_of(messages, "segment_sum");
  const Matrix& mv = messages.value();
  if (dest.size() != mv.rows())
    throw DimensionError("segment_sum: dest count != message rows");
  for (std::uint32_t d : dest)
    if (d >= num_segments)
      throw ValidationError("segment_sum: dest index out of range");
  Matrix out(num_segments, mv.cols());
  for (std::size_t j = 0; j < mv.rows(); ++j)
    for (std::size_t c = 0; c < mv.cols(); ++c) out(dest[j], c) += mv(j, c);
  const std::size_t pm = messages.id();
  auto dp = std::make_shared<std::vector<std::uint32_t>>(std::move(dest));
  return t.emplace("segment_sum", std::move(out),
                   [pm, dp](Tape& tp, std::size_t self) {
                     const Matrix& g = tp.grad_of(self);
                     Matrix gm(dp->size(), g.cols());
                     for (std::size_t j = 0; j < dp->size(); ++j)
                       for (std::size_t c = 0; c < g.cols(); ++c)
                         gm(j, c) = g((*dp)[j], c);
                     tp.accumulate(pm, gm);
                   });
}

Tensor row_sums(const Tensor& a) {
  Tape& t = tape_of(a, "row_sums");
  const Matrix& av = a.value();
  Matrix out(av.rows(), 1);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < av.cols(); ++c) s += av(r, c);
    out(r, 0) = s;
  }
  const std::size_t pa = a.id();
  return t.emplace("row_sums", std::move(out),
                   [pa](Tape& tp, std::size_t self) {
                     const Matrix& g = tp.grad_of(self);
                     const Matrix& av = tp.value_of(pa);
                     Matrix ga(av.rows(), av.cols());
                     for (std::size_t r = 0; r < av.rows(); ++r)
                       for (std::size_t c = 0; c < av.cols(); ++c)
                         ga(r, c) = g(r, 0);
                     tp.accumulate(pa, ga);
                   });
}

Tensor sum_all(const Tensor& a) {
  Tape& t = tape_of(a, "sum_all");
  const Matrix& av = a.value();
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += av[i];
  Matrix out(1, 1);
  out(0, 0) = s;
  const std::size_t pa = a.id();
  return t.emplace("sum_all", std::move(out),
                   [pa](Tape& tp, std::size_t self) {
                     const double g = tp.grad_of(self)(0, 0);
                     const Matrix& av = tp.value_of(pa);
                     Matrix ga(av.rows(), av.cols(), g);
                     tp.accumulate(pa, ga);
                   });
}

std::size_t quantile_order_index(std::size_t k, double q) {
  if (k == 0) throw ValidationError("quantile: empty input");
  if (!(q > 0.0) || q > 1.0)
    throw ValidationError("quantile: q must lie in (0, 1]");
  const double x = snap_integer(q * static_cast<double>(k));
  long long j = static_cast<long long>(std::ceil(x));
  j = std::max(1ll, std::min(j, static_cast<long long>(k)));
  return static_cast<std::size_t>(j - 1);
}

Tensor quantile_value(const Tensor& x, double q) {
  Tape& t = tape_of(x, "quantile_value");
  const Matrix& xv = x.value();
  const std::size_t k = xv.size();
  const std::size_t pos = quantile_order_index(k, q);
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return xv[i] < xv[j]; });
  const std::size_t sel = order[pos];
  Matrix out(1, 1);
  out(0, 0) = xv[sel];
  const std::size_t px = x.id();
  return t.emplace("quantile_value", std::move(out),
                   [px, sel](Tape& tp, std::size_t self) {
                     const double g = tp.grad_of(self)(0, 0);
                     const Matrix& xv = tp.value_of(px);
                     Matrix gx(xv.rows(), xv.cols());
                     gx[sel] = g;
                     tp.accumulate(px, gx);
                   });
}

Tensor cross_entropy(const Tensor& logits,
                     const std::vector<std::int32_t>& labels) {
  // Copy the shape up front: emplacing downstream nodes can reallocate the
  // tape's node storage and invalidate references into it.
  const std::size_t rows = logits.value().rows();
  const std::size_t cols = logits.value().cols();
  if (rows == 0) throw ValidationError("cross_entropy: empty batch");
  if (labels.size() != rows)
    throw DimensionError("cross_entropy: label count != logit rows");
  Matrix onehot(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::int32_t y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= cols)
      throw ValidationError("cross_entropy: label out of range");
    onehot(r, static_cast<std::size_t>(y)) = 1.0;
  }
  Tensor ls = log_softmax_rows(logits);
  Tensor picked = row_sums(mul_const(ls, std::move(onehot)));
  return smul(sum_all(picked), -1.0 / static_cast<double>(rows));
}

}  // namespace spargcp
