#include "spargcp/tape.hpp"

#include <string>

namespace spargcp {

const Matrix& Tensor::value() const {
  if (!tape_) throw UsageError("Tensor: handle is empty");
  return tape_->value_of(id_);
}

const Matrix& Tensor::grad() const {
  if (!tape_) throw UsageError("Tensor: handle is empty");
  return tape_->grad_of(id_);
}

Tensor Tape::constant(Matrix value) {
  if (!value.all_finite())
    throw NumericError("constant: non-finite input value");
  Node n;
  n.grad = Matrix(value.rows(), value.cols());
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Tensor(this, nodes_.size() - 1);
}

Tensor Tape::param(Parameter& p) {
  if (!p.value.all_finite())
    throw NumericError("param: non-finite value in parameter " + p.name);
  Node n;
  n.value = p.value;
  n.grad = Matrix(p.value.rows(), p.value.cols());
  n.param = &p;
  nodes_.push_back(std::move(n));
  return Tensor(this, nodes_.size() - 1);
}

Tensor Tape::emplace(const char* op_name, Matrix value, BackwardFn back) {
  if (!value.all_finite())
    throw NumericError(std::string(op_name) + ": non-finite output");
  Node n;
  n.grad = Matrix(value.rows(), value.cols());
  n.value = std::move(value);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Tensor(this, nodes_.size() - 1);
}

void Tape::accumulate(std::size_t id, const Matrix& g) {
  Node& n = nodes_[id];
  add_inplace(n.grad, g);
  n.touched = true;
}

void Tape::accumulate_row(std::size_t id, std::size_t row, const double* g,
                          std::size_t len) {
  Node& n = nodes_[id];
  double* dst = n.grad.data() + row * n.grad.cols();
  for (std::size_t i = 0; i < len; ++i) dst[i] += g[i];
  n.touched = true;
}

void Tape::backward(const Tensor& loss) {
  if (loss.tape() != this)
    throw UsageError("backward: tensor does not belong to this tape");
  if (backward_done_)
    throw UsageError("backward: tape already differentiated");
  const Matrix& root = nodes_[loss.id()].value;
  if (root.size() != 1)
    throw UsageError("backward: root must be a scalar");
  backward_done_ = true;

  nodes_[loss.id()].grad[0] = 1.0;
  nodes_[loss.id()].touched = true;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.touched || !n.back) continue;
    n.back(*this, i);
  }
  for (Node& n : nodes_) {
    if (n.param && n.touched) add_inplace(n.param->grad, n.grad);
  }
}

}  // namespace spargcp
