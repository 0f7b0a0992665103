#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "spargcp/matrix.hpp"

namespace spargcp {

class Tape;

/// A named trainable matrix. Lives outside any tape; gradients accumulate
/// into `grad` when a tape that references it runs backward.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)),
        grad(value.rows(), value.cols()) {}

  void zero_grad() { grad.fill(0.0); }
};

/// Handle to a node on a Tape. Cheap to copy; only valid while the tape
/// that produced it is alive.
class Tensor {
 public:
  Tensor() = default;

  const Matrix& value() const;
  const Matrix& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool valid() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  friend class Tape;
  Tensor(Tape* t, std::size_t id) : tape_(t), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode differentiation tape. Nodes are recorded in topological
/// order by construction; backward() sweeps them once in reverse.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf holding a constant; receives no gradient of interest.
  Tensor constant(Matrix value);

  /// Leaf bound to a parameter; after backward(), the node gradient is
  /// added into p.grad.
  Tensor param(Parameter& p);

  /// Reverse accumulation from a scalar root. May be called once per tape.
  void backward(const Tensor& loss);

  std::size_t num_nodes() const { return nodes_.size(); }

  // --- used by op implementations ---
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;
  Tensor emplace(const char* op_name, Matrix value, BackwardFn back);
  const Matrix& value_of(std::size_t id) const { return nodes_[id].value; }
  const Matrix& grad_of(std::size_t id) const { return nodes_[id].grad; }
  /// Accumulate `g` into node `id`'s gradient and mark it live.
  void accumulate(std::size_t id, const Matrix& g);
  /// Scatter-style accumulation into a single row of node `id`'s gradient.
  void accumulate_row(std::size_t id, std::size_t row, const double* g,
                      std::size_t len);
  bool touched(std::size_t id) const { return nodes_[id].touched; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    BackwardFn back;         // empty for leaves
    Parameter* param = nullptr;
    bool touched = false;
  };
  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace spargcp
