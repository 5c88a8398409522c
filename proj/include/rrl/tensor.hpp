#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rrl/error.hpp"

namespace rrl {

// Dense row-major tensor of 64-bit reals. Rank 0 is a scalar (size 1).
class Tensor {
 public:
  Tensor() : data_(1, 0.0) {}
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor from_vector(std::vector<double> v);
  static Tensor from_matrix(std::size_t rows, std::size_t cols,
                            std::vector<double> v);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& at(std::size_t i) { return data_[i]; }
  double at(std::size_t i) const { return data_[i]; }
  double& at2(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at2(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double scalar_value() const;

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  bool all_finite() const;
  void check_finite(const char* what) const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// Named trainable tensor. Names are unique within a model.
struct Parameter {
  std::string name;
  Tensor value;
  bool trainable = true;
};

// Reverse-mode tape. Nodes are appended in topological order; a node carries
// its forward value and a closure that routes its output gradient to its
// inputs. One tape per training step, single-threaded.
class Tape {
 public:
  using NodeId = std::int32_t;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  NodeId constant(Tensor v);
  NodeId leaf(Tensor v, bool requires_grad);
  // Caches per parameter so repeated lookups share one leaf.
  NodeId param(Parameter& p);

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }
  std::size_t node_count() const { return nodes_.size(); }

  // Primitives. Every call records a node; gradients come from backward().
  NodeId add(NodeId a, NodeId b);  // same shape, or b broadcast over last dim
  NodeId mul(NodeId a, NodeId b);  // elementwise, same shape
  NodeId div(NodeId a, NodeId b);  // same shape, or b scalar
  NodeId neg(NodeId a);
  NodeId scale(NodeId a, double s);
  NodeId matmul(NodeId a, NodeId b);  // (m,k)x(k,n), (m,k)x(k), (k)x(k,n)
  NodeId transpose(NodeId a);
  NodeId tanh(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId exp(NodeId a);
  NodeId log(NodeId a);
  NodeId square(NodeId a);
  NodeId softmax(NodeId a);       // last dim, max-subtracted
  NodeId logsumexp(NodeId a);     // reduce last dim
  NodeId l2_normalize(NodeId a);  // vector; zero vector raises
  NodeId concat(NodeId a, NodeId b);  // last dim
  NodeId slice(NodeId a, std::size_t start, std::size_t len);  // first dim
  NodeId row(NodeId a, std::size_t r);  // matrix row as vector
  NodeId stack(std::span<const NodeId> parts);  // vectors->matrix, scalars->vector
  NodeId sum(NodeId a);   // all elements -> scalar
  NodeId mean(NodeId a);  // all elements -> scalar
  NodeId dot(NodeId a, NodeId b);  // vectors -> scalar
  NodeId max_with_index(NodeId a, std::size_t* argmax_out);  // vector -> scalar
  NodeId gather_rows(NodeId table, std::vector<std::size_t> ids);

  // Backpropagate from a scalar root. Gradients accumulate only into nodes
  // that require grad; everything else is skipped.
  void backward(NodeId root);

  // Gradient of the last backward() w.r.t. a node; zeros if unreached.
  Tensor grad_or_zero(NodeId id) const;
  bool has_grad(NodeId id) const;

 private:
  struct Node {
    Tensor value;
    bool requires_grad = false;
    std::function<void(Tape&)> backprop;  // null for leaves
  };

  NodeId push(Tensor value, bool requires_grad, std::function<void(Tape&)> bp);
  void accumulate(NodeId id, const Tensor& delta);
  const Tensor& grad_ref(NodeId id) const { return grads_[id]; }

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  std::vector<bool> grad_set_;
  std::map<const Parameter*, NodeId> param_nodes_;
};

// Central-difference gradient verification.
struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  std::size_t worst_coord = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// f(nullptr) returns the loss; f(&grads) also fills analytic gradients keyed
// by parameter name. f must be deterministic. Relative error per coordinate
// is |analytic - numeric| / max(1e-8, |numeric|).
using ScalarFn = std::function<double(std::map<std::string, Tensor>*)>;

GradCheckReport finite_difference_check(const ScalarFn& f,
                                        std::span<Parameter* const> params,
                                        double eps = 1e-5);

}  // namespace rrl
