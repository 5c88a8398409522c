#include "rrl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace rrl {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  require(data_.size() == product(shape_),
          "tensor: data length does not match shape " + shape_str(shape_));
}

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.data_ = {v};
  return t;
}

Tensor Tensor::from_vector(std::vector<double> v) {
  std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

Tensor Tensor::from_matrix(std::size_t rows, std::size_t cols,
                           std::vector<double> v) {
  return Tensor({rows, cols}, std::move(v));
}

std::size_t Tensor::rows() const {
  require(rank() == 2, "tensor: rows() on non-matrix");
  return shape_[0];
}

std::size_t Tensor::cols() const {
  require(rank() == 2, "tensor: cols() on non-matrix");
  return shape_[1];
}

double Tensor::scalar_value() const {
  require(size() == 1, "tensor: scalar_value() on non-scalar of shape " +
                           shape_str(shape_));
  return data_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

void Tensor::check_finite(const char* what) const {
  if (!all_finite()) fail(std::string("non-finite values in ") + what);
}

// ---------------------------------------------------------------- tape ----

Tape::NodeId Tape::push(Tensor value, bool requires_grad,
                        std::function<void(Tape&)> bp) {
  nodes_.push_back(Node{std::move(value), requires_grad, std::move(bp)});
  grads_.emplace_back();
  grad_set_.push_back(false);
  return static_cast<NodeId>(nodes_.size() - 1);
}

Tape::NodeId Tape::constant(Tensor v) { return push(std::move(v), false, nullptr); }

Tape::NodeId Tape::leaf(Tensor v, bool requires_grad) {
  return push(std::move(v), requires_grad, nullptr);
}

Tape::NodeId Tape::param(Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return it->second;
  NodeId id = leaf(p.value, p.trainable);
  param_nodes_.emplace(&p, id);
  return id;
}

void Tape::accumulate(NodeId id, const Tensor& delta) {
  if (!nodes_[id].requires_grad) return;
  if (!grad_set_[id]) {
    grads_[id] = Tensor(nodes_[id].value.shape());
    grad_set_[id] = true;
  }
  double* g = grads_[id].data();
  const double* d = delta.data();
  for (std::size_t i = 0; i < delta.size(); ++i) g[i] += d[i];
}

bool Tape::has_grad(NodeId id) const { return grad_set_[id]; }

Tensor Tape::grad_or_zero(NodeId id) const {
  if (grad_set_[id]) return grads_[id];
  return Tensor(nodes_[id].value.shape());
}

void Tape::backward(NodeId root) {
  require(nodes_[root].value.size() == 1, "backward: root must be scalar");
  std::fill(grad_set_.begin(), grad_set_.end(), false);
  if (!nodes_[root].requires_grad) return;  // nothing trainable reachable
  grads_[root] = Tensor(nodes_[root].value.shape());
  grads_[root].at(0) = 1.0;
  grad_set_[root] = true;
  for (NodeId id = root; id >= 0; --id) {
    if (grad_set_[id] && nodes_[id].backprop) nodes_[id].backprop(*this);
  }
}

// ----------------------------------------------------------- primitives ----

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  bool broadcast = false;
  if (!va.same_shape(vb)) {
    broadcast = vb.rank() == 1 && va.rank() >= 1 &&
                va.shape().back() == vb.shape()[0];
    require(broadcast, "add: shape mismatch " + shape_str(va.shape()) +
                           " vs " + shape_str(vb.shape()));
  }
  Tensor out = va;
  std::size_t last = broadcast ? vb.size() : out.size();
  for (std::size_t i = 0; i < out.size(); ++i)
    out.at(i) += vb.at(broadcast ? i % last : i);
  bool rg = requires_grad(a) || requires_grad(b);
  NodeId self = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[self].backprop = [self, a, b, broadcast](Tape& t) {
      const Tensor& g = t.grad_ref(self);
      t.accumulate(a, g);
      if (!broadcast) {
        t.accumulate(b, g);
      } else {
        Tensor gb(t.value(b).shape());
        std::size_t n = gb.size();
        for (std::size_t i = 0; i < g.size(); ++i) gb.at(i % n) += g.at(i);
        t.accumulate(b, gb);
      }
    };
  }
  return self;
}

Tape::NodeId Tape::mul(NodeId a, NodeId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  require(va.same_shape(vb), "mul: shape mismatch " + shape_str(va.shape()) +
                                 " vs " + shape_str(vb.shape()));
  Tensor out = va;
  for (std::size_t i = 0; i < out.size(); ++i) out.at(i) *= vb.at(i);
  bool rg = requires_grad(a) || requires_grad(b);
  NodeId self = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[self].backprop = [self, a, b](Tape& t) {
      const Tensor& g = t.grad_ref(self);
      const Tensor& va = t.value(a);
      const Tensor& vb = t.value(b);
      Tensor ga(va.shape()), gb(vb.shape());
      for (std::size_t i = 0; i < g.size(); ++i) {
        ga.at(i) = g.at(i) * vb.at(i);
        gb.at(i) = g.at(i) * va.at(i);
      }
      t.accumulate(a, ga);
      t.accumulate(b, gb);
    };
  }
  return self;
}

Tape::NodeId Tape::div(NodeId a, NodeId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  bool scalar_rhs = vb.size() == 1 && !va.same_shape(vb);
  require(va.same_shape(vb) || scalar_rhs,
          "div: shape mismatch " + shape_str(va.shape()) + " vs " +
              shape_str(vb.shape()));
  Tensor out = va;
  for (std::size_t i = 0; i < out.size(); ++i)
    out.at(i) /= vb.at(scalar_rhs ? 0 : i);
  bool rg = requires_grad(a) || requires_grad(b);
  NodeId self = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[self].backprop = [self, a, b, scalar_rhs](Tape& t) {
      const Tensor& g = t.grad_ref(self);
      const Tensor& va = t.value(a);
      const Tensor& vb = t.value(b);
      Tensor ga(va.shape()), gb(vb.shape());
      for (std::size_t i = 0; i < g.size(); ++i) {
        double d = vb.at(scalar_rhs ? 0 : i);
        ga.at(i) = g.at(i) / d;
        gb.at(scalar_rhs ? 0 : i) += -g.at(i) * va.at(i) / (d * d);
      }
      t.accumulate(a, ga);
      t.accumulate(b, gb);
    };
  }
  return self;
}

Tape::NodeId Tape::neg(NodeId a) { return scale(a, -1.0); }

Tape::NodeId Tape::scale(NodeId a, double s) {
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out.at(i) *= s;
  bool rg = requires_grad(a);
  NodeId self = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[self].backprop = [self, a, s](Tape& t) {
      const Tensor& g = t.grad_ref(self);
      Tensor ga(g.shape());
      for (std::size_t i = 0; i < g.size(); ++i) ga.at(i) = g.at(i) * s;
      t.accumulate(a, ga);
    };
  }
  return self;
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  bool rg = requires_grad(a) || requires_grad(b);

  if (va.rank() == 2 && vb.rank() == 2) {
    require(va.cols() == vb.rows(), "matmul: inner dims disagree");
    std::size_t m = va.rows(), k = va.cols(), n = vb.cols();
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        double x = va.at2(i, p);
        if (x == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) out.at2(i, j) += x * vb.at2(p, j);
      }
    NodeId self = push(std::move(out), rg, nullptr);
    if (rg) {
      nodes_[self].backprop = [self, a, b](Tape& t) {
        const Tensor& g = t.grad_ref(self);
        const Tensor& va = t.value(a);
        const Tensor& vb = t.value(b);
        std::size_t m = va.rows(), k = va.cols(), n = vb.cols();
        Tensor ga({m, k}), gb({k, n});
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            double gij = g.at2(i, j);
            if (gij == 0.0) continue;
            for (std::size_t p = 0; p < k; ++p) {
              ga.at2(i, p) += gij * vb.at2(p, j);
              gb.at2(p, j) += gij * va.at2(i, p);
            }
          }
        t.accumulate(a, ga);
        t.accumulate(b, gb);
      };
    }
    return self;
  }

  if (va.rank() == 2 && vb.rank() == 1) {
    require(va.cols() == vb.size(), "matmul: matrix-vector dims disagree");
    std::size_t m = va.rows(), k = va.cols();
    Tensor out({m});
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += va.at2(i, p) * vb.at(p);
      out.at(i) = acc;
    }
    NodeId self = push(std::move(out), rg, nullptr);
    if (rg) {
      nodes_[self].backprop = [self, a, b](Tape& t) {
        const Tensor& g = t.grad_ref(self);
        const Tensor& va = t.value(a);
        const Tensor& vb = t.value(b);
        std::size_t m = va.rows(), k = va.cols();
        Tensor ga({m, k}), gb({k});
        for (std::size_t i = 0; i < m; ++i) {
          double gi = g.at(i);
          if (gi == 0.0) continue;
          for (std::size_t p = 0; p < k; ++p) {
            ga.at2(i, p) += gi * vb.at(p);
            gb.at(p) += gi * va.at2(i, p);
          }
        }
        t.accumulate(a, ga);
        t.accumulate(b, gb);
      };
    }
    return self;
  }

  if (va.rank() == 1 && vb.rank() == 2) {
    require(va.size() == vb.rows(), "matmul: vector-matrix dims disagree");
    std::size_t k = va.size(), n = vb.cols();
    Tensor out({n});
    for (std::size_t p = 0; p < k; ++p) {
      double x = va.at(p);
      if (x == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) out.at(j) += x * vb.at2(p, j);
    }
    NodeId self = push(std::move(out), rg, nullptr);
    if (rg) {
      nodes_[self].backprop = [self, a, b](Tape& t) {
        const Tensor& g = t.grad_ref(self);
        const Tensor& va = t.value(a);
        const Tensor& vb = t.value(b);
        std::size_t k = va.size(), n = vb.cols();
        Tensor ga({k}), gb({k, n});
        for (std::size_t p = 0; p < k; ++p)
          for (std::size_t j = 0; j < n; ++j) {
            ga.at(p) += g.at(j) * vb.at2(p, j);
            gb.at2(p, j) += va.at(p) * g.at(j);
          }
        t.accumulate(a, ga);
        t.accumulate(b, gb);
      };
    }
    return self;
  }

  fail("matmul: unsupported ranks " + std::to_string(va.rank()) + "," +
       std::to_string(vb.rank()));
}

Tape::NodeId Tape::transpose(NodeId a) {
  const Tensor& va = value(a);
  require(va.rank() == 2, "transpose: matrix required");
  std::size_t m = va.rows(), n = va.cols();
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at2(j, i) = va.at2(i, j);
  bool rg = requires_grad(a);
  NodeId self = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[self].backprop = [self, a](Tape& t) {
      const Tensor& g = t.grad_ref(self);
      std::size_t n = g.rows(), m = g.cols();
      Tensor ga({m, n});
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < m; ++i) ga.at2(i, j) = g.at2(j, i);
      t.accumulate(a, ga);
    };
  }
  return self;
}

Tape::NodeId Tape::tanh(NodeId a) {
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out.at(i) = std::tanh(out.at(i));
  bool rg = requires_grad(a);
  NodeId self = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[self].backprop = [self, a](Tape& t) {
      const Tensor& g = t.grad_ref(self);
      const Tensor& y = t.value(self);
      Tensor ga(g.shape());
      for (std::size_t i = 0; i < g.size(); ++i)
        ga.at(i) = g.at(i) * (1.0 - y.at(i) * y.at(i));
      t.accumulate(a, ga);
    };
  }
  return self;
}

Tape::NodeId Tape::sigmoid(NodeId a) {
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.size(); ++i) {
    double x = out.at(i);
    out.at(i) = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                         : std::exp(x) / (1.0 + std::exp(x));
  }
  bool rg = requires_grad(a);
  NodeId self = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[self].backprop = [self, a](Tape& t) {
      const Tensor& g = t.grad_ref(self);
      const Tensor& y = t.value(self);
      Tensor ga(g.shape());
      for (std::size_t i = 0; i < g.size(); ++i)
        ga.at(i) = g.at(i) * y.at(i) * (1.0 - y.at(i));
      t.accumulate(a, ga);
    };
  }
  return self;
}

Tape::NodeId Tape::exp(NodeId a) {
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out.at(i) = std::exp(out.at(i));
  bool rg = requires_grad(a);
  NodeId self = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[self].backprop = [self, a](Tape& t) {
      const Tensor& g = t.grad_ref(self);
      const Tensor& y = t.value(self);
      Tensor ga(g.shape());
      for (std::size_t i = 0; i < g.size(); ++i) ga.at(i) = g.at(i) * y.at(i);
      t.accumulate(a, ga);
    };
  }
  return self;
}

Tape::NodeId Tape::log(NodeId a) {
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.size(); ++i) {
    require(out.at(i) > 0.0, "log: non-positive input");
    out.at(i) = std::log(out.at(i));
  }
  bool rg = requires_grad(a);
  NodeId self = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[self].backprop = [self, a](Tape& t) {
      const Tensor& g = t.grad_ref(self);
      const Tensor& x = t.value(a);
      Tensor ga(g.shape());
      for (std::size_t i = 0; i < g.size(); ++i) ga.at(i) = g.at(i) / x.at(i);
      t.accumulate(a, ga);
    };
  }
  return self;
}

Tape::NodeId Tape::square(NodeId a) {
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out.at(i) *= out.at(i);
  bool rg = requires_grad(a);
  NodeId self = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[self].backprop = [self, a](Tape& t) {
      const Tensor& g = t.grad_ref(self);
      const Tensor& x = t.value(a);
      Tensor ga(g.shape());
      for (std::size_t i = 0; i < g.size(); ++i)
        ga.at(i) = 2.0 * g.at(i) * x.at(i);
      t.accumulate(a, ga);
    };
  }
  return self;
}

namespace {
// Rows of the flattened last dimension: a (m,n) matrix has m rows of n,
// a vector is one row.
std::pair<std::size_t, std::size_t> last_dim_rows(const Tensor& t) {
  require(t.rank() >= 1, "reduction: rank >= 1 required");
  std::size_t n = t.shape().back();
  return {t.size() / n, n};
}
}  // namespace

Tape::NodeId Tape::softmax(NodeId a) {
  const Tensor& va = value(a);
  auto [rows, n] = last_dim_rows(va);
  Tensor out = va;
  for (std::size_t r = 0; r < rows; ++r) {
    double* p = out.data() + r * n;
    double mx = *std::max_element(p, p + n);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      p[j] = std::exp(p[j] - mx);
      s += p[j];
    }
    for (std::size_t j = 0; j < n; ++j) p[j] /= s;
  }
  bool rg = requires_grad(a);
  NodeId self = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[self].backprop = [self, a, rows = rows, n = n](Tape& t) {
      const Tensor& g = t.grad_ref(self);
      const Tensor& y = t.value(self);
      Tensor ga(g.shape());
      for (std::size_t r = 0; r < rows; ++r) {
        double dotgy = 0.0;
        for (std::size_t j = 0; j < n; ++j)
          dotgy += g.at(r * n + j) * y.at(r * n + j);
        for (std::size_t j = 0; j < n; ++j)
          ga.at(r * n + j) = y.at(r * n + j) * (g.at(r * n + j) - dotgy);
      }
      t.accumulate(a, ga);
    };
  }
  return self;
}

Tape::NodeId Tape::logsumexp(NodeId a) {
  const Tensor& va = value(a);
  auto [rows, n] = last_dim_rows(va);
  std::vector<std::size_t> out_shape(va.shape().begin(), va.shape().end() - 1);
  Tensor out(out_shape);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* p = va.data() + r * n;
    double mx = *std::max_element(p, p + n);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += std::exp(p[j] - mx);
    out.at(r) = mx + std::log(s);
  }
  bool rg = requires_grad(a);
  NodeId self = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[self].backprop = [self, a, rows = rows, n = n](Tape& t) {
      const Tensor& g = t.grad_ref(self);
      const Tensor& x = t.value(a);
      const Tensor& y = t.value(self);
      Tensor ga(x.shape());
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < n; ++j)
          ga.at(r * n + j) = g.at(r) * std::exp(x.at(r * n + j) - y.at(r));
      t.accumulate(a, ga);
    };
  }
  return self;
}

Tape::NodeId Tape::l2_normalize(NodeId a) {
  const Tensor& va = value(a);
  require(va.rank() == 1, "l2_normalize: vector required");
  double norm2 = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) norm2 += va.at(i) * va.at(i);
  double norm = std::sqrt(norm2);
  require(norm > 0.0, "l2_normalize: zero vector");
  Tensor out = va;
  for (std::size_t i = 0; i < out.size(); ++i) out.at(i) /= norm;
  bool rg = requires_grad(a);
  NodeId self = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[self].backprop = [self, a, norm](Tape& t) {
      const Tensor& g = t.grad_ref(self);
      const Tensor& y = t.value(self);
      double gy = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) gy += g.at(i) * y.at(i);
      Tensor ga(g.shape());
      for (std::size_t i = 0; i < g.size(); ++i)
        ga.at(i) = (g.at(i) - y.at(i) * gy) / norm;
      t.accumulate(a, ga);
    };
  }
  return self;
}

Tape::NodeId Tape::concat(NodeId a, NodeId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  bool rg = requires_grad(a) || requires_grad(b);
  if (va.rank() == 1 && vb.rank() == 1) {
    std::size_t na = va.size(), nb = vb.size();
    std::vector<double> d(va.data(), va.data() + va.size());
    d.insert(d.end(), vb.data(), vb.data() + vb.size());
    NodeId self = push(Tensor::from_vector(std::move(d)), rg, nullptr);
    if (rg) {
      nodes_[self].backprop = [self, a, b, na, nb](Tape& t) {
        const Tensor& g = t.grad_ref(self);
        Tensor ga({na}), gb({nb});
        for (std::size_t i = 0; i < na; ++i) ga.at(i) = g.at(i);
        for (std::size_t i = 0; i < nb; ++i) gb.at(i) = g.at(na + i);
        t.accumulate(a, ga);
        t.accumulate(b, gb);
      };
    }
    return self;
  }
  require(va.rank() == 2 && vb.rank() == 2 && va.rows() == vb.rows(),
          "concat: last-dim concat needs matching leading dims");
  std::size_t m = va.rows(), na = va.cols(), nb = vb.cols();
  Tensor out({m, na + nb});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < na; ++j) out.at2(i, j) = va.at2(i, j);
    for (std::size_t j = 0; j < nb; ++j) out.at2(i, na + j) = vb.at2(i, j);
  }
  NodeId self = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[self].backprop = [self, a, b, m, na, nb](Tape& t) {
      const Tensor& g = t.grad_ref(self);
      Tensor ga({m, na}), gb({m, nb});
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < na; ++j) ga.at2(i, j) = g.at2(i, j);
        for (std::size_t j = 0; j < nb; ++j) gb.at2(i, j) = g.at2(i, na + j);
      }
      t.accumulate(a, ga);
      t.accumulate(b, gb);
    };
  }
  return self;
}

Tape::NodeId Tape::slice(NodeId a, std::size_t start, std::size_t len) {
  const Tensor& va = value(a);
  require(va.rank() >= 1, "slice: rank >= 1 required");
  std::size_t dim0 = va.shape()[0];
  require(start + len <= dim0, "slice: out of range");
  std::size_t stride = va.size() / dim0;
  std::vector<std::size_t> shape = va.shape();
  shape[0] = len;
  Tensor out(shape);
  for (std::size_t i = 0; i < len * stride; ++i)
    out.at(i) = va.at(start * stride + i);
  bool rg = requires_grad(a);
  NodeId self = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[self].backprop = [self, a, start, stride, len](Tape& t) {
      const Tensor& g = t.grad_ref(self);
      Tensor ga(t.value(a).shape());
      for (std::size_t i = 0; i < len * stride; ++i)
        ga.at(start * stride + i) = g.at(i);
      t.accumulate(a, ga);
    };
  }
  return self;
}

Tape::NodeId Tape::row(NodeId a, std::size_t r) {
  const Tensor& va = value(a);
  require(va.rank() == 2, "row: matrix required");
  std::size_t n = va.cols();
  require(r < va.rows(), "row: out of range");
  Tensor out({n});
  for (std::size_t j = 0; j < n; ++j) out.at(j) = va.at2(r, j);
  bool rg = requires_grad(a);
  NodeId self = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[self].backprop = [self, a, r, n](Tape& t) {
      const Tensor& g = t.grad_ref(self);
      Tensor ga(t.value(a).shape());
      for (std::size_t j = 0; j < n; ++j) ga.at2(r, j) = g.at(j);
      t.accumulate(a, ga);
    };
  }
  return self;
}

Tape::NodeId Tape::stack(std::span<const NodeId> parts) {
  require(!parts.empty(), "stack: empty input");
  const Tensor& first = value(parts[0]);
  bool rg = false;
  for (NodeId p : parts) {
    require(value(p).same_shape(first), "stack: shape mismatch");
    rg = rg || requires_grad(p);
  }
  std::size_t k = first.size();
  Tensor out = first.rank() == 0
                   ? Tensor({parts.size()})
                   : Tensor({parts.size(), first.shape()[0]});
  for (std::size_t i = 0; i < parts.size(); ++i)
    for (std::size_t j = 0; j < k; ++j)
      out.at(i * k + j) = value(parts[i]).at(j);
  NodeId self = push(std::move(out), rg, nullptr);
  if (rg) {
    std::vector<NodeId> ids(parts.begin(), parts.end());
    nodes_[self].backprop = [self, ids, k](Tape& t) {
      const Tensor& g = t.grad_ref(self);
      for (std::size_t i = 0; i < ids.size(); ++i) {
        Tensor gi(t.value(ids[i]).shape());
        for (std::size_t j = 0; j < k; ++j) gi.at(j) = g.at(i * k + j);
        t.accumulate(ids[i], gi);
      }
    };
  }
  return self;
}

Tape::NodeId Tape::sum(NodeId a) {
  const Tensor& va = value(a);
  double s = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) s += va.at(i);
  bool rg = requires_grad(a);
  NodeId self = push(Tensor::scalar(s), rg, nullptr);
  if (rg) {
    nodes_[self].backprop = [self, a](Tape& t) {
      double g = t.grad_ref(self).at(0);
      Tensor ga(t.value(a).shape());
      for (std::size_t i = 0; i < ga.size(); ++i) ga.at(i) = g;
      t.accumulate(a, ga);
    };
  }
  return self;
}

Tape::NodeId Tape::mean(NodeId a) {
  const Tensor& va = value(a);
  require(va.size() > 0, "mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(va.size()));
}

Tape::NodeId Tape::dot(NodeId a, NodeId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  require(va.rank() == 1 && vb.rank() == 1 && va.size() == vb.size(),
          "dot: equal-length vectors required");
  double s = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) s += va.at(i) * vb.at(i);
  bool rg = requires_grad(a) || requires_grad(b);
  NodeId self = push(Tensor::scalar(s), rg, nullptr);
  if (rg) {
    nodes_[self].backprop = [self, a, b](Tape& t) {
      double g = t.grad_ref(self).at(0);
      const Tensor& va = t.value(a);
      const Tensor& vb = t.value(b);
      Tensor ga(va.shape()), gb(vb.shape());
      for (std::size_t i = 0; i < va.size(); ++i) {
        ga.at(i) = g * vb.at(i);
        gb.at(i) = g * va.at(i);
      }
      t.accumulate(a, ga);
      t.accumulate(b, gb);
    };
  }
  return self;
}

Tape::NodeId Tape::max_with_index(NodeId a, std::size_t* argmax_out) {
  const Tensor& va = value(a);
  require(va.rank() == 1 && va.size() > 0, "max_with_index: non-empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < va.size(); ++i)
    if (va.at(i) > va.at(best)) best = i;
  if (argmax_out) *argmax_out = best;
  bool rg = requires_grad(a);
  NodeId self = push(Tensor::scalar(va.at(best)), rg, nullptr);
  if (rg) {
    nodes_[self].backprop = [self, a, best](Tape& t) {
      double g = t.grad_ref(self).at(0);
      Tensor ga(t.value(a).shape());
      ga.at(best) = g;
      t.accumulate(a, ga);
    };
  }
  return self;
}

Tape::NodeId Tape::gather_rows(NodeId table, std::vector<std::size_t> ids) {
  const Tensor& vt = value(table);
  require(vt.rank() == 2, "gather_rows: matrix table required");
  std::size_t n = vt.cols();
  Tensor out({ids.size(), n});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] < vt.rows(), "gather_rows: id out of range");
    for (std::size_t j = 0; j < n; ++j) out.at2(i, j) = vt.at2(ids[i], j);
  }
  bool rg = requires_grad(table);
  NodeId self = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[self].backprop = [self, table, ids = std::move(ids), n](Tape& t) {
      const Tensor& g = t.grad_ref(self);
      Tensor gt(t.value(table).shape());
      for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t j = 0; j < n; ++j)
          gt.at2(ids[i], j) += g.at2(i, j);
      t.accumulate(table, gt);
    };
  }
  return self;
}

// -------------------------------------------------- finite differences ----

GradCheckReport finite_difference_check(const ScalarFn& f,
                                        std::span<Parameter* const> params,
                                        double eps) {
  require(eps > 0.0, "finite_difference_check: eps must be positive");
  std::map<std::string, Tensor> analytic;
  double base = f(&analytic);
  require(std::isfinite(base), "finite_difference_check: non-finite loss");

  GradCheckReport report;
  for (Parameter* p : params) {
    if (!p->trainable) continue;
    auto it = analytic.find(p->name);
    require(it != analytic.end(),
            "finite_difference_check: missing analytic gradient for " + p->name);
    const Tensor& ga = it->second;
    require(ga.same_shape(p->value),
            "finite_difference_check: gradient shape mismatch for " + p->name);
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      double saved = p->value.at(i);
      p->value.at(i) = saved + eps;
      double fp = f(nullptr);
      p->value.at(i) = saved - eps;
      double fm = f(nullptr);
      p->value.at(i) = saved;
      require(std::isfinite(fp) && std::isfinite(fm),
              "finite_difference_check: non-finite perturbed loss");
      double numeric = (fp - fm) / (2.0 * eps);
      double rel = std::abs(ga.at(i) - numeric) /
                   std::max(1e-8, std::abs(numeric));
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = p->name;
        report.worst_coord = i;
        report.worst_analytic = ga.at(i);
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace rrl
