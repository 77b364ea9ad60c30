// Reverse-mode automatic differentiation over dense arrays.
//
// A computation is a DAG of Node objects built by the free functions below.
// Every op records a backward closure that scatters the upstream gradient
// into its parents with accumulation (+=). backward() topologically sorts
// the graph from a scalar root and runs the closures in reverse order.
//
// The op set covers what the model needs: matmul, add, elementwise multiply,
// negation, exp, log, power, relu, sigmoid, softmax over the last axis,
// sum/mean reductions, concatenation, column slicing, transpose, and the
// gradient-reversal op used by adversarial alignment.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "iada/array.hpp"
#include "iada/errors.hpp"

namespace iada::ad {

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  Array value;
  Array grad;  // same shape as value; accumulated by backward passes
  std::string op;
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward_fn;  // scatters this->grad into parents
  bool requires_grad = true;

  Node(Array v, std::string op_tag, std::vector<NodePtr> ps)
      : value(std::move(v)),
        grad(value.shape(), 0.0),
        op(std::move(op_tag)),
        parents(std::move(ps)) {}

  bool is_leaf() const { return parents.empty(); }

  void zero_grad() { grad.fill(0.0); }
};

// Trainable leaf (gradient accumulates across backward calls until reset).
inline NodePtr leaf(Array v) {
  return std::make_shared<Node>(std::move(v), "leaf", std::vector<NodePtr>{});
}

// Non-trainable input; backward never writes into it.
inline NodePtr constant(Array v) {
  auto n = std::make_shared<Node>(std::move(v), "const", std::vector<NodePtr>{});
  n->requires_grad = false;
  return n;
}

inline NodePtr constant(double v) { return constant(Array::scalar(v)); }

namespace detail {

inline void check_finite(const Array& a, const std::string& op) {
  if (!a.all_finite())
    throw NumericError("non-finite output in op '" + op + "'");
}

inline NodePtr make(Array v, const std::string& op, std::vector<NodePtr> ps,
                    std::function<void(Node&)> bw) {
  check_finite(v, op);
  auto n = std::make_shared<Node>(std::move(v), op, std::move(ps));
  n->backward_fn = std::move(bw);
  bool any = false;
  for (const auto& p : n->parents) any = any || p->requires_grad;
  n->requires_grad = any;
  return n;
}

// Broadcast classification for binary elementwise ops.
enum class Bcast { same, scalar_rhs, row_rhs, col_rhs };

inline Bcast classify_broadcast(const Array& a, const Array& b,
                                const std::string& op) {
  if (a.same_shape(b)) return Bcast::same;
  if (b.size() == 1) return Bcast::scalar_rhs;
  if (a.rank() == 2) {
    // Row vector: rank-1 of length cols, or 1 x cols.
    if ((b.rank() == 1 && b.shape()[0] == a.shape()[1]) ||
        (b.rank() == 2 && b.shape()[0] == 1 && b.shape()[1] == a.shape()[1]))
      return Bcast::row_rhs;
    if (b.rank() == 2 && b.shape()[1] == 1 && b.shape()[0] == a.shape()[0])
      return Bcast::col_rhs;
  }
  throw ShapeError(op + ": shapes " + shape_str(a.shape()) + " and " +
                   shape_str(b.shape()) + " do not conform");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise binary ops (rhs may broadcast: scalar, row over a matrix,
// or column over a matrix).
// ---------------------------------------------------------------------------

inline NodePtr add(const NodePtr& a, const NodePtr& b) {
  using detail::Bcast;
  const Bcast bc = detail::classify_broadcast(a->value, b->value, "add");
  Array out = a->value;
  const Array& bv = b->value;
  const std::size_t rows = a->value.rows(), cols = a->value.cols();
  switch (bc) {
    case Bcast::same:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
      break;
    case Bcast::scalar_rhs:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[0];
      break;
    case Bcast::row_rhs:
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += bv[c];
      break;
    case Bcast::col_rhs:
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += bv[r];
      break;
  }
  return detail::make(std::move(out), "add", {a, b}, [bc, rows, cols](Node& n) {
    Node& pa = *n.parents[0];
    Node& pb = *n.parents[1];
    if (pa.requires_grad)
      for (std::size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i];
    if (!pb.requires_grad) return;
    switch (bc) {
      case Bcast::same:
        for (std::size_t i = 0; i < n.grad.size(); ++i) pb.grad[i] += n.grad[i];
        break;
      case Bcast::scalar_rhs:
        for (std::size_t i = 0; i < n.grad.size(); ++i) pb.grad[0] += n.grad[i];
        break;
      case Bcast::row_rhs:
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c)
            pb.grad[c] += n.grad[r * cols + c];
        break;
      case Bcast::col_rhs:
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c)
            pb.grad[r] += n.grad[r * cols + c];
        break;
    }
  });
}

inline NodePtr mul(const NodePtr& a, const NodePtr& b) {
  using detail::Bcast;
  const Bcast bc = detail::classify_broadcast(a->value, b->value, "mul");
  Array out = a->value;
  const Array& bv = b->value;
  const std::size_t rows = a->value.rows(), cols = a->value.cols();
  auto bval = [&](std::size_t r, std::size_t c, std::size_t i) {
    switch (bc) {
      case Bcast::same: return bv[i];
      case Bcast::scalar_rhs: return bv[0];
      case Bcast::row_rhs: return bv[c];
      case Bcast::col_rhs: return bv[r];
    }
    return 0.0;
  };
  if (bc == Bcast::same || a->value.rank() != 2) {
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] *= (bc == Bcast::same ? bv[i] : bv[0]);
  } else {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c)
        out[r * cols + c] *= bval(r, c, r * cols + c);
  }
  return detail::make(std::move(out), "mul", {a, b}, [bc, rows, cols](Node& n) {
    Node& pa = *n.parents[0];
    Node& pb = *n.parents[1];
    const Array& av = pa.value;
    const Array& bv2 = pb.value;
    auto bval = [&](std::size_t r, std::size_t c, std::size_t i) {
      switch (bc) {
        case Bcast::same: return bv2[i];
        case Bcast::scalar_rhs: return bv2[0];
        case Bcast::row_rhs: return bv2[c];
        case Bcast::col_rhs: return bv2[r];
      }
      return 0.0;
    };
    if (bc == Bcast::same || av.rank() != 2) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) {
        const double bvi = (bc == Bcast::same ? bv2[i] : bv2[0]);
        if (pa.requires_grad) pa.grad[i] += n.grad[i] * bvi;
        if (pb.requires_grad)
          pb.grad[bc == Bcast::same ? i : 0] += n.grad[i] * av[i];
      }
    } else {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
          const std::size_t i = r * cols + c;
          if (pa.requires_grad) pa.grad[i] += n.grad[i] * bval(r, c, i);
          if (pb.requires_grad) {
            std::size_t bi = i;
            if (bc == Bcast::scalar_rhs) bi = 0;
            else if (bc == Bcast::row_rhs) bi = c;
            else if (bc == Bcast::col_rhs) bi = r;
            pb.grad[bi] += n.grad[i] * av[i];
          }
        }
    }
  });
}

inline NodePtr neg(const NodePtr& a) {
  Array out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = -out[i];
  return detail::make(std::move(out), "neg", {a}, [](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[i] -= n.grad[i];
  });
}

inline NodePtr sub(const NodePtr& a, const NodePtr& b) { return add(a, neg(b)); }

// ---------------------------------------------------------------------------
// Elementwise unary functions.
// ---------------------------------------------------------------------------

inline NodePtr exp(const NodePtr& a) {
  Array out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(out[i]);
  return detail::make(std::move(out), "exp", {a}, [](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < n.grad.size(); ++i)
      p.grad[i] += n.grad[i] * n.value[i];
  });
}

inline NodePtr log(const NodePtr& a) {
  Array out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] <= 0.0)
      throw NumericError("log: non-positive input " + std::to_string(out[i]));
    out[i] = std::log(out[i]);
  }
  return detail::make(std::move(out), "log", {a}, [](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < n.grad.size(); ++i)
      p.grad[i] += n.grad[i] / p.value[i];
  });
}

// x^p with a constant exponent. Fractional exponents require x >= 0.
inline NodePtr pow(const NodePtr& a, double exponent) {
  const bool integral = exponent == std::floor(exponent);
  Array out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!integral && out[i] < 0.0)
      throw NumericError("pow: negative base with fractional exponent");
    out[i] = std::pow(out[i], exponent);
  }
  return detail::make(std::move(out), "pow", {a}, [exponent](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad || exponent == 0.0) return;
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      const double d = exponent * std::pow(p.value[i], exponent - 1.0);
      if (!std::isfinite(d))
        throw NumericError("pow: non-finite gradient at base " +
                           std::to_string(p.value[i]));
      p.grad[i] += n.grad[i] * d;
    }
  });
}

inline NodePtr relu(const NodePtr& a) {
  Array out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, out[i]);
  return detail::make(std::move(out), "relu", {a}, [](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < n.grad.size(); ++i)
      if (p.value[i] > 0.0) p.grad[i] += n.grad[i];
  });
}

inline NodePtr sigmoid(const NodePtr& a) {
  Array out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = out[i];
    out[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                      : std::exp(x) / (1.0 + std::exp(x));
  }
  return detail::make(std::move(out), "sigmoid", {a}, [](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      const double s = n.value[i];
      p.grad[i] += n.grad[i] * s * (1.0 - s);
    }
  });
}

// ---------------------------------------------------------------------------
// softmax over the last axis, computed with max subtraction.
// ---------------------------------------------------------------------------

inline NodePtr softmax(const NodePtr& a) {
  const Array& v = a->value;
  if (v.rank() < 1) throw ShapeError("softmax: rank-0 input");
  const std::size_t cols = v.shape().back();
  const std::size_t rows = v.size() / cols;
  Array out = v;
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = out.data() + r * cols;
    double m = row[0];
    for (std::size_t c = 1; c < cols; ++c) m = std::max(m, row[c]);
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      row[c] = std::exp(row[c] - m);
      s += row[c];
    }
    for (std::size_t c = 0; c < cols; ++c) row[c] /= s;
  }
  return detail::make(std::move(out), "softmax", {a}, [rows, cols](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* s = n.value.data() + r * cols;
      const double* g = n.grad.data() + r * cols;
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += s[c] * g[c];
      double* pg = p.grad.data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) pg[c] += s[c] * (g[c] - dot);
    }
  });
}

// ---------------------------------------------------------------------------
// Matrix product (rank-2 x rank-2).
// ---------------------------------------------------------------------------

inline NodePtr matmul(const NodePtr& a, const NodePtr& b) {
  const Array& av = a->value;
  const Array& bv = b->value;
  if (av.rank() != 2 || bv.rank() != 2 || av.shape()[1] != bv.shape()[0])
    throw ShapeError("matmul: shapes " + shape_str(av.shape()) + " and " +
                     shape_str(bv.shape()) + " do not conform");
  const std::size_t n = av.shape()[0], k = av.shape()[1], m = bv.shape()[1];
  Array out(Shape{n, m}, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < k; ++l) {
      const double aval = av[i * k + l];
      if (aval == 0.0) continue;
      const double* brow = bv.data() + l * m;
      double* orow = out.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += aval * brow[j];
    }
  return detail::make(std::move(out), "matmul", {a, b}, [n, k, m](Node& nd) {
    Node& pa = *nd.parents[0];
    Node& pb = *nd.parents[1];
    const Array& g = nd.grad;
    if (pa.requires_grad) {
      // dA = G * B^T
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t l = 0; l < k; ++l) {
          double s = 0.0;
          const double* grow = g.data() + i * m;
          const double* brow = pb.value.data() + l * m;
          for (std::size_t j = 0; j < m; ++j) s += grow[j] * brow[j];
          pa.grad[i * k + l] += s;
        }
    }
    if (pb.requires_grad) {
      // dB = A^T * G
      for (std::size_t l = 0; l < k; ++l)
        for (std::size_t j = 0; j < m; ++j) {
          double s = 0.0;
          for (std::size_t i = 0; i < n; ++i)
            s += pa.value[i * k + l] * g[i * m + j];
          pb.grad[l * m + j] += s;
        }
    }
  });
}

inline NodePtr transpose(const NodePtr& a) {
  const Array& av = a->value;
  if (av.rank() != 2) throw ShapeError("transpose: rank-2 input required");
  const std::size_t n = av.shape()[0], m = av.shape()[1];
  Array out(Shape{m, n}, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[j * n + i] = av[i * m + j];
  return detail::make(std::move(out), "transpose", {a}, [n, m](Node& nd) {
    Node& p = *nd.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j)
        p.grad[i * m + j] += nd.grad[j * n + i];
  });
}

// ---------------------------------------------------------------------------
// Reductions.
// ---------------------------------------------------------------------------

inline NodePtr sum(const NodePtr& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a->value.size(); ++i) s += a->value[i];
  return detail::make(Array::scalar(s), "sum", {a}, [](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += n.grad[0];
  });
}

inline NodePtr mean(const NodePtr& a) {
  const std::size_t n = a->value.size();
  if (n == 0) throw ShapeError("mean: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a->value[i];
  return detail::make(Array::scalar(s / static_cast<double>(n)), "mean", {a},
                      [n](Node& nd) {
                        Node& p = *nd.parents[0];
                        if (!p.requires_grad) return;
                        const double g = nd.grad[0] / static_cast<double>(n);
                        for (std::size_t i = 0; i < p.grad.size(); ++i)
                          p.grad[i] += g;
                      });
}

// ---------------------------------------------------------------------------
// Structural ops.
// ---------------------------------------------------------------------------

// Concatenate rank-2 arrays along axis 0 (rows). All column counts must match.
inline NodePtr concat_rows(const std::vector<NodePtr>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t cols = parts[0]->value.cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p->value.rank() != 2 || p->value.cols() != cols)
      throw ShapeError("concat_rows: shapes " +
                       shape_str(parts[0]->value.shape()) + " and " +
                       shape_str(p->value.shape()) + " do not conform");
    rows += p->value.rows();
  }
  Array out(Shape{rows, cols}, 0.0);
  std::size_t r0 = 0;
  for (const auto& p : parts) {
    std::copy(p->value.data(), p->value.data() + p->value.size(),
              out.data() + r0 * cols);
    r0 += p->value.rows();
  }
  return detail::make(std::move(out), "concat", parts, [cols](Node& n) {
    std::size_t r0 = 0;
    for (auto& pp : n.parents) {
      Node& p = *pp;
      const std::size_t sz = p.value.size();
      if (p.requires_grad)
        for (std::size_t i = 0; i < sz; ++i)
          p.grad[i] += n.grad[r0 * cols + i];
      r0 += p.value.rows();
    }
  });
}

// Columns [from, to) of a rank-2 array.
inline NodePtr slice_cols(const NodePtr& a, std::size_t from, std::size_t to) {
  const Array& av = a->value;
  if (av.rank() != 2 || from >= to || to > av.shape()[1])
    throw ShapeError("slice_cols: range [" + std::to_string(from) + "," +
                     std::to_string(to) + ") on shape " + shape_str(av.shape()));
  const std::size_t rows = av.shape()[0], cols = av.shape()[1], w = to - from;
  Array out(Shape{rows, w}, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < w; ++c)
      out[r * w + c] = av[r * cols + from + c];
  return detail::make(std::move(out), "slice_cols", {a},
                      [rows, cols, from, w](Node& n) {
                        Node& p = *n.parents[0];
                        if (!p.requires_grad) return;
                        for (std::size_t r = 0; r < rows; ++r)
                          for (std::size_t c = 0; c < w; ++c)
                            p.grad[r * cols + from + c] += n.grad[r * w + c];
                      });
}

// Reinterpret the element buffer under a new shape of equal size.
inline NodePtr reshape(const NodePtr& a, Shape shape) {
  if (shape_size(shape) != a->value.size())
    throw ShapeError("reshape: size mismatch " + shape_str(a->value.shape()) +
                     " -> " + shape_str(shape));
  Array out(std::move(shape), a->value.flat());
  return detail::make(std::move(out), "reshape", {a}, [](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i];
  });
}

// ---------------------------------------------------------------------------
// Gradient reversal: identity forward, -scale * g backward.
// ---------------------------------------------------------------------------

inline NodePtr grad_reverse(const NodePtr& a, double scale) {
  if (scale < 0.0)
    throw ValueError("grad_reverse: negative scale " + std::to_string(scale));
  Array out = a->value;
  return detail::make(std::move(out), "grad_reverse", {a}, [scale](Node& n) {
    Node& p = *n.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < n.grad.size(); ++i)
      p.grad[i] += -scale * n.grad[i];
  });
}

// ---------------------------------------------------------------------------
// Convenience compositions.
// ---------------------------------------------------------------------------

// max(x, c) elementwise, as relu(x - c) + c; gradient is the clamp gradient.
inline NodePtr clamp_min(const NodePtr& a, double c) {
  return add(relu(add(a, constant(-c))), constant(c));
}

// min(x, c) elementwise, as c - relu(c - x).
inline NodePtr clamp_max(const NodePtr& a, double c) {
  return add(neg(relu(add(neg(a), constant(c)))), constant(c));
}

inline NodePtr scale(const NodePtr& a, double s) { return mul(a, constant(s)); }

inline NodePtr affine(const NodePtr& x, const NodePtr& w, const NodePtr& b) {
  return add(matmul(x, w), b);
}

// ---------------------------------------------------------------------------
// Backward pass.
// ---------------------------------------------------------------------------

inline std::vector<Node*> topo_order(Node* root) {
  std::vector<Node*> order;
  std::unordered_set<Node*> done;
  // Iterative post-order DFS; graphs can be deep at long chain lengths.
  std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (done.count(node)) {
      stack.pop_back();
      continue;
    }
    if (next < node->parents.size()) {
      Node* child = node->parents[next].get();
      ++next;
      if (!done.count(child)) stack.emplace_back(child, 0);
    } else {
      done.insert(node);
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;  // parents before children; reverse for backprop
}

inline void backward(const NodePtr& root) {
  if (root->value.size() != 1)
    throw ShapeError("backward: root must be scalar, shape is " +
                     shape_str(root->value.shape()));
  auto order = topo_order(root.get());
  // Interior gradients are per-pass scratch; only leaves accumulate across
  // repeated backward calls.
  for (Node* n : order)
    if (!n->is_leaf()) n->zero_grad();
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->requires_grad) n->backward_fn(*n);
  }
}

inline void zero_grad(const std::vector<NodePtr>& params) {
  for (const auto& p : params) p->zero_grad();
}

}  // namespace iada::ad
