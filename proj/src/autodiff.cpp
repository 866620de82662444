#include "omarl/autodiff.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "omarl/errors.hpp"

namespace omarl::ad {

namespace {

thread_local bool t_grad_enabled = true;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

ConstMatMap as_mat(const Array& a) {
  return ConstMatMap(a.data().data(), static_cast<Eigen::Index>(a.rows()),
                     static_cast<Eigen::Index>(a.cols()));
}
MatMap as_mat(Array& a) {
  return MatMap(a.data().data(), static_cast<Eigen::Index>(a.rows()),
                static_cast<Eigen::Index>(a.cols()));
}

// Builds the output node. The backward rule is attached only when some input
// needs a gradient and graph recording is on.
Var make_result(Array value, std::vector<std::shared_ptr<Node>> parents,
                std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool needs = false;
  if (t_grad_enabled)
    for (const auto& p : parents) needs = needs || p->requires_grad;
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward_fn = std::move(backward_fn);
  }
  return Var(std::move(node));
}

template <typename F>
Var unary(const Var& x, F&& forward, std::function<void(Node&)> backward_fn) {
  Array out(x.shape());
  const auto& in = x.value().vec();
  auto& o = out.vec();
  for (std::size_t i = 0; i < in.size(); ++i) o[i] = forward(in[i]);
  return make_result(std::move(out), {x.ptr()}, std::move(backward_fn));
}

struct Broadcast {
  std::size_t rows, cols;
  std::size_t ar, ac, br, bc;
  Shape shape;
};

Broadcast broadcast_shape(const Array& a, const Array& b) {
  Broadcast s{};
  s.ar = a.rows();
  s.ac = a.cols();
  s.br = b.rows();
  s.bc = b.cols();
  auto axis = [](std::size_t x, std::size_t y, const char* what, const Array& a, const Array& b) {
    if (x == y || y == 1) return x;
    if (x == 1) return y;
    throw ConfigError(std::string("cannot broadcast ") + what + " of " + shape_string(a.shape()) +
                      " and " + shape_string(b.shape()));
  };
  s.rows = axis(s.ar, s.br, "rows", a, b);
  s.cols = axis(s.ac, s.bc, "cols", a, b);
  if (a.size() == s.rows * s.cols)
    s.shape = a.shape();
  else if (b.size() == s.rows * s.cols)
    s.shape = b.shape();
  else
    s.shape = {s.rows, s.cols};
  return s;
}

// Sums a full-size gradient down to an operand's (possibly broadcast) extent.
void reduce_into(Array& target, const Array& g, const Broadcast& s, std::size_t tr, std::size_t tc) {
  auto& t = target.vec();
  const auto& gv = g.vec();
  if (tr == s.rows && tc == s.cols) {
    for (std::size_t i = 0; i < gv.size(); ++i) t[i] += gv[i];
    return;
  }
  for (std::size_t r = 0; r < s.rows; ++r)
    for (std::size_t c = 0; c < s.cols; ++c)
      t[(tr == 1 ? 0 : r) * tc + (tc == 1 ? 0 : c)] += gv[r * s.cols + c];
}

template <typename F>
Array broadcast_apply(const Array& a, const Array& b, const Broadcast& s, F&& f) {
  Array out(s.shape);
  auto& o = out.vec();
  const auto& av = a.vec();
  const auto& bv = b.vec();
  if (a.size() == b.size() && s.ar == s.br) {
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = f(av[i], bv[i]);
    return out;
  }
  for (std::size_t r = 0; r < s.rows; ++r) {
    const std::size_t ra = s.ar == 1 ? 0 : r;
    const std::size_t rb = s.br == 1 ? 0 : r;
    for (std::size_t c = 0; c < s.cols; ++c)
      o[r * s.cols + c] = f(av[ra * s.ac + (s.ac == 1 ? 0 : c)], bv[rb * s.bc + (s.bc == 1 ? 0 : c)]);
  }
  return out;
}

// Partial derivatives of f(a,b) w.r.t. each operand, evaluated elementwise at
// broadcast positions, then reduced.
template <typename DA, typename DB>
Var binary(const Var& a, const Var& b, Array value, const Broadcast& s, DA&& da, DB&& db) {
  auto an = a.ptr();
  auto bn = b.ptr();
  return make_result(std::move(value), {an, bn}, [an, bn, s, da, db](Node& self) {
    const auto& g = self.grad.vec();
    const auto& av = an->value.vec();
    const auto& bv = bn->value.vec();
    Array ga(s.shape), gb(s.shape);
    for (std::size_t r = 0; r < s.rows; ++r) {
      const std::size_t ra = s.ar == 1 ? 0 : r;
      const std::size_t rb = s.br == 1 ? 0 : r;
      for (std::size_t c = 0; c < s.cols; ++c) {
        const double x = av[ra * s.ac + (s.ac == 1 ? 0 : c)];
        const double y = bv[rb * s.bc + (s.bc == 1 ? 0 : c)];
        const std::size_t i = r * s.cols + c;
        if (an->requires_grad) ga[i] = g[i] * da(x, y);
        if (bn->requires_grad) gb[i] = g[i] * db(x, y);
      }
    }
    if (an->requires_grad) reduce_into(an->grad_buffer(), ga, s, s.ar, s.ac);
    if (bn->requires_grad) reduce_into(bn->grad_buffer(), gb, s, s.br, s.bc);
  });
}

}  // namespace

Array& Node::grad_buffer() {
  if (!has_grad) {
    grad = Array(value.shape(), 0.0);
    has_grad = true;
  }
  return grad;
}

Var::Var() : node_(std::make_shared<Node>()) {}

Array Var::grad() const {
  if (node_->has_grad) return node_->grad;
  return Array(node_->value.shape(), 0.0);
}

void Var::zero_grad() {
  if (node_->has_grad) node_->grad.fill(0.0);
}

Var constant(Array value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var parameter(Array value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }
EnableGradGuard::EnableGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = true; }
EnableGradGuard::~EnableGradGuard() { t_grad_enabled = previous_; }

bool grad_enabled() { return t_grad_enabled; }

void backward(const Var& root) {
  if (root.size() != 1)
    throw UsageError("backward() needs a scalar root, got shape " + shape_string(root.shape()));
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order; each node once.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  visited.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Interior nodes start from zero each pass; leaves keep accumulating.
  for (Node* n : order)
    if (n->backward_fn) {
      n->grad = Array(n->value.shape(), 0.0);
      n->has_grad = true;
    }
  root.node()->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
}

Var stop_gradient(const Var& x) { return constant(x.value()); }

Var add(const Var& a, const Var& b) {
  auto s = broadcast_shape(a.value(), b.value());
  auto v = broadcast_apply(a.value(), b.value(), s, [](double x, double y) { return x + y; });
  return binary(a, b, std::move(v), s, [](double, double) { return 1.0; },
                [](double, double) { return 1.0; });
}

Var sub(const Var& a, const Var& b) {
  auto s = broadcast_shape(a.value(), b.value());
  auto v = broadcast_apply(a.value(), b.value(), s, [](double x, double y) { return x - y; });
  return binary(a, b, std::move(v), s, [](double, double) { return 1.0; },
                [](double, double) { return -1.0; });
}

Var mul(const Var& a, const Var& b) {
  auto s = broadcast_shape(a.value(), b.value());
  auto v = broadcast_apply(a.value(), b.value(), s, [](double x, double y) { return x * y; });
  return binary(a, b, std::move(v), s, [](double, double y) { return y; },
                [](double x, double) { return x; });
}

Var div(const Var& a, const Var& b) {
  auto s = broadcast_shape(a.value(), b.value());
  auto v = broadcast_apply(a.value(), b.value(), s, [](double x, double y) { return x / y; });
  return binary(a, b, std::move(v), s, [](double, double y) { return 1.0 / y; },
                [](double x, double y) { return -x / (y * y); });
}

Var minimum(const Var& a, const Var& b) {
  auto s = broadcast_shape(a.value(), b.value());
  auto v = broadcast_apply(a.value(), b.value(), s, [](double x, double y) { return x <= y ? x : y; });
  return binary(a, b, std::move(v), s, [](double x, double y) { return x <= y ? 1.0 : 0.0; },
                [](double x, double y) { return x <= y ? 0.0 : 1.0; });
}

Var scale(const Var& x, double c) {
  auto xn = x.ptr();
  return unary(x, [c](double v) { return c * v; }, [xn, c](Node& self) {
    auto& g = xn->grad_buffer().vec();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += c * self.grad[i];
  });
}

Var add_scalar(const Var& x, double c) {
  auto xn = x.ptr();
  return unary(x, [c](double v) { return v + c; }, [xn](Node& self) {
    auto& g = xn->grad_buffer().vec();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Var neg(const Var& x) { return scale(x, -1.0); }

Var matmul(const Var& a, const Var& b) {
  const Array& av = a.value();
  const Array& bv = b.value();
  if (av.cols() != bv.rows())
    throw ConfigError("matmul shape mismatch: " + shape_string(av.shape()) + " x " +
                      shape_string(bv.shape()));
  Array out = Array::matrix(av.rows(), bv.cols());
  as_mat(out).noalias() = as_mat(av) * as_mat(bv);
  auto an = a.ptr();
  auto bn = b.ptr();
  return make_result(std::move(out), {an, bn}, [an, bn](Node& self) {
    auto g = as_mat(static_cast<const Array&>(self.grad));
    if (an->requires_grad) as_mat(an->grad_buffer()).noalias() += g * as_mat(bn->value).transpose();
    if (bn->requires_grad) as_mat(bn->grad_buffer()).noalias() += as_mat(an->value).transpose() * g;
  });
}

#define OMARL_ELEMENTWISE(name, fwd, dfdx)                                      \
  Var name(const Var& x) {                                                     \
    auto xn = x.ptr();                                                         \
    return unary(x, [](double v) { return fwd; }, [xn](Node& self) {           \
      auto& g = xn->grad_buffer().vec();                                       \
      const auto& in = xn->value.vec();                                        \
      const auto& out = self.value.vec();                                      \
      for (std::size_t i = 0; i < g.size(); ++i) {                             \
        const double v = in[i];                                                \
        const double y = out[i];                                               \
        (void)v;                                                               \
        (void)y;                                                               \
        g[i] += self.grad[i] * (dfdx);                                         \
      }                                                                        \
    });                                                                        \
  }

OMARL_ELEMENTWISE(relu, v > 0.0 ? v : 0.0, v > 0.0 ? 1.0 : 0.0)
OMARL_ELEMENTWISE(elu, v > 0.0 ? v : std::expm1(v), v > 0.0 ? 1.0 : y + 1.0)
OMARL_ELEMENTWISE(tanh, std::tanh(v), 1.0 - y * y)
OMARL_ELEMENTWISE(exp, std::exp(v), y)
OMARL_ELEMENTWISE(log, std::log(v), 1.0 / v)
OMARL_ELEMENTWISE(abs, std::fabs(v), v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0))
OMARL_ELEMENTWISE(square, v * v, 2.0 * v)

#undef OMARL_ELEMENTWISE

Var clamp(const Var& x, double lo, double hi) {
  auto xn = x.ptr();
  return unary(x, [lo, hi](double v) { return std::clamp(v, lo, hi); }, [xn, lo, hi](Node& self) {
    auto& g = xn->grad_buffer().vec();
    const auto& in = xn->value.vec();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (in[i] >= lo && in[i] <= hi) g[i] += self.grad[i];
  });
}

Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().vec()) s += v;
  auto xn = x.ptr();
  return make_result(Array::scalar(s), {xn}, [xn](Node& self) {
    const double g = self.grad[0];
    for (auto& v : xn->grad_buffer().vec()) v += g;
  });
}

Var mean(const Var& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

Var sum_cols(const Var& x) {
  const Array& v = x.value();
  const std::size_t rows = v.rows(), cols = v.cols();
  Array out = Array::matrix(rows, 1);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += v[r * cols + c];
    out[r] = s;
  }
  auto xn = x.ptr();
  return make_result(std::move(out), {xn}, [xn, rows, cols](Node& self) {
    auto& g = xn->grad_buffer().vec();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += self.grad[r];
  });
}

Var mean_rows(const Var& x) {
  const Array& v = x.value();
  const std::size_t rows = v.rows(), cols = v.cols();
  Array out = Array::matrix(1, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c] += v[r * cols + c];
  for (std::size_t c = 0; c < cols; ++c) out[c] /= static_cast<double>(rows);
  auto xn = x.ptr();
  return make_result(std::move(out), {xn}, [xn, rows, cols](Node& self) {
    auto& g = xn->grad_buffer().vec();
    const double inv = 1.0 / static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += self.grad[c] * inv;
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw UsageError("concat_cols of nothing");
  const std::size_t rows = parts.front().rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ConfigError("concat_cols row mismatch");
    total += p.cols();
  }
  Array out = Array::matrix(rows, total);
  std::vector<std::shared_ptr<Node>> nodes;
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t c = p.cols();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < c; ++j) out[r * total + off + j] = p.value()[r * c + j];
    nodes.push_back(p.ptr());
    offsets.push_back(off);
    off += c;
  }
  auto captured = nodes;
  return make_result(std::move(out), std::move(nodes), [captured, offsets, rows, total](Node& self) {
    for (std::size_t k = 0; k < captured.size(); ++k) {
      Node& p = *captured[k];
      if (!p.requires_grad) continue;
      const std::size_t c = p.value.cols();
      auto& g = p.grad_buffer();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < c; ++j) g[r * c + j] += self.grad[r * total + offsets[k] + j];
    }
  });
}

Var slice_cols(const Var& x, std::size_t start, std::size_t count) {
  const Array& v = x.value();
  const std::size_t rows = v.rows(), cols = v.cols();
  if (count == 0 || start + count > cols) throw ConfigError("slice_cols out of range");
  Array out = Array::matrix(rows, count);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < count; ++j) out[r * count + j] = v[r * cols + start + j];
  auto xn = x.ptr();
  return make_result(std::move(out), {xn}, [xn, rows, cols, start, count](Node& self) {
    auto& g = xn->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < count; ++j) g[r * cols + start + j] += self.grad[r * count + j];
  });
}

Var reshape(const Var& x, Shape shape) {
  if (shape_size(shape) != x.size())
    throw ConfigError("reshape " + shape_string(x.shape()) + " -> " + shape_string(shape));
  auto xn = x.ptr();
  return make_result(x.value().reshaped(std::move(shape)), {xn}, [xn](Node& self) {
    auto& g = xn->grad_buffer().vec();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Var layer_norm(const Var& x, double eps) {
  const Array& v = x.value();
  const std::size_t rows = v.rows(), cols = v.cols();
  Array out(v.shape());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double mu = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mu += v[r * cols + c];
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = v[r * cols + c] - mu;
      var += d * d;
    }
    var /= static_cast<double>(cols);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = (v[r * cols + c] - mu) * inv_std[r];
  }
  auto xn = x.ptr();
  return make_result(std::move(out), {xn}, [xn, rows, cols, inv_std](Node& self) {
    auto& g = xn->grad_buffer();
    const Array& y = self.value;
    const double n = static_cast<double>(cols);
    for (std::size_t r = 0; r < rows; ++r) {
      double mean_g = 0.0, mean_gy = 0.0;
      for (std::size_t c = 0; c < cols; ++c) {
        mean_g += self.grad[r * cols + c];
        mean_gy += self.grad[r * cols + c] * y[r * cols + c];
      }
      mean_g /= n;
      mean_gy /= n;
      for (std::size_t c = 0; c < cols; ++c) {
        const std::size_t i = r * cols + c;
        g[i] += inv_std[r] * (self.grad[i] - mean_g - y[i] * mean_gy);
      }
    }
  });
}

Var log_softmax(const Var& x) {
  const Array& v = x.value();
  const std::size_t rows = v.rows(), cols = v.cols();
  Array out(v.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = v[r * cols];
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, v[r * cols + c]);
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += std::exp(v[r * cols + c] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = v[r * cols + c] - lse;
  }
  auto xn = x.ptr();
  return make_result(std::move(out), {xn}, [xn, rows, cols](Node& self) {
    auto& g = xn->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      double gs = 0.0;
      for (std::size_t c = 0; c < cols; ++c) gs += self.grad[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c) {
        const std::size_t i = r * cols + c;
        g[i] += self.grad[i] - std::exp(self.value[i]) * gs;
      }
    }
  });
}

Var softmax(const Var& x) { return exp(log_softmax(x)); }

Var gather_cols(const Var& x, const std::vector<std::size_t>& index) {
  const Array& v = x.value();
  const std::size_t rows = v.rows(), cols = v.cols();
  if (index.size() != rows) throw ConfigError("gather_cols index length mismatch");
  Array out = Array::matrix(rows, 1);
  for (std::size_t r = 0; r < rows; ++r) {
    if (index[r] >= cols) throw ConfigError("gather_cols index out of range");
    out[r] = v[r * cols + index[r]];
  }
  auto xn = x.ptr();
  return make_result(std::move(out), {xn}, [xn, index, cols](Node& self) {
    auto& g = xn->grad_buffer();
    for (std::size_t r = 0; r < index.size(); ++r) g[r * cols + index[r]] += self.grad[r];
  });
}

Var row_vecmat(const Var& v, const Var& w, std::size_t out_dim) {
  const Array& vv = v.value();
  const Array& wv = w.value();
  const std::size_t rows = vv.rows(), in_dim = vv.cols();
  if (wv.rows() != rows || wv.cols() != in_dim * out_dim)
    throw ConfigError("row_vecmat shape mismatch: " + shape_string(vv.shape()) + " with " +
                      shape_string(wv.shape()));
  Array out = Array::matrix(rows, out_dim);
  for (std::size_t b = 0; b < rows; ++b)
    for (std::size_t a = 0; a < in_dim; ++a) {
      const double q = vv[b * in_dim + a];
      const double* wrow = wv.data().data() + b * in_dim * out_dim + a * out_dim;
      double* orow = &out[b * out_dim];
      for (std::size_t h = 0; h < out_dim; ++h) orow[h] += q * wrow[h];
    }
  auto vn = v.ptr();
  auto wn = w.ptr();
  return make_result(std::move(out), {vn, wn}, [vn, wn, rows, in_dim, out_dim](Node& self) {
    const Array& g = self.grad;
    for (std::size_t b = 0; b < rows; ++b)
      for (std::size_t a = 0; a < in_dim; ++a) {
        const std::size_t base = b * in_dim * out_dim + a * out_dim;
        if (vn->requires_grad) {
          double s = 0.0;
          for (std::size_t h = 0; h < out_dim; ++h) s += g[b * out_dim + h] * wn->value[base + h];
          vn->grad_buffer()[b * in_dim + a] += s;
        }
        if (wn->requires_grad) {
          const double q = vn->value[b * in_dim + a];
          auto& gw = wn->grad_buffer();
          for (std::size_t h = 0; h < out_dim; ++h) gw[base + h] += q * g[b * out_dim + h];
        }
      }
  });
}

}  // namespace omarl::ad
