#pragma once

// Reverse-mode automatic differentiation over dense 2-D arrays.
//
// A Var is a handle to a graph node. Ops build the graph eagerly; backward()
// walks it once in reverse topological order and accumulates gradients into
// every node that requires them. Parameters are leaf nodes that persist
// across graphs; their gradients accumulate until zero_grad().

#include <functional>
#include <memory>
#include <vector>

#include "omarl/array.hpp"

namespace omarl::ad {

struct Node {
  Array value;
  Array grad;
  bool requires_grad = false;
  bool has_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  // Gradient buffer, zero-allocated on first use.
  Array& grad_buffer();
};

class Var {
 public:
  Var();
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Array& value() const { return node_->value; }
  // Direct write access, intended for parameters (optimizer, polyak, loading).
  Array& mutable_value() { return node_->value; }
  // Accumulated gradient; a zero array when nothing has flowed in.
  Array grad() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  void zero_grad();

  const Shape& shape() const { return node_->value.shape(); }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  std::size_t size() const { return node_->value.size(); }
  double item() const { return node_->value.item(); }

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

Var constant(Array value);
Var parameter(Array value);

// Disables graph construction on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Re-enables graph construction inside a NoGradGuard scope.
class EnableGradGuard {
 public:
  EnableGradGuard();
  ~EnableGradGuard();
  EnableGradGuard(const EnableGradGuard&) = delete;
  EnableGradGuard& operator=(const EnableGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// root must hold exactly one element.
void backward(const Var& root);

Var stop_gradient(const Var& x);

// Elementwise binary ops. Operands broadcast along either matrix axis when
// that axis has extent 1.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var minimum(const Var& a, const Var& b);

Var scale(const Var& x, double c);
Var add_scalar(const Var& x, double c);
Var neg(const Var& x);

Var matmul(const Var& a, const Var& b);

Var relu(const Var& x);
Var elu(const Var& x);
Var tanh(const Var& x);
Var exp(const Var& x);
Var log(const Var& x);
Var abs(const Var& x);
Var square(const Var& x);
Var clamp(const Var& x, double lo, double hi);

Var sum(const Var& x);
Var mean(const Var& x);
// Per-row sum: [R,C] -> [R,1].
Var sum_cols(const Var& x);
// Per-column mean: [R,C] -> [1,C].
Var mean_rows(const Var& x);

Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(const Var& x, std::size_t start, std::size_t count);
Var reshape(const Var& x, Shape shape);

// Per-row standardization without affine terms.
Var layer_norm(const Var& x, double eps = 1e-5);
Var log_softmax(const Var& x);
Var softmax(const Var& x);
// out[r] = x[r, index[r]], shape [R,1].
Var gather_cols(const Var& x, const std::vector<std::size_t>& index);
// Batched vector-matrix product: v is [B,A], w is [B,A*H] holding one row-major
// A x H matrix per row; out[b,:] = v[b,:] * W_b, shape [B,H].
Var row_vecmat(const Var& v, const Var& w, std::size_t out_dim);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }
inline Var operator-(const Var& a) { return neg(a); }
inline Var operator*(const Var& a, double c) { return scale(a, c); }
inline Var operator*(double c, const Var& a) { return scale(a, c); }
inline Var operator+(const Var& a, double c) { return add_scalar(a, c); }
inline Var operator-(const Var& a, double c) { return add_scalar(a, -c); }

}  // namespace omarl::ad
