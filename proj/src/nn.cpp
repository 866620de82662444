#include "omarl/nn.hpp"

#include <cmath>

#include "omarl/errors.hpp"

namespace omarl {

ad::Var activate(const ad::Var& x, Activation act) {
  switch (act) {
    case Activation::relu: return ad::relu(x);
    case Activation::elu: return ad::elu(x);
    case Activation::tanh: return ad::tanh(x);
    case Activation::linear: return x;
  }
  return x;
}

Mlp::Mlp(std::vector<std::size_t> layer_sizes, Rng& rng, bool use_layer_norm, Activation activation)
    : layer_sizes_(std::move(layer_sizes)), use_layer_norm_(use_layer_norm), activation_(activation) {
  if (layer_sizes_.size() < 2) throw ConfigError("an MLP needs at least input and output sizes");
  for (auto d : layer_sizes_)
    if (d == 0) throw ConfigError("MLP layer sizes must be positive");
  for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
    const std::size_t fan_in = layer_sizes_[l], fan_out = layer_sizes_[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    Array w = Array::matrix(fan_in, fan_out);
    for (auto& v : w.vec()) v = u(rng);
    Array b = Array::matrix(1, fan_out);
    for (auto& v : b.vec()) v = u(rng);
    weights_.push_back(ad::parameter(std::move(w)));
    biases_.push_back(ad::parameter(std::move(b)));
    const bool hidden = l + 2 < layer_sizes_.size();
    if (hidden && use_layer_norm_) {
      ln_gain_.push_back(ad::parameter(Array::matrix(1, fan_out, 1.0)));
      ln_bias_.push_back(ad::parameter(Array::matrix(1, fan_out, 0.0)));
    }
  }
}

ad::Var Mlp::forward(const ad::Var& input) const {
  if (input.cols() != in_dim())
    throw ConfigError("MLP input has " + std::to_string(input.cols()) + " features, expected " +
                      std::to_string(in_dim()));
  ad::Var h = input;
  const std::size_t n = weights_.size();
  for (std::size_t l = 0; l < n; ++l) {
    h = ad::matmul(h, weights_[l]) + biases_[l];
    if (l + 1 < n) {
      if (use_layer_norm_) h = ad::layer_norm(h) * ln_gain_[l] + ln_bias_[l];
      h = activate(h, activation_);
    }
  }
  return h;
}

std::vector<ad::Var> Mlp::parameters() const {
  std::vector<ad::Var> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(weights_[l]);
    out.push_back(biases_[l]);
    if (l < ln_gain_.size()) {
      out.push_back(ln_gain_[l]);
      out.push_back(ln_bias_[l]);
    }
  }
  return out;
}

void Mlp::append_named(std::vector<NamedParam>& out, const std::string& prefix) const {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const std::string p = prefix + ".l" + std::to_string(l);
    out.emplace_back(p + ".w", weights_[l]);
    out.emplace_back(p + ".b", biases_[l]);
    if (l < ln_gain_.size()) {
      out.emplace_back(p + ".ln_gain", ln_gain_[l]);
      out.emplace_back(p + ".ln_bias", ln_bias_[l]);
    }
  }
}

Mlp Mlp::copy(bool trainable) const {
  Mlp out;
  out.layer_sizes_ = layer_sizes_;
  out.use_layer_norm_ = use_layer_norm_;
  out.activation_ = activation_;
  auto dup = [trainable](const std::vector<ad::Var>& src, std::vector<ad::Var>& dst) {
    for (const auto& v : src) dst.push_back(trainable ? ad::parameter(v.value()) : ad::constant(v.value()));
  };
  dup(weights_, out.weights_);
  dup(biases_, out.biases_);
  dup(ln_gain_, out.ln_gain_);
  dup(ln_bias_, out.ln_bias_);
  return out;
}

Adam::Adam(std::vector<ad::Var> params, AdamConfig config) : params_(std::move(params)), config_(config) {
  if (!(config_.lr > 0.0)) throw ConfigError("learning rate must be positive");
  for (const auto& p : params_) {
    m_.emplace_back(p.shape(), 0.0);
    v_.emplace_back(p.shape(), 0.0);
  }
}

void Adam::step() {
  for (const auto& p : params_) {
    const ad::Node* n = p.node();
    if (n->has_grad && !n->grad.all_finite())
      throw DivergenceError("non-finite gradient at optimizer step " + std::to_string(step_ + 1));
  }
  ++step_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    ad::Node* n = params_[k].node();
    if (!n->has_grad) continue;
    auto& w = n->value.vec();
    const auto& g = n->grad.vec();
    auto& m = m_[k].vec();
    auto& v = v_[k].vec();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      w[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.epsilon);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double Adam::grad_norm() const { return global_norm(params_); }

double global_norm(std::span<const ad::Var> params) {
  double s = 0.0;
  for (const auto& p : params) {
    const ad::Node* n = p.node();
    if (!n->has_grad) continue;
    for (double g : n->grad.vec()) s += g * g;
  }
  return std::sqrt(s);
}

void polyak_update(std::span<ad::Var> target, std::span<const ad::Var> online, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("polyak tau must lie in [0, 1]");
  if (target.size() != online.size()) throw ConfigError("polyak parameter count mismatch");
  for (std::size_t k = 0; k < target.size(); ++k) {
    auto& t = target[k].mutable_value();
    const auto& o = online[k].value();
    if (!t.same_shape(o)) throw ConfigError("polyak shape mismatch");
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = (1.0 - tau) * t[i] + tau * o[i];
  }
}

FreezeGuard::FreezeGuard(std::vector<ad::Var> params) : params_(std::move(params)) {
  for (auto& p : params_) {
    previous_.push_back(p.requires_grad());
    p.set_requires_grad(false);
  }
}

FreezeGuard::~FreezeGuard() {
  for (std::size_t i = 0; i < params_.size(); ++i) params_[i].set_requires_grad(previous_[i]);
}

}  // namespace omarl
