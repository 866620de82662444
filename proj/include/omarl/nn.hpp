#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "omarl/autodiff.hpp"

namespace omarl {

using Rng = std::mt19937_64;
using NamedParam = std::pair<std::string, ad::Var>;

enum class Activation { relu, elu, tanh, linear };

ad::Var activate(const ad::Var& x, Activation act);

// Hidden-layer presets.
inline const std::vector<std::size_t> kDeskHidden{64, 64};
inline const std::vector<std::size_t> kWideHidden{512, 512, 512, 512};

// Feed-forward network. Hidden layers are linear -> [layer norm + affine] ->
// activation; the output layer is linear.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<std::size_t> layer_sizes, Rng& rng, bool use_layer_norm = false,
      Activation activation = Activation::relu);

  ad::Var forward(const ad::Var& input) const;

  const std::vector<std::size_t>& layer_sizes() const { return layer_sizes_; }
  std::size_t in_dim() const { return layer_sizes_.front(); }
  std::size_t out_dim() const { return layer_sizes_.back(); }
  bool use_layer_norm() const { return use_layer_norm_; }

  std::vector<ad::Var> parameters() const;
  void append_named(std::vector<NamedParam>& out, const std::string& prefix) const;
  // Deep copy with fresh nodes; trainable=false yields a frozen copy (targets).
  Mlp copy(bool trainable) const;

  // Direct access used by constructed test fixtures and degenerate mixers.
  ad::Var& weight(std::size_t layer) { return weights_.at(layer); }
  ad::Var& bias(std::size_t layer) { return biases_.at(layer); }
  std::size_t num_layers() const { return weights_.size(); }

 private:
  std::vector<std::size_t> layer_sizes_;
  std::vector<ad::Var> weights_;
  std::vector<ad::Var> biases_;
  std::vector<ad::Var> ln_gain_;
  std::vector<ad::Var> ln_bias_;
  bool use_layer_norm_ = false;
  Activation activation_ = Activation::relu;
};

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  Adam(std::vector<ad::Var> params, AdamConfig config);

  // Applies one update from the parameters' accumulated gradients. Throws
  // DivergenceError if any gradient is non-finite; parameters are untouched
  // in that case.
  void step();
  void zero_grad();
  double grad_norm() const;

  std::int64_t steps() const { return step_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<ad::Var>& params() const { return params_; }

 private:
  std::vector<ad::Var> params_;
  std::vector<Array> m_;
  std::vector<Array> v_;
  AdamConfig config_;
  std::int64_t step_ = 0;
};

// target <- (1 - tau) * target + tau * online, elementwise.
void polyak_update(std::span<ad::Var> target, std::span<const ad::Var> online, double tau);

double global_norm(std::span<const ad::Var> params);

// Scoped requires_grad=false over a parameter set.
class FreezeGuard {
 public:
  explicit FreezeGuard(std::vector<ad::Var> params);
  ~FreezeGuard();
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  std::vector<ad::Var> params_;
  std::vector<bool> previous_;
};

}  // namespace omarl
