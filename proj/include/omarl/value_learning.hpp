#pragma once

// Critic objectives (TD, SARSA, IQL) and scale-invariant value
// normalization (SVN): the TD regression is carried out on values centred by
// the batch mean and scaled by the mean absolute deviation of the current
// joint value, with both statistics detached from the graph. Because the
// statistics are constants, the normalized loss equals the plain loss divided
// by sigma^2 and has the same minimizers.

#include <functional>
#include <string>
#include <vector>

#include "omarl/critic.hpp"
#include "omarl/dataset.hpp"
#include "omarl/nn.hpp"

namespace omarl {

enum class ValueLearning { td, sarsa, iql };

ValueLearning parse_value_learning(const std::string& name);
std::string to_string(ValueLearning v);

struct ValueLearnConfig {
  ValueLearning method = ValueLearning::td;
  double gamma = 0.99;
  double iql_tau = 0.7;
  bool svn = false;
  double svn_epsilon = 1e-6;
  // Regress only the elementwise-min ensemble value (the larger member then
  // receives no gradient on that row).
  bool listing1_strict = false;

  void validate() const;
};

struct NormStats {
  double mu_q = 0.0;
  double sigma_q = 1.0;
};

// |tau - 1{u<0}| * u^2
double expectile_loss(double u, double tau);
// Mean expectile loss over all elements of u.
ad::Var expectile_loss(const ad::Var& u, double tau);

// Detached batch statistics of the current joint value: mean and mean
// absolute deviation + epsilon.
NormStats svn_stats(const Array& q, double epsilon);

ad::Var mse_loss(const ad::Var& q, const Array& y);
// mean(((q - mu)/sigma - (y - mu)/sigma)^2)
ad::Var svn_td_loss(const ad::Var& q, const Array& y, const NormStats& stats);

// State-value networks: a global V_tot(s) and/or per-agent V_a(o^a).
class ValueNets {
 public:
  ValueNets() = default;
  ValueNets(const EnvSpec& spec, bool global, bool per_agent, const std::vector<std::size_t>& hidden,
            bool layer_norm, Rng& rng);

  bool has_global() const { return !global_.layer_sizes().empty(); }
  bool has_agents() const { return !agents_.empty(); }

  ad::Var global(const ad::Var& state) const;
  ad::Var agent(std::size_t a, const ad::Var& obs) const;

  std::vector<ad::Var> parameters() const;
  void append_named(std::vector<NamedParam>& out) const;

 private:
  Mlp global_;
  std::vector<Mlp> agents_;
};

// Produces critic-ready encodings of next actions for the given next
// observations (one [B,U] array per agent). Used by TD targets.
using NextActionSampler = std::function<std::vector<Array>(const std::vector<Array>& next_obs)>;

// Bellman targets, detached. One [B,1] array for joint decompositions, one
// per agent for dec.
using Targets = std::vector<Array>;

Targets td_target(const CriticStack& stack, const Batch& batch, const NextActionSampler& sampler, double gamma);
// Throws DatasetError when a non-terminal row lacks recorded next actions.
Targets sarsa_target(const CriticStack& stack, const Batch& batch, double gamma);
Targets iql_target(const CriticStack& stack, const ValueNets& values, const Batch& batch, double gamma);

struct CriticMetrics {
  double td_loss = 0.0;     // unnormalized MSE of the min-ensemble value
  double q_mean = 0.0;      // unnormalized
  double q_abs_mean = 0.0;  // unnormalized
  double v_loss = 0.0;
  double grad_norm = 0.0;   // critic + value networks
  NormStats stats;          // stats of the min-ensemble current value
};

// Current min-ensemble values at the batch's dataset actions: one [B,1]
// array (joint) or one per agent (dec).
std::vector<Array> current_values(const CriticStack& stack, const Batch& batch, bool target);

// Builds the critic loss against fixed targets; exposed for tests.
ad::Var critic_loss(const CriticStack& stack, const Batch& batch, const Targets& targets,
                    const ValueLearnConfig& config, NormStats* stats_out = nullptr);

// One optimizer step on the critic (and on the value networks, when given:
// expectile regression with tau = iql_tau for IQL, 0.5 otherwise), then a
// Polyak update of the targets.
CriticMetrics critic_update(CriticStack& stack, ValueNets* values, const Batch& batch,
                            const NextActionSampler& sampler, const ValueLearnConfig& config, Adam& critic_opt,
                            Adam* value_opt, double polyak_tau);

}  // namespace omarl
