#pragma once

// Per-agent stochastic actors and the two extraction objectives.
//
//   brac  Qterm + alpha * BC, BC = -sum_a E[log pi^a(u^a_data | o^a)]
//   awr   -sum_a E[w_a log pi^a(u^a_data | o^a)],
//         w_a = min(exp(alpha * advantage), clip) with detached advantages
//
// With actor_norm on, the Q term is centred and scaled by detached batch
// statistics of the critic value, which makes actor gradients invariant to a
// global rescaling of Q_tot.

#include <string>
#include <vector>

#include "omarl/critic.hpp"
#include "omarl/dataset.hpp"
#include "omarl/env.hpp"
#include "omarl/nn.hpp"
#include "omarl/value_learning.hpp"

namespace omarl {

enum class Extraction { brac, awr };

Extraction parse_extraction(const std::string& name);
std::string to_string(Extraction e);

struct ExtractionConfig {
  Extraction method = Extraction::awr;
  double alpha = 1.0;
  bool actor_norm = false;
  double awr_clip = 100.0;
  // AWR advantages from per-agent Q^a - V_a instead of the global
  // Q_tot - V_tot (vdn and mix only; dec is always per-agent).
  bool awr_per_agent = false;

  void validate() const;
};

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

class PolicySet {
 public:
  PolicySet() = default;
  PolicySet(const EnvSpec& spec, const std::vector<std::size_t>& hidden, Rng& rng);

  const EnvSpec& spec() const { return spec_; }
  std::size_t num_agents() const { return nets_.size(); }

  // Discrete: logits [B,K]. Continuous: bounded Gaussian mean [B,D].
  ad::Var head(std::size_t agent, const ad::Var& obs) const;
  // Clamped state-independent log standard deviation, [1,D].
  ad::Var log_std(std::size_t agent) const;

  // log pi^a(u | o) per row, [B,1]. Discrete actions are given by index.
  ad::Var log_prob(std::size_t agent, const ad::Var& obs, const Array& action_input,
                   const std::vector<std::size_t>& action_index) const;

  // Differentiable action encoding for the critic: a reparameterized Gaussian
  // sample clamped to the bounds, or the softmax probabilities.
  ad::Var critic_action(std::size_t agent, const ad::Var& obs, Rng& rng) const;

  // Detached sampled action encoding per row (one-hot for discrete).
  Array sample_encoded(std::size_t agent, const Array& obs, Rng& rng) const;

  // Environment action for one observation.
  std::vector<double> act(std::size_t agent, const std::vector<double>& obs, bool deterministic, Rng* rng,
                          double exploration_std = 0.0) const;
  JointAction act_joint(const AgentObs& obs, bool deterministic, Rng* rng, double exploration_std = 0.0) const;

  std::vector<ad::Var> parameters() const;
  void append_named(std::vector<NamedParam>& out) const;

  // Direct access for constructed fixtures.
  Mlp& net(std::size_t agent) { return nets_.at(agent); }

 private:
  EnvSpec spec_;
  std::vector<Mlp> nets_;
  std::vector<ad::Var> log_std_;
};

// Sampler for TD targets that draws next actions from the current policies.
NextActionSampler policy_sampler(const PolicySet& policies, Rng& rng);

// -E[q] (actor_norm off) or -E[q - sg(mean q)] / sg(mean |q|) (actor_norm on).
ad::Var actor_q_term(const ad::Var& q, bool actor_norm);

// Min-ensemble critic values at policy actions sampled for every agent: one
// [B,1] Q_tot for joint decompositions, one Q^a per agent for dec.
std::vector<ad::Var> policy_q_values(const PolicySet& policies, const CriticStack& stack, const Batch& batch,
                                     Rng& rng);

// -sum_a mean log pi^a(u^a_data | o^a)
ad::Var bc_loss(const PolicySet& policies, const Batch& batch);

ad::Var brac_loss(const PolicySet& policies, const CriticStack& stack, const Batch& batch,
                  const ExtractionConfig& config, Rng& rng);

double awr_weight(double advantage, double alpha, double clip);

// Detached advantages, one [B,1] array per agent (global advantages are
// repeated for every agent).
std::vector<Array> awr_advantages(const CriticStack& stack, const ValueNets& values, const Batch& batch,
                                  const ExtractionConfig& config);

ad::Var awr_loss(const PolicySet& policies, const CriticStack& stack, const ValueNets& values, const Batch& batch,
                 const ExtractionConfig& config);

struct ActorMetrics {
  double actor_loss = 0.0;
  double grad_norm = 0.0;
};

// One optimizer step on all actors jointly; critic and value networks are
// frozen for the duration.
ActorMetrics actor_update(PolicySet& policies, const CriticStack& stack, const ValueNets* values,
                          const Batch& batch, const ExtractionConfig& config, Adam& optimizer, Rng& rng);

struct EvalResult {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  std::vector<double> returns;
};

// Deterministic-action rollouts; episode e resets with seed + e.
EvalResult evaluate(const PolicySet& policies, const Env& env, std::size_t episodes, std::uint64_t seed);

}  // namespace omarl
