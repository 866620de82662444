#include "omarl/value_learning.hpp"

#include <cmath>

#include "omarl/errors.hpp"

namespace omarl {

ValueLearning parse_value_learning(const std::string& name) {
  if (name == "td") return ValueLearning::td;
  if (name == "sarsa") return ValueLearning::sarsa;
  if (name == "iql") return ValueLearning::iql;
  throw ConfigError("unknown value_learning '" + name + "' (expected td, sarsa or iql)");
}

std::string to_string(ValueLearning v) {
  switch (v) {
    case ValueLearning::td: return "td";
    case ValueLearning::sarsa: return "sarsa";
    case ValueLearning::iql: return "iql";
  }
  return "?";
}

void ValueLearnConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
  if (!(iql_tau > 0.0 && iql_tau < 1.0)) throw ConfigError("iql_tau must lie in (0, 1)");
  if (!(svn_epsilon > 0.0)) throw ConfigError("svn_epsilon must be positive");
}

double expectile_loss(double u, double tau) {
  const double w = u < 0.0 ? 1.0 - tau : tau;
  return w * u * u;
}

ad::Var expectile_loss(const ad::Var& u, double tau) {
  Array w(u.shape());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = u.value()[i] < 0.0 ? 1.0 - tau : tau;
  return ad::mean(ad::constant(std::move(w)) * ad::square(u));
}

NormStats svn_stats(const Array& q, double epsilon) {
  if (q.size() == 0) throw UsageError("svn_stats on an empty batch");
  double mu = 0.0;
  for (double v : q.data()) mu += v;
  mu /= static_cast<double>(q.size());
  double mad = 0.0;
  for (double v : q.data()) mad += std::abs(v - mu);
  mad /= static_cast<double>(q.size());
  return {mu, mad + epsilon};
}

ad::Var mse_loss(const ad::Var& q, const Array& y) { return ad::mean(ad::square(q - ad::constant(y))); }

ad::Var svn_td_loss(const ad::Var& q, const Array& y, const NormStats& stats) {
  const double inv = 1.0 / stats.sigma_q;
  ad::Var qn = (q - stats.mu_q) * inv;
  Array yn = y;
  for (auto& v : yn.data()) v = (v - stats.mu_q) * inv;
  return ad::mean(ad::square(qn - ad::constant(std::move(yn))));
}

// ---------------------------------------------------------------------------
// ValueNets

ValueNets::ValueNets(const EnvSpec& spec, bool global, bool per_agent, const std::vector<std::size_t>& hidden,
                     bool layer_norm, Rng& rng) {
  auto sizes = [&](std::size_t in) {
    std::vector<std::size_t> s{in};
    s.insert(s.end(), hidden.begin(), hidden.end());
    s.push_back(1);
    return s;
  };
  if (global) global_ = Mlp(sizes(spec.state_dim), rng, layer_norm);
  if (per_agent)
    for (std::size_t a = 0; a < spec.num_agents; ++a) agents_.emplace_back(sizes(spec.obs_dim), rng, layer_norm);
}

ad::Var ValueNets::global(const ad::Var& state) const {
  if (!has_global()) throw UsageError("no global state-value network configured");
  return global_.forward(state);
}

ad::Var ValueNets::agent(std::size_t a, const ad::Var& obs) const {
  if (!has_agents()) throw UsageError("no per-agent state-value networks configured");
  return agents_.at(a).forward(obs);
}

std::vector<ad::Var> ValueNets::parameters() const {
  std::vector<ad::Var> out;
  if (has_global()) out = global_.parameters();
  for (const auto& net : agents_) {
    auto p = net.parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

void ValueNets::append_named(std::vector<NamedParam>& out) const {
  if (has_global()) global_.append_named(out, "value.global");
  for (std::size_t a = 0; a < agents_.size(); ++a) agents_[a].append_named(out, "value.agent" + std::to_string(a));
}

// ---------------------------------------------------------------------------
// Targets

namespace {

bool is_dec(const CriticStack& stack) { return stack.decomp() == Decomposition::dec; }

Array bellman(const Batch& batch, const Array& next_value, double gamma) {
  Array y({batch.size, 1});
  for (std::size_t i = 0; i < batch.size; ++i) {
    y[i] = batch.reward[i] + gamma * (1.0 - batch.done[i]) * next_value[i];
    if (!std::isfinite(y[i])) throw DivergenceError("non-finite Bellman target at batch row " + std::to_string(i));
  }
  return y;
}

// Values of the target critic at (next_state, next_obs, actions).
Targets bootstrap(const CriticStack& stack, const Batch& batch, const std::vector<Array>& next_actions,
                  double gamma) {
  ad::NoGradGuard no_grad;
  Targets out;
  if (is_dec(stack)) {
    for (std::size_t a = 0; a < stack.spec().num_agents; ++a) {
      ad::Var q = stack.min_agent_q(a, ad::constant(batch.next_obs[a]), ad::constant(next_actions[a]), true);
      out.push_back(bellman(batch, q.value(), gamma));
    }
  } else {
    JointInput in = joint_input(batch.next_state, batch.next_obs, next_actions);
    out.push_back(bellman(batch, stack.min_q_tot(in, true).value(), gamma));
  }
  return out;
}

}  // namespace

Targets td_target(const CriticStack& stack, const Batch& batch, const NextActionSampler& sampler, double gamma) {
  std::vector<Array> next_actions;
  {
    ad::NoGradGuard no_grad;
    next_actions = sampler(batch.next_obs);
  }
  if (next_actions.size() != stack.spec().num_agents) throw UsageError("next-action sampler returned wrong agent count");
  return bootstrap(stack, batch, next_actions, gamma);
}

Targets sarsa_target(const CriticStack& stack, const Batch& batch, double gamma) {
  for (std::size_t i = 0; i < batch.size; ++i)
    if (batch.done[i] == 0.0 && batch.has_next_action[i] == 0.0)
      throw DatasetError("SARSA target needs next_actions on non-terminal record " +
                         std::to_string(batch.indices.empty() ? i : batch.indices[i]));
  return bootstrap(stack, batch, batch.next_action_input, gamma);
}

Targets iql_target(const CriticStack& stack, const ValueNets& values, const Batch& batch, double gamma) {
  ad::NoGradGuard no_grad;
  Targets out;
  if (is_dec(stack)) {
    for (std::size_t a = 0; a < stack.spec().num_agents; ++a)
      out.push_back(bellman(batch, values.agent(a, ad::constant(batch.next_obs[a])).value(), gamma));
  } else {
    out.push_back(bellman(batch, values.global(ad::constant(batch.next_state)).value(), gamma));
  }
  return out;
}

std::vector<Array> current_values(const CriticStack& stack, const Batch& batch, bool target) {
  ad::NoGradGuard no_grad;
  std::vector<Array> out;
  if (is_dec(stack)) {
    for (std::size_t a = 0; a < stack.spec().num_agents; ++a)
      out.push_back(
          stack.min_agent_q(a, ad::constant(batch.obs[a]), ad::constant(batch.action_input[a]), target).value());
  } else {
    out.push_back(stack.min_q_tot(joint_input(batch.state, batch.obs, batch.action_input), target).value());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Critic loss and update

namespace {

// Loss for one regression head given both members' predictions.
ad::Var head_loss(const ad::Var& q0, const ad::Var& q1, const Array& y, const ValueLearnConfig& config,
                  NormStats& stats) {
  ad::Var qmin = ad::minimum(q0, q1);
  stats = config.svn ? svn_stats(qmin.value(), config.svn_epsilon) : NormStats{};
  if (config.listing1_strict) return svn_td_loss(qmin, y, stats);
  return svn_td_loss(q0, y, stats) + svn_td_loss(q1, y, stats);
}

}  // namespace

ad::Var critic_loss(const CriticStack& stack, const Batch& batch, const Targets& targets,
                    const ValueLearnConfig& config, NormStats* stats_out) {
  NormStats stats;
  if (!is_dec(stack)) {
    if (targets.size() != 1) throw UsageError("joint critic expects a single target column");
    JointInput in = joint_input(batch.state, batch.obs, batch.action_input);
    ad::Var loss = head_loss(stack.q_tot(0, in), stack.q_tot(1, in), targets[0], config, stats);
    if (stats_out) *stats_out = stats;
    return loss;
  }
  const std::size_t n = stack.spec().num_agents;
  if (targets.size() != n) throw UsageError("dec critic expects one target column per agent");
  ad::Var total;
  NormStats avg{0.0, 0.0};
  for (std::size_t a = 0; a < n; ++a) {
    ad::Var obs = ad::constant(batch.obs[a]);
    ad::Var act = ad::constant(batch.action_input[a]);
    ad::Var l = head_loss(stack.agent_q(0, a, obs, act), stack.agent_q(1, a, obs, act), targets[a], config, stats);
    total = a == 0 ? l : total + l;
    avg.mu_q += stats.mu_q / static_cast<double>(n);
    avg.sigma_q += stats.sigma_q / static_cast<double>(n);
  }
  if (stats_out) *stats_out = avg;
  return total;
}

CriticMetrics critic_update(CriticStack& stack, ValueNets* values, const Batch& batch,
                            const NextActionSampler& sampler, const ValueLearnConfig& config, Adam& critic_opt,
                            Adam* value_opt, double polyak_tau) {
  Targets targets;
  switch (config.method) {
    case ValueLearning::td: targets = td_target(stack, batch, sampler, config.gamma); break;
    case ValueLearning::sarsa: targets = sarsa_target(stack, batch, config.gamma); break;
    case ValueLearning::iql:
      if (values == nullptr) throw UsageError("IQL requires state-value networks");
      targets = iql_target(stack, *values, batch, config.gamma);
      break;
  }

  CriticMetrics m;
  // Unnormalized diagnostics of the pre-update min-ensemble value.
  const std::vector<Array> current = current_values(stack, batch, false);
  double count = 0.0;
  for (std::size_t h = 0; h < current.size(); ++h) {
    for (std::size_t i = 0; i < current[h].size(); ++i) {
      const double q = current[h][i], d = q - targets[h][i];
      m.td_loss += d * d;
      m.q_mean += q;
      m.q_abs_mean += std::abs(q);
      count += 1.0;
    }
  }
  m.td_loss /= count;
  m.q_mean /= count;
  m.q_abs_mean /= count;

  critic_opt.zero_grad();
  ad::Var loss = critic_loss(stack, batch, targets, config, &m.stats);
  if (!std::isfinite(loss.item())) throw DivergenceError("non-finite critic loss");
  ad::backward(loss);
  double grad_sq = std::pow(critic_opt.grad_norm(), 2);
  // Report the live batch statistics whether or not they entered the loss.
  m.stats = {0.0, 0.0};
  for (const auto& q : current) {
    const NormStats s = svn_stats(q, config.svn_epsilon);
    m.stats.mu_q += s.mu_q / static_cast<double>(current.size());
    m.stats.sigma_q += s.sigma_q / static_cast<double>(current.size());
  }
  critic_opt.step();

  if (values != nullptr && value_opt != nullptr) {
    const double tau = config.method == ValueLearning::iql ? config.iql_tau : 0.5;
    value_opt->zero_grad();
    ad::Var vloss;
    bool any = false;
    if (values->has_global() && !is_dec(stack)) {
      Array q = current_values(stack, batch, true)[0];
      vloss = expectile_loss(ad::constant(q) - values->global(ad::constant(batch.state)), tau);
      any = true;
    }
    if (values->has_agents()) {
      ad::NoGradGuard no_grad;
      std::vector<Array> qa;
      for (std::size_t a = 0; a < stack.spec().num_agents; ++a)
        qa.push_back(
            stack.min_agent_q(a, ad::constant(batch.obs[a]), ad::constant(batch.action_input[a]), true).value());
      ad::EnableGradGuard grad_on;
      for (std::size_t a = 0; a < qa.size(); ++a) {
        ad::Var l = expectile_loss(ad::constant(qa[a]) - values->agent(a, ad::constant(batch.obs[a])), tau);
        vloss = any ? vloss + l : l;
        any = true;
      }
    }
    if (any) {
      m.v_loss = vloss.item();
      if (!std::isfinite(m.v_loss)) throw DivergenceError("non-finite state-value loss");
      ad::backward(vloss);
      grad_sq += std::pow(value_opt->grad_norm(), 2);
      value_opt->step();
    }
  }

  stack.update_targets(polyak_tau);
  m.grad_norm = std::sqrt(grad_sq);
  return m;
}

}  // namespace omarl
