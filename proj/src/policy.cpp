#include "omarl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "omarl/errors.hpp"

namespace omarl {

Extraction parse_extraction(const std::string& name) {
  if (name == "brac") return Extraction::brac;
  if (name == "awr") return Extraction::awr;
  throw ConfigError("unknown extraction '" + name + "' (expected brac or awr)");
}

std::string to_string(Extraction e) { return e == Extraction::brac ? "brac" : "awr"; }

void ExtractionConfig::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be a finite non-negative number");
  if (!(awr_clip >= 1.0)) throw ConfigError("awr_clip must be at least 1");
}

// ---------------------------------------------------------------------------
// PolicySet

PolicySet::PolicySet(const EnvSpec& spec, const std::vector<std::size_t>& hidden, Rng& rng) : spec_(spec) {
  spec_.validate();
  for (std::size_t a = 0; a < spec_.num_agents; ++a) {
    std::vector<std::size_t> sizes{spec_.obs_dim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(spec_.action.n);
    nets_.emplace_back(sizes, rng, false);
    if (!spec_.action.discrete()) log_std_.push_back(ad::parameter(Array::matrix(1, spec_.action.n, 0.0)));
  }
}

ad::Var PolicySet::head(std::size_t agent, const ad::Var& obs) const {
  ad::Var out = nets_.at(agent).forward(obs);
  if (spec_.action.discrete()) return out;
  const double mid = 0.5 * (spec_.action.high + spec_.action.low);
  const double half = 0.5 * (spec_.action.high - spec_.action.low);
  return ad::tanh(out) * half + mid;
}

ad::Var PolicySet::log_std(std::size_t agent) const {
  if (spec_.action.discrete()) throw UsageError("discrete policies have no log standard deviation");
  return ad::clamp(log_std_.at(agent), kLogStdMin, kLogStdMax);
}

ad::Var PolicySet::log_prob(std::size_t agent, const ad::Var& obs, const Array& action_input,
                            const std::vector<std::size_t>& action_index) const {
  if (spec_.action.discrete()) return ad::gather_cols(ad::log_softmax(head(agent, obs)), action_index);
  ad::Var ls = log_std(agent);
  ad::Var z = (ad::constant(action_input) - head(agent, obs)) / ad::exp(ls);
  const double d = static_cast<double>(spec_.action.n);
  ad::Var per_dim = ad::square(z) * -0.5 - ls;
  return ad::sum_cols(per_dim) - 0.5 * d * std::log(2.0 * std::numbers::pi);
}

ad::Var PolicySet::critic_action(std::size_t agent, const ad::Var& obs, Rng& rng) const {
  ad::Var h = head(agent, obs);
  if (spec_.action.discrete()) return ad::softmax(h);
  std::normal_distribution<double> normal(0.0, 1.0);
  Array eps(h.shape());
  for (auto& v : eps.data()) v = normal(rng);
  ad::Var sample = h + ad::constant(std::move(eps)) * ad::exp(log_std(agent));
  return ad::clamp(sample, spec_.action.low, spec_.action.high);
}

Array PolicySet::sample_encoded(std::size_t agent, const Array& obs, Rng& rng) const {
  ad::NoGradGuard no_grad;
  ad::Var h = head(agent, ad::constant(obs));
  const std::size_t rows = h.rows(), n = spec_.action.n;
  Array out = Array::matrix(rows, n, 0.0);
  if (spec_.action.discrete()) {
    const Array p = ad::softmax(h).value();
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t r = 0; r < rows; ++r) {
      double u = unif(rng), acc = 0.0;
      std::size_t pick = n - 1;
      for (std::size_t k = 0; k < n; ++k) {
        acc += p(r, k);
        if (u < acc) {
          pick = k;
          break;
        }
      }
      out(r, pick) = 1.0;
    }
    return out;
  }
  const Array std = ad::exp(log_std(agent)).value();
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t k = 0; k < n; ++k)
      out(r, k) = std::clamp(h.value()(r, k) + std[k] * normal(rng), spec_.action.low, spec_.action.high);
  return out;
}

std::vector<double> PolicySet::act(std::size_t agent, const std::vector<double>& obs, bool deterministic, Rng* rng,
                                   double exploration_std) const {
  ad::NoGradGuard no_grad;
  const Array h = head(agent, ad::constant(Array({1, obs.size()}, obs))).value();
  const std::size_t n = spec_.action.n;
  if (spec_.action.discrete()) {
    std::size_t pick = 0;
    if (deterministic || rng == nullptr) {
      for (std::size_t k = 1; k < n; ++k)
        if (h[k] > h[pick]) pick = k;
    } else {
      std::vector<double> logits(h.data().begin(), h.data().end());
      const double mx = *std::max_element(logits.begin(), logits.end());
      for (auto& l : logits) l = std::exp(l - mx);
      std::discrete_distribution<std::size_t> dist(logits.begin(), logits.end());
      pick = dist(*rng);
    }
    return {static_cast<double>(pick)};
  }
  std::vector<double> u(h.data().begin(), h.data().end());
  if (!deterministic && rng != nullptr && exploration_std > 0.0) {
    std::normal_distribution<double> normal(0.0, exploration_std);
    for (auto& v : u) v = std::clamp(v + normal(*rng), spec_.action.low, spec_.action.high);
  }
  return u;
}

JointAction PolicySet::act_joint(const AgentObs& obs, bool deterministic, Rng* rng, double exploration_std) const {
  JointAction out;
  for (std::size_t a = 0; a < nets_.size(); ++a) out.push_back(act(a, obs.at(a), deterministic, rng, exploration_std));
  return out;
}

std::vector<ad::Var> PolicySet::parameters() const {
  std::vector<ad::Var> out;
  for (std::size_t a = 0; a < nets_.size(); ++a) {
    auto p = nets_[a].parameters();
    out.insert(out.end(), p.begin(), p.end());
    if (!log_std_.empty()) out.push_back(log_std_[a]);
  }
  return out;
}

void PolicySet::append_named(std::vector<NamedParam>& out) const {
  for (std::size_t a = 0; a < nets_.size(); ++a) {
    const std::string prefix = "actor.agent" + std::to_string(a);
    nets_[a].append_named(out, prefix);
    if (!log_std_.empty()) out.emplace_back(prefix + ".log_std", log_std_[a]);
  }
}

NextActionSampler policy_sampler(const PolicySet& policies, Rng& rng) {
  return [&policies, &rng](const std::vector<Array>& next_obs) {
    std::vector<Array> out;
    for (std::size_t a = 0; a < next_obs.size(); ++a) out.push_back(policies.sample_encoded(a, next_obs[a], rng));
    return out;
  };
}

// ---------------------------------------------------------------------------
// Objectives

ad::Var actor_q_term(const ad::Var& q, bool actor_norm) {
  if (!actor_norm) return -ad::mean(q);
  double mu = 0.0, mag = 0.0;
  for (double v : q.value().data()) {
    mu += v;
    mag += std::abs(v);
  }
  mu /= static_cast<double>(q.size());
  mag /= static_cast<double>(q.size());
  if (mag == 0.0) mag = 1.0;
  return -ad::mean(q - mu) * (1.0 / mag);
}

std::vector<ad::Var> policy_q_values(const PolicySet& policies, const CriticStack& stack, const Batch& batch,
                                     Rng& rng) {
  const std::size_t n = stack.spec().num_agents;
  JointInput in;
  in.state = ad::constant(batch.state);
  for (std::size_t a = 0; a < n; ++a) {
    in.obs.push_back(ad::constant(batch.obs[a]));
    in.actions.push_back(policies.critic_action(a, in.obs.back(), rng));
  }
  if (stack.decomp() != Decomposition::dec) return {stack.min_q_tot(in)};
  std::vector<ad::Var> out;
  for (std::size_t a = 0; a < n; ++a) out.push_back(stack.min_agent_q(a, in.obs[a], in.actions[a]));
  return out;
}

ad::Var bc_loss(const PolicySet& policies, const Batch& batch) {
  ad::Var total;
  for (std::size_t a = 0; a < policies.num_agents(); ++a) {
    const auto& index = batch.action_index.empty() ? std::vector<std::size_t>{} : batch.action_index[a];
    ad::Var lp = ad::mean(policies.log_prob(a, ad::constant(batch.obs[a]), batch.action_input[a], index));
    total = a == 0 ? -lp : total - lp;
  }
  return total;
}

ad::Var brac_loss(const PolicySet& policies, const CriticStack& stack, const Batch& batch,
                  const ExtractionConfig& config, Rng& rng) {
  ad::Var q_term;
  auto q = policy_q_values(policies, stack, batch, rng);
  for (std::size_t h = 0; h < q.size(); ++h) {
    ad::Var t = actor_q_term(q[h], config.actor_norm);
    q_term = h == 0 ? t : q_term + t;
  }
  if (config.alpha == 0.0) return q_term;
  return q_term + bc_loss(policies, batch) * config.alpha;
}

double awr_weight(double advantage, double alpha, double clip) { return std::min(std::exp(alpha * advantage), clip); }

std::vector<Array> awr_advantages(const CriticStack& stack, const ValueNets& values, const Batch& batch,
                                  const ExtractionConfig& config) {
  ad::NoGradGuard no_grad;
  const std::size_t n = stack.spec().num_agents;
  const bool per_agent = stack.decomp() == Decomposition::dec || config.awr_per_agent;
  std::vector<Array> out;
  if (per_agent) {
    if (stack.decomp() == Decomposition::cen) throw ConfigError("per-agent AWR advantages need per-agent utilities");
    for (std::size_t a = 0; a < n; ++a) {
      ad::Var obs = ad::constant(batch.obs[a]);
      ad::Var q = stack.min_agent_q(a, obs, ad::constant(batch.action_input[a]), true);
      out.push_back((q - values.agent(a, obs)).value());
    }
    return out;
  }
  ad::Var q = stack.min_q_tot(joint_input(batch.state, batch.obs, batch.action_input), true);
  Array adv = (q - values.global(ad::constant(batch.state))).value();
  out.assign(n, adv);
  return out;
}

ad::Var awr_loss(const PolicySet& policies, const CriticStack& stack, const ValueNets& values, const Batch& batch,
                 const ExtractionConfig& config) {
  const auto adv = awr_advantages(stack, values, batch, config);
  ad::Var total;
  for (std::size_t a = 0; a < policies.num_agents(); ++a) {
    Array w = adv[a];
    for (auto& v : w.data()) v = awr_weight(v, config.alpha, config.awr_clip);
    const auto& index = batch.action_index.empty() ? std::vector<std::size_t>{} : batch.action_index[a];
    ad::Var lp = policies.log_prob(a, ad::constant(batch.obs[a]), batch.action_input[a], index);
    ad::Var term = ad::mean(ad::constant(std::move(w)) * lp);
    total = a == 0 ? -term : total - term;
  }
  return total;
}

ActorMetrics actor_update(PolicySet& policies, const CriticStack& stack, const ValueNets* values,
                          const Batch& batch, const ExtractionConfig& config, Adam& optimizer, Rng& rng) {
  FreezeGuard freeze_critic(stack.parameters());
  FreezeGuard freeze_values(values ? values->parameters() : std::vector<ad::Var>{});
  optimizer.zero_grad();
  ad::Var loss;
  if (config.method == Extraction::brac) {
    loss = brac_loss(policies, stack, batch, config, rng);
  } else {
    if (values == nullptr) throw UsageError("AWR requires state-value networks");
    loss = awr_loss(policies, stack, *values, batch, config);
  }
  ActorMetrics m;
  m.actor_loss = loss.item();
  if (!std::isfinite(m.actor_loss)) throw DivergenceError("non-finite actor loss");
  ad::backward(loss);
  m.grad_norm = optimizer.grad_norm();
  optimizer.step();
  return m;
}

EvalResult evaluate(const PolicySet& policies, const Env& env, std::size_t episodes, std::uint64_t seed) {
  if (episodes == 0) throw ConfigError("evaluation needs at least one episode");
  EvalResult r;
  auto sim = env.clone();
  for (std::size_t e = 0; e < episodes; ++e) {
    Observation o = sim->reset(seed + e);
    double ret = 0.0;
    AgentObs obs = o.obs;
    for (;;) {
      StepResult s = sim->step(policies.act_joint(obs, true, nullptr));
      ret += s.team_reward;
      if (s.done) break;
      obs = s.next_obs;
    }
    r.returns.push_back(ret);
  }
  for (double v : r.returns) r.mean += v;
  r.mean /= static_cast<double>(episodes);
  for (double v : r.returns) r.std += (v - r.mean) * (v - r.mean);
  r.std = std::sqrt(r.std / static_cast<double>(episodes));
  return r;
}

}  // namespace omarl
