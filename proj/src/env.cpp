#include "omarl/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "omarl/errors.hpp"

namespace omarl {

void EnvSpec::validate() const {
  if (num_agents < 2) throw ConfigError("environment needs at least two agents");
  if (horizon < 1) throw ConfigError("horizon must be at least 1");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
  if (!action.discrete() && !(std::isfinite(action.low) && std::isfinite(action.high) && action.low < action.high))
    throw ConfigError("continuous action bounds must be finite and ordered");
}

JointAction Env::checked_action(const JointAction& action) {
  const EnvSpec& s = spec();
  if (done_) throw UsageError("step() on a finished episode; call reset()");
  if (action.size() != s.num_agents)
    throw UsageError("joint action has " + std::to_string(action.size()) + " entries, expected " +
                     std::to_string(s.num_agents));
  JointAction out = action;
  for (auto& u : out) {
    if (s.action.discrete()) {
      if (u.size() != 1) throw UsageError("discrete action must hold one index");
      const double idx = u[0];
      if (!(idx >= 0.0 && idx < static_cast<double>(s.action.n) && idx == std::floor(idx)))
        throw UsageError("invalid discrete action index " + std::to_string(idx));
    } else {
      if (u.size() != s.action.n) throw UsageError("continuous action has the wrong dimension");
      for (auto& x : u) {
        if (!std::isfinite(x)) throw UsageError("non-finite continuous action");
        const double c = std::clamp(x, s.action.low, s.action.high);
        if (c != x) ++clip_count_;
        x = c;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Two-step game

TwoStepGame::TwoStepGame() {
  spec_.name = "two_step";
  spec_.num_agents = 2;
  spec_.state_dim = 4;
  spec_.obs_dim = 6;
  spec_.action = {ActionKind::discrete, 2, 0.0, 1.0};
  spec_.horizon = 2;
  spec_.gamma = 0.99;
}

double TwoStepGame::payoff(StateId state, std::size_t a, std::size_t b) {
  static constexpr double risky[2][2] = {{0.0, 1.0}, {1.0, 8.0}};
  switch (state) {
    case s2_safe: return 7.0;
    case s2_risky: return risky[a][b];
    default: return 0.0;
  }
}

std::vector<double> TwoStepGame::state_vector(StateId id) {
  std::vector<double> v(4, 0.0);
  v[static_cast<std::size_t>(id)] = 1.0;
  return v;
}

AgentObs TwoStepGame::observations(StateId id) {
  AgentObs obs;
  for (std::size_t a = 0; a < 2; ++a) {
    auto o = state_vector(id);
    o.push_back(a == 0 ? 1.0 : 0.0);
    o.push_back(a == 1 ? 1.0 : 0.0);
    obs.push_back(std::move(o));
  }
  return obs;
}

Observation TwoStepGame::reset(std::uint64_t) {
  current_ = s1;
  state_ = state_vector(s1);
  done_ = false;
  t_ = 0;
  return {state_, observations(s1)};
}

StepResult TwoStepGame::step(const JointAction& action) {
  auto u = checked_action(action);
  const auto a = static_cast<std::size_t>(u[0][0]);
  const auto b = static_cast<std::size_t>(u[1][0]);
  StepResult r;
  if (current_ == s1) {
    // Agent B's first action has no effect on the transition.
    current_ = a == 0 ? s2_safe : s2_risky;
    r.team_reward = 0.0;
  } else {
    r.team_reward = payoff(current_, a, b);
    current_ = terminal_state;
  }
  ++t_;
  done_ = current_ == terminal_state;
  state_ = state_vector(current_);
  r.next_state = state_;
  r.next_obs = observations(current_);
  r.done = done_;
  return r;
}

std::size_t two_step_pattern(std::size_t choice, std::size_t a, std::size_t b) { return choice * 4 + a * 2 + b; }

// ---------------------------------------------------------------------------
// Cooperative bandit

CoopBandit::CoopBandit() {
  spec_.name = "coop_bandit";
  spec_.num_agents = 2;
  spec_.state_dim = 1;
  spec_.obs_dim = 2;
  spec_.action = {ActionKind::continuous, 1, -1.0, 1.0};
  spec_.horizon = 1;
  spec_.gamma = 0.99;
}

double CoopBandit::reward(double u1, double u2) {
  auto bump = [](double x, double y, double peak, double height) {
    const double d2 = (x - peak) * (x - peak) + (y - peak) * (y - peak);
    return height * std::exp(-d2 / (2.0 * kWidth * kWidth));
  };
  return bump(u1, u2, kLowPeak, kLowHeight) + bump(u1, u2, kHighPeak, kHighHeight);
}

Observation CoopBandit::reset(std::uint64_t) {
  state_ = {1.0};
  done_ = false;
  t_ = 0;
  return {state_, {{1.0, 0.0}, {0.0, 1.0}}};
}

StepResult CoopBandit::step(const JointAction& action) {
  auto u = checked_action(action);
  StepResult r;
  r.team_reward = reward(u[0][0], u[1][0]);
  ++t_;
  done_ = true;
  state_ = {0.0};
  r.next_state = state_;
  r.next_obs = {{1.0, 0.0}, {0.0, 1.0}};
  r.done = true;
  return r;
}

// ---------------------------------------------------------------------------
// Spread-lite

SpreadLite::SpreadLite(std::size_t num_agents) {
  spec_.name = "spread_lite";
  spec_.num_agents = num_agents;
  spec_.state_dim = 4 * num_agents;
  spec_.obs_dim = 2 + 2 * num_agents;
  spec_.action = {ActionKind::continuous, 2, -1.0, 1.0};
  spec_.horizon = 25;
  spec_.gamma = 0.99;
  spec_.validate();
}

std::vector<double> SpreadLite::coverage(const std::vector<double>& state, std::size_t n) {
  // Per-landmark reward: minus the distance to the nearest agent.
  std::vector<double> out(n);
  for (std::size_t l = 0; l < n; ++l) {
    const double lx = state[2 * n + 2 * l], ly = state[2 * n + 2 * l + 1];
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < n; ++a) {
      const double dx = state[2 * a] - lx, dy = state[2 * a + 1] - ly;
      best = std::min(best, std::sqrt(dx * dx + dy * dy));
    }
    out[l] = -best;
  }
  return out;
}

AgentObs SpreadLite::observations() const {
  const std::size_t n = spec_.num_agents;
  AgentObs obs;
  for (std::size_t a = 0; a < n; ++a) {
    std::vector<double> o{state_[2 * a], state_[2 * a + 1]};
    for (std::size_t l = 0; l < n; ++l) {
      o.push_back(state_[2 * n + 2 * l] - state_[2 * a]);
      o.push_back(state_[2 * n + 2 * l + 1] - state_[2 * a + 1]);
    }
    obs.push_back(std::move(o));
  }
  return obs;
}

Observation SpreadLite::reset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  state_.assign(spec_.state_dim, 0.0);
  for (auto& v : state_) v = unit(rng);
  done_ = false;
  t_ = 0;
  return {state_, observations()};
}

StepResult SpreadLite::step(const JointAction& action) {
  auto u = checked_action(action);
  const std::size_t n = spec_.num_agents;
  for (std::size_t a = 0; a < n; ++a) {
    state_[2 * a] += kDt * u[a][0];
    state_[2 * a + 1] += kDt * u[a][1];
  }
  StepResult r;
  r.agent_rewards = coverage(state_, n);
  double s = 0.0;
  for (double v : r.agent_rewards) s += v;
  r.team_reward = s / static_cast<double>(n);
  ++t_;
  done_ = t_ >= spec_.horizon;
  r.next_state = state_;
  r.next_obs = observations();
  r.done = done_;
  return r;
}

// ---------------------------------------------------------------------------
// Registry

std::unique_ptr<Env> make_env(const std::string& name) {
  if (name == "two_step") return std::make_unique<TwoStepGame>();
  if (name == "coop_bandit") return std::make_unique<CoopBandit>();
  if (name == "spread_lite") return std::make_unique<SpreadLite>();
  throw ConfigError("unknown environment '" + name + "'");
}

std::vector<std::string> env_names() { return {"two_step", "coop_bandit", "spread_lite"}; }

std::vector<std::string> behavior_kinds() { return {"uniform", "expert", "medium", "mixture"}; }

// ---------------------------------------------------------------------------
// Scripted behaviors

namespace {

double uniform_index(std::mt19937_64& rng, std::size_t n) {
  return static_cast<double>(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
}

class TwoStepBehavior : public BehaviorPolicy {
 public:
  // p_risky: probability agent A picks the risky branch; p_coord: probability
  // each agent plays action 1 in the second step.
  TwoStepBehavior(double p_risky, double p_coord) : p_risky_(p_risky), p_coord_(p_coord) {}
  JointAction act(const Env& env, std::mt19937_64& rng) override {
    std::bernoulli_distribution risky(p_risky_), coord(p_coord_);
    const auto& game = static_cast<const TwoStepGame&>(env);
    if (game.current() == TwoStepGame::s1) return {{risky(rng) ? 1.0 : 0.0}, {uniform_index(rng, 2)}};
    return {{coord(rng) ? 1.0 : 0.0}, {coord(rng) ? 1.0 : 0.0}};
  }

 private:
  double p_risky_, p_coord_;
};

class TwoStepPattern : public BehaviorPolicy {
 public:
  explicit TwoStepPattern(std::size_t pattern) : pattern_(pattern) {
    if (pattern >= 8) throw ConfigError("two-step pattern index must be < 8");
  }
  JointAction act(const Env& env, std::mt19937_64& rng) override {
    const auto& game = static_cast<const TwoStepGame&>(env);
    if (game.current() == TwoStepGame::s1)
      return {{static_cast<double>(pattern_ / 4)}, {uniform_index(rng, 2)}};
    return {{static_cast<double>((pattern_ / 2) % 2)}, {static_cast<double>(pattern_ % 2)}};
  }

 private:
  std::size_t pattern_;
};

class BanditBehavior : public BehaviorPolicy {
 public:
  enum Mode { uniform, high, both };
  BanditBehavior(Mode mode, double noise) : mode_(mode), noise_(noise) {}
  void begin_episode(std::mt19937_64& rng) override {
    center_ = CoopBandit::kHighPeak;
    if (mode_ == both && std::bernoulli_distribution(0.5)(rng)) center_ = CoopBandit::kLowPeak;
  }
  JointAction act(const Env&, std::mt19937_64& rng) override {
    JointAction u(2, std::vector<double>(1));
    if (mode_ == uniform) {
      std::uniform_real_distribution<double> d(-1.0, 1.0);
      for (auto& a : u) a[0] = d(rng);
      return u;
    }
    std::normal_distribution<double> d(0.0, noise_);
    for (auto& a : u) a[0] = std::clamp(center_ + d(rng), -1.0, 1.0);
    return u;
  }

 private:
  Mode mode_;
  double noise_;
  double center_ = CoopBandit::kHighPeak;
};

class SpreadBehavior : public BehaviorPolicy {
 public:
  // noise < 0 selects uniform random actions; mix_uniform alternates
  // per-episode between expert and uniform.
  SpreadBehavior(double noise, bool mix_uniform) : noise_(noise), mix_uniform_(mix_uniform) {}
  void begin_episode(std::mt19937_64& rng) override {
    random_episode_ = noise_ < 0.0 || (mix_uniform_ && std::bernoulli_distribution(0.5)(rng));
  }
  JointAction act(const Env& env, std::mt19937_64& rng) override {
    const std::size_t n = env.spec().num_agents;
    const auto& s = env.state();
    JointAction u(n, std::vector<double>(2, 0.0));
    if (random_episode_) {
      std::uniform_real_distribution<double> d(-1.0, 1.0);
      for (auto& a : u)
        for (auto& x : a) x = d(rng);
      return u;
    }
    // Greedy assignment: repeatedly match the closest free (agent, landmark).
    std::vector<bool> agent_used(n, false), landmark_used(n, false);
    std::vector<std::size_t> target(n, 0);
    for (std::size_t k = 0; k < n; ++k) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t ba = 0, bl = 0;
      for (std::size_t a = 0; a < n; ++a) {
        if (agent_used[a]) continue;
        for (std::size_t l = 0; l < n; ++l) {
          if (landmark_used[l]) continue;
          const double dx = s[2 * n + 2 * l] - s[2 * a], dy = s[2 * n + 2 * l + 1] - s[2 * a + 1];
          const double d = dx * dx + dy * dy;
          if (d < best) {
            best = d;
            ba = a;
            bl = l;
          }
        }
      }
      agent_used[ba] = landmark_used[bl] = true;
      target[ba] = bl;
    }
    std::normal_distribution<double> d(0.0, noise_);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t k = 0; k < 2; ++k) {
        const double delta = s[2 * n + 2 * target[a] + k] - s[2 * a + k];
        u[a][k] = std::clamp(std::clamp(5.0 * delta, -1.0, 1.0) + d(rng), -1.0, 1.0);
      }
    return u;
  }

 private:
  double noise_;
  bool mix_uniform_;
  bool random_episode_ = false;
};

}  // namespace

std::unique_ptr<BehaviorPolicy> two_step_pattern_behavior(std::size_t pattern) {
  return std::make_unique<TwoStepPattern>(pattern);
}

std::unique_ptr<BehaviorPolicy> scripted_behavior(const Env& env, const std::string& kind) {
  const std::string& name = env.spec().name;
  const auto kinds = behavior_kinds();
  if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end())
    throw ConfigError("unknown behavior kind '" + kind + "'");
  if (name == "two_step") {
    if (kind == "expert") return std::make_unique<TwoStepBehavior>(1.0, 1.0);
    if (kind == "medium") return std::make_unique<TwoStepBehavior>(0.0, 0.5);
    return std::make_unique<TwoStepBehavior>(0.5, 0.5);
  }
  if (name == "coop_bandit") {
    if (kind == "uniform") return std::make_unique<BanditBehavior>(BanditBehavior::uniform, 0.0);
    if (kind == "expert") return std::make_unique<BanditBehavior>(BanditBehavior::high, 0.1);
    if (kind == "medium") return std::make_unique<BanditBehavior>(BanditBehavior::high, 0.4);
    return std::make_unique<BanditBehavior>(BanditBehavior::both, 0.1);
  }
  if (name == "spread_lite") {
    if (kind == "uniform") return std::make_unique<SpreadBehavior>(-1.0, false);
    if (kind == "expert") return std::make_unique<SpreadBehavior>(0.1, false);
    if (kind == "medium") return std::make_unique<SpreadBehavior>(0.4, false);
    return std::make_unique<SpreadBehavior>(0.1, true);
  }
  throw ConfigError("no scripted behaviors for environment '" + name + "'");
}

}  // namespace omarl
