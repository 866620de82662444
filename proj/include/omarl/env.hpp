#pragma once

// Dec-POMDP environment interface and the three desk-scale environments:
//   two_step     two-agent, two-step coordination matrix game (discrete)
//   coop_bandit  one-step continuous game with two Gaussian reward modes
//   spread_lite  multi-step landmark covering on the plane (continuous)

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace omarl {

enum class ActionKind { discrete, continuous };

struct ActionSpace {
  ActionKind kind = ActionKind::discrete;
  // Number of choices (discrete) or action dimension (continuous).
  std::size_t n = 2;
  double low = -1.0;
  double high = 1.0;

  // Width of the action encoding fed to critics (one-hot for discrete).
  std::size_t input_dim() const { return n; }
  bool discrete() const { return kind == ActionKind::discrete; }
};

struct EnvSpec {
  std::string name;
  std::size_t num_agents = 2;
  std::size_t state_dim = 1;
  std::size_t obs_dim = 1;
  ActionSpace action;
  std::size_t horizon = 1;
  double gamma = 0.99;

  void validate() const;
};

// One action vector per agent. A discrete action is a single entry holding
// the chosen index.
using JointAction = std::vector<std::vector<double>>;
using AgentObs = std::vector<std::vector<double>>;

struct Observation {
  std::vector<double> state;
  AgentObs obs;
};

struct StepResult {
  std::vector<double> next_state;
  AgentObs next_obs;
  double team_reward = 0.0;
  bool done = false;
  // Empty unless the environment defines individual rewards; when present
  // team_reward is their mean.
  std::vector<double> agent_rewards;
};

class Env {
 public:
  virtual ~Env() = default;

  virtual const EnvSpec& spec() const = 0;
  virtual Observation reset(std::uint64_t seed) = 0;
  // Continuous actions outside the bounds are clipped and counted; invalid
  // discrete indices throw UsageError. Stepping a finished episode throws.
  virtual StepResult step(const JointAction& action) = 0;
  virtual std::unique_ptr<Env> clone() const = 0;

  const std::vector<double>& state() const { return state_; }
  bool terminal() const { return done_; }
  std::size_t t() const { return t_; }
  std::size_t clip_count() const { return clip_count_; }

 protected:
  JointAction checked_action(const JointAction& action);

  std::vector<double> state_;
  bool done_ = true;
  std::size_t t_ = 0;
  std::size_t clip_count_ = 0;
};

class TwoStepGame : public Env {
 public:
  enum StateId { s1 = 0, s2_safe = 1, s2_risky = 2, terminal_state = 3 };

  TwoStepGame();
  const EnvSpec& spec() const override { return spec_; }
  Observation reset(std::uint64_t seed) override;
  StepResult step(const JointAction& action) override;
  std::unique_ptr<Env> clone() const override { return std::make_unique<TwoStepGame>(*this); }

  static double payoff(StateId state, std::size_t action_a, std::size_t action_b);
  static std::vector<double> state_vector(StateId id);
  static AgentObs observations(StateId id);
  StateId current() const { return current_; }

 private:
  EnvSpec spec_;
  StateId current_ = s1;
};

class CoopBandit : public Env {
 public:
  static constexpr double kLowPeak = -0.5;
  static constexpr double kLowHeight = 1.0;
  static constexpr double kHighPeak = 0.6;
  static constexpr double kHighHeight = 1.2;
  static constexpr double kWidth = 0.15;

  CoopBandit();
  const EnvSpec& spec() const override { return spec_; }
  Observation reset(std::uint64_t seed) override;
  StepResult step(const JointAction& action) override;
  std::unique_ptr<Env> clone() const override { return std::make_unique<CoopBandit>(*this); }

  static double reward(double u1, double u2);

 private:
  EnvSpec spec_;
};

class SpreadLite : public Env {
 public:
  static constexpr double kDt = 0.1;

  explicit SpreadLite(std::size_t num_agents = 3);
  const EnvSpec& spec() const override { return spec_; }
  Observation reset(std::uint64_t seed) override;
  StepResult step(const JointAction& action) override;
  std::unique_ptr<Env> clone() const override { return std::make_unique<SpreadLite>(*this); }

  // State layout: agent positions (2A) followed by landmark positions (2A).
  static std::vector<double> coverage(const std::vector<double>& state, std::size_t num_agents);
  AgentObs observations() const;

 private:
  EnvSpec spec_;
};

// Registry keyed by "two_step", "coop_bandit", "spread_lite".
std::unique_ptr<Env> make_env(const std::string& name);
std::vector<std::string> env_names();

// Scripted data-collection policy. Acts from the global state (the behavior
// policy is not bound by decentralized execution).
class BehaviorPolicy {
 public:
  virtual ~BehaviorPolicy() = default;
  // Called once at the start of every episode.
  virtual void begin_episode(std::mt19937_64& rng) { (void)rng; }
  virtual JointAction act(const Env& env, std::mt19937_64& rng) = 0;
};

// kind is one of uniform, expert, medium, mixture.
std::unique_ptr<BehaviorPolicy> scripted_behavior(const Env& env, const std::string& kind);
std::vector<std::string> behavior_kinds();

// The eight (step-1 choice of agent A, step-2 joint action) patterns of the
// two-step game, indexed 0..7 as choice*4 + a*2 + b.
std::size_t two_step_pattern(std::size_t choice, std::size_t a, std::size_t b);
// Two-step behavior replaying one fixed pattern; agent B's inert step-1
// action is drawn uniformly.
std::unique_ptr<BehaviorPolicy> two_step_pattern_behavior(std::size_t pattern);

}  // namespace omarl
