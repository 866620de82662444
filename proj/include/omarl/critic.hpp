#pragma once

// Value decomposition: per-agent utilities Q^a(o^a, u^a) combined into the
// joint value by one of four heads.
//
//   dec  no joint value; each Q^a is trained on the team reward on its own
//   vdn  Q_tot = sum_a Q^a
//   mix  Q_tot = f(Q^1..Q^A; s), a state-conditioned monotonic mixer whose
//        weights come from hypernetworks and pass through |.|
//   cen  Q_tot = Q(s, u^1..u^A), one network over state and joint action
//
// Every stack carries two independent members (utilities + head each) and a
// frozen target copy of both.

#include <array>
#include <span>
#include <string>
#include <vector>

#include "omarl/env.hpp"
#include "omarl/nn.hpp"

namespace omarl {

enum class Decomposition { dec, vdn, mix, cen };

Decomposition parse_decomposition(const std::string& name);
std::string to_string(Decomposition d);

struct CriticConfig {
  Decomposition decomp = Decomposition::mix;
  std::vector<std::size_t> hidden = kDeskHidden;
  bool layer_norm = true;
  std::size_t mixer_embed = 32;
  std::size_t hyper_hidden = 128;
};

// Batched critic inputs: state [B,S], per-agent observations [B,O] and
// per-agent action encodings [B,U].
struct JointInput {
  ad::Var state;
  std::vector<ad::Var> obs;
  std::vector<ad::Var> actions;
};

class MixerNet {
 public:
  MixerNet() = default;
  MixerNet(std::size_t num_agents, std::size_t state_dim, std::size_t embed, std::size_t hyper_hidden, Rng& rng);

  // A mixer whose hypernetworks ignore the state and emit one unit weight per
  // agent into a single linear hidden unit: Q_tot = sum_a Q^a.
  static MixerNet additive(std::size_t num_agents, std::size_t state_dim, std::size_t embed,
                           std::size_t hyper_hidden);

  // utilities [B,A], state [B,S] -> [B,1].
  ad::Var forward(const ad::Var& utilities, const ad::Var& state) const;

  // Non-negative generated weights, [B, A*E] and [B, E].
  ad::Var first_layer_weights(const ad::Var& state) const;
  ad::Var second_layer_weights(const ad::Var& state) const;

  std::size_t num_agents() const { return num_agents_; }
  std::size_t embed() const { return embed_; }

  std::vector<ad::Var> parameters() const;
  void append_named(std::vector<NamedParam>& out, const std::string& prefix) const;
  MixerNet copy(bool trainable) const;

 private:
  Mlp hyper_w1_;
  Mlp hyper_b1_;
  Mlp hyper_w2_;
  Mlp hyper_b2_;
  Activation activation_ = Activation::elu;
  std::size_t num_agents_ = 0;
  std::size_t embed_ = 0;
};

struct CriticMember {
  std::vector<Mlp> utilities;  // dec, vdn, mix
  MixerNet mixer;              // mix
  Mlp joint;                   // cen

  std::vector<ad::Var> parameters() const;
  void append_named(std::vector<NamedParam>& out, const std::string& prefix) const;
  CriticMember copy(bool trainable) const;
};

class CriticStack {
 public:
  static constexpr std::size_t kEnsemble = 2;

  CriticStack(const EnvSpec& spec, CriticConfig config, Rng& rng);

  const CriticConfig& config() const { return config_; }
  const EnvSpec& spec() const { return spec_; }
  Decomposition decomp() const { return config_.decomp; }

  // Q^a for one agent, [B,1]. Not available for cen.
  ad::Var agent_q(std::size_t member, std::size_t agent, const ad::Var& obs, const ad::Var& action,
                  bool target = false) const;
  // All utilities side by side, [B,A].
  ad::Var utilities(std::size_t member, const JointInput& in, bool target = false) const;
  // Joint value [B,1]; throws UsageError for dec.
  ad::Var q_tot(std::size_t member, const JointInput& in, bool target = false) const;
  // Elementwise minimum over the two members.
  ad::Var min_q_tot(const JointInput& in, bool target = false) const;
  ad::Var min_agent_q(std::size_t agent, const ad::Var& obs, const ad::Var& action, bool target = false) const;

  // Mixer head applied to given utilities, [B,1].
  ad::Var mix(std::size_t member, const ad::Var& utilities, const ad::Var& state, bool target = false) const;
  // dQ_tot/dQ^a at one (state, utilities) point, by reverse-mode autodiff.
  std::vector<double> mixer_jacobian(std::size_t member, std::span<const double> state,
                                     std::span<const double> utilities) const;

  std::vector<ad::Var> parameters() const;
  std::vector<ad::Var> target_parameters() const;
  void update_targets(double tau);
  // Online parameters under "critic.", targets under "critic_target.".
  void append_named(std::vector<NamedParam>& out) const;

  CriticMember& member(std::size_t k, bool target = false) { return target ? target_[k] : online_[k]; }
  const CriticMember& member(std::size_t k, bool target = false) const { return target ? target_[k] : online_[k]; }

 private:
  EnvSpec spec_;
  CriticConfig config_;
  std::array<CriticMember, kEnsemble> online_;
  std::array<CriticMember, kEnsemble> target_;
};

JointInput joint_input(const Array& state, const std::vector<Array>& obs, const std::vector<Array>& actions);

}  // namespace omarl
