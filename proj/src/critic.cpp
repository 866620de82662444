#include "omarl/critic.hpp"

#include "omarl/errors.hpp"

namespace omarl {

Decomposition parse_decomposition(const std::string& name) {
  if (name == "dec") return Decomposition::dec;
  if (name == "vdn") return Decomposition::vdn;
  if (name == "mix") return Decomposition::mix;
  if (name == "cen") return Decomposition::cen;
  throw ConfigError("unknown decomposition '" + name + "' (expected dec, vdn, mix or cen)");
}

std::string to_string(Decomposition d) {
  switch (d) {
    case Decomposition::dec: return "dec";
    case Decomposition::vdn: return "vdn";
    case Decomposition::mix: return "mix";
    case Decomposition::cen: return "cen";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// MixerNet

MixerNet::MixerNet(std::size_t num_agents, std::size_t state_dim, std::size_t embed, std::size_t hyper_hidden,
                   Rng& rng)
    : hyper_w1_({state_dim, hyper_hidden, num_agents * embed}, rng),
      hyper_b1_({state_dim, embed}, rng),
      hyper_w2_({state_dim, hyper_hidden, embed}, rng),
      hyper_b2_({state_dim, hyper_hidden, 1}, rng),
      num_agents_(num_agents),
      embed_(embed) {}

MixerNet MixerNet::additive(std::size_t num_agents, std::size_t state_dim, std::size_t embed,
                            std::size_t hyper_hidden) {
  Rng rng(0);
  MixerNet m(num_agents, state_dim, embed, hyper_hidden, rng);
  m.activation_ = Activation::linear;
  for (Mlp* net : {&m.hyper_w1_, &m.hyper_b1_, &m.hyper_w2_, &m.hyper_b2_})
    for (auto& p : net->parameters()) p.mutable_value().fill(0.0);
  auto& b1 = m.hyper_w1_.bias(m.hyper_w1_.num_layers() - 1).mutable_value();
  for (std::size_t a = 0; a < num_agents; ++a) b1[a * embed] = 1.0;
  m.hyper_w2_.bias(m.hyper_w2_.num_layers() - 1).mutable_value()[0] = 1.0;
  return m;
}

ad::Var MixerNet::first_layer_weights(const ad::Var& state) const { return ad::abs(hyper_w1_.forward(state)); }

ad::Var MixerNet::second_layer_weights(const ad::Var& state) const { return ad::abs(hyper_w2_.forward(state)); }

ad::Var MixerNet::forward(const ad::Var& utilities, const ad::Var& state) const {
  if (utilities.cols() != num_agents_)
    throw ConfigError("mixer expects " + std::to_string(num_agents_) + " utilities per row");
  if (utilities.rows() != state.rows()) throw ConfigError("mixer utilities/state batch mismatch");
  ad::Var hidden = ad::row_vecmat(utilities, first_layer_weights(state), embed_) + hyper_b1_.forward(state);
  hidden = activate(hidden, activation_);
  return ad::sum_cols(hidden * second_layer_weights(state)) + hyper_b2_.forward(state);
}

std::vector<ad::Var> MixerNet::parameters() const {
  std::vector<ad::Var> out;
  for (const Mlp* net : {&hyper_w1_, &hyper_b1_, &hyper_w2_, &hyper_b2_}) {
    auto p = net->parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

void MixerNet::append_named(std::vector<NamedParam>& out, const std::string& prefix) const {
  hyper_w1_.append_named(out, prefix + ".hyper_w1");
  hyper_b1_.append_named(out, prefix + ".hyper_b1");
  hyper_w2_.append_named(out, prefix + ".hyper_w2");
  hyper_b2_.append_named(out, prefix + ".hyper_b2");
}

MixerNet MixerNet::copy(bool trainable) const {
  MixerNet m;
  m.hyper_w1_ = hyper_w1_.copy(trainable);
  m.hyper_b1_ = hyper_b1_.copy(trainable);
  m.hyper_w2_ = hyper_w2_.copy(trainable);
  m.hyper_b2_ = hyper_b2_.copy(trainable);
  m.activation_ = activation_;
  m.num_agents_ = num_agents_;
  m.embed_ = embed_;
  return m;
}

// ---------------------------------------------------------------------------
// CriticMember

std::vector<ad::Var> CriticMember::parameters() const {
  std::vector<ad::Var> out;
  for (const auto& u : utilities) {
    auto p = u.parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  if (mixer.num_agents() > 0) {
    auto p = mixer.parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  if (!joint.layer_sizes().empty()) {
    auto p = joint.parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

void CriticMember::append_named(std::vector<NamedParam>& out, const std::string& prefix) const {
  for (std::size_t a = 0; a < utilities.size(); ++a) utilities[a].append_named(out, prefix + ".agent" + std::to_string(a));
  if (mixer.num_agents() > 0) mixer.append_named(out, prefix + ".mixer");
  if (!joint.layer_sizes().empty()) joint.append_named(out, prefix + ".joint");
}

CriticMember CriticMember::copy(bool trainable) const {
  CriticMember m;
  for (const auto& u : utilities) m.utilities.push_back(u.copy(trainable));
  if (mixer.num_agents() > 0) m.mixer = mixer.copy(trainable);
  if (!joint.layer_sizes().empty()) m.joint = joint.copy(trainable);
  return m;
}

// ---------------------------------------------------------------------------
// CriticStack

CriticStack::CriticStack(const EnvSpec& spec, CriticConfig config, Rng& rng) : spec_(spec), config_(std::move(config)) {
  spec_.validate();
  const std::size_t n = spec_.num_agents, ad_dim = spec_.action.input_dim();
  for (auto& m : online_) {
    if (config_.decomp == Decomposition::cen) {
      std::vector<std::size_t> sizes{spec_.state_dim + n * ad_dim};
      sizes.insert(sizes.end(), config_.hidden.begin(), config_.hidden.end());
      sizes.push_back(1);
      m.joint = Mlp(sizes, rng, config_.layer_norm);
      continue;
    }
    for (std::size_t a = 0; a < n; ++a) {
      std::vector<std::size_t> sizes{spec_.obs_dim + ad_dim};
      sizes.insert(sizes.end(), config_.hidden.begin(), config_.hidden.end());
      sizes.push_back(1);
      m.utilities.emplace_back(sizes, rng, config_.layer_norm);
    }
    if (config_.decomp == Decomposition::mix)
      m.mixer = MixerNet(n, spec_.state_dim, config_.mixer_embed, config_.hyper_hidden, rng);
  }
  for (std::size_t k = 0; k < kEnsemble; ++k) target_[k] = online_[k].copy(false);
}

ad::Var CriticStack::agent_q(std::size_t member, std::size_t agent, const ad::Var& obs, const ad::Var& action,
                             bool target) const {
  const CriticMember& m = target ? target_.at(member) : online_.at(member);
  if (m.utilities.empty()) throw UsageError("per-agent utilities are not defined for the cen decomposition");
  return m.utilities.at(agent).forward(ad::concat_cols({obs, action}));
}

ad::Var CriticStack::utilities(std::size_t member, const JointInput& in, bool target) const {
  std::vector<ad::Var> cols;
  for (std::size_t a = 0; a < spec_.num_agents; ++a) cols.push_back(agent_q(member, a, in.obs.at(a), in.actions.at(a), target));
  return ad::concat_cols(cols);
}

ad::Var CriticStack::mix(std::size_t member, const ad::Var& utilities, const ad::Var& state, bool target) const {
  if (config_.decomp != Decomposition::mix) throw UsageError("mixer head requested on a non-mix critic");
  const CriticMember& m = target ? target_.at(member) : online_.at(member);
  return m.mixer.forward(utilities, state);
}

ad::Var CriticStack::q_tot(std::size_t member, const JointInput& in, bool target) const {
  switch (config_.decomp) {
    case Decomposition::dec:
      throw UsageError("the dec decomposition has no joint value; use per-agent values");
    case Decomposition::vdn: return ad::sum_cols(utilities(member, in, target));
    case Decomposition::mix: return mix(member, utilities(member, in, target), in.state, target);
    case Decomposition::cen: {
      const CriticMember& m = target ? target_.at(member) : online_.at(member);
      std::vector<ad::Var> parts{in.state};
      parts.insert(parts.end(), in.actions.begin(), in.actions.end());
      return m.joint.forward(ad::concat_cols(parts));
    }
  }
  throw UsageError("unreachable decomposition");
}

ad::Var CriticStack::min_q_tot(const JointInput& in, bool target) const {
  return ad::minimum(q_tot(0, in, target), q_tot(1, in, target));
}

ad::Var CriticStack::min_agent_q(std::size_t agent, const ad::Var& obs, const ad::Var& action, bool target) const {
  return ad::minimum(agent_q(0, agent, obs, action, target), agent_q(1, agent, obs, action, target));
}

std::vector<double> CriticStack::mixer_jacobian(std::size_t member, std::span<const double> state,
                                                std::span<const double> utilities) const {
  if (config_.decomp != Decomposition::mix) throw UsageError("mixer_jacobian requires the mix decomposition");
  if (state.size() != spec_.state_dim || utilities.size() != spec_.num_agents)
    throw ConfigError("mixer_jacobian input sizes do not match the environment");
  ad::EnableGradGuard grad_on;
  FreezeGuard freeze(online_.at(member).mixer.parameters());
  ad::Var q = ad::parameter(Array({1, utilities.size()}, std::vector<double>(utilities.begin(), utilities.end())));
  ad::Var s = ad::constant(Array({1, state.size()}, std::vector<double>(state.begin(), state.end())));
  ad::backward(mix(member, q, s));
  return q.grad().vec();
}

std::vector<ad::Var> CriticStack::parameters() const {
  std::vector<ad::Var> out;
  for (const auto& m : online_) {
    auto p = m.parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::vector<ad::Var> CriticStack::target_parameters() const {
  std::vector<ad::Var> out;
  for (const auto& m : target_) {
    auto p = m.parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

void CriticStack::update_targets(double tau) {
  auto target = target_parameters();
  auto online = parameters();
  polyak_update(target, online, tau);
}

void CriticStack::append_named(std::vector<NamedParam>& out) const {
  for (std::size_t k = 0; k < kEnsemble; ++k) online_[k].append_named(out, "critic.m" + std::to_string(k));
  for (std::size_t k = 0; k < kEnsemble; ++k) target_[k].append_named(out, "critic_target.m" + std::to_string(k));
}

JointInput joint_input(const Array& state, const std::vector<Array>& obs, const std::vector<Array>& actions) {
  JointInput in;
  in.state = ad::constant(state);
  for (const auto& o : obs) in.obs.push_back(ad::constant(o));
  for (const auto& u : actions) in.actions.push_back(ad::constant(u));
  return in;
}

}  // namespace omarl
