#pragma once

#include <string>

#include "omarl/critic.hpp"
#include "omarl/dataset.hpp"
#include "omarl/env.hpp"
#include "test_support.hpp"

namespace testing_support {

inline omarl::Batch small_batch(const omarl::EnvSpec& spec, std::size_t rows, std::mt19937_64& rng) {
  omarl::Batch b;
  b.size = rows;
  b.state = random_array(rows, spec.state_dim, rng);
  b.next_state = random_array(rows, spec.state_dim, rng);
  b.reward = random_array(rows, 1, rng);
  b.done = Array::matrix(rows, 1, 0.0);
  b.has_next_action = Array::matrix(rows, 1, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, spec.action.n - 1);
  b.action_index.assign(spec.num_agents, {});
  for (std::size_t a = 0; a < spec.num_agents; ++a) {
    b.obs.push_back(random_array(rows, spec.obs_dim, rng));
    b.next_obs.push_back(random_array(rows, spec.obs_dim, rng));
    if (spec.action.discrete()) {
      Array u = Array::matrix(rows, spec.action.n), nu = Array::matrix(rows, spec.action.n);
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t k = pick(rng);
        u(r, k) = 1.0;
        nu(r, pick(rng)) = 1.0;
        b.action_index[a].push_back(k);
      }
      b.action_input.push_back(u);
      b.next_action_input.push_back(nu);
    } else {
      b.action_input.push_back(random_array(rows, spec.action.n, rng, spec.action.low, spec.action.high));
      b.next_action_input.push_back(random_array(rows, spec.action.n, rng, spec.action.low, spec.action.high));
      b.action_index[a].assign(rows, 0);
    }
  }
  return b;
}

inline omarl::CriticConfig tiny_critic(omarl::Decomposition d) {
  omarl::CriticConfig c;
  c.decomp = d;
  c.hidden = {6};
  c.mixer_embed = 4;
  c.hyper_hidden = 6;
  return c;
}

// Multiplies the joint value of every online member by c > 0 exactly, by
// scaling the last layer of the head (mixer output hypernetworks, summed
// utilities, or the joint network).
inline void scale_critic_output(omarl::CriticStack& stack, double c) {
  using omarl::Decomposition;
  std::vector<omarl::NamedParam> named;
  stack.append_named(named);
  std::vector<std::string> heads;
  for (std::size_t m = 0; m < omarl::CriticStack::kEnsemble; ++m) {
    const std::string base = "critic.m" + std::to_string(m);
    switch (stack.decomp()) {
      case Decomposition::mix:
        heads.push_back(base + ".mixer.hyper_w2");
        heads.push_back(base + ".mixer.hyper_b2");
        break;
      case Decomposition::cen: heads.push_back(base + ".joint"); break;
      default:
        for (std::size_t a = 0; a < stack.spec().num_agents; ++a) heads.push_back(base + ".agent" + std::to_string(a));
    }
  }
  for (const auto& head : heads) {
    int last = -1;
    for (const auto& [name, p] : named)
      if (name.rfind(head + ".l", 0) == 0) last = std::max(last, std::stoi(name.substr(head.size() + 2)));
    const std::string pre = head + ".l" + std::to_string(last) + ".";
    for (auto& [name, p] : named)
      if (name == pre + "w" || name == pre + "b")
        for (auto& v : p.mutable_value().data()) v *= c;
  }
}

}  // namespace testing_support
