#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fixtures.hpp"
#include "omarl/errors.hpp"
#include "omarl/policy.hpp"

using namespace omarl;
using testing_support::random_array;
using testing_support::rel_diff;

namespace {

std::vector<Array> grads_of(const std::vector<ad::Var>& params) {
  std::vector<Array> out;
  for (const auto& p : params) out.push_back(p.grad());
  return out;
}

std::vector<Array> brac_grads(const PolicySet& pol, const CriticStack& stack, const Batch& b, ExtractionConfig cfg,
                              std::uint64_t noise_seed) {
  for (auto& p : pol.parameters()) p.zero_grad();
  FreezeGuard freeze(stack.parameters());
  Rng noise(noise_seed);
  ad::backward(brac_loss(pol, stack, b, cfg, noise));
  return grads_of(pol.parameters());
}

std::vector<Array> values_of(const std::vector<ad::Var>& params) {
  std::vector<Array> out;
  for (const auto& p : params) out.push_back(p.value());
  return out;
}

// Sets agent a's policy to constant logits favouring `choice`.
void force_choice(PolicySet& pol, std::size_t agent, std::size_t choice) {
  Mlp& net = pol.net(agent);
  const std::size_t last = net.num_layers() - 1;
  net.weight(last).mutable_value().fill(0.0);
  Array& b = net.bias(last).mutable_value();
  b.fill(0.0);
  b[choice] = 5.0;
}

}  // namespace

TEST_CASE("extraction names and validation") {
  CHECK(parse_extraction("brac") == Extraction::brac);
  CHECK(parse_extraction("awr") == Extraction::awr);
  CHECK_THROWS_AS(parse_extraction("td3bc"), ConfigError);
  ExtractionConfig c;
  c.alpha = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.alpha = 1.0;
  c.awr_clip = 0.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("gaussian policy log-probability and clamped log-std") {
  CoopBandit env;
  Rng rng(1);
  PolicySet pol(env.spec(), {8}, rng);
  std::vector<NamedParam> named;
  pol.append_named(named);
  for (auto& [name, p] : named)
    if (name.ends_with("log_std")) p.mutable_value().fill(10.0);
  CHECK(pol.log_std(0).item() == kLogStdMax);
  for (auto& [name, p] : named)
    if (name.ends_with("log_std")) p.mutable_value().fill(-0.3);

  Array obs = random_array(4, env.spec().obs_dim, rng);
  Array u = random_array(4, 1, rng);
  const Array mean = pol.head(0, ad::constant(obs)).value();
  const Array lp = pol.log_prob(0, ad::constant(obs), u, {}).value();
  const double sd = std::exp(-0.3);
  for (std::size_t r = 0; r < 4; ++r) {
    CHECK(std::abs(mean[r]) <= 1.0);
    const double z = (u[r] - mean[r]) / sd;
    CHECK(lp[r] == doctest::Approx(-0.5 * z * z - std::log(sd) - 0.5 * std::log(2 * std::numbers::pi)).epsilon(1e-12));
  }
  CHECK(pol.act(0, {obs(0, 0), obs(0, 1)}, true, nullptr)[0] == doctest::Approx(mean[0]).epsilon(1e-14));
}

TEST_CASE("categorical policy acts greedily when deterministic") {
  TwoStepGame game;
  Rng rng(2);
  PolicySet pol(game.spec(), {8}, rng);
  CHECK_THROWS_AS(pol.log_std(0), UsageError);
  force_choice(pol, 1, 1);
  const auto obs = TwoStepGame::observations(TwoStepGame::s1);
  CHECK(pol.act(1, obs[1], true, nullptr)[0] == 1.0);
  Array o({1, obs[1].size()}, obs[1]);
  const Array lp = pol.log_prob(1, ad::constant(o), Array::matrix(1, 2), {1}).value();
  CHECK(lp[0] == doctest::Approx(-std::log1p(std::exp(-5.0))).epsilon(1e-12));
}

TEST_CASE("actor normalization: zero value, fixed gradient") {
  Rng rng(3);
  ad::Var q = ad::parameter(random_array(8, 1, rng, -20.0, 60.0));
  double mag = 0.0;
  for (double v : q.value().vec()) mag += std::abs(v) / 8.0;
  ad::Var t = actor_q_term(q, true);
  CHECK(std::abs(t.item()) < 1e-14);
  ad::backward(t);
  for (double g : testing_support::entries(q.grad())) CHECK(g == doctest::Approx(-1.0 / (8.0 * mag)).epsilon(1e-14));
  q.zero_grad();
  ad::backward(actor_q_term(q, false));
  for (double g : testing_support::entries(q.grad())) CHECK(g == doctest::Approx(-1.0 / 8.0).epsilon(1e-14));
}

TEST_CASE("actor normalization preserves the preference order") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    Array q = random_array(12, 1, rng, -100.0, 100.0);
    double mu = 0.0, mag = 0.0;
    for (double v : q.vec()) mu += v / 12.0;
    for (double v : q.vec()) mag += std::abs(v) / 12.0;
    std::size_t raw = 0, norm = 0;
    for (std::size_t i = 1; i < 12; ++i) {
      if (q[i] > q[raw]) raw = i;
      if ((q[i] - mu) / mag > (q[norm] - mu) / mag) norm = i;
    }
    CHECK(raw == norm);
  }
}

TEST_CASE("brac gradients under a rescaled critic") {
  for (auto d : {Decomposition::mix, Decomposition::vdn}) {
    SpreadLite env(3);
    Rng rng(5);
    CriticStack stack(env.spec(), testing_support::tiny_critic(d), rng);
    PolicySet pol(env.spec(), {8}, rng);
    Batch b = testing_support::small_batch(env.spec(), 8, rng);
    ExtractionConfig on, off;
    on.method = off.method = Extraction::brac;
    on.alpha = off.alpha = 0.0;
    on.actor_norm = true;
    const auto g_on = brac_grads(pol, stack, b, on, 77);
    const auto g_off = brac_grads(pol, stack, b, off, 77);
    for (double c : {0.1, 10.0, 1000.0}) {
      testing_support::scale_critic_output(stack, c);
      const auto s_on = brac_grads(pol, stack, b, on, 77);
      const auto s_off = brac_grads(pol, stack, b, off, 77);
      testing_support::scale_critic_output(stack, 1.0 / c);
      double worst_on = 0.0, worst_off = 0.0;
      for (std::size_t k = 0; k < g_on.size(); ++k)
        for (std::size_t i = 0; i < g_on[k].size(); ++i) {
          if (std::abs(g_on[k][i]) > 1e-12) worst_on = std::max(worst_on, rel_diff(s_on[k][i], g_on[k][i]));
          if (std::abs(g_off[k][i]) > 1e-12) worst_off = std::max(worst_off, rel_diff(s_off[k][i], c * g_off[k][i]));
        }
      CHECK(worst_on <= 1e-9);
      CHECK(worst_off <= 1e-6);
    }
  }
}

TEST_CASE("brac approaches behavior cloning as alpha grows") {
  CoopBandit env;
  Rng rng(6);
  CriticStack stack(env.spec(), testing_support::tiny_critic(Decomposition::mix), rng);
  PolicySet pol(env.spec(), {8}, rng);
  Batch b = testing_support::small_batch(env.spec(), 16, rng);
  ExtractionConfig cfg;
  cfg.method = Extraction::brac;
  cfg.alpha = 1e7;
  const auto g = brac_grads(pol, stack, b, cfg, 3);
  for (auto& p : pol.parameters()) p.zero_grad();
  ad::backward(bc_loss(pol, b));
  const auto bc = grads_of(pol.parameters());
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k)
    for (std::size_t i = 0; i < g[k].size(); ++i) {
      dot += g[k][i] * bc[k][i];
      na += g[k][i] * g[k][i];
      nb += bc[k][i] * bc[k][i];
    }
  CHECK(dot / std::sqrt(na * nb) > 1.0 - 1e-9);
}

TEST_CASE("awr weights") {
  CHECK(awr_weight(1.0, 3.0, 100.0) == doctest::Approx(std::exp(3.0)).epsilon(1e-15));
  CHECK(awr_weight(1.0, 3.0, 100.0) == doctest::Approx(20.0855).epsilon(1e-5));
  CHECK(awr_weight(10.0, 3.0, 100.0) == 100.0);
  CHECK(awr_weight(-4.0, 0.0, 100.0) == 1.0);
  double prev = 0.0;
  for (double adv = -5.0; adv <= 1.5; adv += 0.25) {
    const double w = awr_weight(adv, 3.0, 100.0);
    CHECK(w > 0.0);
    CHECK(w > prev);
    prev = w;
  }
}

TEST_CASE("awr advantages") {
  SpreadLite env(3);
  Rng rng(7);
  CriticStack stack(env.spec(), testing_support::tiny_critic(Decomposition::mix), rng);
  ValueNets v(env.spec(), true, false, {8}, true, rng);
  Batch b = testing_support::small_batch(env.spec(), 5, rng);
  ExtractionConfig cfg;
  const auto adv = awr_advantages(stack, v, b, cfg);
  REQUIRE(adv.size() == 3);
  const Array q = current_values(stack, b, true)[0];
  const Array vv = v.global(ad::constant(b.state)).value();
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(adv[0][i] == doctest::Approx(q[i] - vv[i]).epsilon(1e-14));
    CHECK(adv[2][i] == adv[0][i]);
  }
  ValueNets per(env.spec(), false, true, {8}, true, rng);
  cfg.awr_per_agent = true;
  const auto pa = awr_advantages(stack, per, b, cfg);
  const Array q1 =
      stack.min_agent_q(1, ad::constant(b.obs[1]), ad::constant(b.action_input[1]), true).value();
  const Array v1 = per.agent(1, ad::constant(b.obs[1])).value();
  for (std::size_t i = 0; i < 5; ++i) CHECK(pa[1][i] == doctest::Approx(q1[i] - v1[i]).epsilon(1e-14));
}

TEST_CASE("awr at alpha zero is behavior cloning") {
  TwoStepGame game;
  Rng rng(8);
  CriticStack stack(game.spec(), testing_support::tiny_critic(Decomposition::mix), rng);
  ValueNets v(game.spec(), true, false, {8}, true, rng);
  PolicySet pol(game.spec(), {8}, rng);
  Batch b = testing_support::small_batch(game.spec(), 16, rng);
  ExtractionConfig cfg;
  cfg.alpha = 0.0;
  CHECK(awr_loss(pol, stack, v, b, cfg).item() == doctest::Approx(bc_loss(pol, b).item()).epsilon(1e-15));

  std::vector<NamedParam> src, dst;
  Rng other(99);
  PolicySet copy(game.spec(), {8}, other);
  pol.append_named(src);
  copy.append_named(dst);
  for (std::size_t i = 0; i < src.size(); ++i) dst[i].second.mutable_value() = src[i].second.value();

  Adam a1(pol.parameters(), {}), a2(copy.parameters(), {});
  Rng r1(0);
  actor_update(pol, stack, &v, b, cfg, a1, r1);
  a2.zero_grad();
  ad::backward(bc_loss(copy, b));
  a2.step();
  const auto p1 = values_of(pol.parameters()), p2 = values_of(copy.parameters());
  for (std::size_t k = 0; k < p1.size(); ++k) CHECK(p1[k].vec() == p2[k].vec());
}

TEST_CASE("brac with a zero critic is behavior cloning") {
  CoopBandit env;
  Rng rng(9);
  CriticStack stack(env.spec(), testing_support::tiny_critic(Decomposition::vdn), rng);
  for (auto& p : stack.parameters()) p.mutable_value().fill(0.0);
  PolicySet pol(env.spec(), {8}, rng);
  Rng other(1);
  PolicySet copy(env.spec(), {8}, other);
  std::vector<NamedParam> src, dst;
  pol.append_named(src);
  copy.append_named(dst);
  for (std::size_t i = 0; i < src.size(); ++i) dst[i].second.mutable_value() = src[i].second.value();
  Batch b = testing_support::small_batch(env.spec(), 16, rng);
  ExtractionConfig cfg;
  cfg.method = Extraction::brac;
  cfg.alpha = 1.0;
  Adam a1(pol.parameters(), {}), a2(copy.parameters(), {});
  Rng r1(0);
  const auto critic_before = values_of(stack.parameters());
  actor_update(pol, stack, nullptr, b, cfg, a1, r1);
  a2.zero_grad();
  ad::backward(bc_loss(copy, b));
  a2.step();
  const auto p1 = values_of(pol.parameters()), p2 = values_of(copy.parameters());
  for (std::size_t k = 0; k < p1.size(); ++k)
    for (std::size_t i = 0; i < p1[k].size(); ++i) CHECK(p1[k][i] == doctest::Approx(p2[k][i]).epsilon(1e-12));
  const auto critic_after = values_of(stack.parameters());
  for (std::size_t k = 0; k < critic_before.size(); ++k) CHECK(critic_before[k].vec() == critic_after[k].vec());
  for (const auto& p : stack.parameters()) CHECK(p.requires_grad());
}

TEST_CASE("evaluation on the two-step game") {
  TwoStepGame game;
  Rng rng(10);
  PolicySet pol(game.spec(), {8}, rng);
  force_choice(pol, 0, 1);
  force_choice(pol, 1, 1);
  EvalResult best = evaluate(pol, game, 10, 0);
  CHECK(best.mean == 8.0);
  CHECK(best.std == 0.0);
  CHECK(best.returns.size() == 10);

  force_choice(pol, 0, 0);
  EvalResult safe = evaluate(pol, game, 10, 0);
  CHECK(safe.mean == 7.0);
  CHECK(safe.std == 0.0);

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng r(seed);
    PolicySet random_pol(game.spec(), {8}, r);
    EvalResult e = evaluate(random_pol, game, 3, seed);
    CHECK(e.mean >= 0.0);
    CHECK(e.mean <= 8.0);
  }
  CHECK_THROWS_AS(evaluate(pol, game, 0, 0), ConfigError);
}

TEST_CASE("policy sampler encodings") {
  TwoStepGame game;
  Rng rng(11);
  PolicySet pol(game.spec(), {8}, rng);
  Array obs = Array::matrix(6, game.spec().obs_dim, 0.0);
  const Array e = pol.sample_encoded(0, obs, rng);
  for (std::size_t r = 0; r < 6; ++r) CHECK(e(r, 0) + e(r, 1) == 1.0);
  CoopBandit env;
  PolicySet cont(env.spec(), {8}, rng);
  const Array c = cont.sample_encoded(1, random_array(50, env.spec().obs_dim, rng), rng);
  for (double v : c.vec()) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
}
