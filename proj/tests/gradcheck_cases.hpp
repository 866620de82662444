#pragma once

// Composite operations used by the learners, each packaged as a scalar loss
// over a small set of parameters for finite-difference checking.

#include <memory>
#include <string>

#include "fixtures.hpp"
#include "omarl/policy.hpp"
#include "omarl/value_learning.hpp"

namespace testing_support {

struct GradCase {
  std::function<ad::Var()> loss;
  std::vector<ad::Var> params;
};

struct NamedGradCase {
  std::string name;
  std::function<GradCase(std::uint64_t seed)> make;
};

inline std::vector<NamedGradCase> grad_cases() {
  using namespace omarl;
  std::vector<NamedGradCase> cases;

  cases.push_back({"mlp+layer_norm+relu", [](std::uint64_t seed) {
                     std::mt19937_64 rng(seed);
                     auto net = std::make_shared<Mlp>(std::vector<std::size_t>{5, 7, 6, 3}, rng, true);
                     ad::Var x = ad::parameter(random_array(4, 5, rng));
                     auto params = net->parameters();
                     std::uniform_real_distribution<double> jitter(-0.3, 0.3);
                     for (auto& p : params)
                       if (p.rows() == 1)
                         for (auto& v : p.mutable_value().data()) v += jitter(rng);
                     params.push_back(x);
                     return GradCase{[net, x] { return ad::mean(ad::square(net->forward(x))); }, params};
                   }});

  cases.push_back({"mlp+elu+tanh", [](std::uint64_t seed) {
                     std::mt19937_64 rng(seed);
                     auto net = std::make_shared<Mlp>(std::vector<std::size_t>{3, 5, 2}, rng, false, Activation::elu);
                     ad::Var x = ad::parameter(random_array(3, 3, rng, -2.0, 2.0));
                     auto params = net->parameters();
                     params.push_back(x);
                     return GradCase{[net, x] { return ad::sum(ad::tanh(net->forward(x))); }, params};
                   }});

  cases.push_back({"min+abs+mean", [](std::uint64_t seed) {
                     std::mt19937_64 rng(seed);
                     ad::Var a = ad::parameter(random_array(5, 3, rng));
                     ad::Var b = ad::parameter(random_array(5, 3, rng));
                     return GradCase{[a, b] { return ad::mean(ad::abs(ad::minimum(a, b)) * a); }, {a, b}};
                   }});

  cases.push_back({"exp+log+div", [](std::uint64_t seed) {
                     std::mt19937_64 rng(seed);
                     ad::Var a = ad::parameter(random_array(4, 2, rng));
                     ad::Var b = ad::parameter(random_array(4, 2, rng, 0.5, 2.0));
                     return GradCase{[a, b] { return ad::mean(ad::log(ad::exp(a) + 1.0) / b); }, {a, b}};
                   }});

  cases.push_back({"softmax+gather+concat+slice", [](std::uint64_t seed) {
                     std::mt19937_64 rng(seed);
                     ad::Var a = ad::parameter(random_array(4, 3, rng, -2.0, 2.0));
                     ad::Var b = ad::parameter(random_array(4, 4, rng, -2.0, 2.0));
                     std::vector<std::size_t> idx{0, 3, 4, 2};
                     return GradCase{[a, b, idx] {
                                       ad::Var z = ad::concat_cols({a, ad::slice_cols(b, 1, 2)});
                                       return ad::mean(ad::gather_cols(ad::log_softmax(z), idx)) +
                                              ad::sum(ad::square(ad::softmax(z))) + ad::mean(ad::mean_rows(b));
                                     },
                                     {a, b}};
                   }});

  cases.push_back({"row_vecmat+sum_cols+clamp", [](std::uint64_t seed) {
                     std::mt19937_64 rng(seed);
                     ad::Var v = ad::parameter(random_array(3, 2, rng));
                     ad::Var w = ad::parameter(random_array(3, 2 * 4, rng));
                     return GradCase{[v, w] {
                                       return ad::mean(ad::sum_cols(ad::clamp(ad::row_vecmat(v, w, 4), -0.7, 0.7)));
                                     },
                                     {v, w}};
                   }});

  cases.push_back({"mixer", [](std::uint64_t seed) {
                     std::mt19937_64 rng(seed);
                     auto mixer = std::make_shared<MixerNet>(3, 4, 4, 6, rng);
                     ad::Var q = ad::parameter(random_array(5, 3, rng, -2.0, 2.0));
                     ad::Var s = ad::constant(random_array(5, 4, rng));
                     auto params = mixer->parameters();
                     params.push_back(q);
                     return GradCase{[mixer, q, s] { return ad::mean(ad::square(mixer->forward(q, s))); }, params};
                   }});

  cases.push_back({"gaussian log-prob", [](std::uint64_t seed) {
                     std::mt19937_64 rng(seed);
                     auto env = make_env("coop_bandit");
                     auto pol = std::make_shared<PolicySet>(env->spec(), std::vector<std::size_t>{5}, rng);
                     std::vector<NamedParam> named;
                     pol->append_named(named);
                     for (auto& [name, p] : named)
                       if (name.ends_with("log_std")) p.mutable_value().fill(-0.4);
                     Batch b = small_batch(env->spec(), 4, rng);
                     return GradCase{[pol, b] { return bc_loss(*pol, b); }, pol->parameters()};
                   }});

  cases.push_back({"categorical log-prob", [](std::uint64_t seed) {
                     std::mt19937_64 rng(seed);
                     auto env = make_env("two_step");
                     auto pol = std::make_shared<PolicySet>(env->spec(), std::vector<std::size_t>{5}, rng);
                     Batch b = small_batch(env->spec(), 4, rng);
                     return GradCase{[pol, b] { return bc_loss(*pol, b); }, pol->parameters()};
                   }});

  cases.push_back({"critic td loss (mix, layer norm, double-Q min)", [](std::uint64_t seed) {
                     std::mt19937_64 rng(seed);
                     auto env = make_env("spread_lite");
                     auto stack = std::make_shared<CriticStack>(env->spec(), tiny_critic(Decomposition::mix), rng);
                     Batch b = small_batch(env->spec(), 3, rng);
                     Array y = random_array(3, 1, rng);
                     ValueLearnConfig cfg;
                     cfg.svn = false;
                     return GradCase{[stack, b, y, cfg] { return critic_loss(*stack, b, {y}, cfg); },
                                     stack->parameters()};
                   }});

  cases.push_back({"svn loss with fixed stats", [](std::uint64_t seed) {
                     std::mt19937_64 rng(seed);
                     ad::Var q = ad::parameter(random_array(6, 1, rng, -3.0, 3.0));
                     Array y = random_array(6, 1, rng, -3.0, 3.0);
                     const NormStats st = svn_stats(q.value(), 1e-6);
                     return GradCase{[q, y, st] { return svn_td_loss(q, y, st); }, {q}};
                   }});

  cases.push_back({"expectile", [](std::uint64_t seed) {
                     std::mt19937_64 rng(seed);
                     ad::Var u = ad::parameter(random_array(6, 1, rng, -2.0, 2.0));
                     return GradCase{[u] { return expectile_loss(u, 0.7); }, {u}};
                   }});

  cases.push_back({"brac actor loss through mixer", [](std::uint64_t seed) {
                     std::mt19937_64 rng(seed);
                     auto env = make_env("coop_bandit");
                     auto stack = std::make_shared<CriticStack>(env->spec(), tiny_critic(Decomposition::mix), rng);
                     auto pol = std::make_shared<PolicySet>(env->spec(), std::vector<std::size_t>{5}, rng);
                     Batch b = small_batch(env->spec(), 4, rng);
                     ExtractionConfig cfg;
                     cfg.method = Extraction::brac;
                     cfg.alpha = 0.5;
                     const std::uint64_t noise_seed = seed + 17;
                     return GradCase{[stack, pol, b, cfg, noise_seed] {
                                       std::mt19937_64 noise(noise_seed);
                                       FreezeGuard freeze(stack->parameters());
                                       return brac_loss(*pol, *stack, b, cfg, noise);
                                     },
                                     pol->parameters()};
                   }});

  cases.push_back({"awr actor loss", [](std::uint64_t seed) {
                     std::mt19937_64 rng(seed);
                     auto env = make_env("two_step");
                     auto stack = std::make_shared<CriticStack>(env->spec(), tiny_critic(Decomposition::vdn), rng);
                     auto values = std::make_shared<ValueNets>(env->spec(), true, false, std::vector<std::size_t>{4},
                                                               true, rng);
                     auto pol = std::make_shared<PolicySet>(env->spec(), std::vector<std::size_t>{5}, rng);
                     Batch b = small_batch(env->spec(), 4, rng);
                     ExtractionConfig cfg;
                     cfg.alpha = 2.0;
                     return GradCase{[stack, values, pol, b, cfg] { return awr_loss(*pol, *stack, *values, b, cfg); },
                                     pol->parameters()};
                   }});
  return cases;
}

}  // namespace testing_support
