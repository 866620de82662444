// Acceptance suite: one PASS/FAIL line per criterion.
//
//   omarl_acceptance [--only N ...] [--seeds K] [--two-step-steps N] ...
//
// Exit status is 0 when every selected criterion passes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gradcheck_cases.hpp"
#include "omarl/errors.hpp"
#include "omarl/runner.hpp"
#include "omarl/stability.hpp"
#include "stability_cases.hpp"

using namespace omarl;
using testing_support::random_array;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Budget {
  std::size_t two_step_steps = 6000;
  std::size_t bandit_steps = 3000;
  std::size_t spread_steps = 6000;
  std::size_t seeds = 5;
  std::size_t gradcheck_seeds = 100;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Element-wise relative difference with exact zeros treated as equal.
double rel(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

// ---------------------------------------------------------------------------
// 1. Two-step game separation

RunConfig two_step_config(Decomposition d, std::uint64_t seed, std::size_t steps) {
  RunConfig c;
  c.env = "two_step";
  c.decomp = d;
  c.value_learning = ValueLearning::td;
  c.extraction = Extraction::awr;
  c.alpha = 1.0;
  c.total_steps = steps;
  c.eval_every = std::min<std::size_t>(1000, steps);
  c.seed = seed;
  return c;
}

double risky_joint_value(const Learner& learner) {
  const AgentObs obs = TwoStepGame::observations(TwoStepGame::s2_risky);
  const auto state = TwoStepGame::state_vector(TwoStepGame::s2_risky);
  std::vector<Array> o, act;
  for (const auto& ob : obs) {
    o.push_back(Array({1, ob.size()}, ob));
    act.push_back(Array({1, 2}, std::vector<double>{0.0, 1.0}));
  }
  ad::NoGradGuard no_grad;
  return learner.critic.min_q_tot(joint_input(Array({1, state.size()}, state), o, act)).item();
}

Outcome criterion_two_step(const Budget& b) {
  const Dataset data = collect_dataset("two_step", "uniform", 1000, 0, true);
  std::size_t mix_ok = 0, mix_q_ok = 0, vdn_ok = 0, vdn_q_ok = 0;
  double slowest = 0.0;
  std::string per_seed;
  for (std::uint64_t s = 0; s < b.seeds; ++s) {
    const auto t0 = std::chrono::steady_clock::now();
    const TrainResult mix = train(two_step_config(Decomposition::mix, s, b.two_step_steps), data);
    const TrainResult vdn = train(two_step_config(Decomposition::vdn, s, b.two_step_steps), data);
    slowest = std::max(slowest, seconds_since(t0));
    const double qm = risky_joint_value(mix.learner), qv = risky_joint_value(vdn.learner);
    const double rm = mix.summary.final_return_mean, rv = vdn.summary.final_return_mean;
    mix_ok += rm == 8.0;
    mix_q_ok += qm >= 7.5 && qm <= 8.5;
    vdn_ok += rv == 7.0;
    vdn_q_ok += qv >= 6.0 && qv <= 7.0;
    per_seed += " s" + std::to_string(s) + "[mix " + fmt("%g", rm) + "/" + fmt("%.3f", qm) + ", vdn " + fmt("%g", rv) +
                "/" + fmt("%.3f", qv) + "]";
  }
  const bool pass = mix_ok >= 4 && mix_q_ok >= 4 && vdn_ok == b.seeds && vdn_q_ok == b.seeds && b.seeds == 5 &&
                    slowest <= 300.0;
  return {pass, "mix return 8 on " + std::to_string(mix_ok) + "/5, Q in [7.5,8.5] on " + std::to_string(mix_q_ok) +
                    "/5; vdn return 7 on " + std::to_string(vdn_ok) + "/5, Q in [6,7] on " + std::to_string(vdn_q_ok) +
                    "/5; slowest seed " + fmt("%.1f", slowest) + "s;" + per_seed};
}

// ---------------------------------------------------------------------------
// 2. Value-normalization identity

Outcome criterion_svn_identity() {
  double worst_loss = 0.0, worst_grad = 0.0;
  SpreadLite env(3);
  Rng init(1);
  CriticStack stack(env.spec(), testing_support::tiny_critic(Decomposition::mix), init);
  auto params = stack.parameters();
  for (std::uint64_t k = 0; k < 1000; ++k) {
    Rng rng(1000 + k);
    std::uniform_real_distribution<double> scale(0.01, 100.0);
    Batch batch = testing_support::small_batch(env.spec(), 16, rng);
    const double sy = scale(rng);
    Targets y{random_array(16, 1, rng, -sy, sy)};
    ValueLearnConfig plain, norm;
    norm.svn = true;

    for (auto& p : params) p.zero_grad();
    ad::Var lp = critic_loss(stack, batch, y, plain);
    ad::backward(lp);
    std::vector<Array> gp;
    for (const auto& p : params) gp.push_back(p.grad());

    for (auto& p : params) p.zero_grad();
    NormStats st;
    ad::Var ln = critic_loss(stack, batch, y, norm, &st);
    ad::backward(ln);
    const double s2 = st.sigma_q * st.sigma_q;
    worst_loss = std::max(worst_loss, rel(ln.item() * s2, lp.item()));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const Array g = params[i].grad();
      for (std::size_t j = 0; j < g.size(); ++j) worst_grad = std::max(worst_grad, rel(g[j], gp[i][j] / s2));
    }
  }
  return {worst_loss <= 1e-9 && worst_grad <= 1e-9,
          "worst loss rel " + fmt("%.2e", worst_loss) + ", worst gradient rel " + fmt("%.2e", worst_grad)};
}

// ---------------------------------------------------------------------------
// 3. Actor scale invariance

std::vector<Array> brac_actor_grads(const PolicySet& pol, const CriticStack& stack, const Batch& b,
                                    const ExtractionConfig& cfg) {
  for (auto& p : pol.parameters()) p.zero_grad();
  FreezeGuard freeze(stack.parameters());
  Rng noise(77);
  ad::backward(brac_loss(pol, stack, b, cfg, noise));
  std::vector<Array> out;
  for (const auto& p : pol.parameters()) out.push_back(p.grad());
  return out;
}

Outcome criterion_actor_scale() {
  double worst_on = 0.0, worst_off = 0.0;
  for (auto d : {Decomposition::mix, Decomposition::vdn, Decomposition::cen})
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      SpreadLite env(3);
      Rng rng(seed);
      CriticStack stack(env.spec(), testing_support::tiny_critic(d), rng);
      PolicySet pol(env.spec(), {8}, rng);
      Batch b = testing_support::small_batch(env.spec(), 8, rng);
      ExtractionConfig on, off;
      on.method = off.method = Extraction::brac;
      on.alpha = off.alpha = 0.0;
      on.actor_norm = true;
      const auto g_on = brac_actor_grads(pol, stack, b, on);
      const auto g_off = brac_actor_grads(pol, stack, b, off);
      for (double c : {0.1, 10.0, 1000.0}) {
        testing_support::scale_critic_output(stack, c);
        const auto s_on = brac_actor_grads(pol, stack, b, on);
        const auto s_off = brac_actor_grads(pol, stack, b, off);
        testing_support::scale_critic_output(stack, 1.0 / c);
        for (std::size_t k = 0; k < g_on.size(); ++k)
          for (std::size_t i = 0; i < g_on[k].size(); ++i) {
            worst_on = std::max(worst_on, rel(s_on[k][i], g_on[k][i]));
            worst_off = std::max(worst_off, rel(s_off[k][i], c * g_off[k][i]));
          }
      }
    }
  return {worst_on <= 1e-9 && worst_off <= 1e-6,
          "normalized worst rel " + fmt("%.2e", worst_on) + ", unnormalized linear-scaling worst rel " +
              fmt("%.2e", worst_off)};
}

// ---------------------------------------------------------------------------
// 4. Linearized expansivity

Outcome criterion_linear_td() {
  double worst_scalar = 0.0;
  for (auto [j, factor] : {std::pair{1.0, 0.98}, std::pair{2.0, 1.16}}) {
    LinearTdSystem s;
    s.J = Eigen::MatrixXd::Constant(1, 1, j);
    s.gamma = 0.9;
    s.alpha_q = 0.1;
    s.q0 = Eigen::VectorXd::Constant(1, 2.0);
    s.q_bar = Eigen::VectorXd::Zero(1);
    for (double r : simulate_linear_td(s, 100).ratios) worst_scalar = std::max(worst_scalar, std::abs(r - factor));
  }
  const auto rates = testing_support::check_rates(200, 4);
  const std::size_t svn_ok = testing_support::svn_scaled_contractive(200, 5);
  const bool pass =
      worst_scalar <= 1e-10 && rates.matched == 200 && rates.regime_agree == 200 && svn_ok == 200;
  return {pass, "scalar ratio error " + fmt("%.1e", worst_scalar) + "; rate within 2% on " +
                    std::to_string(rates.matched) + "/200 (worst " + fmt("%.4f", rates.worst) + ", " +
                    std::to_string(rates.contractive) + " contractive); sigma-scaled contractive " +
                    std::to_string(svn_ok) + "/200"};
}

// ---------------------------------------------------------------------------
// 5. Mixer monotonicity

double worst_monotonicity(const CriticStack& stack, std::size_t probes, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = stack.spec().num_agents, sd = stack.spec().state_dim;
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  double worst = std::numeric_limits<double>::infinity();
  const double h = 1e-4;
  for (std::size_t k = 0; k < probes; ++k) {
    Array s = random_array(1, sd, rng);
    Array u = random_array(1, n, rng, -10.0, 10.0);
    Array up = u, down = u;
    const std::size_t a = pick(rng);
    up[a] += h;
    down[a] -= h;
    for (std::size_t m = 0; m < CriticStack::kEnsemble; ++m) {
      const double fd =
          (stack.mix(m, ad::constant(up), ad::constant(s)).item() - stack.mix(m, ad::constant(down), ad::constant(s)).item()) /
          (2 * h);
      worst = std::min(worst, fd);
    }
  }
  return worst;
}

Outcome criterion_monotonicity(const Budget& b) {
  SpreadLite env(3);
  Rng rng(3);
  CriticStack fresh(env.spec(), CriticConfig{}, rng);
  const double w_fresh = worst_monotonicity(fresh, 1000, 11);

  const Dataset spread = collect_dataset("spread_lite", "expert", 40, 3);
  RunConfig c;
  c.env = "spread_lite";
  c.extraction = Extraction::brac;
  c.alpha = 2.5;
  c.total_steps = std::max<std::size_t>(b.spread_steps / 3, 100);
  c.eval_every = c.total_steps;
  c.eval_episodes = 2;
  const TrainResult trained = train(c, spread);
  const double w_trained = worst_monotonicity(trained.learner.critic, 1000, 12);

  const Dataset two = collect_dataset("two_step", "uniform", 400, 0, true);
  const TrainResult trained2 = train(two_step_config(Decomposition::mix, 0, std::max<std::size_t>(b.two_step_steps / 3, 100)), two);
  const double w_two = worst_monotonicity(trained2.learner.critic, 1000, 13);
  const double worst = std::min({w_fresh, w_trained, w_two});
  return {worst >= -1e-6, "min dQtot/dQa fresh " + fmt("%.3e", w_fresh) + ", trained spread_lite " +
                              fmt("%.3e", w_trained) + ", trained two_step " + fmt("%.3e", w_two)};
}

// ---------------------------------------------------------------------------
// 6. Value-learning equivalences

Outcome criterion_equivalences() {
  double worst_expectile = 0.0;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int k = 0; k < 10000; ++k) {
    const double x = u(rng);
    worst_expectile = std::max(worst_expectile, std::abs(expectile_loss(x, 0.5) - 0.5 * x * x));
  }

  // Identical initial critics trained at gamma = 0 on one fixed batch.
  double worst_critic = 0.0;
  for (auto d : {Decomposition::mix, Decomposition::vdn, Decomposition::dec}) {
    SpreadLite env(3);
    Rng data_rng(21);
    const Batch batch = testing_support::small_batch(env.spec(), 32, data_rng);
    std::vector<std::vector<double>> finals;
    for (auto method : {ValueLearning::td, ValueLearning::sarsa, ValueLearning::iql}) {
      Rng r(5);
      CriticStack stack(env.spec(), testing_support::tiny_critic(d), r);
      Rng vr(9);
      ValueNets values(env.spec(), d != Decomposition::dec, d == Decomposition::dec, {8}, true, vr);
      PolicySet pol(env.spec(), {8}, vr);
      Rng sr(3);
      NextActionSampler sampler = policy_sampler(pol, sr);
      ValueLearnConfig cfg;
      cfg.method = method;
      cfg.gamma = 0.0;
      cfg.svn = d == Decomposition::mix;
      Adam opt(stack.parameters(), AdamConfig{1e-3});
      Adam vopt(values.parameters(), AdamConfig{1e-3});
      for (int step = 0; step < 50; ++step) critic_update(stack, &values, batch, sampler, cfg, opt, &vopt, 0.005);
      std::vector<double> q;
      for (const auto& a : current_values(stack, batch, false))
        for (double v : a.vec()) q.push_back(v);
      finals.push_back(q);
    }
    for (std::size_t m = 1; m < finals.size(); ++m)
      for (std::size_t i = 0; i < finals[0].size(); ++i)
        worst_critic = std::max(worst_critic, std::abs(finals[m][i] - finals[0][i]));
  }

  // AWR at alpha = 0 against a plain behavior-cloning Adam step.
  std::size_t awr_mismatch = 0;
  for (const std::string env_name : {"two_step", "coop_bandit", "spread_lite"}) {
    auto env = make_env(env_name);
    Rng r(8);
    CriticStack stack(env->spec(), testing_support::tiny_critic(Decomposition::mix), r);
    ValueNets v(env->spec(), true, false, {8}, true, r);
    PolicySet pol(env->spec(), {8}, r);
    Rng other(99);
    PolicySet copy(env->spec(), {8}, other);
    std::vector<NamedParam> src, dst;
    pol.append_named(src);
    copy.append_named(dst);
    for (std::size_t i = 0; i < src.size(); ++i) dst[i].second.mutable_value() = src[i].second.value();
    ExtractionConfig cfg;
    cfg.alpha = 0.0;
    Adam a1(pol.parameters(), {}), a2(copy.parameters(), {});
    for (int step = 0; step < 20; ++step) {
      Rng br(100 + step);
      const Batch b = testing_support::small_batch(env->spec(), 16, br);
      Rng r1(0);
      actor_update(pol, stack, &v, b, cfg, a1, r1);
      a2.zero_grad();
      ad::backward(bc_loss(copy, b));
      a2.step();
    }
    const auto p1 = pol.parameters(), p2 = copy.parameters();
    for (std::size_t k = 0; k < p1.size(); ++k) awr_mismatch += p1[k].value().vec() != p2[k].value().vec();
  }
  return {worst_expectile <= 1e-12 && worst_critic <= 1e-6 && awr_mismatch == 0,
          "expectile(0.5) vs half square " + fmt("%.1e", worst_expectile) + "; td/sarsa/iql critic gap " +
              fmt("%.1e", worst_critic) + "; awr(alpha=0) vs bc parameter mismatches " + std::to_string(awr_mismatch)};
}

// ---------------------------------------------------------------------------
// 7. Gradient checks

Outcome criterion_gradcheck(const Budget& b) {
  double worst = 0.0;
  std::string worst_name;
  std::size_t checks = 0;
  for (const auto& c : testing_support::grad_cases())
    for (std::uint64_t seed = 0; seed < b.gradcheck_seeds; ++seed) {
      auto gc = c.make(seed);
      const double e = testing_support::grad_check(gc.loss, gc.params).rel_error;
      ++checks;
      if (e > worst) {
        worst = e;
        worst_name = c.name + " seed " + std::to_string(seed);
      }
    }
  return {worst <= 1e-4 && b.gradcheck_seeds >= 100,
          std::to_string(checks) + " checks, worst rel " + fmt("%.2e", worst) + " (" + worst_name + ")"};
}

// ---------------------------------------------------------------------------
// 8. Mode behavior on the cooperative bandit

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Per-agent probability of acting in the low-mode basin; the basins meet at
// the midpoint between the two payoff peaks.
std::vector<double> low_basin_mass(const PolicySet& pol) {
  const double boundary = 0.5 * (CoopBandit::kLowPeak + CoopBandit::kHighPeak);
  CoopBandit env;
  const AgentObs obs = env.reset(0).obs;
  std::vector<double> out;
  ad::NoGradGuard no_grad;
  for (std::size_t a = 0; a < pol.num_agents(); ++a) {
    const double mean = pol.head(a, ad::constant(Array({1, obs[a].size()}, obs[a]))).item();
    const double sd = std::exp(pol.log_std(a).item());
    out.push_back(normal_cdf((boundary - mean) / sd));
  }
  return out;
}

RunConfig bandit_config(Extraction e, std::uint64_t seed, std::size_t steps) {
  RunConfig c;
  c.env = "coop_bandit";
  c.extraction = e;
  c.alpha = e == Extraction::brac ? 0.01 : 1.0;
  c.lr_actor = 1e-3;
  c.total_steps = steps;
  c.eval_every = steps;
  c.eval_episodes = 2;
  c.seed = seed;
  return c;
}

Outcome criterion_modes(const Budget& b) {
  const Dataset data = collect_dataset("coop_bandit", "mixture", 2000, 0);
  std::size_t brac_ok = 0, awr_ok = 0;
  std::string per_seed;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::uint64_t s = 0; s < b.seeds; ++s) {
    const auto br = low_basin_mass(train(bandit_config(Extraction::brac, s, b.bandit_steps), data).learner.policies);
    const auto aw = low_basin_mass(train(bandit_config(Extraction::awr, s, b.bandit_steps), data).learner.policies);
    bool brac_one = true, awr_both = true;
    per_seed += " s" + std::to_string(s) + "[";
    for (std::size_t a = 0; a < br.size(); ++a) {
      brac_one = brac_one && std::max(br[a], 1.0 - br[a]) >= 0.9;
      awr_both = awr_both && std::min(aw[a], 1.0 - aw[a]) >= 0.05;
      per_seed += "a" + std::to_string(a) + " brac " + fmt("%.3f", br[a]) + " awr " + fmt("%.3f", aw[a]) +
                  (a + 1 < br.size() ? ", " : "]");
    }
    brac_ok += brac_one;
    awr_ok += awr_both;
  }
  const double secs = seconds_since(t0);
  return {brac_ok >= 4 && awr_ok >= 4 && b.seeds == 5 && secs <= 600.0,
          "brac agents >= 0.9 in one basin on " + std::to_string(brac_ok) + "/5, awr both basins >= 0.05 on " +
              std::to_string(awr_ok) + "/5 in " + fmt("%.0f", secs) + "s; low-basin mass per agent" + per_seed};
}

// ---------------------------------------------------------------------------
// 9. Stability with value normalization

RunConfig spread_config(bool svn, std::uint64_t seed, std::size_t steps) {
  RunConfig c;
  c.env = "spread_lite";
  c.decomp = Decomposition::mix;
  c.value_learning = ValueLearning::td;
  c.extraction = Extraction::brac;
  c.alpha = 2.5;
  c.svn = svn;
  c.total_steps = steps;
  c.eval_every = std::min<std::size_t>(1000, steps);
  c.log_every = 1;
  c.eval_episodes = 5;
  c.seed = seed;
  return c;
}

Outcome criterion_svn_stability(const Budget& b) {
  const Dataset data = collect_dataset("spread_lite", "expert", 200, 0);
  std::size_t bounded = 0, twin_tripped = 0;
  double slowest = 0.0;
  std::string per_seed;
  for (std::uint64_t s = 0; s < b.seeds; ++s) {
    const auto t0 = std::chrono::steady_clock::now();
    const RunConfig on = spread_config(true, s, b.spread_steps);
    const TrainResult r_on = train(on, data);
    const TrainResult r_off = train(spread_config(false, s, b.spread_steps), data);
    slowest = std::max(slowest, seconds_since(t0));
    const double limit = 10.0 * r_on.summary.max_abs_return / (1.0 - on.gamma);
    double peak = 0.0;
    bool finite = r_on.summary.status == "ok" && r_on.summary.steps_completed == on.total_steps;
    for (const auto& row : r_on.summary.rows) {
      finite = finite && std::isfinite(row.q_abs_mean);
      peak = std::max(peak, std::abs(row.q_abs_mean));
    }
    double peak_off = 0.0;
    for (const auto& row : r_off.summary.rows) peak_off = std::max(peak_off, std::abs(row.q_abs_mean));
    const bool ok = finite && peak < limit;
    bounded += ok;
    twin_tripped += r_off.summary.status == "diverged";
    per_seed += " s" + std::to_string(s) + "[peak " + fmt("%.2f", peak) + " / limit " + fmt("%.0f", limit) +
                ", twin peak " + fmt("%.2f", peak_off) + " " + r_off.summary.status + "]";
  }
  return {bounded == b.seeds && b.seeds == 5 && slowest <= 1200.0,
          "normalized run bounded on " + std::to_string(bounded) + "/5; unnormalized twin tripped the monitor on " +
              std::to_string(twin_tripped) + "/5 (reported only); slowest pair " + fmt("%.0f", slowest) + "s;" +
              per_seed};
}

// ---------------------------------------------------------------------------
// 10. Score normalizer constants

Outcome criterion_scores() {
  const double hi = normalized_score("2ant", 2124.15);
  const double lo = normalized_score("2ant", 895.37);
  const double mid = normalized_score("2ant", 1509.76);
  return {hi == 1.0 && lo == 0.0 && mid == 0.5,
          "2ant anchors " + fmt("%.17g", hi) + " / " + fmt("%.17g", lo) + " / " + fmt("%.17g", mid)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> only;
  Budget budget;
  app.add_option("--only", only, "criteria to run (default all)");
  app.add_option("--two-step-steps", budget.two_step_steps, "training steps per two-step run");
  app.add_option("--bandit-steps", budget.bandit_steps, "training steps per bandit run");
  app.add_option("--spread-steps", budget.spread_steps, "training steps per spread_lite run");
  app.add_option("--seeds", budget.seeds, "seeds for the training criteria");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"two-step separation", [&] { return criterion_two_step(budget); }},
      {"svn algebraic identity", criterion_svn_identity},
      {"actor scale invariance", criterion_actor_scale},
      {"linearized expansivity", criterion_linear_td},
      {"mixer monotonicity", [&] { return criterion_monotonicity(budget); }},
      {"value-learning equivalences", criterion_equivalences},
      {"gradient checks", [&] { return criterion_gradcheck(budget); }},
      {"bandit mode behavior", [&] { return criterion_modes(budget); }},
      {"stability with svn", [&] { return criterion_svn_stability(budget); }},
      {"score normalizer", criterion_scores},
  };
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    std::printf("%s criterion %d (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
