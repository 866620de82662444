#include "omarl/runner.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "omarl/checkpoint.hpp"
#include "omarl/errors.hpp"

namespace fs = std::filesystem;

namespace omarl {

std::string metrics_header() {
  std::string out;
  for (std::size_t i = 0; i < kMetricsColumns.size(); ++i) out += (i ? "," : "") + kMetricsColumns[i];
  return out;
}

std::string format_metrics_row(const MetricsRow& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%zu,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,", r.step, r.td_loss,
                r.q_mean, r.q_abs_mean, r.actor_loss, r.grad_norm_total, r.jacobian_opnorm, r.loop_gain_svn,
                r.eval_return_mean, r.eval_return_std, r.normalized_score);
  std::string out = buf;
  for (std::size_t i = 0; i < r.flags.size(); ++i) out += (i ? "|" : "") + r.flags[i];
  return out;
}

std::vector<NamedParam> Learner::named_parameters() const {
  std::vector<NamedParam> out;
  critic.append_named(out);
  policies.append_named(out);
  if (values) values->append_named(out);
  return out;
}

Learner make_learner(const RunConfig& config, const EnvSpec& spec, Rng& rng) {
  CriticConfig cc;
  cc.decomp = config.decomp;
  cc.hidden = config.hidden;
  cc.layer_norm = config.layer_norm;
  cc.mixer_embed = config.mixer_embed;
  cc.hyper_hidden = config.hyper_hidden;
  CriticStack critic(spec, cc, rng);
  PolicySet policies(spec, config.actor_hidden, rng);
  std::optional<ValueNets> values;
  if (config.uses_value_nets()) {
    const bool dec = config.decomp == Decomposition::dec;
    const bool per_agent = dec || (config.extraction == Extraction::awr && config.awr_per_agent);
    values.emplace(spec, !dec, per_agent, config.hidden, config.layer_norm, rng);
  }
  return Learner{spec, std::move(critic), std::move(policies), std::move(values)};
}

namespace {

double max_abs_episode_return(const std::vector<TransitionRecord>& records) {
  double m = 0.0;
  for (double r : episode_returns(records)) m = std::max(m, std::abs(r));
  return m;
}

std::uint64_t eval_seed(const RunConfig& c) { return 1'000'000ULL + c.seed * 1000ULL; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

nlohmann::json summary_json(const RunSummary& s, const RunConfig& c) {
  nlohmann::json j;
  j["status"] = s.status;
  j["halt_reason"] = s.halt_reason;
  j["steps_completed"] = s.steps_completed;
  j["final_return_mean"] = s.final_return_mean;
  j["final_return_std"] = s.final_return_std;
  j["final_normalized"] = s.final_normalized;
  j["best_normalized"] = s.best_normalized;
  j["max_abs_return"] = s.max_abs_return;
  j["seed"] = c.seed;
  j["config"] = c.to_map();
  return j;
}

// Shared optimisation state for offline training and online fine-tuning.
class Session {
 public:
  Session(const RunConfig& config, Learner& learner, const Env& env, double max_abs_return, Rng& rng)
      : config_(config),
        learner_(learner),
        env_(env),
        rng_(rng),
        critic_opt_(learner.critic.parameters(), AdamConfig{config.lr_critic}),
        actor_opt_(learner.policies.parameters(), AdamConfig{config.lr_actor}),
        monitor_(max_abs_return, config.gamma, MonitorConfig{config.drift_multiple, config.grad_limit}) {
    if (learner.values) value_opt_ = Adam(learner.values->parameters(), AdamConfig{config.lr_critic});
    vl_ = ValueLearnConfig{config.value_learning, config.gamma,        config.iql_tau,
                           config.svn_enabled(),  config.svn_epsilon, config.listing1_strict};
    ex_ = ExtractionConfig{config.extraction, config.alpha, config.actor_norm, config.awr_clip, config.awr_per_agent};
    summary_.max_abs_return = max_abs_return;
    ScoreScaleTable::defaults().at(config.score_scale_key());
  }

  RunSummary& summary() { return summary_; }

  void evaluate_now() {
    EvalResult e = evaluate(learner_.policies, env_, config_.eval_episodes, eval_seed(config_));
    eval_mean_ = e.mean;
    eval_std_ = e.std;
    eval_norm_ = normalized_score(config_.score_scale_key(), e.mean);
    best_norm_ = evaluated_ ? std::max(best_norm_, eval_norm_) : eval_norm_;
    evaluated_ = true;
  }

  // Baseline evaluation before any update; it seeds the eval columns and the
  // best score but is not a logged row.
  double evaluate_initial() {
    evaluate_now();
    return eval_mean_;
  }

  // One critic update then one actor update. Returns false when the run halts.
  bool step(std::size_t t, const Batch& batch) {
    MetricsRow row;
    row.step = t;
    std::vector<std::string> flags;
    try {
      NextActionSampler sampler = policy_sampler(learner_.policies, rng_);
      ValueNets* values = learner_.values ? &*learner_.values : nullptr;
      CriticMetrics cm = critic_update(learner_.critic, values, batch, sampler, vl_, critic_opt_,
                                       values ? &value_opt_ : nullptr, config_.polyak_tau);
      ActorMetrics am = actor_update(learner_.policies, learner_.critic, values, batch, ex_, actor_opt_, rng_);
      row.td_loss = cm.td_loss;
      row.q_mean = cm.q_mean;
      row.q_abs_mean = cm.q_abs_mean;
      row.actor_loss = am.actor_loss;
      row.grad_norm_total = std::sqrt(cm.grad_norm * cm.grad_norm + am.grad_norm * am.grad_norm);
      sigma_ = cm.stats.sigma_q;
      const double others[] = {row.td_loss, row.q_mean, row.actor_loss};
      flags = monitor_.observe(row.q_abs_mean, row.grad_norm_total, others);
    } catch (const DivergenceError& e) {
      flags = {"nonfinite"};
      summary_.halt_reason = e.what();
    }
    if (t % config_.eval_every == 0 && flags.empty()) evaluate_now();
    summary_.steps_completed = t;
    const bool halt = !flags.empty();
    if (t % config_.log_every == 0 || halt) {
      diagnostics(row, batch);
      fill_eval(row);
      row.flags = flags;
      summary_.rows.push_back(row);
    }
    if (halt) {
      summary_.status = "diverged";
      if (summary_.halt_reason.empty()) summary_.halt_reason = flags.front();
      summary_.halt_reason = "halted at step " + std::to_string(t) + ": " + summary_.halt_reason;
    }
    return !halt;
  }

  void finish() {
    if (!evaluated_ || (summary_.status == "ok" && summary_.steps_completed % config_.eval_every != 0))
      evaluate_now();
    summary_.final_return_mean = eval_mean_;
    summary_.final_return_std = eval_std_;
    summary_.final_normalized = eval_norm_;
    summary_.best_normalized = best_norm_;
  }

 private:
  void fill_eval(MetricsRow& row) const {
    row.eval_return_mean = eval_mean_;
    row.eval_return_std = eval_std_;
    row.normalized_score = eval_norm_;
  }

  void diagnostics(MetricsRow& row, const Batch& batch) {
    const double n = static_cast<double>(learner_.spec.num_agents);
    switch (config_.decomp) {
      case Decomposition::dec: row.jacobian_opnorm = 1.0; break;
      case Decomposition::vdn: row.jacobian_opnorm = std::sqrt(n); break;
      case Decomposition::cen: row.jacobian_opnorm = 0.0; break;
      case Decomposition::mix: {
        const std::size_t probes = std::min<std::size_t>(batch.size, 4);
        Array u;
        {
          ad::NoGradGuard no_grad;
          u = learner_.critic.utilities(0, joint_input(batch.state, batch.obs, batch.action_input)).value();
        }
        double total = 0.0;
        const std::size_t s = batch.state.cols(), a = u.cols();
        for (std::size_t r = 0; r < probes; ++r) {
          std::span<const double> st(batch.state.data().data() + r * s, s);
          std::span<const double> ut(u.data().data() + r * a, a);
          total += operator_norm_of_mixer(learner_.critic, st, ut).value;
        }
        row.jacobian_opnorm = total / static_cast<double>(probes);
        break;
      }
    }
    const double sigma = config_.svn_enabled() && sigma_ > 0.0 ? sigma_ : 1.0;
    if (std::isfinite(row.jacobian_opnorm))
      row.loop_gain_svn = loop_gain_svn(row.jacobian_opnorm, config_.gamma, config_.actor_sensitivity, sigma);
  }

  const RunConfig& config_;
  Learner& learner_;
  const Env& env_;
  Rng& rng_;
  Adam critic_opt_;
  Adam actor_opt_;
  Adam value_opt_;
  DivergenceMonitor monitor_;
  ValueLearnConfig vl_;
  ExtractionConfig ex_;
  RunSummary summary_;
  double sigma_ = 1.0;
  double eval_mean_ = 0.0, eval_std_ = 0.0, eval_norm_ = 0.0, best_norm_ = 0.0;
  bool evaluated_ = false;
};

void write_run_dir(const std::string& out_dir, const RunConfig& config, const RunSummary& summary,
                   const Learner& learner, const nlohmann::json& extra_meta = nlohmann::json::object()) {
  if (out_dir.empty()) return;
  const fs::path dir(out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create run directory '" + out_dir + "': " + ec.message());
  write_text(dir / "config.txt", config.to_text());
  std::string csv = metrics_header() + "\n";
  for (const auto& r : summary.rows) csv += format_metrics_row(r) + "\n";
  write_text(dir / "metrics.csv", csv);
  nlohmann::json meta = extra_meta;
  meta["config"] = config.to_map();
  meta["max_abs_return"] = summary.max_abs_return;
  meta["steps_completed"] = summary.steps_completed;
  save_checkpoint((dir / "checkpoint.json").string(), learner.named_parameters(), meta);
  write_text(dir / "summary.json", summary_json(summary, config).dump(2) + "\n");
}

}  // namespace

TrainResult train(const RunConfig& config, const Dataset& dataset, const std::string& out_dir) {
  config.validate();
  if (dataset.header.env != config.env)
    throw DatasetError("dataset was generated for '" + dataset.header.env + "' but the config names '" + config.env +
                       "'");
  if (dataset.records.empty()) throw DatasetError("dataset has no records");
  auto env = make_env(config.env);
  Rng rng(config.seed);
  Learner learner = make_learner(config, env->spec(), rng);
  Session session(config, learner, *env, max_abs_episode_return(dataset.records), rng);
  session.evaluate_initial();
  for (std::size_t t = 1; t <= config.total_steps; ++t) {
    Batch batch = sample_batch(dataset.records, config.batch_size, env->spec(), rng);
    if (!session.step(t, batch)) break;
  }
  session.finish();
  TrainResult result{session.summary(), std::move(learner)};
  write_run_dir(out_dir, config, result.summary, result.learner);
  return result;
}

RunSummary train(const RunConfig& config, const std::string& out_dir) {
  if (config.dataset.empty()) throw ConfigError("config key 'dataset' is required for training");
  Dataset data = load_dataset(config.dataset);
  return train(config, data, out_dir).summary;
}

TrainResult load_run_checkpoint(const std::string& checkpoint_path, RunConfig* config_out) {
  const nlohmann::json meta = read_checkpoint_metadata(checkpoint_path);
  if (!meta.contains("config") || !meta["config"].is_object())
    throw DatasetError("checkpoint '" + checkpoint_path + "' carries no run configuration");
  RunConfig config;
  for (const auto& [k, v] : meta["config"].items()) config.set(k, v.get<std::string>());
  config.validate();
  auto env = make_env(config.env);
  Rng rng(config.seed);
  Learner learner = make_learner(config, env->spec(), rng);
  auto named = learner.named_parameters();
  load_checkpoint(checkpoint_path, named);
  RunSummary s;
  s.max_abs_return = meta.value("max_abs_return", 0.0);
  s.steps_completed = meta.value("steps_completed", std::size_t{0});
  if (config_out) *config_out = config;
  return TrainResult{s, std::move(learner)};
}

FinetuneResult finetune_online(const std::string& checkpoint_path,
                               const std::vector<std::pair<std::string, std::string>>& overrides,
                               const std::string& out_dir) {
  RunConfig config;
  TrainResult loaded = load_run_checkpoint(checkpoint_path, &config);
  for (const auto& [k, v] : overrides) config.set(k, v);
  config.validate();
  Learner& learner = loaded.learner;
  auto env = make_env(config.env);
  const EnvSpec& spec = env->spec();
  Rng rng(config.seed ^ 0x0f1e2d3c4b5a6978ULL);

  FinetuneResult out;
  Session session(config, learner, *env, loaded.summary.max_abs_return, rng);
  out.offline_return_mean = session.evaluate_initial();

  ReplayBuffer buffer(config.online_buffer_capacity);
  auto sim = env->clone();
  std::uint64_t episode = 0;
  std::vector<TransitionRecord> current;
  Observation obs;
  auto start_episode = [&] {
    obs = sim->reset(2'000'000ULL + config.seed * 100'000ULL + episode);
    current.clear();
  };
  // Takes one environment step; completed episodes are stitched and pushed.
  auto env_step = [&] {
    TransitionRecord rec;
    rec.episode_id = static_cast<std::int64_t>(episode);
    rec.t = static_cast<std::int64_t>(current.size());
    rec.state = obs.state;
    rec.obs = obs.obs;
    rec.actions = learner.policies.act_joint(obs.obs, false, &rng, config.exploration_std);
    rec.source = Provenance::online;
    StepResult s = sim->step(rec.actions);
    if (!spec.action.discrete())
      for (auto& u : rec.actions)
        for (auto& x : u) x = std::clamp(x, spec.action.low, spec.action.high);
    rec.reward = s.team_reward;
    rec.next_state = s.next_state;
    rec.next_obs = s.next_obs;
    rec.done = s.done;
    if (!current.empty()) current.back().next_actions = rec.actions;
    current.push_back(std::move(rec));
    ++out.online_transitions;
    obs = Observation{s.next_state, s.next_obs};
    if (s.done) {
      buffer.push_rollout(current);
      ++episode;
      start_episode();
    }
  };

  if (config.online_budget() > 0) {
    start_episode();
    while (buffer.size() == 0) env_step();
    for (std::size_t t = 1; t <= config.online_budget(); ++t) {
      env_step();
      Batch batch = buffer.sample(config.batch_size, spec, rng);
      if (!session.step(t, batch)) break;
    }
  }
  session.finish();
  for (const auto& r : buffer.items()) out.buffer_all_online = out.buffer_all_online && r.source == Provenance::online;
  out.summary = session.summary();
  nlohmann::json meta;
  meta["offline_checkpoint"] = checkpoint_path;
  meta["offline_return_mean"] = out.offline_return_mean;
  meta["online_transitions"] = out.online_transitions;
  write_run_dir(out_dir, config, out.summary, learner, meta);
  return out;
}

}  // namespace omarl
