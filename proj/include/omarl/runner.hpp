#pragma once

// Experiment orchestration: configuration, offline training, online
// fine-tuning, sweeps and reports.
//
// A run directory holds
//   config.txt       resolved configuration (key = value)
//   metrics.csv      one row per logging interval
//   checkpoint.json  final parameters, config echoed in the metadata
//   summary.json     status, halt reason and final/best evaluation

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "omarl/critic.hpp"
#include "omarl/dataset.hpp"
#include "omarl/policy.hpp"
#include "omarl/stability.hpp"
#include "omarl/value_learning.hpp"

namespace omarl {

struct RunConfig {
  std::string env = "two_step";
  std::string dataset;
  Decomposition decomp = Decomposition::mix;
  ValueLearning value_learning = ValueLearning::td;
  Extraction extraction = Extraction::awr;
  double alpha = 1.0;
  double iql_tau = 0.7;
  double gamma = 0.99;
  double lr_actor = 3e-4;
  double lr_critic = 3e-4;
  double polyak_tau = 0.005;
  std::size_t batch_size = 64;
  std::size_t total_steps = 20000;
  std::size_t eval_every = 1000;
  std::size_t eval_episodes = 10;
  std::uint64_t seed = 0;
  // Unset means on for mix and off otherwise.
  std::optional<bool> svn;
  double svn_epsilon = 1e-6;
  bool listing1_strict = false;
  bool actor_norm = false;
  double awr_clip = 100.0;
  bool awr_per_agent = false;
  std::vector<std::size_t> hidden = kDeskHidden;
  std::vector<std::size_t> actor_hidden = kDeskHidden;
  bool layer_norm = true;
  std::size_t mixer_embed = 32;
  std::size_t hyper_hidden = 128;
  // Unset means the offline budget, total_steps.
  std::optional<std::size_t> online_steps;
  std::size_t online_buffer_capacity = 100000;
  double exploration_std = 0.1;
  std::size_t log_every = 100;
  double drift_multiple = 50.0;
  double grad_limit = 1e6;
  double actor_sensitivity = 1.0;
  std::string score_key;  // defaults to env

  bool svn_enabled() const { return svn.value_or(decomp == Decomposition::mix); }
  std::size_t online_budget() const { return online_steps.value_or(total_steps); }
  std::string score_scale_key() const { return score_key.empty() ? env : score_key; }
  bool uses_value_nets() const { return value_learning == ValueLearning::iql || extraction == Extraction::awr; }

  void validate() const;
  // Applies one key/value pair; unknown keys and bad values throw ConfigError.
  void set(const std::string& key, const std::string& value);
  std::map<std::string, std::string> to_map() const;
  std::string to_text() const;
};

std::vector<std::string> config_keys();
RunConfig parse_config_text(const std::string& text, const std::string& origin = "<string>");
RunConfig load_config(const std::string& path);

// Parses "k=v" lines into ordered pairs (comments with '#', blank lines
// skipped). Throws ConfigError on malformed lines or duplicate keys.
std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text, const std::string& origin);

inline const std::vector<std::string> kMetricsColumns{
    "step",       "td_loss",     "q_mean",           "q_abs_mean",        "actor_loss", "grad_norm_total",
    "jacobian_opnorm", "loop_gain_svn", "eval_return_mean", "eval_return_std", "normalized_score", "flags"};

struct MetricsRow {
  std::size_t step = 0;
  double td_loss = 0.0;
  double q_mean = 0.0;
  double q_abs_mean = 0.0;
  double actor_loss = 0.0;
  double grad_norm_total = 0.0;
  double jacobian_opnorm = 0.0;
  double loop_gain_svn = 0.0;
  double eval_return_mean = 0.0;
  double eval_return_std = 0.0;
  double normalized_score = 0.0;
  std::vector<std::string> flags;
};

std::string metrics_header();
std::string format_metrics_row(const MetricsRow& row);

// All learnable state of one agent team.
struct Learner {
  EnvSpec spec;
  CriticStack critic;
  PolicySet policies;
  std::optional<ValueNets> values;

  std::vector<NamedParam> named_parameters() const;
};

Learner make_learner(const RunConfig& config, const EnvSpec& spec, Rng& rng);

struct RunSummary {
  std::string status = "ok";  // ok | diverged | failed
  std::string halt_reason;
  std::size_t steps_completed = 0;
  double final_return_mean = 0.0;
  double final_return_std = 0.0;
  double final_normalized = 0.0;
  double best_normalized = 0.0;
  double max_abs_return = 0.0;
  std::vector<MetricsRow> rows;
};

struct TrainResult {
  RunSummary summary;
  Learner learner;
};

// Offline training on the given dataset. When out_dir is non-empty the run
// directory is written there.
TrainResult train(const RunConfig& config, const Dataset& dataset, const std::string& out_dir = "");
// Loads config.dataset and trains.
RunSummary train(const RunConfig& config, const std::string& out_dir);

// Restores a learner from a checkpoint written by train; the checkpoint
// metadata carries the configuration.
TrainResult load_run_checkpoint(const std::string& checkpoint_path, RunConfig* config_out = nullptr);

// Online fine-tuning from an offline checkpoint, sampling exclusively from a
// buffer of freshly collected rollouts. `overrides` replaces fields of the
// checkpoint's configuration (online_steps, exploration_std, ...).
struct FinetuneResult {
  RunSummary summary;
  double offline_return_mean = 0.0;
  std::uint64_t online_transitions = 0;
  bool buffer_all_online = true;
};
FinetuneResult finetune_online(const std::string& checkpoint_path,
                               const std::vector<std::pair<std::string, std::string>>& overrides,
                               const std::string& out_dir = "");

struct SweepRow {
  std::size_t run_index = 0;
  std::string run_dir;
  std::map<std::string, std::string> axes;  // axis key -> value
  std::string decomp, value_learning, extraction;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  std::string status;
  double final_return = 0.0;
  double final_normalized = 0.0;
  double best_normalized = 0.0;
};

struct SweepCell {
  std::string decomp, value_learning, extraction;
  double best_alpha = 0.0;
  double best_normalized = 0.0;  // max over alpha of the seed-mean best normalized return
  std::size_t seeds = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<SweepCell> cells;
};

// The grid file uses the config syntax; comma-separated values (lists use
// 'x', e.g. hidden = 64x64) define sweep axes.
SweepResult sweep(const std::string& grid_text, std::size_t workers, const std::string& out_dir);
std::vector<SweepCell> aggregate_best_over_alpha(const std::vector<SweepRow>& rows);

struct ReportOutput {
  std::vector<std::string> files;
};
// Renders a run directory (metrics.csv) or a sweep directory (summary.csv).
ReportOutput report(const std::string& dir);

}  // namespace omarl
