// omarl: command-line front end.
//
//   omarl gen-data --env two_step --behavior uniform --episodes 800 --seed 0 --out data.jsonl
//   omarl train --config run.cfg [--seed N] [--out DIR] [--set key=value ...]
//   omarl finetune --checkpoint DIR/checkpoint.json --out DIR2 [--set key=value ...]
//   omarl sweep --grid grid.cfg --workers 4 --out DIR
//   omarl eval --checkpoint DIR/checkpoint.json --episodes 10 [--seed N]
//   omarl dynamics --j-matrix scalar2 --gamma 0.9 --alpha-q 0.1 --steps 100 --out report.json
//   omarl report DIR
//
// Exit codes: 0 success, 1 other failure, 2 configuration or input error,
// 3 divergence halt.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <Eigen/Dense>

#include "json.hpp"
#include "omarl/errors.hpp"
#include "omarl/runner.hpp"
#include "omarl/stability.hpp"

using namespace omarl;

namespace {

std::vector<std::pair<std::string, std::string>> parse_sets(const std::vector<std::string>& sets) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  return out;
}

Eigen::MatrixXd read_matrix(const std::string& spec) {
  if (spec == "scalar1") return Eigen::MatrixXd::Constant(1, 1, 1.0);
  if (spec == "scalar2") return Eigen::MatrixXd::Constant(1, 1, 2.0);
  if (spec == "zero") return Eigen::MatrixXd::Zero(1, 1);
  std::ifstream in(spec);
  if (!in) throw ConfigError("--j-matrix: '" + spec + "' is neither a preset (scalar1, scalar2, zero) nor a readable file");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  std::vector<std::vector<double>> rows;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '[') {
    auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_array()) throw ConfigError("--j-matrix: malformed JSON matrix in '" + spec + "'");
    for (const auto& r : j) rows.push_back(r.get<std::vector<double>>());
  } else {
    std::string line;
    std::istringstream lines(text);
    while (std::getline(lines, line)) {
      std::istringstream ls(line);
      std::vector<double> r;
      double v;
      while (ls >> v) r.push_back(v);
      if (!r.empty()) rows.push_back(r);
    }
  }
  if (rows.empty()) throw ConfigError("--j-matrix: '" + spec + "' holds no rows");
  Eigen::MatrixXd m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) throw ConfigError("--j-matrix: ragged rows in '" + spec + "'");
    for (std::size_t k = 0; k < rows[i].size(); ++k) m(i, k) = rows[i][k];
  }
  return m;
}

void print_summary(const RunSummary& s) {
  std::printf("status=%s steps=%zu final_return=%.6g +- %.6g normalized=%.6g best_normalized=%.6g\n",
              s.status.c_str(), s.steps_completed, s.final_return_mean, s.final_return_std, s.final_normalized,
              s.best_normalized);
  if (!s.halt_reason.empty()) std::printf("halt_reason=%s\n", s.halt_reason.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"offline multi-agent actor-critic laboratory"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "generate an offline dataset");
  std::string g_env, g_behavior, g_out;
  std::int64_t g_episodes = 0;
  std::uint64_t g_seed = 0;
  bool g_exhaustive = false;
  gen->add_option("--env", g_env, "environment name")->required();
  gen->add_option("--behavior", g_behavior, "uniform, expert, medium or mixture")->required();
  gen->add_option("--episodes", g_episodes, "number of episodes")->required();
  gen->add_option("--seed", g_seed, "generator seed");
  gen->add_option("--out", g_out, "output file")->required();
  gen->add_flag("--exhaustive", g_exhaustive, "two_step only: replay the 8 joint patterns in turn");

  auto* tr = app.add_subcommand("train", "offline training");
  std::string t_config, t_out;
  std::optional<std::uint64_t> t_seed;
  std::vector<std::string> t_sets;
  tr->add_option("--config", t_config, "config file")->required();
  tr->add_option("--seed", t_seed, "override the config seed");
  tr->add_option("--out", t_out, "run directory (default runs/<env>_<decomp>_s<seed>)");
  tr->add_option("--set", t_sets, "override a config key, key=value");

  auto* ft = app.add_subcommand("finetune", "online fine-tuning from an offline checkpoint");
  std::string f_ckpt, f_out;
  std::vector<std::string> f_sets;
  ft->add_option("--checkpoint", f_ckpt, "offline checkpoint.json")->required();
  ft->add_option("--out", f_out, "run directory")->required();
  ft->add_option("--set", f_sets, "override a config key, key=value");

  auto* sw = app.add_subcommand("sweep", "run a grid of configurations");
  std::string s_grid, s_out = "sweep";
  std::size_t s_workers = 1;
  sw->add_option("--grid", s_grid, "grid file")->required();
  sw->add_option("--workers", s_workers, "parallel workers");
  sw->add_option("--out", s_out, "sweep directory");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string e_ckpt;
  std::size_t e_episodes = 10;
  std::optional<std::uint64_t> e_seed;
  ev->add_option("--checkpoint", e_ckpt, "checkpoint.json")->required();
  ev->add_option("--episodes", e_episodes, "evaluation episodes");
  ev->add_option("--seed", e_seed, "evaluation seed");

  auto* dy = app.add_subcommand("dynamics", "linearized TD dynamics report");
  std::string d_matrix, d_out;
  double d_gamma = 0.9, d_alpha = 0.1, d_sigma = 1.0, d_sens = 1.0;
  std::size_t d_steps = 100;
  dy->add_option("--j-matrix", d_matrix, "matrix file (JSON or whitespace rows) or preset scalar1, scalar2, zero")
      ->required();
  dy->add_option("--gamma", d_gamma, "discount");
  dy->add_option("--alpha-q", d_alpha, "critic step size");
  dy->add_option("--steps", d_steps, "iterations");
  dy->add_option("--sigma", d_sigma, "value scale for the normalized loop gain");
  dy->add_option("--actor-sensitivity", d_sens, "actor sensitivity for the loop gain");
  dy->add_option("--out", d_out, "report.json (stdout when omitted)");

  auto* rp = app.add_subcommand("report", "plots and summary for a run or sweep directory");
  std::string r_dir;
  rp->add_option("dir", r_dir, "run or sweep directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      DatasetHeader h = generate_dataset(g_env, g_behavior, g_episodes, g_seed, g_out, g_exhaustive);
      std::printf("wrote %s: %lld records, returns min %.6g mean %.6g max %.6g\n", g_out.c_str(),
                  static_cast<long long>(h.num_records), h.returns.min, h.returns.mean, h.returns.max);
    } else if (*tr) {
      RunConfig c = load_config(t_config);
      for (const auto& [k, v] : parse_sets(t_sets)) c.set(k, v);
      if (t_seed) c.seed = *t_seed;
      c.validate();
      if (t_out.empty()) t_out = "runs/" + c.env + "_" + to_string(c.decomp) + "_s" + std::to_string(c.seed);
      RunSummary s = train(c, t_out);
      print_summary(s);
      std::printf("run directory: %s\n", t_out.c_str());
      if (s.status == "diverged") return 3;
    } else if (*ft) {
      FinetuneResult r = finetune_online(f_ckpt, parse_sets(f_sets), f_out);
      std::printf("offline_return=%.6g online_transitions=%llu\n", r.offline_return_mean,
                  static_cast<unsigned long long>(r.online_transitions));
      print_summary(r.summary);
      if (r.summary.status == "diverged") return 3;
    } else if (*sw) {
      std::ifstream in(s_grid);
      if (!in) throw ConfigError("cannot open grid file '" + s_grid + "'");
      std::stringstream ss;
      ss << in.rdbuf();
      SweepResult r = sweep(ss.str(), s_workers, s_out);
      for (const auto& c : r.cells)
        std::printf("%s %s %s best_alpha=%g best_normalized=%.4g\n", c.decomp.c_str(), c.value_learning.c_str(),
                    c.extraction.c_str(), c.best_alpha, c.best_normalized);
      std::printf("%zu runs, summary in %s/summary.csv\n", r.rows.size(), s_out.c_str());
    } else if (*ev) {
      RunConfig c;
      TrainResult loaded = load_run_checkpoint(e_ckpt, &c);
      auto env = make_env(c.env);
      EvalResult e = evaluate(loaded.learner.policies, *env, e_episodes, e_seed.value_or(1'000'000ULL + c.seed * 1000ULL));
      std::printf("return_mean=%.6g return_std=%.6g normalized=%.6g\n", e.mean, e.std,
                  normalized_score(c.score_scale_key(), e.mean));
    } else if (*dy) {
      LinearTdSystem sys;
      sys.J = read_matrix(d_matrix);
      sys.gamma = d_gamma;
      sys.alpha_q = d_alpha;
      sys.q0 = Eigen::VectorXd::Ones(sys.J.rows());
      sys.q_bar = Eigen::VectorXd::Zero(sys.J.rows());
      StabilityReport rep = analyze(sys, d_steps, d_sens, d_sigma);
      nlohmann::json j;
      j["op_norm"] = rep.op_norm;
      j["op_norm_converged"] = rep.op_norm_converged;
      j["spectral_radius"] = rep.spectral_radius;
      j["regime"] = to_string(rep.regime);
      j["empirical_rate"] = rep.empirical_rate;
      j["overflow"] = rep.overflow;
      j["growth_ratios"] = rep.growth_ratios;
      j["loop_gain_raw"] = rep.loop_gain_raw;
      j["loop_gain_svn"] = rep.loop_gain_svn;
      j["gamma"] = d_gamma;
      j["alpha_q"] = d_alpha;
      j["sigma_q"] = d_sigma;
      if (d_out.empty()) {
        std::cout << j.dump(2) << "\n";
      } else {
        std::ofstream(d_out) << j.dump(2) << "\n";
        std::printf("regime=%s spectral_radius=%.6g op_norm=%.6g\n", to_string(rep.regime).c_str(),
                    rep.spectral_radius, rep.op_norm);
      }
    } else if (*rp) {
      for (const auto& f : report(r_dir).files) std::printf("%s\n", f.c_str());
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DatasetError& e) {
    std::fprintf(stderr, "dataset error: %s\n", e.what());
    return 2;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "divergence: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
