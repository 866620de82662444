#pragma once

// Linearized TD dynamics and the diagnostics derived from them.
//
// For utilities Q, targets Qbar and mixer Jacobian J, one critic step of the
// linearized system is
//
//   Q <- Q - 2 alpha_q (I - gamma J)(Q - Qbar)
//
// so the error e = Q - Qbar evolves as e <- M e with
// M = I - 2 alpha_q (I - gamma J). The iteration contracts iff rho(M) < 1.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "omarl/critic.hpp"

namespace omarl {

struct LinearTdSystem {
  Eigen::MatrixXd J;
  double gamma = 0.9;
  double alpha_q = 0.1;
  Eigen::VectorXd q0;
  Eigen::VectorXd q_bar;

  void validate() const;
  // I - 2 alpha_q (I - gamma J)
  Eigen::MatrixXd update_matrix() const;
};

struct Trajectory {
  std::vector<double> error_norms;  // ||Q_t - Qbar||, t = 0..steps (or until overflow)
  std::vector<double> ratios;       // error_norms[t+1] / error_norms[t]
  double empirical_rate = 0.0;      // geometric mean ratio over the later half
  bool overflow = false;
  bool expansive = false;
};

Trajectory simulate_linear_td(const LinearTdSystem& system, std::size_t steps);

// max_i |lambda_i(M)|. Throws ConfigError for non-square input.
double spectral_radius(const Eigen::MatrixXd& m);

struct OpNormResult {
  double value = 0.0;
  std::size_t iterations = 0;
  std::size_t restarts = 0;
  bool converged = false;
};

struct PowerIterationOptions {
  double tolerance = 1e-8;
  std::size_t max_iterations = 10000;
  std::size_t max_restarts = 5;
  std::uint64_t seed = 0x5eed;
};

// Largest singular value by power iteration on J^T J.
OpNormResult operator_norm(const Eigen::MatrixXd& j, const PowerIterationOptions& options = {});

// Operator norm of the mixer Jacobian row dQ_tot/dQ^a at one point.
OpNormResult operator_norm_of_mixer(const CriticStack& stack, std::span<const double> state,
                                    std::span<const double> utilities, std::size_t member = 0);

enum class Regime { contractive, expansive };
std::string to_string(Regime r);

struct StabilityReport {
  double op_norm = 0.0;
  bool op_norm_converged = true;
  double spectral_radius = 0.0;
  Regime regime = Regime::contractive;
  std::vector<double> growth_ratios;
  double empirical_rate = 0.0;
  bool overflow = false;
  double loop_gain_raw = 0.0;
  double loop_gain_svn = 0.0;
};

StabilityReport analyze(const LinearTdSystem& system, std::size_t steps, double actor_sensitivity = 1.0,
                        double sigma_q = 1.0);

// gamma * op_norm * actor_sensitivity
double loop_gain(double op_norm, double gamma, double actor_sensitivity);
// loop_gain / sigma_q
double loop_gain_svn(double op_norm, double gamma, double actor_sensitivity, double sigma_q);

struct ScoreScale {
  double min = 0.0;
  double max = 1.0;
};

// Environment key -> normalization range. The default table holds the
// benchmark constants plus desk-scale ranges for the bundled environments.
class ScoreScaleTable {
 public:
  static const ScoreScaleTable& defaults();
  // JSON file {"format":"omarl-score-scales","version":1,"scales":{key:{min,max}}}.
  static ScoreScaleTable load(const std::string& path);

  void set(const std::string& key, ScoreScale scale);
  bool contains(const std::string& key) const { return scales_.count(key) > 0; }
  const ScoreScale& at(const std::string& key) const;
  const std::map<std::string, ScoreScale>& entries() const { return scales_; }

 private:
  std::map<std::string, ScoreScale> scales_;
};

// (J - min) / (max - min), unclipped. Throws ConfigError on an unknown key.
double normalized_score(const std::string& key, double raw_return,
                        const ScoreScaleTable& table = ScoreScaleTable::defaults());

struct MonitorConfig {
  double drift_multiple = 50.0;
  double grad_limit = 1e6;
};

// Watches the training metric stream for runaway value scale, exploding
// gradients and non-finite values.
class DivergenceMonitor {
 public:
  DivergenceMonitor(double max_abs_return, double gamma, MonitorConfig config = {});

  // Returns the flags raised by this observation (empty when healthy).
  std::vector<std::string> observe(double q_abs_mean, double grad_norm, std::span<const double> others = {});

  double drift_threshold() const { return threshold_; }
  bool tripped() const { return !first_flags_.empty(); }
  const std::vector<std::string>& first_flags() const { return first_flags_; }
  std::optional<std::size_t> first_trip_index() const { return first_trip_; }

 private:
  double threshold_;
  MonitorConfig config_;
  std::size_t seen_ = 0;
  std::vector<std::string> first_flags_;
  std::optional<std::size_t> first_trip_;
};

}  // namespace omarl
