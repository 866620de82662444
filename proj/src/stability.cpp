#include "omarl/stability.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "json.hpp"
#include "omarl/errors.hpp"

namespace omarl {

void LinearTdSystem::validate() const {
  if (J.rows() == 0 || J.rows() != J.cols()) throw ConfigError("J must be a non-empty square matrix");
  if (q0.size() != J.rows() || q_bar.size() != J.rows())
    throw ConfigError("q0 and q_bar must match the dimension of J");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
  if (!(alpha_q > 0.0) || !std::isfinite(alpha_q)) throw ConfigError("alpha_q must be positive");
  if (!J.allFinite() || !q0.allFinite() || !q_bar.allFinite()) throw ConfigError("system entries must be finite");
}

Eigen::MatrixXd LinearTdSystem::update_matrix() const {
  const auto n = J.rows();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
  return eye - 2.0 * alpha_q * (eye - gamma * J);
}

Trajectory simulate_linear_td(const LinearTdSystem& system, std::size_t steps) {
  system.validate();
  if (steps == 0) throw ConfigError("steps must be at least 1");
  const auto n = system.J.rows();
  const Eigen::MatrixXd step_op = 2.0 * system.alpha_q * (Eigen::MatrixXd::Identity(n, n) - system.gamma * system.J);

  constexpr double kOverflow = 1e300;
  constexpr double kUnderflow = 1e-280;
  Trajectory tr;
  // Iterating e = Q - Qbar directly avoids the cancellation floor of
  // subtracting two nearly equal vectors once the error is tiny.
  Eigen::VectorXd err = system.q0 - system.q_bar;
  tr.error_norms.push_back(err.norm());
  for (std::size_t t = 0; t < steps; ++t) {
    err = err - step_op * err;
    const double e = err.norm();
    if (!std::isfinite(e) || e > kOverflow) {
      tr.overflow = true;
      break;
    }
    tr.error_norms.push_back(e);
  }
  for (std::size_t t = 0; t + 1 < tr.error_norms.size(); ++t)
    tr.ratios.push_back(tr.error_norms[t] > 0.0 ? tr.error_norms[t + 1] / tr.error_norms[t]
                                                : std::numeric_limits<double>::quiet_NaN());

  // Geometric rate over the later half of the usable prefix.
  std::size_t last = 0;
  while (last + 1 < tr.error_norms.size() && tr.error_norms[last + 1] > kUnderflow) ++last;
  if (last >= 1) {
    const std::size_t mid = last / 2;
    tr.empirical_rate = std::pow(tr.error_norms[last] / tr.error_norms[mid], 1.0 / static_cast<double>(last - mid));
  }
  tr.expansive = tr.overflow || tr.empirical_rate > 1.0;
  return tr;
}

double spectral_radius(const Eigen::MatrixXd& m) {
  if (m.rows() == 0 || m.rows() != m.cols()) throw ConfigError("spectral_radius needs a non-empty square matrix");
  Eigen::EigenSolver<Eigen::MatrixXd> solver(m, false);
  if (solver.info() != Eigen::Success) throw DivergenceError("eigenvalue solver failed");
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

OpNormResult operator_norm(const Eigen::MatrixXd& j, const PowerIterationOptions& options) {
  if (j.size() == 0) throw ConfigError("operator_norm of an empty matrix");
  if (!j.allFinite()) throw ConfigError("operator_norm of a non-finite matrix");
  OpNormResult res;
  if (j.norm() == 0.0) {
    res.converged = true;
    return res;
  }
  const Eigen::MatrixXd gram = j.transpose() * j;
  Rng rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  double best = 0.0;
  for (std::size_t attempt = 0; attempt <= options.max_restarts; ++attempt) {
    Eigen::VectorXd v(j.cols());
    for (auto& x : v) x = normal(rng);
    v.normalize();
    for (std::size_t it = 0; it < options.max_iterations; ++it) {
      ++res.iterations;
      Eigen::VectorXd w = gram * v;
      const double wn = w.norm();
      if (wn == 0.0) break;  // start vector in the null space
      const double lambda = v.dot(w);
      const double residual = (w - lambda * v).norm();
      v = w / wn;
      best = std::max(best, std::sqrt(std::max(lambda, 0.0)));
      if (residual <= options.tolerance * std::max(lambda, 1e-300)) {
        res.value = std::sqrt(std::max(v.dot(gram * v), 0.0));
        res.converged = true;
        return res;
      }
    }
    if (attempt < options.max_restarts) ++res.restarts;
  }
  res.value = best;
  return res;
}

OpNormResult operator_norm_of_mixer(const CriticStack& stack, std::span<const double> state,
                                    std::span<const double> utilities, std::size_t member) {
  const auto row = stack.mixer_jacobian(member, state, utilities);
  Eigen::MatrixXd j(1, static_cast<Eigen::Index>(row.size()));
  for (std::size_t a = 0; a < row.size(); ++a) j(0, static_cast<Eigen::Index>(a)) = row[a];
  return operator_norm(j);
}

std::string to_string(Regime r) { return r == Regime::contractive ? "contractive" : "expansive"; }

StabilityReport analyze(const LinearTdSystem& system, std::size_t steps, double actor_sensitivity, double sigma_q) {
  system.validate();
  StabilityReport rep;
  const OpNormResult op = operator_norm(system.J);
  rep.op_norm = op.value;
  rep.op_norm_converged = op.converged;
  rep.spectral_radius = spectral_radius(system.update_matrix());
  rep.regime = rep.spectral_radius > 1.0 ? Regime::expansive : Regime::contractive;
  Trajectory tr = simulate_linear_td(system, steps);
  rep.growth_ratios = tr.ratios;
  rep.empirical_rate = tr.empirical_rate;
  rep.overflow = tr.overflow;
  rep.loop_gain_raw = loop_gain(rep.op_norm, system.gamma, actor_sensitivity);
  rep.loop_gain_svn = loop_gain_svn(rep.op_norm, system.gamma, actor_sensitivity, sigma_q);
  return rep;
}

double loop_gain(double op_norm, double gamma, double actor_sensitivity) {
  if (op_norm < 0.0 || gamma < 0.0 || actor_sensitivity < 0.0) throw ConfigError("loop gain inputs must be non-negative");
  return gamma * op_norm * actor_sensitivity;
}

double loop_gain_svn(double op_norm, double gamma, double actor_sensitivity, double sigma_q) {
  if (!(sigma_q > 0.0)) throw ConfigError("sigma_q must be positive");
  return loop_gain(op_norm, gamma, actor_sensitivity) / sigma_q;
}

// ---------------------------------------------------------------------------
// Score scales

const ScoreScaleTable& ScoreScaleTable::defaults() {
  static const ScoreScaleTable table = [] {
    ScoreScaleTable t;
    t.set("2ant", {895.37, 2124.15});
    t.set("3hopper", {70.75, 3762.68});
    t.set("6halfcheetah", {-198.76, 3866.08});
    t.set("spread", {159.8, 516.8});
    t.set("two_step", {0.0, 8.0});
    t.set("coop_bandit", {0.0, 1.2});
    t.set("spread_lite", {-8.73, -1.1});
    return t;
  }();
  return table;
}

ScoreScaleTable ScoreScaleTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open score scale file '" + path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed score scale file '" + path + "': " + e.what());
  }
  if (doc.value("format", "") != "omarl-score-scales" || doc.value("version", 0) != 1)
    throw ConfigError("unsupported score scale file '" + path + "'");
  ScoreScaleTable t;
  for (const auto& [key, v] : doc.at("scales").items()) t.set(key, {v.at("min").get<double>(), v.at("max").get<double>()});
  return t;
}

void ScoreScaleTable::set(const std::string& key, ScoreScale scale) {
  if (!(scale.max > scale.min)) throw ConfigError("score scale for '" + key + "' needs max > min");
  scales_[key] = scale;
}

const ScoreScale& ScoreScaleTable::at(const std::string& key) const {
  auto it = scales_.find(key);
  if (it == scales_.end()) throw ConfigError("no score scale registered for '" + key + "'");
  return it->second;
}

namespace {

struct Decimal {
  std::int64_t mantissa = 0;
  int exponent = 0;
};

// Shortest round-trip decimal form of v, when it has at most 15 significant
// digits.
std::optional<Decimal> short_decimal(double v) {
  if (!std::isfinite(v)) return std::nullopt;
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::scientific);
  if (ec != std::errc()) return std::nullopt;
  const std::string text(buf, end);
  const auto e = text.find('e');
  std::string digits;
  for (char ch : text.substr(0, e))
    if (std::isdigit(static_cast<unsigned char>(ch))) digits += ch;
  if (digits.size() > 15) return std::nullopt;
  Decimal d;
  d.mantissa = std::stoll(digits);
  if (text[0] == '-') d.mantissa = -d.mantissa;
  d.exponent = std::stoi(text.substr(e + 1)) - static_cast<int>(digits.size()) + 1;
  return d;
}

// (j - lo) / (hi - lo) evaluated on the decimal values of the inputs, with a
// single rounding in the final division.
std::optional<double> exact_decimal_ratio(double j, double lo, double hi) {
  const auto dj = short_decimal(j), dl = short_decimal(lo), dh = short_decimal(hi);
  if (!dj || !dl || !dh) return std::nullopt;
  const int base = std::min({dj->exponent, dl->exponent, dh->exponent});
  auto aligned = [base](const Decimal& d) -> std::optional<__int128> {
    __int128 m = d.mantissa;
    for (int k = base; k < d.exponent; ++k) {
      m *= 10;
      if (m > (__int128{1} << 100) || m < -(__int128{1} << 100)) return std::nullopt;
    }
    return m;
  };
  const auto mj = aligned(*dj), ml = aligned(*dl), mh = aligned(*dh);
  if (!mj || !ml || !mh) return std::nullopt;
  const __int128 num = *mj - *ml, den = *mh - *ml;
  constexpr __int128 kExact = __int128{1} << 53;
  if (den <= 0 || num >= kExact || num <= -kExact || den >= kExact) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

double normalized_score(const std::string& key, double raw_return, const ScoreScaleTable& table) {
  const ScoreScale& s = table.at(key);
  if (auto exact = exact_decimal_ratio(raw_return, s.min, s.max)) return *exact;
  return (raw_return - s.min) / (s.max - s.min);
}

// ---------------------------------------------------------------------------
// Divergence monitor

DivergenceMonitor::DivergenceMonitor(double max_abs_return, double gamma, MonitorConfig config) : config_(config) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
  const double scale = max_abs_return > 0.0 ? max_abs_return : 1.0;
  threshold_ = config_.drift_multiple * scale / (1.0 - gamma);
}

std::vector<std::string> DivergenceMonitor::observe(double q_abs_mean, double grad_norm, std::span<const double> others) {
  std::vector<std::string> flags;
  bool finite = std::isfinite(q_abs_mean) && std::isfinite(grad_norm);
  for (double v : others) finite = finite && std::isfinite(v);
  if (!finite) flags.emplace_back("nonfinite");
  if (std::isfinite(q_abs_mean) && std::abs(q_abs_mean) > threshold_) flags.emplace_back("value_scale_drift");
  if (std::isfinite(grad_norm) && grad_norm > config_.grad_limit) flags.emplace_back("grad_blowup");
  if (!flags.empty() && first_flags_.empty()) {
    first_flags_ = flags;
    first_trip_ = seen_;
  }
  ++seen_;
  return flags;
}

}  // namespace omarl
