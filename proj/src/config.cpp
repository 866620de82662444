#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include "omarl/errors.hpp"
#include "omarl/runner.hpp"

namespace omarl {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out))
    throw ConfigError("key '" + key + "': expected a finite number, got '" + v + "'");
  return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw ConfigError("key '" + key + "': expected on or off, got '" + v + "'");
}

std::vector<std::size_t> parse_sizes(const std::string& key, const std::string& v) {
  if (v == "desk") return kDeskHidden;
  if (v == "wide") return kWideHidden;
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    const auto n = parse_uint(key, trim(part));
    if (n == 0) throw ConfigError("key '" + key + "': layer sizes must be positive");
    out.push_back(n);
  }
  if (out.empty()) throw ConfigError("key '" + key + "': expected sizes like 64x64, desk or wide");
  return out;
}

std::string sizes_string(const std::vector<std::size_t>& sizes) {
  std::string out;
  for (std::size_t i = 0; i < sizes.size(); ++i) out += (i ? "x" : "") + std::to_string(sizes[i]);
  return out;
}

std::string num(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

std::string onoff(bool b) { return b ? "on" : "off"; }

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    auto dbl = [&t](const std::string& k, double RunConfig::*m) {
      t[k] = {[m](RunConfig& c, const std::string& key, const std::string& v) { c.*m = parse_double(key, v); },
              [m](const RunConfig& c) { return num(c.*m); }};
    };
    auto size = [&t](const std::string& k, std::size_t RunConfig::*m) {
      t[k] = {[m](RunConfig& c, const std::string& key, const std::string& v) { c.*m = parse_uint(key, v); },
              [m](const RunConfig& c) { return std::to_string(c.*m); }};
    };
    auto flag = [&t](const std::string& k, bool RunConfig::*m) {
      t[k] = {[m](RunConfig& c, const std::string& key, const std::string& v) { c.*m = parse_bool(key, v); },
              [m](const RunConfig& c) { return onoff(c.*m); }};
    };
    auto str = [&t](const std::string& k, std::string RunConfig::*m) {
      t[k] = {[m](RunConfig& c, const std::string&, const std::string& v) { c.*m = v; },
              [m](const RunConfig& c) { return c.*m; }};
    };
    auto sizes = [&t](const std::string& k, std::vector<std::size_t> RunConfig::*m) {
      t[k] = {[m](RunConfig& c, const std::string& key, const std::string& v) { c.*m = parse_sizes(key, v); },
              [m](const RunConfig& c) { return sizes_string(c.*m); }};
    };
    str("env", &RunConfig::env);
    str("dataset", &RunConfig::dataset);
    t["decomp"] = {[](RunConfig& c, const std::string&, const std::string& v) { c.decomp = parse_decomposition(v); },
                   [](const RunConfig& c) { return to_string(c.decomp); }};
    t["value_learning"] = {
        [](RunConfig& c, const std::string&, const std::string& v) { c.value_learning = parse_value_learning(v); },
        [](const RunConfig& c) { return to_string(c.value_learning); }};
    t["extraction"] = {
        [](RunConfig& c, const std::string&, const std::string& v) { c.extraction = parse_extraction(v); },
        [](const RunConfig& c) { return to_string(c.extraction); }};
    dbl("alpha", &RunConfig::alpha);
    dbl("iql_tau", &RunConfig::iql_tau);
    dbl("gamma", &RunConfig::gamma);
    dbl("lr_actor", &RunConfig::lr_actor);
    dbl("lr_critic", &RunConfig::lr_critic);
    dbl("polyak_tau", &RunConfig::polyak_tau);
    size("batch_size", &RunConfig::batch_size);
    size("total_steps", &RunConfig::total_steps);
    size("eval_every", &RunConfig::eval_every);
    size("eval_episodes", &RunConfig::eval_episodes);
    t["seed"] = {[](RunConfig& c, const std::string& key, const std::string& v) { c.seed = parse_uint(key, v); },
                 [](const RunConfig& c) { return std::to_string(c.seed); }};
    t["svn"] = {[](RunConfig& c, const std::string& key, const std::string& v) {
                  if (v == "auto")
                    c.svn.reset();
                  else
                    c.svn = parse_bool(key, v);
                },
                [](const RunConfig& c) { return c.svn ? onoff(*c.svn) : std::string("auto"); }};
    dbl("svn_epsilon", &RunConfig::svn_epsilon);
    flag("listing1_strict", &RunConfig::listing1_strict);
    flag("actor_norm", &RunConfig::actor_norm);
    dbl("awr_clip", &RunConfig::awr_clip);
    flag("awr_per_agent", &RunConfig::awr_per_agent);
    sizes("hidden", &RunConfig::hidden);
    sizes("actor_hidden", &RunConfig::actor_hidden);
    flag("layer_norm", &RunConfig::layer_norm);
    size("mixer_embed", &RunConfig::mixer_embed);
    size("hyper_hidden", &RunConfig::hyper_hidden);
    t["online_steps"] = {[](RunConfig& c, const std::string& key, const std::string& v) {
                           if (v == "auto")
                             c.online_steps.reset();
                           else
                             c.online_steps = parse_uint(key, v);
                         },
                         [](const RunConfig& c) {
                           return c.online_steps ? std::to_string(*c.online_steps) : std::string("auto");
                         }};
    size("online_buffer_capacity", &RunConfig::online_buffer_capacity);
    dbl("exploration_std", &RunConfig::exploration_std);
    size("log_every", &RunConfig::log_every);
    dbl("drift_multiple", &RunConfig::drift_multiple);
    dbl("grad_limit", &RunConfig::grad_limit);
    dbl("actor_sensitivity", &RunConfig::actor_sensitivity);
    str("score_key", &RunConfig::score_key);
    return t;
  }();
  return table;
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& [k, f] : fields()) out.push_back(k);
  return out;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'");
  it->second.set(*this, key, trim(value));
}

std::map<std::string, std::string> RunConfig::to_map() const {
  std::map<std::string, std::string> out;
  for (const auto& [k, f] : fields()) out[k] = f.get(*this);
  return out;
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : to_map()) out += k + " = " + v + "\n";
  return out;
}

void RunConfig::validate() const {
  const auto names = env_names();
  if (std::find(names.begin(), names.end(), env) == names.end()) throw ConfigError("unknown env '" + env + "'");
  ValueLearnConfig{value_learning, gamma, iql_tau, svn_enabled(), svn_epsilon, listing1_strict}.validate();
  ExtractionConfig{extraction, alpha, actor_norm, awr_clip, awr_per_agent}.validate();
  if (!(lr_actor > 0.0) || !(lr_critic > 0.0)) throw ConfigError("learning rates must be positive");
  if (!(polyak_tau >= 0.0 && polyak_tau <= 1.0)) throw ConfigError("polyak_tau must lie in [0, 1]");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (eval_every == 0) throw ConfigError("eval_every must be positive");
  if (total_steps < eval_every) throw ConfigError("total_steps must be at least eval_every");
  if (eval_episodes == 0) throw ConfigError("eval_episodes must be positive");
  if (log_every == 0) throw ConfigError("log_every must be positive");
  if (mixer_embed == 0 || hyper_hidden == 0) throw ConfigError("mixer dimensions must be positive");
  if (online_buffer_capacity == 0) throw ConfigError("online_buffer_capacity must be positive");
  if (!(exploration_std >= 0.0)) throw ConfigError("exploration_std must be non-negative");
  if (!(drift_multiple > 0.0) || !(grad_limit > 0.0)) throw ConfigError("monitor thresholds must be positive");
  if (!(actor_sensitivity >= 0.0)) throw ConfigError("actor_sensitivity must be non-negative");
  if (awr_per_agent && decomp == Decomposition::cen)
    throw ConfigError("awr_per_agent needs per-agent utilities; cen has none");
}

std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text, const std::string& origin) {
  std::vector<std::pair<std::string, std::string>> out;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    if (!seen.insert(key).second) throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
  RunConfig c;
  for (const auto& [k, v] : parse_key_values(text, origin)) c.set(k, v);
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

}  // namespace omarl
