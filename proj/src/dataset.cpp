#include "omarl/dataset.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "omarl/errors.hpp"

namespace omarl {

using nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

json spec_to_json(const EnvSpec& s) {
  return {{"name", s.name},
          {"num_agents", s.num_agents},
          {"state_dim", s.state_dim},
          {"obs_dim", s.obs_dim},
          {"action_kind", s.action.discrete() ? "discrete" : "continuous"},
          {"action_n", s.action.n},
          {"action_low", s.action.low},
          {"action_high", s.action.high},
          {"horizon", s.horizon},
          {"gamma", s.gamma}};
}

EnvSpec spec_from_json(const json& j) {
  EnvSpec s;
  s.name = j.at("name").get<std::string>();
  s.num_agents = j.at("num_agents").get<std::size_t>();
  s.state_dim = j.at("state_dim").get<std::size_t>();
  s.obs_dim = j.at("obs_dim").get<std::size_t>();
  const auto kind = j.at("action_kind").get<std::string>();
  if (kind != "discrete" && kind != "continuous") throw DatasetError("unknown action kind '" + kind + "'");
  s.action.kind = kind == "discrete" ? ActionKind::discrete : ActionKind::continuous;
  s.action.n = j.at("action_n").get<std::size_t>();
  s.action.low = j.at("action_low").get<double>();
  s.action.high = j.at("action_high").get<double>();
  s.horizon = j.at("horizon").get<std::size_t>();
  s.gamma = j.at("gamma").get<double>();
  return s;
}

json record_to_json(const TransitionRecord& r) {
  json j;
  j["episode_id"] = r.episode_id;
  j["t"] = r.t;
  j["state"] = r.state;
  j["obs"] = r.obs;
  j["actions"] = r.actions;
  j["reward"] = r.reward;
  j["next_state"] = r.next_state;
  j["next_obs"] = r.next_obs;
  if (r.next_actions) j["next_actions"] = *r.next_actions;
  j["done"] = r.done;
  return j;
}

std::vector<double> real_vector(const json& j, const char* field, std::size_t expected) {
  if (!j.is_array()) throw DatasetError(std::string(field) + " is not a list");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) throw DatasetError(std::string(field) + " holds a non-numeric or non-finite value");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw DatasetError(std::string(field) + " holds a non-finite value");
    out.push_back(x);
  }
  if (out.size() != expected)
    throw DatasetError(std::string(field) + " has length " + std::to_string(out.size()) + ", header expects " +
                       std::to_string(expected));
  return out;
}

AgentObs agent_vectors(const json& j, const char* field, std::size_t agents, std::size_t dim) {
  if (!j.is_array() || j.size() != agents)
    throw DatasetError(std::string(field) + " must hold one entry per agent");
  AgentObs out;
  for (const auto& v : j) out.push_back(real_vector(v, field, dim));
  return out;
}

JointAction joint_action(const json& j, const char* field, const EnvSpec& spec) {
  const std::size_t dim = spec.action.discrete() ? 1 : spec.action.n;
  JointAction u = agent_vectors(j, field, spec.num_agents, dim);
  for (const auto& a : u) {
    if (spec.action.discrete()) {
      const double idx = a[0];
      if (idx < 0 || idx >= static_cast<double>(spec.action.n) || idx != std::floor(idx))
        throw DatasetError(std::string(field) + " holds an invalid discrete index");
    }
  }
  return u;
}

TransitionRecord record_from_json(const json& j, const EnvSpec& spec) {
  TransitionRecord r;
  r.episode_id = j.at("episode_id").get<std::int64_t>();
  r.t = j.at("t").get<std::int64_t>();
  r.state = real_vector(j.at("state"), "state", spec.state_dim);
  r.obs = agent_vectors(j.at("obs"), "obs", spec.num_agents, spec.obs_dim);
  r.actions = joint_action(j.at("actions"), "actions", spec);
  const auto& rew = j.at("reward");
  if (!rew.is_number() || !std::isfinite(rew.get<double>())) throw DatasetError("reward is not a finite number");
  r.reward = rew.get<double>();
  r.next_state = real_vector(j.at("next_state"), "next_state", spec.state_dim);
  r.next_obs = agent_vectors(j.at("next_obs"), "next_obs", spec.num_agents, spec.obs_dim);
  if (j.contains("next_actions")) r.next_actions = joint_action(j.at("next_actions"), "next_actions", spec);
  r.done = j.at("done").get<bool>();
  return r;
}

template <typename Container>
Batch batch_from(const Container& records, const std::vector<std::size_t>& indices, const EnvSpec& spec) {
  const std::size_t b = indices.size(), n = spec.num_agents, ad = spec.action.input_dim();
  Batch batch;
  batch.size = b;
  batch.indices = indices;
  batch.state = Array::matrix(b, spec.state_dim);
  batch.next_state = Array::matrix(b, spec.state_dim);
  batch.reward = Array::matrix(b, 1);
  batch.done = Array::matrix(b, 1);
  batch.has_next_action = Array::matrix(b, 1);
  for (std::size_t a = 0; a < n; ++a) {
    batch.obs.push_back(Array::matrix(b, spec.obs_dim));
    batch.next_obs.push_back(Array::matrix(b, spec.obs_dim));
    batch.action_input.push_back(Array::matrix(b, ad));
    batch.next_action_input.push_back(Array::matrix(b, ad));
    batch.action_index.emplace_back(b, 0);
  }
  for (std::size_t i = 0; i < b; ++i) {
    const TransitionRecord& r = records[indices[i]];
    for (std::size_t k = 0; k < spec.state_dim; ++k) {
      batch.state(i, k) = r.state[k];
      batch.next_state(i, k) = r.next_state[k];
    }
    batch.reward[i] = r.reward;
    batch.done[i] = r.done ? 1.0 : 0.0;
    batch.has_next_action[i] = r.next_actions ? 1.0 : 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t k = 0; k < spec.obs_dim; ++k) {
        batch.obs[a](i, k) = r.obs[a][k];
        batch.next_obs[a](i, k) = r.next_obs[a][k];
      }
      auto enc = encode_action(spec.action, r.actions[a]);
      for (std::size_t k = 0; k < ad; ++k) batch.action_input[a](i, k) = enc[k];
      if (spec.action.discrete()) batch.action_index[a][i] = static_cast<std::size_t>(r.actions[a][0]);
      if (r.next_actions) {
        auto next = encode_action(spec.action, (*r.next_actions)[a]);
        for (std::size_t k = 0; k < ad; ++k) batch.next_action_input[a](i, k) = next[k];
      }
    }
  }
  return batch;
}

}  // namespace

std::vector<double> encode_action(const ActionSpace& space, const std::vector<double>& action) {
  if (!space.discrete()) return action;
  std::vector<double> one_hot(space.n, 0.0);
  one_hot.at(static_cast<std::size_t>(action.at(0))) = 1.0;
  return one_hot;
}

std::vector<double> episode_returns(const std::vector<TransitionRecord>& records) {
  std::vector<double> out;
  std::int64_t current = std::numeric_limits<std::int64_t>::min();
  for (const auto& r : records) {
    if (out.empty() || r.episode_id != current) {
      out.push_back(0.0);
      current = r.episode_id;
    }
    out.back() += r.reward;
  }
  return out;
}

ReturnStats return_stats(const std::vector<TransitionRecord>& records) {
  auto rets = episode_returns(records);
  ReturnStats s;
  if (rets.empty()) return s;
  s.min = s.max = rets.front();
  double total = 0.0;
  for (double r : rets) {
    s.min = std::min(s.min, r);
    s.max = std::max(s.max, r);
    total += r;
  }
  s.mean = total / static_cast<double>(rets.size());
  return s;
}

Dataset collect_dataset(const std::string& env_name, const std::string& behavior, std::int64_t episodes,
                        std::uint64_t seed, bool exhaustive) {
  if (episodes <= 0) throw ConfigError("episode count must be positive");
  auto env = make_env(env_name);
  if (exhaustive && env_name != "two_step") throw ConfigError("exhaustive mode is only defined for two_step");
  auto policy = scripted_behavior(*env, behavior);
  Rng rng(seed);

  Dataset ds;
  for (std::int64_t e = 0; e < episodes; ++e) {
    std::unique_ptr<BehaviorPolicy> pattern;
    BehaviorPolicy* actor = policy.get();
    if (exhaustive) {
      pattern = two_step_pattern_behavior(static_cast<std::size_t>(e % 8));
      actor = pattern.get();
    }
    actor->begin_episode(rng);
    Observation cur = env->reset(splitmix64(seed + static_cast<std::uint64_t>(e)));
    std::vector<TransitionRecord> episode;
    while (!env->terminal()) {
      JointAction u = actor->act(*env, rng);
      StepResult step = env->step(u);
      TransitionRecord r;
      r.episode_id = e;
      r.t = static_cast<std::int64_t>(episode.size());
      r.state = cur.state;
      r.obs = cur.obs;
      r.actions = u;
      // Stored actions are what the environment executed.
      if (!env->spec().action.discrete())
        for (auto& a : r.actions)
          for (auto& x : a) x = std::clamp(x, env->spec().action.low, env->spec().action.high);
      r.reward = step.team_reward;
      r.next_state = step.next_state;
      r.next_obs = step.next_obs;
      r.done = step.done;
      if (!episode.empty()) episode.back().next_actions = r.actions;
      episode.push_back(std::move(r));
      cur = {step.next_state, step.next_obs};
    }
    for (auto& r : episode) ds.records.push_back(std::move(r));
  }

  DatasetHeader& h = ds.header;
  h.env = env_name;
  h.spec = env->spec();
  h.behavior = behavior;
  h.num_episodes = episodes;
  h.seed = seed;
  h.exhaustive = exhaustive;
  h.returns = return_stats(ds.records);
  h.num_records = static_cast<std::int64_t>(ds.records.size());
  return ds;
}

void write_dataset(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetError("cannot write dataset " + path);
  const DatasetHeader& h = dataset.header;
  json header = {{"format", "omarl-dataset"},
                 {"format_version", h.format_version},
                 {"env", h.env},
                 {"spec", spec_to_json(h.spec)},
                 {"behavior", h.behavior},
                 {"num_episodes", h.num_episodes},
                 {"seed", h.seed},
                 {"exhaustive", h.exhaustive},
                 {"returns", {{"min", h.returns.min}, {"mean", h.returns.mean}, {"max", h.returns.max}}},
                 {"num_records", dataset.records.size()}};
  out << header.dump() << '\n';
  for (const auto& r : dataset.records) out << record_to_json(r).dump() << '\n';
  if (!out) throw DatasetError("failed writing dataset " + path);
}

DatasetHeader generate_dataset(const std::string& env_name, const std::string& behavior, std::int64_t episodes,
                               std::uint64_t seed, const std::string& path, bool exhaustive) {
  Dataset ds = collect_dataset(env_name, behavior, episodes, seed, exhaustive);
  write_dataset(ds, path);
  return ds.header;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open dataset " + path);
  std::string line;
  if (!std::getline(in, line)) throw DatasetError(path + ": empty file");

  Dataset ds;
  DatasetHeader& h = ds.header;
  try {
    json header = json::parse(line);
    if (header.value("format", "") != "omarl-dataset") throw DatasetError("not an omarl dataset");
    h.format_version = header.at("format_version").get<int>();
    if (h.format_version != kDatasetVersion)
      throw DatasetError("unsupported dataset version " + std::to_string(h.format_version) + " (supported: " +
                         std::to_string(kDatasetVersion) + ")");
    h.env = header.at("env").get<std::string>();
    h.spec = spec_from_json(header.at("spec"));
    if (h.spec.name != h.env) throw DatasetError("header env '" + h.env + "' disagrees with spec name");
    h.behavior = header.at("behavior").get<std::string>();
    h.num_episodes = header.at("num_episodes").get<std::int64_t>();
    h.seed = header.at("seed").get<std::uint64_t>();
    h.exhaustive = header.value("exhaustive", false);
    const auto& ret = header.at("returns");
    h.returns = {ret.at("min").get<double>(), ret.at("mean").get<double>(), ret.at("max").get<double>()};
    h.num_records = header.at("num_records").get<std::int64_t>();
  } catch (const json::exception& e) {
    throw DatasetError(path + ":1: malformed header: " + e.what());
  } catch (const DatasetError& e) {
    throw DatasetError(path + ":1: " + e.what());
  }

  auto last_valid = [&ds]() -> std::string {
    if (ds.records.empty()) return "no valid record";
    const auto& r = ds.records.back();
    return "last valid record #" + std::to_string(ds.records.size()) + " (episode " +
           std::to_string(r.episode_id) + ", t=" + std::to_string(r.t) + ")";
  };

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      ds.records.push_back(record_from_json(json::parse(line), h.spec));
    } catch (const json::exception& e) {
      throw DatasetError(path + ":" + std::to_string(line_no) + ": malformed record (" + last_valid() +
                         "): " + e.what());
    } catch (const DatasetError& e) {
      throw DatasetError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (static_cast<std::int64_t>(ds.records.size()) != h.num_records)
    throw DatasetError(path + ": truncated, header declares " + std::to_string(h.num_records) + " records but " +
                       std::to_string(ds.records.size()) + " were read; " + last_valid());

  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& r = ds.records[i];
    if (!r.done && !r.next_actions) {
      const bool has_successor = i + 1 < ds.records.size() && ds.records[i + 1].episode_id == r.episode_id;
      if (has_successor)
        throw DatasetError(path + ":" + std::to_string(i + 2) + ": non-terminal record without next_actions");
    }
  }
  const ReturnStats s = return_stats(ds.records);
  auto close = [](double a, double b) { return std::fabs(a - b) <= 1e-9 * std::max(1.0, std::fabs(b)); };
  if (!close(s.min, h.returns.min) || !close(s.mean, h.returns.mean) || !close(s.max, h.returns.max))
    throw DatasetError(path + ": header return statistics do not match the records");
  return ds;
}

Batch make_batch(const std::vector<TransitionRecord>& records, const std::vector<std::size_t>& indices,
                 const EnvSpec& spec) {
  return batch_from(records, indices, spec);
}

Batch sample_batch(const std::vector<TransitionRecord>& records, std::size_t batch_size, const EnvSpec& spec,
                   Rng& rng) {
  if (records.empty()) throw DatasetError("cannot sample from an empty dataset");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  std::uniform_int_distribution<std::size_t> pick(0, records.size() - 1);
  std::vector<std::size_t> idx(batch_size);
  for (auto& i : idx) i = pick(rng);
  return batch_from(records, idx, spec);
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay buffer capacity must be positive");
}

void ReplayBuffer::push_rollout(const std::vector<TransitionRecord>& episode) {
  for (const auto& r : episode) {
    items_.push_back(r);
    ++inserted_;
    if (items_.size() > capacity_) items_.pop_front();
  }
}

Batch ReplayBuffer::sample(std::size_t batch_size, const EnvSpec& spec, Rng& rng) const {
  if (items_.empty()) throw DatasetError("cannot sample from an empty replay buffer");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<std::size_t> idx(batch_size);
  for (auto& i : idx) i = pick(rng);
  return batch_from(items_, idx, spec);
}

}  // namespace omarl
