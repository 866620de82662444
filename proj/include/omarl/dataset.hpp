#pragma once

// Offline dataset file format (line-delimited JSON):
//
//   line 1   header: {"format":"omarl-dataset","format_version":1,"env":...,
//            "spec":{...},"behavior":...,"num_episodes":N,"seed":S,
//            "exhaustive":bool,"returns":{"min":..,"mean":..,"max":..},
//            "num_records":M}
//   line 2+  one transition per line with fields episode_id, t, state, obs,
//            actions, reward, next_state, next_obs, next_actions, done.
//            next_actions is omitted on terminal steps. Actions are lists of
//            per-agent lists; a discrete action is [index].

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "omarl/array.hpp"
#include "omarl/env.hpp"
#include "omarl/nn.hpp"

namespace omarl {

inline constexpr int kDatasetVersion = 1;

enum class Provenance { offline, online };

struct TransitionRecord {
  std::int64_t episode_id = 0;
  std::int64_t t = 0;
  std::vector<double> state;
  AgentObs obs;
  JointAction actions;
  double reward = 0.0;
  std::vector<double> next_state;
  AgentObs next_obs;
  std::optional<JointAction> next_actions;
  bool done = false;
  Provenance source = Provenance::offline;

  bool operator==(const TransitionRecord&) const = default;
};

struct ReturnStats {
  double min = 0.0;
  double mean = 0.0;
  double max = 0.0;
};

struct DatasetHeader {
  int format_version = kDatasetVersion;
  std::string env;
  EnvSpec spec;
  std::string behavior;
  std::int64_t num_episodes = 0;
  std::uint64_t seed = 0;
  bool exhaustive = false;
  ReturnStats returns;
  std::int64_t num_records = 0;
};

struct Dataset {
  DatasetHeader header;
  std::vector<TransitionRecord> records;
};

// Rolls out `episodes` episodes of the behavior in env. Episode e resets the
// env with seed ^ e-dependent sub-seeds. With exhaustive=true on two_step,
// episode e replays pattern e mod 8.
Dataset collect_dataset(const std::string& env_name, const std::string& behavior, std::int64_t episodes,
                        std::uint64_t seed, bool exhaustive = false);
DatasetHeader generate_dataset(const std::string& env_name, const std::string& behavior, std::int64_t episodes,
                               std::uint64_t seed, const std::string& path, bool exhaustive = false);

void write_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

// Per-episode undiscounted returns in episode order.
std::vector<double> episode_returns(const std::vector<TransitionRecord>& records);
ReturnStats return_stats(const std::vector<TransitionRecord>& records);

// Column-stacked minibatch. Per-agent fields are indexed [agent] and hold
// [B, dim] arrays; discrete actions are one-hot encoded in *_input.
struct Batch {
  std::size_t size = 0;
  Array state;
  std::vector<Array> obs;
  std::vector<Array> action_input;
  std::vector<std::vector<std::size_t>> action_index;  // discrete only
  Array reward;
  Array done;
  Array next_state;
  std::vector<Array> next_obs;
  std::vector<Array> next_action_input;
  Array has_next_action;  // 1 where next_actions was recorded
  std::vector<std::size_t> indices;
};

Batch make_batch(const std::vector<TransitionRecord>& records, const std::vector<std::size_t>& indices,
                 const EnvSpec& spec);
// Uniform sampling with replacement.
Batch sample_batch(const std::vector<TransitionRecord>& records, std::size_t batch_size, const EnvSpec& spec,
                   Rng& rng);

// Encodes one agent's action for a critic input row.
std::vector<double> encode_action(const ActionSpace& space, const std::vector<double>& action);

// FIFO ring buffer of online transitions.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  // Appends one episode's transitions, evicting the oldest beyond capacity.
  void push_rollout(const std::vector<TransitionRecord>& episode);
  Batch sample(std::size_t batch_size, const EnvSpec& spec, Rng& rng) const;

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t inserted() const { return inserted_; }
  const std::deque<TransitionRecord>& items() const { return items_; }

 private:
  std::size_t capacity_;
  std::uint64_t inserted_ = 0;
  std::deque<TransitionRecord> items_;
};

}  // namespace omarl
