#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "omarl/errors.hpp"
#include "omarl/runner.hpp"

namespace fs = std::filesystem;

namespace omarl {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, sep)) {
    const auto b = part.find_first_not_of(" \t");
    const auto e = part.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? "" : part.substr(b, e - b + 1));
  }
  return out;
}

std::string g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string sanitize(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

const std::vector<std::string> kKeyAxes{"decomp", "value_learning", "extraction", "alpha", "seed"};

}  // namespace

std::vector<SweepCell> aggregate_best_over_alpha(const std::vector<SweepRow>& rows) {
  struct Acc {
    double sum = 0.0;
    std::size_t n = 0;
  };
  std::vector<std::tuple<std::string, std::string, std::string>> order;
  std::map<std::tuple<std::string, std::string, std::string>, std::map<double, Acc>> acc;
  for (const auto& r : rows) {
    if (r.status.rfind("failed", 0) == 0) continue;
    auto key = std::make_tuple(r.decomp, r.value_learning, r.extraction);
    if (!acc.count(key)) order.push_back(key);
    auto& a = acc[key][r.alpha];
    a.sum += r.best_normalized;
    ++a.n;
  }
  std::vector<SweepCell> cells;
  for (const auto& key : order) {
    SweepCell c;
    std::tie(c.decomp, c.value_learning, c.extraction) = key;
    bool first = true;
    for (const auto& [alpha, a] : acc[key]) {
      const double mean = a.sum / static_cast<double>(a.n);
      if (first || mean > c.best_normalized) {
        c.best_normalized = mean;
        c.best_alpha = alpha;
        c.seeds = a.n;
        first = false;
      }
    }
    cells.push_back(c);
  }
  return cells;
}

SweepResult sweep(const std::string& grid_text, std::size_t workers, const std::string& out_dir) {
  if (workers == 0) throw ConfigError("workers must be at least 1");
  const auto entries = parse_key_values(grid_text, "grid");
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;
  for (const auto& [k, v] : entries) axes.emplace_back(k, split(v, ','));

  // Cartesian product in file order; later keys vary fastest.
  std::vector<std::vector<std::pair<std::string, std::string>>> combos{{}};
  for (const auto& [key, values] : axes) {
    std::vector<std::vector<std::pair<std::string, std::string>>> next;
    for (const auto& c : combos)
      for (const auto& v : values) {
        auto e = c;
        e.emplace_back(key, v);
        next.push_back(std::move(e));
      }
    combos = std::move(next);
  }

  std::vector<RunConfig> configs;
  for (const auto& combo : combos) {
    RunConfig c;
    for (const auto& [k, v] : combo) c.set(k, v);
    c.validate();
    configs.push_back(c);
  }
  std::vector<std::string> extra_axes;
  for (const auto& [key, values] : axes)
    if (values.size() > 1 && std::find(kKeyAxes.begin(), kKeyAxes.end(), key) == kKeyAxes.end())
      extra_axes.push_back(key);

  // A dataset that fails to load fails only the runs that use it.
  std::map<std::string, Dataset> datasets;
  std::map<std::string, std::string> dataset_errors;
  for (const auto& c : configs)
    if (!datasets.count(c.dataset) && !dataset_errors.count(c.dataset)) {
      if (c.dataset.empty()) throw ConfigError("grid must set 'dataset'");
      try {
        datasets.emplace(c.dataset, load_dataset(c.dataset));
      } catch (const DatasetError& e) {
        dataset_errors.emplace(c.dataset, e.what());
      }
    }

  fs::create_directories(out_dir);
  SweepResult result;
  result.rows.resize(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= configs.size()) return;
      const RunConfig& c = configs[i];
      char name[32];
      std::snprintf(name, sizeof(name), "run_%04zu", i);
      SweepRow row;
      row.run_index = i;
      row.run_dir = name;
      row.decomp = to_string(c.decomp);
      row.value_learning = to_string(c.value_learning);
      row.extraction = to_string(c.extraction);
      row.alpha = c.alpha;
      row.seed = c.seed;
      const auto m = c.to_map();
      for (const auto& k : extra_axes) row.axes[k] = m.at(k);
      try {
        if (auto err = dataset_errors.find(c.dataset); err != dataset_errors.end()) throw DatasetError(err->second);
        TrainResult r = train(c, datasets.at(c.dataset), (fs::path(out_dir) / name).string());
        row.status = r.summary.status;
        row.final_return = r.summary.final_return_mean;
        row.final_normalized = r.summary.final_normalized;
        row.best_normalized = r.summary.best_normalized;
      } catch (const std::exception& e) {
        row.status = "failed: " + sanitize(e.what());
      }
      result.rows[i] = std::move(row);
    }
  };
  std::vector<std::thread> pool;
  const std::size_t n = std::min(workers, std::max<std::size_t>(configs.size(), 1));
  for (std::size_t w = 0; w < n; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::string csv = "run_index,run_dir,decomp,value_learning,extraction,alpha,seed";
  for (const auto& k : extra_axes) csv += "," + k;
  csv += ",status,final_return,final_normalized,best_normalized\n";
  for (const auto& r : result.rows) {
    csv += std::to_string(r.run_index) + "," + r.run_dir + "," + r.decomp + "," + r.value_learning + "," +
           r.extraction + "," + g(r.alpha) + "," + std::to_string(r.seed);
    for (const auto& k : extra_axes) csv += "," + r.axes.at(k);
    csv += "," + r.status + "," + g(r.final_return) + "," + g(r.final_normalized) + "," + g(r.best_normalized) + "\n";
  }
  std::ofstream(fs::path(out_dir) / "summary.csv", std::ios::binary) << csv;

  result.cells = aggregate_best_over_alpha(result.rows);
  std::string agg = "decomp,value_learning,extraction,best_alpha,best_normalized,seeds\n";
  for (const auto& c : result.cells)
    agg += c.decomp + "," + c.value_learning + "," + c.extraction + "," + g(c.best_alpha) + "," +
           g(c.best_normalized) + "," + std::to_string(c.seeds) + "\n";
  std::ofstream(fs::path(out_dir) / "aggregate.csv", std::ios::binary) << agg;
  return result;
}

}  // namespace omarl
