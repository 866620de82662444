#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "omarl/errors.hpp"
#include "omarl/runner.hpp"
#include "omarl/stability.hpp"

namespace py = pybind11;
using namespace omarl;

namespace {

py::dict header_dict(const DatasetHeader& h) {
  py::dict d;
  d["env"] = h.env;
  d["behavior"] = h.behavior;
  d["num_episodes"] = h.num_episodes;
  d["num_records"] = h.num_records;
  d["seed"] = h.seed;
  d["return_min"] = h.returns.min;
  d["return_mean"] = h.returns.mean;
  d["return_max"] = h.returns.max;
  return d;
}

py::dict summary_dict(const RunSummary& s) {
  py::dict d;
  d["status"] = s.status;
  d["halt_reason"] = s.halt_reason;
  d["steps_completed"] = s.steps_completed;
  d["final_return_mean"] = s.final_return_mean;
  d["final_return_std"] = s.final_return_std;
  d["final_normalized"] = s.final_normalized;
  d["best_normalized"] = s.best_normalized;
  d["max_abs_return"] = s.max_abs_return;
  py::list rows;
  for (const auto& r : s.rows) {
    py::dict row;
    row["step"] = r.step;
    row["td_loss"] = r.td_loss;
    row["q_mean"] = r.q_mean;
    row["q_abs_mean"] = r.q_abs_mean;
    row["actor_loss"] = r.actor_loss;
    row["grad_norm_total"] = r.grad_norm_total;
    row["jacobian_opnorm"] = r.jacobian_opnorm;
    row["loop_gain_svn"] = r.loop_gain_svn;
    row["eval_return_mean"] = r.eval_return_mean;
    row["eval_return_std"] = r.eval_return_std;
    row["normalized_score"] = r.normalized_score;
    row["flags"] = r.flags;
    rows.append(row);
  }
  d["rows"] = rows;
  return d;
}

RunConfig config_from(const std::map<std::string, std::string>& kv) {
  RunConfig c;
  for (const auto& [k, v] : kv) c.set(k, v);
  c.validate();
  return c;
}

}  // namespace

PYBIND11_MODULE(_omarl, m) {
  m.doc() = "Offline multi-agent actor-critic laboratory";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DatasetError>(m, "DatasetError", PyExc_IOError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);
  py::register_exception<UsageError>(m, "UsageError", PyExc_RuntimeError);

  m.def("env_names", &env_names);
  m.def("config_keys", &config_keys);
  m.def("default_config", [] { return RunConfig{}.to_map(); });
  m.def(
      "generate_dataset",
      [](const std::string& env, const std::string& behavior, std::int64_t episodes, std::uint64_t seed,
         const std::string& out, bool exhaustive) {
        return header_dict(generate_dataset(env, behavior, episodes, seed, out, exhaustive));
      },
      py::arg("env"), py::arg("behavior"), py::arg("episodes"), py::arg("seed"), py::arg("out"),
      py::arg("exhaustive") = false);
  m.def(
      "dataset_header", [](const std::string& path) { return header_dict(load_dataset(path).header); },
      py::arg("path"));

  m.def(
      "train",
      [](const std::map<std::string, std::string>& config, const std::string& out_dir) {
        const RunConfig c = config_from(config);
        RunSummary s;
        {
          py::gil_scoped_release release;
          s = train(c, out_dir);
        }
        return summary_dict(s);
      },
      py::arg("config"), py::arg("out_dir") = "",
      "Train offline from a mapping of config keys to string values; returns the run summary.");
  m.def(
      "finetune_online",
      [](const std::string& checkpoint, const std::map<std::string, std::string>& overrides,
         const std::string& out_dir) {
        std::vector<std::pair<std::string, std::string>> ov(overrides.begin(), overrides.end());
        FinetuneResult r = finetune_online(checkpoint, ov, out_dir);
        py::dict d = summary_dict(r.summary);
        d["offline_return_mean"] = r.offline_return_mean;
        d["online_transitions"] = r.online_transitions;
        d["buffer_all_online"] = r.buffer_all_online;
        return d;
      },
      py::arg("checkpoint"), py::arg("overrides") = std::map<std::string, std::string>{}, py::arg("out_dir") = "");
  m.def(
      "evaluate_checkpoint",
      [](const std::string& checkpoint, std::size_t episodes, std::uint64_t seed) {
        RunConfig c;
        TrainResult r = load_run_checkpoint(checkpoint, &c);
        auto env = make_env(c.env);
        EvalResult e = evaluate(r.learner.policies, *env, episodes, seed);
        py::dict d;
        d["mean"] = e.mean;
        d["std"] = e.std;
        d["returns"] = e.returns;
        d["normalized"] = normalized_score(c.score_scale_key(), e.mean);
        return d;
      },
      py::arg("checkpoint"), py::arg("episodes") = 10, py::arg("seed") = 1'000'000ULL);
  m.def(
      "sweep",
      [](const std::string& grid_text, std::size_t workers, const std::string& out_dir) {
        SweepResult r = sweep(grid_text, workers, out_dir);
        py::list rows;
        for (const auto& s : r.rows) {
          py::dict d;
          d["run_dir"] = s.run_dir;
          d["decomp"] = s.decomp;
          d["value_learning"] = s.value_learning;
          d["extraction"] = s.extraction;
          d["alpha"] = s.alpha;
          d["seed"] = s.seed;
          d["status"] = s.status;
          d["final_return"] = s.final_return;
          d["final_normalized"] = s.final_normalized;
          d["best_normalized"] = s.best_normalized;
          rows.append(d);
        }
        return rows;
      },
      py::arg("grid_text"), py::arg("workers") = 1, py::arg("out_dir") = "sweep");
  m.def(
      "report", [](const std::string& dir) { return report(dir).files; }, py::arg("dir"));

  m.def(
      "simulate_linear_td",
      [](const Eigen::MatrixXd& j, double gamma, double alpha_q, const Eigen::VectorXd& q0,
         const Eigen::VectorXd& q_bar, std::size_t steps) {
        LinearTdSystem s{j, gamma, alpha_q, q0, q_bar};
        Trajectory t = simulate_linear_td(s, steps);
        py::dict d;
        d["error_norms"] = t.error_norms;
        d["ratios"] = t.ratios;
        d["empirical_rate"] = t.empirical_rate;
        d["overflow"] = t.overflow;
        d["expansive"] = t.expansive;
        d["spectral_radius"] = spectral_radius(s.update_matrix());
        return d;
      },
      py::arg("J"), py::arg("gamma"), py::arg("alpha_q"), py::arg("q0"), py::arg("q_bar"), py::arg("steps"));
  m.def("spectral_radius", &spectral_radius, py::arg("M"));
  m.def(
      "operator_norm", [](const Eigen::MatrixXd& j) { return operator_norm(j).value; }, py::arg("J"));
  m.def(
      "loop_gain", [](double op, double gamma, double sens) { return loop_gain(op, gamma, sens); },
      py::arg("op_norm"), py::arg("gamma"), py::arg("actor_sensitivity") = 1.0);
  m.def("loop_gain_svn", &loop_gain_svn, py::arg("op_norm"), py::arg("gamma"), py::arg("actor_sensitivity"),
        py::arg("sigma_q"));
  m.def(
      "normalized_score", [](const std::string& key, double j) { return normalized_score(key, j); },
      py::arg("key"), py::arg("raw_return"));
  m.def(
      "expectile_loss", [](double u, double tau) { return expectile_loss(u, tau); }, py::arg("u"),
      py::arg("tau"));
}
