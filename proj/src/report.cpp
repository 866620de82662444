#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "json.hpp"
#include "omarl/errors.hpp"
#include "omarl/runner.hpp"

namespace fs = std::filesystem;

namespace omarl {

namespace {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name, const std::string& file) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("'" + file + "' lacks column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Table read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("'" + path.string() + "' is empty");
  t.header = split_csv(line);
  while (std::getline(in, line))
    if (!line.empty()) t.rows.push_back(split_csv(line));
  return t;
}

double to_d(const std::string& s) {
  try {
    return std::stod(s);
  } catch (...) {
    return std::nan("");
  }
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

constexpr double kW = 640, kH = 400, kL = 70, kR = 20, kT = 40, kB = 50;

std::string svg_open(const std::string& title) {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << esc(title) << "</text>\n";
  return os.str();
}

std::string line_plot(const std::string& title, const std::string& ylabel, const std::vector<double>& xs,
                      const std::vector<double>& ys, std::optional<double> halt_x, const std::string& halt_note) {
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (std::isfinite(xs[i]) && std::isfinite(ys[i])) pts.emplace_back(xs[i], ys[i]);
  bool log_y = !pts.empty() && std::all_of(pts.begin(), pts.end(), [](auto p) { return p.second > 0.0; });
  if (log_y) {
    auto [mn, mx] = std::minmax_element(pts.begin(), pts.end(), [](auto a, auto b) { return a.second < b.second; });
    log_y = mx->second / mn->second > 100.0;
  }
  auto ty = [log_y](double y) { return log_y ? std::log10(y) : y; };
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (!pts.empty()) {
    x0 = x1 = pts[0].first;
    y0 = y1 = ty(pts[0].second);
    for (auto [x, y] : pts) {
      x0 = std::min(x0, x), x1 = std::max(x1, x);
      y0 = std::min(y0, ty(y)), y1 = std::max(y1, ty(y));
    }
  }
  if (halt_x) x1 = std::max(x1, *halt_x);
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  const double pw = kW - kL - kR, ph = kH - kT - kB;
  auto px = [&](double x) { return kL + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kT + (1.0 - (ty(y) - y0) / (y1 - y0)) * ph; };

  std::ostringstream os;
  os << svg_open(title);
  os << "<rect x=\"" << kL << "\" y=\"" << kT << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fy = y0 + (y1 - y0) * k / 4.0, fx = x0 + (x1 - x0) * k / 4.0;
    const double yy = kT + (1.0 - k / 4.0) * ph, xx = kL + k / 4.0 * pw;
    os << "<text x=\"" << kL - 6 << "\" y=\"" << yy + 4 << "\" text-anchor=\"end\">"
       << (log_y ? "1e" + fmt(fy) : fmt(fy)) << "</text>\n";
    os << "<text x=\"" << xx << "\" y=\"" << kT + ph + 18 << "\" text-anchor=\"middle\">" << fmt(fx) << "</text>\n";
  }
  os << "<text x=\"" << kL + pw / 2 << "\" y=\"" << kH - 10 << "\" text-anchor=\"middle\">step</text>\n";
  os << "<text x=\"16\" y=\"" << kT + ph / 2 << "\" transform=\"rotate(-90 16 " << kT + ph / 2
     << ")\" text-anchor=\"middle\">" << esc(ylabel) << (log_y ? " (log scale)" : "") << "</text>\n";
  if (!pts.empty()) {
    os << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
    for (auto [x, y] : pts) os << px(x) << "," << py(y) << " ";
    os << "\"/>\n";
  }
  if (halt_x) {
    const double hx = px(*halt_x);
    os << "<line x1=\"" << hx << "\" y1=\"" << kT << "\" x2=\"" << hx << "\" y2=\"" << kT + ph
       << "\" stroke=\"#d62728\" stroke-dasharray=\"4 3\"/>\n";
    os << "<text x=\"" << hx - 4 << "\" y=\"" << kT + 14 << "\" text-anchor=\"end\" fill=\"#d62728\">"
       << esc(halt_note) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string grouped_bars(const std::string& title, const std::vector<std::string>& groups,
                         const std::vector<std::string>& series, const std::map<std::pair<std::string, std::string>, double>& v) {
  double lo = 0.0, hi = 0.0;
  for (const auto& [k, x] : v) lo = std::min(lo, x), hi = std::max(hi, x);
  if (hi == lo) hi = lo + 1.0;
  const double pw = kW - kL - kR, ph = kH - kT - kB;
  auto py = [&](double y) { return kT + (1.0 - (y - lo) / (hi - lo)) * ph; };
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"};
  std::ostringstream os;
  os << svg_open(title);
  os << "<line x1=\"" << kL << "\" y1=\"" << py(0) << "\" x2=\"" << kL + pw << "\" y2=\"" << py(0)
     << "\" stroke=\"#444\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double f = lo + (hi - lo) * k / 4.0;
    os << "<text x=\"" << kL - 6 << "\" y=\"" << py(f) + 4 << "\" text-anchor=\"end\">" << fmt(f) << "</text>\n";
  }
  const double gw = pw / std::max<std::size_t>(groups.size(), 1);
  const double bw = gw * 0.8 / std::max<std::size_t>(series.size(), 1);
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const double gx = kL + gi * gw + gw * 0.1;
    for (std::size_t si = 0; si < series.size(); ++si) {
      auto it = v.find({groups[gi], series[si]});
      if (it == v.end()) continue;
      const double top = py(std::max(it->second, 0.0)), bottom = py(std::min(it->second, 0.0));
      os << "<rect x=\"" << gx + si * bw << "\" y=\"" << top << "\" width=\"" << bw * 0.9 << "\" height=\""
         << std::max(bottom - top, 0.5) << "\" fill=\"" << colors[si % 5] << "\"/>\n";
    }
    os << "<text x=\"" << gx + gw * 0.4 << "\" y=\"" << kT + ph + 18 << "\" text-anchor=\"middle\">"
       << esc(groups[gi]) << "</text>\n";
  }
  for (std::size_t si = 0; si < series.size(); ++si) {
    const double lx = kL + 10 + si * 90;
    os << "<rect x=\"" << lx << "\" y=\"" << kH - 18 << "\" width=\"10\" height=\"10\" fill=\"" << colors[si % 5]
       << "\"/><text x=\"" << lx + 14 << "\" y=\"" << kH - 9 << "\">" << esc(series[si]) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void write(const fs::path& p, const std::string& s, ReportOutput& out) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + p.string() + "'");
  f << s;
  out.files.push_back(p.string());
}

ReportOutput run_report(const fs::path& dir) {
  const fs::path mpath = dir / "metrics.csv";
  const Table t = read_csv(mpath);
  const std::string file = mpath.string();
  const std::size_t c_step = t.column("step", file), c_q = t.column("q_abs_mean", file),
                    c_td = t.column("td_loss", file), c_g = t.column("grad_norm_total", file),
                    c_e = t.column("eval_return_mean", file), c_f = t.column("flags", file);
  std::vector<double> step, q, td, gn, ev;
  std::optional<double> halt;
  std::string halt_flags;
  for (const auto& r : t.rows) {
    if (r.size() < t.header.size() - 1) throw ConfigError("'" + file + "' has a short row");
    step.push_back(to_d(r[c_step]));
    q.push_back(to_d(r[c_q]));
    td.push_back(to_d(r[c_td]));
    gn.push_back(to_d(r[c_g]));
    ev.push_back(to_d(r[c_e]));
    const std::string flags = c_f < r.size() ? r[c_f] : "";
    if (!flags.empty() && !halt) {
      halt = step.back();
      halt_flags = flags;
    }
  }
  std::string status = "ok", reason;
  if (fs::exists(dir / "summary.json")) {
    std::ifstream in(dir / "summary.json");
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (!j.is_discarded()) {
      status = j.value("status", status);
      reason = j.value("halt_reason", "");
    }
  }
  const std::string note = halt ? "halted (" + halt_flags + ")" : "";
  ReportOutput out;
  write(dir / "q_abs_mean.svg", line_plot("mean |Q| (unnormalized)", "q_abs_mean", step, q, halt, note), out);
  write(dir / "td_loss.svg", line_plot("critic TD loss", "td_loss", step, td, halt, note), out);
  write(dir / "grad_norm.svg", line_plot("total gradient norm", "grad_norm_total", step, gn, halt, note), out);
  write(dir / "eval_return.svg", line_plot("evaluation return", "eval_return_mean", step, ev, halt, note), out);

  std::ostringstream s;
  s << "run: " << dir.string() << "\n";
  s << "status: " << status << "\n";
  if (!reason.empty()) s << "halt_reason: " << reason << "\n";
  s << "rows: " << t.rows.size() << "\n";
  if (!step.empty()) {
    s << "last_step: " << fmt(step.back()) << "\n";
    s << "final_eval_return: " << fmt(ev.back()) << "\n";
    s << "max_q_abs_mean: " << fmt(*std::max_element(q.begin(), q.end())) << "\n";
    s << "max_td_loss: " << fmt(*std::max_element(td.begin(), td.end())) << "\n";
    s << "max_grad_norm_total: " << fmt(*std::max_element(gn.begin(), gn.end())) << "\n";
  }
  write(dir / "summary.txt", s.str(), out);
  return out;
}

ReportOutput sweep_report(const fs::path& dir) {
  const fs::path spath = dir / "summary.csv";
  const Table t = read_csv(spath);
  const std::string file = spath.string();
  const std::size_t c_d = t.column("decomp", file), c_v = t.column("value_learning", file),
                    c_x = t.column("extraction", file), c_a = t.column("alpha", file), c_s = t.column("seed", file),
                    c_st = t.column("status", file), c_b = t.column("best_normalized", file);
  std::vector<SweepRow> rows;
  for (const auto& r : t.rows) {
    SweepRow row;
    row.decomp = r.at(c_d);
    row.value_learning = r.at(c_v);
    row.extraction = r.at(c_x);
    row.alpha = to_d(r.at(c_a));
    row.seed = static_cast<std::uint64_t>(to_d(r.at(c_s)));
    row.status = r.at(c_st);
    row.best_normalized = to_d(r.at(c_b));
    rows.push_back(row);
  }
  const auto cells = aggregate_best_over_alpha(rows);
  std::vector<std::string> methods;
  for (const auto& c : cells)
    if (std::find(methods.begin(), methods.end(), c.value_learning) == methods.end()) methods.push_back(c.value_learning);
  ReportOutput out;
  std::ostringstream s;
  s << "sweep: " << dir.string() << "\nruns: " << rows.size() << "\n";
  for (const auto& m : methods) {
    std::vector<std::string> groups, series;
    std::map<std::pair<std::string, std::string>, double> v;
    for (const auto& c : cells) {
      if (c.value_learning != m) continue;
      if (std::find(groups.begin(), groups.end(), c.decomp) == groups.end()) groups.push_back(c.decomp);
      if (std::find(series.begin(), series.end(), c.extraction) == series.end()) series.push_back(c.extraction);
      v[{c.decomp, c.extraction}] = c.best_normalized;
      s << m << " " << c.decomp << " " << c.extraction << " best_alpha=" << fmt(c.best_alpha)
        << " best_normalized=" << fmt(c.best_normalized) << " seeds=" << c.seeds << "\n";
    }
    write(dir / ("bars_" + m + ".svg"), grouped_bars("best normalized return, " + m, groups, series, v), out);
  }
  write(dir / "summary.txt", s.str(), out);
  return out;
}

}  // namespace

ReportOutput report(const std::string& dir) {
  const fs::path p(dir);
  if (fs::exists(p / "summary.csv")) return sweep_report(p);
  if (fs::exists(p / "metrics.csv")) return run_report(p);
  throw ConfigError("'" + dir + "' holds neither metrics.csv nor summary.csv");
}

}  // namespace omarl
