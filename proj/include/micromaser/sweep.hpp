#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "core.hpp"
#include "correlation.hpp"
#include "errors.hpp"
#include "phase.hpp"
#include "potential.hpp"
#include "trapping.hpp"

namespace micromaser::sweep {

inline const std::vector<std::string> &known_commands() {
  static const std::vector<std::string> cmds = {
      "order-scan",        "potential-branches", "phase-diagram",
      "thermal-profile",   "order-vs-a",         "correlation-scan",
      "correlation-compare", "trapping-scan",    "sumrule-check"};
  return cmds;
}

// phase-diagram and order-vs-a sweep a; every other command sweeps theta.
inline bool grid_over_a(const std::string &cmd) {
  return cmd == "order-vs-a" || cmd == "phase-diagram";
}

// Inclusive range start:stop:step; inactive means the variable is a scalar.
struct GridSpec {
  double start = 0.0, stop = 0.0, step = 0.0;
  bool active = false;
};

// One sweep: a command, an operating point, a grid on theta or a (range
// syntax on that key), and the output format.
struct SweepConfig {
  std::string command;
  MaserParams params;
  GridSpec theta_grid, a_grid;
  bool theta_scalar_set = false, a_scalar_set = false;
  std::string format = "csv";
  std::string output;
};

namespace detail2 {

inline std::string trim(const std::string &s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline double parse_num(const std::string &v, int line) {
  try {
    std::size_t idx = 0;
    const double x = std::stod(v, &idx);
    if (idx != v.size())
      throw parse_error("trailing characters in number '" + v + "'", line);
    return x;
  } catch (const parse_error &) {
    throw;
  } catch (const std::exception &) {
    throw parse_error("expected a number, got '" + v + "'", line);
  }
}

inline GridSpec parse_grid(const std::string &v, int line) {
  const auto c1 = v.find(':');
  const auto c2 = v.find(':', c1 + 1);
  if (c2 == std::string::npos || v.find(':', c2 + 1) != std::string::npos)
    throw parse_error("grid must be start:stop:step, got '" + v + "'", line);
  GridSpec g;
  g.start = parse_num(trim(v.substr(0, c1)), line);
  g.stop = parse_num(trim(v.substr(c1 + 1, c2 - c1 - 1)), line);
  g.step = parse_num(trim(v.substr(c2 + 1)), line);
  g.active = true;
  if (!(g.step > 0.0)) throw parse_error("grid step must be > 0", line);
  if (g.stop < g.start)
    throw parse_error("grid stop " + std::to_string(g.stop) + " < start " +
                          std::to_string(g.start),
                      line);
  return g;
}

// Endpoints inclusive within half a step.
inline std::vector<double> grid_points(const GridSpec &g) {
  const std::size_t n =
      static_cast<std::size_t>(std::floor((g.stop - g.start) / g.step + 0.5)) +
      1;
  std::vector<double> pts(n);
  for (std::size_t i = 0; i < n; ++i)
    pts[i] = g.start + static_cast<double>(i) * g.step;
  return pts;
}

} // namespace detail2

inline void apply_key(SweepConfig &cfg, const std::string &key,
                      const std::string &value, int line) {
  using detail2::parse_grid;
  using detail2::parse_num;
  const bool is_range = value.find(':') != std::string::npos;
  if (key == "command") {
    const auto &cmds = known_commands();
    if (std::find(cmds.begin(), cmds.end(), value) == cmds.end())
      throw parse_error("unknown command '" + value + "'", line);
    cfg.command = value;
  } else if (key == "theta") {
    if (is_range) {
      cfg.theta_grid = parse_grid(value, line);
      cfg.theta_scalar_set = false;
    } else {
      cfg.params.theta = parse_num(value, line);
      cfg.theta_grid.active = false;
      cfg.theta_scalar_set = true;
    }
  } else if (key == "a") {
    if (is_range) {
      cfg.a_grid = parse_grid(value, line);
      cfg.a_scalar_set = false;
    } else {
      cfg.params.a = parse_num(value, line);
      cfg.a_grid.active = false;
      cfg.a_scalar_set = true;
    }
  } else if (key == "nb" || key == "n_b") {
    cfg.params.n_b = parse_num(value, line);
  } else if (key == "delta" || key == "Delta") {
    cfg.params.Delta = parse_num(value, line);
  } else if (key == "N") {
    cfg.params.N = parse_num(value, line);
  } else if (key == "format") {
    if (value != "csv" && value != "ndjson")
      throw parse_error("format must be csv or ndjson, got '" + value + "'",
                        line);
    cfg.format = value;
  } else if (key == "output") {
    cfg.output = value;
  } else if (key == "version") {
    // metadata echo; accepted so emitted blocks re-parse
  } else {
    throw parse_error("unknown key '" + key + "'", line);
  }
}

inline void validate_config(const SweepConfig &cfg) {
  if (cfg.command.empty()) throw parse_error("missing 'command' key", 0);
  MaserParams p = cfg.params;
  if (cfg.a_grid.active) p.a = cfg.a_grid.start;
  if (cfg.theta_grid.active) p.theta = cfg.theta_grid.start;
  p.validate();
}

// "key = value" lines; '#' starts a comment line; later keys win.  A value
// of the form start:stop:step on theta or a declares the sweep grid.
inline SweepConfig parse_config(std::istream &in) {
  SweepConfig cfg;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = detail2::trim(raw);
    if (s.empty() || s[0] == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw parse_error("expected 'key = value', got '" + s + "'", line);
    const std::string key = detail2::trim(s.substr(0, eq));
    const std::string value = detail2::trim(s.substr(eq + 1));
    if (key.empty()) throw parse_error("empty key", line);
    apply_key(cfg, key, value, line);
  }
  validate_config(cfg);
  return cfg;
}

inline SweepConfig parse_config(const std::string &text) {
  std::istringstream in(text);
  return parse_config(in);
}

namespace detail2 {

inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string json_cell(double v) {
  if (!std::isfinite(v)) return "null";
  return fmt(v);
}

inline unsigned thread_count(std::size_t jobs) {
  unsigned n = std::thread::hardware_concurrency();
  if (const char *env = std::getenv("MICROMASER_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) n = static_cast<unsigned>(v);
  }
  if (n == 0) n = 1;
  n = std::min<unsigned>(n, 64);
  return static_cast<unsigned>(
      std::min<std::size_t>(n, std::max<std::size_t>(jobs, 1)));
}

inline phase::Classification classify_robust(MaserParams p) {
  try {
    return phase::classify(p);
  } catch (const maser_error &) {
    p.theta += 1e-9;
    return phase::classify(p);
  }
}

struct Cell {
  std::string name;
  double value = 0.0;
  bool text = false;
  std::string text_value;
};

inline std::string csv_row(const std::vector<Cell> &cells) {
  std::string r;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) r += ',';
    r += cells[i].text ? cells[i].text_value : fmt(cells[i].value);
  }
  r += '\n';
  return r;
}

inline std::string json_row(const std::vector<Cell> &cells) {
  std::string r = "{";
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) r += ',';
    r += '"' + cells[i].name + "\":";
    if (cells[i].text)
      r += '"' + cells[i].text_value + '"';
    else
      r += json_cell(cells[i].value);
  }
  r += "}\n";
  return r;
}

} // namespace detail2

// Column names for each command, in output order.
inline std::vector<std::string> columns_for(const std::string &cmd) {
  if (cmd == "order-scan")
    return {"theta", "x_mean", "x_std", "phase", "branch"};
  if (cmd == "potential-branches")
    return {"theta", "branch", "kind", "phi", "x", "v0", "curvature"};
  if (cmd == "phase-diagram") return {"a", "line", "theta"};
  if (cmd == "thermal-profile") return {"theta", "n_mean", "x_mean"};
  if (cmd == "order-vs-a") return {"a", "x_mean", "x_std", "phase", "branch"};
  if (cmd == "correlation-scan")
    return {"theta", "lambda_nz", "gamma_xi_exact"};
  if (cmd == "correlation-compare")
    return {"theta", "gamma_xi_exact", "gamma_xi_E", "gamma_xi_M",
            "gamma_xi_MF"};
  if (cmd == "trapping-scan")
    return {"theta", "x_mean", "x_mf", "x_trap_1", "x_trap_2", "x_trap_3",
            "x_ref", "depth", "gamma_xi_exact"};
  if (cmd == "sumrule-check")
    return {"theta", "gamma_xi_exact", "gamma_xi_sum", "rel_err"};
  throw invalid_parameter("unknown command '" + cmd + "'");
}

namespace detail2 {

// All output lines for one grid point.  Sets *had_nan when any numeric
// cell could not be computed.
inline std::string rows_for_point(const SweepConfig &cfg, double g,
                                  double theta_cap,
                                  std::atomic<bool> *had_nan) {
  const bool json = cfg.format == "ndjson";
  MaserParams p = cfg.params;
  if (grid_over_a(cfg.command))
    p.a = std::min(g, 1.0);
  else
    p.theta = g;

  auto guard = [&](auto fn) -> double {
    try {
      const double v = fn();
      if (std::isnan(v)) had_nan->store(true);
      return v;
    } catch (const maser_error &) {
      had_nan->store(true);
      return detail::nan_value();
    }
  };
  auto emit = [&](const std::vector<Cell> &cells) {
    return json ? json_row(cells) : csv_row(cells);
  };

  if (cfg.command == "order-scan" || cfg.command == "order-vs-a") {
    const char *gname = cfg.command == "order-vs-a" ? "a" : "theta";
    double xm = detail::nan_value(), xs = detail::nan_value();
    try {
      const auto m = moments(stationary_distribution(p), p.N);
      xm = m.x_mean;
      xs = m.x_std;
    } catch (const maser_error &) {
      had_nan->store(true);
    }
    std::string ph = "nan";
    int branch = -1;
    try {
      const auto c = classify_robust(p);
      ph = c.coexistence
               ? "coexistence"
               : (c.phase == phase::Phase::maser ? "maser" : "thermal");
      branch = c.branch;
    } catch (const maser_error &) {
      had_nan->store(true);
    }
    return emit({{gname, g},
                 {"x_mean", xm},
                 {"x_std", xs},
                 {"phase", 0.0, true, ph},
                 {"branch", static_cast<double>(branch)}});
  }

  if (cfg.command == "potential-branches") {
    std::string out;
    std::vector<potential::SaddlePoint> saddles;
    try {
      saddles = potential::enumerate_saddles(p);
    } catch (const maser_error &) {
      had_nan->store(true);
      return emit({{"theta", g},
                   {"branch", detail::nan_value()},
                   {"kind", 0.0, true, "nan"},
                   {"phi", detail::nan_value()},
                   {"x", detail::nan_value()},
                   {"v0", detail::nan_value()},
                   {"curvature", detail::nan_value()}});
    }
    for (const auto &s : saddles) {
      out += emit({{"theta", g},
                   {"branch", static_cast<double>(s.branch)},
                   {"kind", 0.0, true,
                    s.kind == potential::SaddleKind::minimum ? "min" : "max"},
                   {"phi", s.phi},
                   {"x", s.x},
                   {"v0", s.v0},
                   {"curvature", s.curvature}});
    }
    return out;
  }

  if (cfg.command == "phase-diagram") {
    std::string out;
    try {
      for (const auto &[label, th] :
           phase::critical_lines(p.a, p.n_b, p.Delta, theta_cap)) {
        out += emit({{"a", g}, {"line", 0.0, true, label}, {"theta", th}});
      }
    } catch (const maser_error &) {
      had_nan->store(true);
      out += emit({{"a", g},
                   {"line", 0.0, true, "nan"},
                   {"theta", detail::nan_value()}});
    }
    return out;
  }

  if (cfg.command == "thermal-profile") {
    const double nm = guard([&] { return phase::thermal_n_mean(p); });
    return emit({{"theta", g}, {"n_mean", nm}, {"x_mean", nm / p.N}});
  }

  if (cfg.command == "correlation-scan") {
    double lam = detail::nan_value(), gx = detail::nan_value();
    try {
      const auto r = correlation::xi_exact(p);
      lam = r.lambda_nz;
      gx = r.gamma_xi;
    } catch (const maser_error &) {
      had_nan->store(true);
    }
    return emit({{"theta", g}, {"lambda_nz", lam}, {"gamma_xi_exact", gx}});
  }

  if (cfg.command == "correlation-compare") {
    const double gx = guard([&] { return correlation::xi_exact(p).gamma_xi; });
    const double ge = guard([&] { return correlation::xi_E(p); });
    const double gm = guard([&] { return correlation::xi_M(p); });
    const double gf = guard([&] { return correlation::xi_MF(p); });
    return emit({{"theta", g},
                 {"gamma_xi_exact", gx},
                 {"gamma_xi_E", ge},
                 {"gamma_xi_M", gm},
                 {"gamma_xi_MF", gf}});
  }

  if (cfg.command == "trapping-scan") {
    const double xm =
        guard([&] { return moments(stationary_distribution(p), p.N).x_mean; });
    const double xmf = guard([&] { return correlation::xi_MF_point(p).x0; });
    const double xr = guard([&] {
      try {
        return trapping::detail2::equilibrium_x(p);
      } catch (const maser_error &) {
        MaserParams q2 = p;
        q2.theta += 1e-9;
        return trapping::detail2::equilibrium_x(q2);
      }
    });
    const double depth = (std::isnan(xm) || std::isnan(xr))
                             ? detail::nan_value()
                             : std::max(0.0, xr - xm);
    const double gx = guard([&] { return correlation::xi_exact(p).gamma_xi; });
    std::vector<Cell> cells = {{"theta", g}, {"x_mean", xm}, {"x_mf", xmf}};
    for (int k = 1; k <= 3; ++k)
      cells.push_back({"x_trap_" + std::to_string(k),
                       trapping::x_cutoff(k, p.theta, p.Delta)});
    cells.push_back({"x_ref", xr});
    cells.push_back({"depth", depth});
    cells.push_back({"gamma_xi_exact", gx});
    return emit(cells);
  }

  if (cfg.command == "sumrule-check") {
    const double gx = guard([&] { return correlation::xi_exact(p).gamma_xi; });
    const double gs = guard([&] { return correlation::xi_sumrule(p); });
    const double rel = (std::isnan(gx) || std::isnan(gs))
                           ? detail::nan_value()
                           : std::abs(gs - gx) / std::abs(gx);
    return emit({{"theta", g},
                 {"gamma_xi_exact", gx},
                 {"gamma_xi_sum", gs},
                 {"rel_err", rel}});
  }

  throw invalid_parameter("unknown command '" + cfg.command + "'");
}

inline std::string grid_value(const GridSpec &g) {
  return fmt(g.start) + ":" + fmt(g.stop) + ":" + fmt(g.step);
}

} // namespace detail2

// Metadata echo; stripping the leading "# " of each line yields a config
// that parses back to the same sweep.
inline std::string metadata_block(const SweepConfig &cfg,
                                  const char *version_str) {
  std::ostringstream os;
  auto kv = [&os](const std::string &k, const std::string &v) {
    os << "# " << k << " = " << v << "\n";
  };
  kv("version", version_str);
  kv("command", cfg.command);
  kv("a", cfg.a_grid.active ? detail2::grid_value(cfg.a_grid)
                            : detail2::fmt(cfg.params.a));
  kv("nb", detail2::fmt(cfg.params.n_b));
  kv("delta", detail2::fmt(cfg.params.Delta));
  kv("theta", cfg.theta_grid.active ? detail2::grid_value(cfg.theta_grid)
                                    : detail2::fmt(cfg.params.theta));
  kv("N", detail2::fmt(cfg.params.N));
  kv("format", cfg.format);
  if (!cfg.output.empty()) kv("output", cfg.output);
  return os.str();
}

// Execute the sweep.  Grid points are computed by a worker pool (size from
// MICROMASER_THREADS, default hardware concurrency) and written in grid
// order, so the bytes do not depend on the worker count.  Returns 0, or 3
// if any cell came out nan.
inline int run(const SweepConfig &cfg_in, std::ostream &out,
               const char *version_str = "1.0.0") {
  SweepConfig cfg = cfg_in;
  validate_config(cfg);
  const bool over_a = grid_over_a(cfg.command);
  GridSpec &g = over_a ? cfg.a_grid : cfg.theta_grid;
  if (!g.active) {
    const bool scalar = over_a ? cfg.a_scalar_set : cfg.theta_scalar_set;
    const double s = over_a ? cfg.params.a : cfg.params.theta;
    if (scalar)
      g = {s, s, 1.0, true};
    else if (over_a)
      g = {0.5, 1.0, 0.002, true};
    else
      g = {0.5, 10.0, 0.05, true};
  }
  // phase-diagram reports every critical line up to this pump value
  const double theta_cap = cfg.theta_grid.active ? cfg.theta_grid.stop : 24.0;

  const std::vector<double> grid = detail2::grid_points(g);
  std::vector<std::string> rows(grid.size());
  std::atomic<bool> had_nan{false};
  std::atomic<std::size_t> next{0};
  const unsigned nt = detail2::thread_count(grid.size());
  auto work = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= grid.size()) break;
      rows[i] = detail2::rows_for_point(cfg, grid[i], theta_cap, &had_nan);
    }
  };
  if (nt <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < nt; ++t) pool.emplace_back(work);
    for (auto &t : pool) t.join();
  }

  if (cfg.format == "csv") {
    out << metadata_block(cfg, version_str);
    const auto cols = columns_for(cfg.command);
    for (std::size_t i = 0; i < cols.size(); ++i)
      out << (i ? "," : "") << cols[i];
    out << "\n";
  } else {
    out << "{\"version\":\"" << version_str << "\",\"command\":\""
        << cfg.command << "\",\"a\":" << detail2::json_cell(cfg.params.a)
        << ",\"nb\":" << detail2::json_cell(cfg.params.n_b)
        << ",\"delta\":" << detail2::json_cell(cfg.params.Delta)
        << ",\"theta\":" << detail2::json_cell(cfg.params.theta)
        << ",\"N\":" << detail2::json_cell(cfg.params.N) << "}\n";
  }
  for (const auto &r : rows) out << r;
  out.flush();
  return had_nan.load() ? 3 : 0;
}

} // namespace micromaser::sweep
