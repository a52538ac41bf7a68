// sgdf command-line driver.
//
// exit codes: 0 ok, 1 usage, 2 configuration, 3 monitor abort, 4 I/O,
// 5 internal error.

#include <sgdf/sgdf.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

namespace {

enum Exit { ok = 0, usage = 1, config = 2, monitor = 3, io = 4, internal = 5 };

struct Stats {
  std::size_t steps = 0;
  double mean_dt = 0.0;
  double t_end = 0.0;
  double max_rel = 0.0;
  double mean_abs = 0.0;
  double max_abs = 0.0;
  double min_dissipation = 0.0;
};

Stats residual_stats(const sgdf::CsvTable& t) {
  Stats s;
  const auto dt = t.column("dt"), rel = t.column("residual_rel"), abs = t.column("residual"), time = t.column("t");
  const auto vis = t.column("viscous"), dif = t.column("diffusive"), rea = t.column("reactive");
  // row 0 is the initial state and carries no residual
  for (std::size_t i = 1; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    ++s.steps;
    s.mean_dt += r[dt];
    s.max_rel = std::max(s.max_rel, std::abs(r[rel]));
    s.mean_abs += std::abs(r[abs]);
    s.max_abs = std::max(s.max_abs, std::abs(r[abs]));
    s.min_dissipation = std::min({s.min_dissipation, r[vis], r[dif], r[rea]});
  }
  if (s.steps) {
    s.mean_dt /= s.steps;
    s.mean_abs /= s.steps;
  }
  if (!t.rows.empty()) s.t_end = t.rows.back()[time];
  return s;
}

// least-squares slope of log y against log x
double log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

void print_orders(const char* label, const std::vector<double>& step, const std::vector<double>& err) {
  std::printf("%-12s %-14s %s\n", label, "mean|res|", "order");
  for (std::size_t i = 0; i < step.size(); ++i) {
    if (i == 0)
      std::printf("%-12.5g %-14.6e\n", step[i], err[i]);
    else
      std::printf("%-12.5g %-14.6e %.3f\n", step[i], err[i],
                  std::log(err[i - 1] / err[i]) / std::log(step[i - 1] / step[i]));
  }
  if (step.size() > 1) std::printf("fitted order %.3f\n", log_slope(step, err));
}

int cmd_validate(const std::string& path) {
  const auto cfg = sgdf::load_config(path);
  if (cfg.dim == 2)
    (void)sgdf::make_scenario<2>(cfg);
  else
    (void)sgdf::make_scenario<3>(cfg);
  std::printf("%s: ok (%s, %dD, cells %s, %llu steps)\n", path.c_str(), cfg.scenario.c_str(), cfg.dim,
              sgdf::detail::format_list(cfg.cells).c_str(), static_cast<unsigned long long>(cfg.max_steps));
  return ok;
}

int cmd_run(const std::string& path, const std::string& out, long long steps) {
  auto cfg = sgdf::load_config(path);
  if (!out.empty()) cfg.output_dir = out;
  if (steps >= 0) cfg.max_steps = static_cast<std::uint64_t>(steps);
  const auto res = sgdf::run_config(cfg);
  std::printf("completed %llu steps, t = %.6g, max relative residual %.3e\n",
              static_cast<unsigned long long>(res.steps), res.t, res.max_residual_rel);
  std::printf("ledger %s\nsnapshot %s\n", res.csv_path.c_str(), res.final_snapshot.c_str());
  return ok;
}

int cmd_energy_report(const std::vector<std::string>& paths) {
  std::vector<double> dts, errs;
  std::printf("%-40s %6s %-12s %-12s %-12s %-12s %s\n", "file", "steps", "mean dt", "t end", "max rel",
              "mean |res|", "min rate");
  for (const auto& p : paths) {
    const auto s = residual_stats(sgdf::read_csv(p));
    std::printf("%-40s %6zu %-12.5g %-12.5g %-12.4e %-12.4e %.3e\n", p.c_str(), s.steps, s.mean_dt, s.t_end,
                s.max_rel, s.mean_abs, s.min_dissipation);
    if (s.steps && s.mean_abs > 0.0) {
      dts.push_back(s.mean_dt);
      errs.push_back(s.mean_abs);
    }
  }
  if (dts.size() >= 2 && dts.size() == paths.size())
    std::printf("convergence slope of mean |residual| against dt: %.3f\n", log_slope(dts, errs));
  return ok;
}

// mean |residual| of one run, no files written
template <int Dim>
double residual_of(const sgdf::RunConfig& cfg) {
  double sum = 0.0;
  std::size_t n = 0;
  sgdf::StepObserver<Dim> obs = [&](const sgdf::SimState<Dim>&, const sgdf::Model<Dim>&, const sgdf::CsvRow& row) {
    if (row.step == 0) return;
    sum += std::abs(row.residual.absolute);
    ++n;
  };
  sgdf::RunOptions opt;
  opt.write_files = false;
  sgdf::run_scenario<Dim>(cfg, obs, opt);
  return n ? sum / n : 0.0;
}

double residual_any(const sgdf::RunConfig& cfg) { return cfg.dim == 3 ? residual_of<3>(cfg) : residual_of<2>(cfg); }

int cmd_convergence(const std::string& path, const std::string& kind, int levels, double dt0) {
  const auto base = sgdf::load_config(path);
  const double dt = dt0 > 0.0 ? dt0 : base.dt_max;
  if (kind == "dt" || kind == "both") {
    // fixed horizon: steps double as dt halves
    std::vector<double> step, err;
    for (int k = 0; k < levels; ++k) {
      auto cfg = base;
      cfg.fixed_dt = true;
      cfg.dt_max = dt / std::pow(2.0, k);
      cfg.max_steps = base.max_steps << k;
      step.push_back(cfg.dt_max);
      err.push_back(residual_any(cfg));
      std::fflush(stdout);
    }
    print_orders("dt", step, err);
  }
  if (kind == "h" || kind == "both") {
    // dt tied to h so the CFL number stays fixed; same final time
    std::vector<double> step, err;
    for (int k = 0; k < levels; ++k) {
      auto cfg = sgdf::normalize(base);
      for (auto& n : cfg.cells) n <<= k;
      cfg.fixed_dt = true;
      cfg.dt_max = dt / std::pow(2.0, k);
      cfg.max_steps = base.max_steps << k;
      step.push_back(cfg.length[0] / cfg.cells[0]);
      err.push_back(residual_any(cfg));
    }
    print_orders("h", step, err);
  }
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"self-gravitating diffusive mixture solver"};
  app.require_subcommand(1);

  std::string cfg_path, out_dir, kind = "dt";
  std::vector<std::string> csvs;
  long long steps = -1;
  int levels = 3;
  double dt0 = 0.0;

  auto* run = app.add_subcommand("run", "run a configured scenario");
  run->add_option("config", cfg_path, "configuration file")->required()->check(CLI::ExistingFile);
  run->add_option("-o,--output-dir", out_dir, "override run.output_dir");
  run->add_option("-n,--steps", steps, "override step.max_steps");

  auto* val = app.add_subcommand("validate", "check a configuration and build its initial state");
  val->add_option("config", cfg_path, "configuration file")->required()->check(CLI::ExistingFile);

  auto* rep = app.add_subcommand("energy-report", "residual statistics of ledger CSVs");
  rep->add_option("csv", csvs, "ledger.csv files, several for a dt convergence slope")->required();

  auto* conv = app.add_subcommand("convergence", "dt and/or h refinement study of the energy residual");
  conv->add_option("config", cfg_path, "configuration file")->required()->check(CLI::ExistingFile);
  conv->add_option("--kind", kind, "dt, h or both")->check(CLI::IsMember({"dt", "h", "both"}));
  conv->add_option("--levels", levels, "refinement levels")->check(CLI::Range(2, 8));
  conv->add_option("--dt", dt0, "coarsest fixed step (default step.dt_max)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? ok : usage;
  }

  try {
    if (*run) return cmd_run(cfg_path, out_dir, steps);
    if (*val) return cmd_validate(cfg_path);
    if (*rep) return cmd_energy_report(csvs);
    if (*conv) return cmd_convergence(cfg_path, kind, levels, dt0);
  } catch (const sgdf::ConfigError& e) {
    std::fprintf(stderr, "error: config: key=%s: %s\n", e.key().empty() ? "-" : e.key().c_str(), e.what());
    return config;
  } catch (const sgdf::StepFailure& e) {
    std::fprintf(stderr, "error: monitor: %s: %s\n", e.monitor.c_str(), e.what());
    return monitor;
  } catch (const sgdf::IoError& e) {
    std::fprintf(stderr, "error: io: %s\n", e.what());
    return io;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: internal: %s\n", e.what());
    return internal;
  }
  return usage;
}
