#pragma once

// Drives a configured scenario: steps, ledger CSV, snapshots at cadence,
// optional PGM images and a run log with the normalized config.

#include <sgdf/config.hpp>
#include <sgdf/diagnostics.hpp>
#include <sgdf/integrator.hpp>
#include <sgdf/io.hpp>
#include <sgdf/scenario.hpp>

#include <condition_variable>
#include <cstdio>
#include <deque>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

namespace sgdf {

template <int Dim>
using StepObserver = std::function<void(const SimState<Dim>&, const Model<Dim>&, const CsvRow&)>;

struct RunResult {
  std::uint64_t steps = 0;
  double t = 0.0;
  double max_residual_rel = 0.0;
  std::string csv_path;
  std::string final_snapshot;
};

struct RunOptions {
  bool write_files = true;
};

/// Single writer thread running file jobs in submission order. Jobs own
/// copies of what they write. The first job error is rethrown by the
/// next post() or by finish().
class OutputLane {
 public:
  OutputLane() : worker_([this] { drain(); }) {}
  OutputLane(const OutputLane&) = delete;
  OutputLane& operator=(const OutputLane&) = delete;
  ~OutputLane() {
    try {
      finish();
    } catch (...) {
    }
  }

  void post(std::function<void()> job) {
    std::unique_lock lk(mu_);
    if (error_) std::rethrow_exception(std::exchange(error_, nullptr));
    jobs_.push_back(std::move(job));
    cv_.notify_one();
  }

  /// Waits for all queued jobs and stops the thread.
  void finish() {
    {
      std::unique_lock lk(mu_);
      closing_ = true;
      cv_.notify_one();
    }
    if (worker_.joinable()) worker_.join();
    if (error_) std::rethrow_exception(std::exchange(error_, nullptr));
  }

 private:
  void drain() {
    for (;;) {
      std::function<void()> job;
      {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return closing_ || !jobs_.empty(); });
        if (jobs_.empty()) return;
        job = std::move(jobs_.front());
        jobs_.pop_front();
      }
      try {
        job();
      } catch (...) {
        std::unique_lock lk(mu_);
        if (!error_) error_ = std::current_exception();
      }
    }
  }

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> jobs_;
  std::exception_ptr error_;
  bool closing_ = false;
  std::thread worker_;
};

namespace detail {

template <int Dim>
void emit_state(OutputLane& lane, const std::string& dir, const SimState<Dim>& s, bool images, const std::string& tag) {
  const auto path = [&](const std::string& stem, const char* ext) {
    return (std::filesystem::path(dir) / (stem + tag + ext)).string();
  };
  lane.post([snap = make_snapshot(s), p = path("snapshot", ".sgdf")] { write_snapshot(p, snap); });
  if (images) {
    lane.post([f = s.rho, t = s.t, p = path("rho", ".pgm")] { write_pgm(p, f, 0, "rho", t); });
    lane.post([f = s.species.c, t = s.t, p = path("c1", ".pgm")] { write_pgm(p, f, 0, "c1", t); });
  }
}

inline std::string step_tag(std::uint64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_%06llu", static_cast<unsigned long long>(step));
  return buf;
}

}  // namespace detail

/// Runs `cfg.max_steps` steps of the configured scenario. A StepFailure is
/// logged to run.log and rethrown.
template <int Dim>
RunResult run_scenario(const RunConfig& raw, const StepObserver<Dim>& observe = {}, RunOptions opt = {}) {
  const RunConfig cfg = normalize(raw);
  validate(cfg);
  auto sc = make_scenario<Dim>(cfg);
  const StepControl ctl = make_step_control(cfg);
  const Model<Dim>& m = sc.model;
  SimState<Dim> s = std::move(sc.state);

  RunResult res;
  const std::string dir = output_directory(cfg);
  std::shared_ptr<LedgerCsv> csv;
  std::ofstream log;
  std::optional<OutputLane> lane;
  if (opt.write_files) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
    res.csv_path = (std::filesystem::path(dir) / "ledger.csv").string();
    csv = std::make_shared<LedgerCsv>(res.csv_path, cfg.species);
    log.open((std::filesystem::path(dir) / "run.log").string(), std::ios::trunc);
    if (!log) throw IoError("cannot open run.log in '" + dir + "'");
    log << "# normalized configuration\n" << dump(cfg) << "\n";
    lane.emplace();
  }
  auto write_row = [&](const CsvRow& r) {
    if (lane) lane->post([csv, r] { csv->write(r); });
  };

  CsvRow row;
  row.ledger = ledger(s, m);
  row.conservation = conservation_report(s);
  write_row(row);
  if (observe) observe(s, m, row);
  if (lane && cfg.snapshot_every > 0) detail::emit_state(*lane, dir, s, cfg.images, detail::step_tag(0));

  EnergyLedger prev = row.ledger;
  for (std::uint64_t k = 0; k < ctl.max_steps; ++k) {
    StepReport rep;
    try {
      s = advance(s, m, ctl, &rep);
    } catch (const StepFailure& e) {
      if (lane) lane->finish();
      if (log) log << "abort: " << e.what() << "\n";
      throw;
    }
    row.step = s.step;
    row.dt = rep.dt;
    row.ledger = rep.ledger;
    row.residual = balance_residual(prev, rep.ledger, rep.dt);
    row.conservation = conservation_report(s);
    row.retries = rep.retries;
    row.momentum_iterations = rep.momentum_iterations;
    row.limit = rep.limit;
    prev = rep.ledger;
    res.max_residual_rel = std::max(res.max_residual_rel, row.residual.relative);
    write_row(row);
    if (observe) observe(s, m, row);
    if (lane && cfg.snapshot_every > 0 && s.step % cfg.snapshot_every == 0 && k + 1 < ctl.max_steps)
      detail::emit_state(*lane, dir, s, cfg.images, detail::step_tag(s.step));
  }
  res.steps = s.step;
  res.t = s.t;
  if (lane) {
    detail::emit_state(*lane, dir, s, cfg.images, "_final");
    lane->post([csv] { csv->flush(); });
    lane->finish();
    res.final_snapshot = (std::filesystem::path(dir) / "snapshot_final.sgdf").string();
    log << "completed " << s.step << " steps, t = " << s.t << ", max relative residual " << res.max_residual_rel
        << "\n";
  }
  return res;
}

/// Dimension dispatch for run_scenario without an observer.
inline RunResult run_config(const RunConfig& cfg, RunOptions opt = {}) {
  const RunConfig c = normalize(cfg);
  if (c.dim == 3) return run_scenario<3>(c, {}, opt);
  if (c.dim == 2) return run_scenario<2>(c, {}, opt);
  throw ConfigError("grid.dim", "must be 2 or 3");
}

}  // namespace sgdf
