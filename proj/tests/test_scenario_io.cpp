#include <sgdf/sgdf.hpp>

#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>
#include <sys/wait.h>

using namespace sgdf;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sgdf_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

std::string preset(const std::string& name) { return std::string(SGDF_PRESET_DIR) + "/" + name + ".ini"; }

// exit status and stdout of a CLI invocation
std::pair<int, std::string> cli(const std::string& args) {
  const std::string cmd = std::string(SGDF_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* f = popen(cmd.c_str(), "r");
  std::string out;
  char buf[512];
  while (std::fgets(buf, sizeof buf, f)) out += buf;
  const int status = pclose(f);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

RunConfig small_mixing_box(std::uint64_t steps) {
  auto c = load_config(preset("mixing-box"));
  c.max_steps = steps;
  return c;
}

}  // namespace

// ---- configuration ----

TEST(Config, MinimalConfigGetsDefaultsAndDumpRoundTrips) {
  const auto c = normalize(parse_config("[run]\nscenario = two-layer-RT\n"));
  validate(c);
  EXPECT_EQ(c.cells, (std::vector<int>{32, 32}));
  EXPECT_EQ(c.length, (std::vector<double>{1.0, 1.0}));
  EXPECT_EQ(c.G, 1.0);  // desk units
  EXPECT_EQ(c.target, (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(c.mobility_matrix, (std::vector<double>{1e-2, 0.0, 0.0, 1e-2}));
  EXPECT_EQ(c.params.at("mode"), 5.0);
  EXPECT_EQ(normalize(parse_config(dump(c))), c);
}

TEST(Config, RoundTripKeepsAwkwardValues) {
  RunConfig c;
  c.scenario = "mixing-box";
  c.species = 3;
  c.nu1 = 0.1 + 0.2;  // not exactly representable in short decimal
  c.mobility_matrix = {1.0 / 3, 0, 0, 0, 2.0 / 7, 0, 0, 0, 1e-300};
  c.reaction_directions = {{1, -1, 0}, {0, 1, -1}};
  c.reaction_rates = {0.25, 1e-7};
  c.units = "si";
  const auto n = normalize(c);
  EXPECT_EQ(n.G, G_si);
  EXPECT_EQ(normalize(parse_config(dump(n))), n);
}

TEST(Config, SmallHyperviscousExponentRejectedWithConstraint) {
  RunConfig c = normalize(parse_config("[material]\nq = 2\n"));
  try {
    validate(c);
    FAIL() << "q = 2 accepted";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "material.q");
    EXPECT_NE(std::string(e.what()).find("q > 3"), std::string::npos) << e.what();
  }
  c.q = 3.0;
  EXPECT_THROW(validate(c), ConfigError);
}

TEST(Config, NegativePenaltyRejected) {
  const RunConfig c = normalize(parse_config("[mixture]\neps_pen = -1e-4\n"));
  try {
    validate(c);
    FAIL() << "negative eps_pen accepted";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "mixture.eps_pen");
  }
}

TEST(Config, ErrorsNameTheKey) {
  auto key_of = [](const std::string& text) {
    try {
      validate(normalize(parse_config(text)));
    } catch (const ConfigError& e) {
      return e.key();
    }
    return std::string("<accepted>");
  };
  EXPECT_EQ(key_of("[grid]\ncellz = 8\n"), "grid.cellz");
  EXPECT_EQ(key_of("[nonsense]\nx = 1\n"), "nonsense");
  EXPECT_EQ(key_of("[grid]\ncells = 8, x\n"), "grid.cells");
  EXPECT_EQ(key_of("[grid]\nboundary = sticky\n"), "grid.boundary");
  EXPECT_EQ(key_of("[step]\nfixed_dt = maybe\n"), "step.fixed_dt");
  EXPECT_EQ(key_of("[run]\nscenario = nope\n"), "run.scenario");
  EXPECT_EQ(key_of("[run]\nscenario = tidal\n[scenario]\ncolour = 1\n"), "scenario.colour");
  EXPECT_EQ(key_of("[grid]\ndim = 4\n"), "grid.dim");
  EXPECT_EQ(key_of("[material]\ntarget = 0.7, 0.7\n"), "material.target");
}

TEST(Config, SyntaxErrorCarriesLineNumber) {
  std::istringstream is("[run]\nseed = 3\n[grid\ncells = 8\n");
  try {
    (void)parse_config(is, "bad.ini");
    FAIL() << "malformed section accepted";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "bad.ini:3");
  }
}

TEST(Config, OutputDirectoryEnvironmentOverride) {
  RunConfig c;
  c.output_dir = "here";
  ::unsetenv("SGDF_OUTPUT_DIR");
  EXPECT_EQ(output_directory(c), "here");
  ::setenv("SGDF_OUTPUT_DIR", "/tmp/elsewhere", 1);
  EXPECT_EQ(output_directory(c), "/tmp/elsewhere");
  ::unsetenv("SGDF_OUTPUT_DIR");
}

TEST(Config, ShippedPresetsLoad) {
  for (const char* name : {"static-equilibrium", "uniform-sphere", "two-layer-RT", "mixing-box", "tidal"}) {
    const auto c = load_config(preset(name));
    EXPECT_EQ(c.scenario, name);
  }
}

// ---- scenarios ----

TEST(Scenario, UniformSphereWithoutPerturbationIsMirrorSymmetric) {
  RunConfig c;
  c.scenario = "uniform-sphere";
  c.dim = 3;
  c.cells = {15, 16, 17};
  c.species = 3;
  const auto sc = make_scenario<3>(normalize(c));
  const auto& g = sc.model.grid;
  const auto& rho = sc.state.rho;
  const auto& cc = sc.state.species.c;
  int mismatches = 0, inside = 0;
  for_each_cell(g, [&](const Index<3>& idx, std::size_t lin) {
    inside += rho(0, lin) == 1.0;
    for (int a = 0; a < 3; ++a) {
      Index<3> m = idx;
      m[a] = g.cells[a] - 1 - idx[a];
      const auto ml = g.linear(m);
      mismatches += rho(0, lin) != rho(0, ml);
      for (int i = 0; i < 3; ++i) mismatches += cc(i, lin) != cc(i, ml);
    }
  });
  EXPECT_EQ(mismatches, 0);
  EXPECT_GT(inside, 0);
}

TEST(Scenario, RayleighTaylorStartsOnSimplexAtRest) {
  auto c = load_config(preset("two-layer-RT"));
  c.cells = {48};
  c.params["interface_width"] = 1.5;
  const auto sc = make_scenario<2>(normalize(c));
  const auto& s = sc.state;
  const auto& g = sc.model.grid;
  double worst = 0.0, most_negative = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    double sum = 0.0;
    for (int i = 0; i < s.species.c.components(); ++i) {
      sum += s.species.c(i, k);
      most_negative = std::min(most_negative, s.species.c(i, k));
    }
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  EXPECT_LE(worst, 2.3e-16);
  EXPECT_EQ(most_negative, 0.0);
  for_each_cell(g, [&](const Index<2>& idx, std::size_t lin) {
    const auto x = g.center(idx);
    ASSERT_EQ(s.kin.xi(0, lin), x[0]);
    ASSERT_EQ(s.kin.xi(1, lin), x[1]);
    ASSERT_EQ(s.kin.J(0, lin), 1.0);
    ASSERT_EQ(s.v(0, lin), 0.0);
    ASSERT_EQ(s.v(1, lin), 0.0);
  });
  // heavy material sits outside the light core, up to the tanh tail
  const double r_heavy_min = 0.2 * (1.0 - 0.1);
  for_each_cell(g, [&](const Index<2>& idx, std::size_t lin) {
    if (detail::radius_from_centre(g, idx) < 0.5 * r_heavy_min) {
      EXPECT_LT(s.species.c(0, lin), 0.01);
    }
  });
}

// d p_h / dr = -rho g inside the heavy shell, with g = 2 G M(r) / r from the
// enclosed mass of the step profile (planar log kernel).
TEST(Scenario, HydrostaticPrestressBalancesRadialGravity) {
  const double G = 5.0, rc = 0.2, R = 0.35, rh = 3.0, rl = 1.0, ra = 0.1, r = 0.3;
  const auto profile = [&](double s) { return s < rc ? rl : s < R ? rh : ra; };
  const Grid<2> fine = Grid<2>::cube(2048, 1.0);
  const auto ph = detail::radial_hydrostatic_pressure<2>(fine, G, profile);
  const int j = 1023, i0 = static_cast<int>((0.5 + r) * 2048);
  const double x0 = fine.center({i0 - 1, j})[0], x1 = fine.center({i0 + 1, j})[0];
  const double y = fine.center({i0, j})[1] - 0.5;
  const double slope = (ph(0, fine.linear({i0 + 1, j})) - ph(0, fine.linear({i0 - 1, j}))) /
                       (std::hypot(x1 - 0.5, y) - std::hypot(x0 - 0.5, y));
  const double rm = std::hypot(fine.center({i0, j})[0] - 0.5, y);
  const double M = std::numbers::pi * (rl * rc * rc + rh * (rm * rm - rc * rc));
  EXPECT_NEAR(-slope, rh * 2.0 * G * M / rm, 1e-3 * rh * 2.0 * G * M / rm);

  auto c = load_config(preset("two-layer-RT"));
  c.cells = {32};
  EXPECT_TRUE(make_scenario<2>(c).model.law.has_prestress());
  c.params["hydrostatic"] = 0.0;
  EXPECT_FALSE(make_scenario<2>(c).model.law.has_prestress());
}

TEST(Scenario, TidalOrbitQuarterPeriodIsOrthogonal) {
  const auto c = load_config(preset("tidal"));
  const auto ext = make_externals(c);
  ASSERT_EQ(ext.size(), 1u);
  const auto& e = ext[0];
  const double period = 2.0 * std::numbers::pi / e.angular_rate;
  const auto p0 = e.position(0.0), p1 = e.position(0.25 * period);
  double dot = 0.0, r0 = 0.0, r1 = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double u = p0[a] - e.center[a], w = p1[a] - e.center[a];
    dot += u * w;
    r0 += u * u;
    r1 += w * w;
  }
  EXPECT_NEAR(dot, 0.0, 1e-12 * r0);
  EXPECT_NEAR(std::sqrt(r0), e.orbit_radius, 1e-12);
  EXPECT_NEAR(std::sqrt(r1), e.orbit_radius, 1e-12);
}

TEST(Scenario, MixingBoxFlowIsTangentialAtWalls) {
  const auto sc = make_scenario<2>(load_config(preset("mixing-box")));
  ASSERT_TRUE(static_cast<bool>(sc.model.prescribed_velocity));
  const auto v = sc.model.prescribed_velocity(0.0);
  const auto& g = sc.model.grid;
  // discrete divergence of the cellular flow is small, and |v| is bounded by U
  const auto div = divergence(v);
  double dmax = 0.0, vmax = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    dmax = std::max(dmax, std::abs(div(0, k)));
    vmax = std::max(vmax, std::hypot(v(0, k), v(1, k)));
  }
  EXPECT_LE(vmax, 1.0);
  EXPECT_LT(dmax, 0.05 * vmax / g.min_spacing());
}

TEST(Scenario, SpeciesCountBelowTwoRejectedForMixtures) {
  RunConfig c;
  c.scenario = "two-layer-RT";
  c.species = 1;
  c.target = {1.0};
  c.mobility_matrix = {0.01};
  EXPECT_THROW(make_scenario<2>(normalize(c)), ConfigError);
}

TEST(Scenario, SeedChangesOnlyPerturbedPresets) {
  RunConfig c;
  c.scenario = "two-layer-RT";
  c.params["noise"] = 0.02;
  c.seed = 1;
  const auto a = make_scenario<2>(normalize(c));
  c.seed = 2;
  const auto b = make_scenario<2>(normalize(c));
  EXPECT_NE(a.state.rho.data(), b.state.rho.data());
  c.seed = 1;
  const auto a2 = make_scenario<2>(normalize(c));
  EXPECT_EQ(a.state.rho.data(), a2.state.rho.data());
}

// ---- snapshots and images ----

TEST(Snapshot, WriteThenReadIsBitIdentical) {
  auto c = small_mixing_box(3);
  const auto dir = scratch("snap");
  c.output_dir = dir.string();
  const auto res = run_config(c);
  const auto snap = read_snapshot(res.final_snapshot);
  EXPECT_EQ(snap.dim, 2);
  EXPECT_EQ(snap.step, 3u);
  EXPECT_EQ(snap.species, 2);
  for (const char* name : {"rho", "v", "xi", "J", "c", "mu", "V", "p"}) EXPECT_NO_THROW(snap.field(name)) << name;
  const auto again = (dir / "copy.sgdf").string();
  write_snapshot(again, snap);
  EXPECT_EQ(read_snapshot(again), snap);
  EXPECT_EQ(slurp(again), slurp(res.final_snapshot));

  // fresh in-memory state, including non-finite-free extreme values
  auto sc = make_scenario<2>(c);
  sc.state.rho(0, 0) = std::nextafter(1.0, 2.0);
  sc.state.rho(0, 1) = 4.9e-324;
  const auto s0 = make_snapshot(sc.state);
  write_snapshot(again, s0);
  const auto s1 = read_snapshot(again);
  ASSERT_EQ(s1, s0);
  EXPECT_EQ(std::memcmp(s1.field("rho").data.data(), s0.field("rho").data.data(), s0.field("rho").data.size() * 8), 0);
}

TEST(Snapshot, HeaderIsSelfDescribing) {
  auto c = small_mixing_box(1);
  const auto dir = scratch("hdr");
  const auto sc = make_scenario<2>(c);
  const auto path = (dir / "s.sgdf").string();
  write_snapshot(path, make_snapshot(sc.state));
  const std::string bytes = slurp(path);
  EXPECT_EQ(bytes.substr(0, 5), "SGDF1");
  std::uint32_t tag;
  std::memcpy(&tag, bytes.data() + 8, 4);
  EXPECT_EQ(tag, 0x01020304u);
  // header + 8 fields of 32*32 cells: rho 1, v 2, xi 2, J 1, c 2, mu 2, V 1, p 1 components
  EXPECT_GE(bytes.size(), 32u * 32u * 12u * 8u);
}

TEST(Snapshot, CorruptFilesRejected) {
  const auto dir = scratch("corrupt");
  const auto sc = make_scenario<2>(small_mixing_box(1));
  const auto path = (dir / "s.sgdf").string();
  write_snapshot(path, make_snapshot(sc.state));
  std::string bytes = slurp(path);

  auto write_bytes = [&](const std::string& b) {
    std::ofstream(path, std::ios::binary | std::ios::trunc) << b;
  };
  write_bytes(bytes.substr(0, bytes.size() - 8));
  EXPECT_THROW(read_snapshot(path), IoError);
  std::string bad = bytes;
  bad[0] = 'X';
  write_bytes(bad);
  EXPECT_THROW(read_snapshot(path), IoError);
  bad = bytes;
  bad[8] ^= 0x7f;  // endianness tag
  write_bytes(bad);
  EXPECT_THROW(read_snapshot(path), IoError);
  EXPECT_THROW(read_snapshot((dir / "missing.sgdf").string()), IoError);
}

TEST(Image, PgmDimensionsMatchSlice) {
  const auto dir = scratch("pgm");
  Grid<2> g2{.cells = {24, 16}, .length = {1.5, 1.0}};
  Field<2> f2 = Field<2>::scalar(g2);
  for (std::size_t k = 0; k < g2.size(); ++k) f2(0, k) = static_cast<double>(k);
  const auto p2 = (dir / "a.pgm").string();
  const auto sc2 = write_pgm(p2, f2, 0, "ramp", 0.5);
  EXPECT_EQ(sc2.width, 24);
  EXPECT_EQ(sc2.height, 16);
  EXPECT_EQ(sc2.min, 0.0);
  EXPECT_EQ(sc2.max, 383.0);
  const std::string b2 = slurp(p2);
  const std::string head = "P5\n24 16\n255\n";
  ASSERT_EQ(b2.substr(0, head.size()), head);
  EXPECT_EQ(b2.size(), head.size() + 24u * 16u);
  // top-left pixel is the largest x2 row, first column
  EXPECT_EQ(static_cast<unsigned char>(b2[head.size()]), std::lround(255.0 * f2(0, g2.linear({0, 15})) / 383.0));
  EXPECT_EQ(static_cast<unsigned char>(b2.back()), std::lround(255.0 * f2(0, g2.linear({23, 0})) / 383.0));
  const std::string side = slurp(p2 + ".txt");
  EXPECT_NE(side.find("field ramp"), std::string::npos);
  EXPECT_NE(side.find("max 383"), std::string::npos);

  Grid<3> g3{.cells = {8, 6, 4}, .length = {1.0, 1.0, 1.0}};
  const auto sc3 = write_pgm((dir / "b.pgm").string(), Field<3>::scalar(g3, 2.0), 0, "flat", 0.0);
  EXPECT_EQ(sc3.width, 8);
  EXPECT_EQ(sc3.height, 6);
  const std::string b3 = slurp(dir / "b.pgm");
  EXPECT_EQ(b3.size(), std::string("P5\n8 6\n255\n").size() + 48u);
}

// ---- runs ----

TEST(Run, CadenceZeroWritesOnlyFinalSnapshotAndFullLedger) {
  auto c = small_mixing_box(5);
  const auto dir = scratch("cadence");
  c.output_dir = dir.string();
  c.snapshot_every = 0;
  run_config(c);
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir)) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  EXPECT_EQ(names, (std::vector<std::string>{"ledger.csv", "run.log", "snapshot_final.sgdf"}));
  const auto t = read_csv((dir / "ledger.csv").string());
  EXPECT_EQ(t.rows.size(), 6u);
  EXPECT_EQ(t.header, csv_header(2));
}

TEST(Run, CadenceAndImagesProduceNumberedFiles) {
  auto c = small_mixing_box(6);
  const auto dir = scratch("cadence3");
  c.output_dir = dir.string();
  c.snapshot_every = 3;
  c.images = true;
  run_config(c);
  for (const char* f : {"snapshot_000000.sgdf", "snapshot_000003.sgdf", "snapshot_final.sgdf", "rho_000003.pgm",
                        "c1_final.pgm", "c1_final.pgm.txt"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_FALSE(fs::exists(dir / "snapshot_000006.sgdf"));
  EXPECT_EQ(read_snapshot((dir / "snapshot_000003.sgdf").string()).step, 3u);
}

TEST(Run, LogContainsNormalizedConfig) {
  auto c = small_mixing_box(2);
  const auto dir = scratch("log");
  c.output_dir = dir.string();
  run_config(c);
  std::string text = slurp(dir / "run.log");
  const auto cut = text.find("completed");
  ASSERT_NE(cut, std::string::npos);
  text = text.substr(0, cut);
  EXPECT_EQ(normalize(parse_config(text)), normalize(c));
}

TEST(Run, UnwritableOutputIsAnIoError) {
  const auto dir = scratch("blocked");
  std::ofstream(dir / "file") << "x";
  auto c = small_mixing_box(1);
  c.output_dir = (dir / "file" / "sub").string();
  EXPECT_THROW(run_config(c), IoError);
}

TEST(Run, SameSeedGivesBitIdenticalOutputs) {
  auto c = load_config(preset("two-layer-RT"));
  c.cells = {32};
  c.max_steps = 20;
  c.params["noise"] = 0.01;
  c.snapshot_every = 10;
  const auto a = scratch("det_a"), b = scratch("det_b");
  c.output_dir = a.string();
  run_config(c);
  c.output_dir = b.string();
  run_config(c);
  for (const char* f : {"ledger.csv", "snapshot_000010.sgdf", "snapshot_final.sgdf"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

// ---- command line ----

TEST(Cli, ValidateAcceptsShippedPresets) {
  for (const char* name : {"static-equilibrium", "uniform-sphere", "two-layer-RT", "mixing-box", "tidal"})
    EXPECT_EQ(cli("validate " + preset(name)).first, 0) << name;
}

TEST(Cli, ExitCodesSeparateFailureKinds) {
  const auto dir = scratch("cli_codes");
  EXPECT_EQ(cli("").first, 1);
  EXPECT_EQ(cli("frobnicate").first, 1);
  EXPECT_EQ(cli("validate").first, 1);

  std::ofstream(dir / "bad.ini") << "[material]\nq = 2\n";
  EXPECT_EQ(cli("validate " + (dir / "bad.ini").string()).first, 2);

  // J leaves 1 as soon as the RT flow starts; a floor just below 1 trips
  // the positivity monitor however far the step is cut
  std::ofstream(dir / "tight.ini") << "[run]\nscenario = two-layer-RT\n[grid]\ncells = 32\n[gravity]\nG = 5\n"
                                      "[material]\nnu1 = 0.01\nnu2 = 1e-12\n"
                                      "[step]\nj_floor = 0.999999999999\nmax_retries = 2\nmax_steps = 20\n";
  EXPECT_EQ(cli("run " + (dir / "tight.ini").string() + " -o " + (dir / "tight").string()).first, 3);
  EXPECT_NE(slurp(dir / "tight" / "run.log").find("abort:"), std::string::npos);

  std::ofstream(dir / "file") << "x";
  EXPECT_EQ(cli("run " + preset("mixing-box") + " -n 1 -o " + (dir / "file" / "sub").string()).first, 4);
  EXPECT_EQ(cli("energy-report " + (dir / "nope.csv").string()).first, 4);
}

TEST(Cli, MixingBoxSmokeRunIsFast) {
  const auto dir = scratch("cli_mix");
  const auto t0 = std::chrono::steady_clock::now();
  const auto [rc, out] = cli("run " + preset("mixing-box") + " -o " + dir.string());
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_EQ(rc, 0) << out;
  EXPECT_LT(secs, 10.0);
  EXPECT_EQ(read_csv((dir / "ledger.csv").string()).rows.size(), 51u);
}

TEST(Cli, EnergyReportOfStaticRunIsZero) {
  const auto dir = scratch("cli_static");
  ASSERT_EQ(cli("run " + preset("static-equilibrium") + " -o " + dir.string()).first, 0);
  const auto csv = (dir / "ledger.csv").string();
  const auto [rc, out] = cli("energy-report " + csv);
  ASSERT_EQ(rc, 0);
  std::istringstream is(out);
  std::string line;
  bool seen = false;
  while (std::getline(is, line)) {
    if (line.rfind(csv, 0) != 0) continue;
    std::istringstream ls(line.substr(csv.size()));
    std::size_t steps;
    double mean_dt, t_end, max_rel;
    ls >> steps >> mean_dt >> t_end >> max_rel;
    EXPECT_EQ(steps, 50u);
    EXPECT_LE(max_rel, 1e-10);
    seen = true;
  }
  EXPECT_TRUE(seen) << out;
}

TEST(Cli, EnergyReportSlopeFromSeveralRuns) {
  const auto dir = scratch("cli_slope");
  std::vector<std::string> csvs;
  for (int k = 0; k < 3; ++k) {
    auto c = small_mixing_box(10 << k);
    c.params["velocity"] = 0.0;
    c.fixed_dt = true;
    c.dt_max = 4e-3 / (1 << k);
    c.output_dir = (dir / std::to_string(k)).string();
    run_config(c);
    csvs.push_back(c.output_dir + "/ledger.csv");
  }
  const auto [rc, out] = cli("energy-report " + csvs[0] + " " + csvs[1] + " " + csvs[2]);
  ASSERT_EQ(rc, 0);
  const auto pos = out.find("convergence slope");
  ASSERT_NE(pos, std::string::npos) << out;
  const double slope = std::stod(out.substr(out.find(':', pos) + 1));
  EXPECT_GT(slope, 0.8);
  EXPECT_LT(slope, 1.3);
}
