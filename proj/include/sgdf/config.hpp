#pragma once

// Run configuration: INI text with sections [run], [grid], [material],
// [mixture], [gravity], [step] and [scenario]. Unknown sections and keys are
// rejected, every semantic violation names the offending key.

#include <sgdf/errors.hpp>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace sgdf {

/// Gravitational constant in SI units (m^3 kg^-1 s^-2).
inline constexpr double G_si = 6.6743e-11;

struct RunConfig {
  // [run]
  std::string scenario = "static-equilibrium";
  std::string units = "desk";  ///< desk: G defaults to 1; si: G defaults to G_si
  std::uint64_t seed = 1;
  std::string output_dir = "sgdf-out";
  std::uint64_t snapshot_every = 0;  ///< 0: final snapshot only
  bool images = false;

  // [grid]
  int dim = 2;
  std::vector<int> cells{32};
  std::vector<double> length{1.0};
  std::string boundary = "slip_wall";

  // [material]
  std::string volumetric = "power_law";
  double eps_phi = 1.0;
  double alpha = 2.0;
  double kappa = 1.0;
  double well_height = 50.0;
  double well_a = 0.8;
  double well_b = 1.4;
  double nu1 = 0.1;
  std::vector<double> nu1_species;
  double nu2 = 1e-4;
  std::vector<double> nu2_species;
  double q = 4.0;
  double modulus = 1.0;
  std::vector<double> target;  ///< empty: uniform 1/n

  // [mixture]
  int species = 2;
  std::string mobility = "constant";
  std::vector<double> mobility_matrix;  ///< empty: mobility_scale * I
  double mobility_scale = 1e-2;
  double ms_modulus = 1e-2;
  double eps_pen = 1e-4;
  std::vector<std::vector<double>> reaction_directions;
  std::vector<double> reaction_rates;
  double solver_tol = 1e-12;
  int solver_max_iter = 5000;

  // [gravity]
  double G = std::nan("");  ///< NaN: default for the unit system
  int padding = 2;
  std::vector<double> external_mass;
  std::vector<double> external_orbit_radius;
  std::vector<double> external_angular_rate;
  std::vector<double> external_phase;
  std::vector<double> external_softening;
  std::vector<double> external_center;  ///< empty: box centre

  // [step]
  double dt_max = 1e-2;
  double cfl = 0.4;
  double c_visc = 0.25;
  double c_hyp = 0.1;
  std::uint64_t max_steps = 100;
  int max_retries = 4;
  bool explicit_viscosity = false;
  bool implicit_hyperviscosity = false;
  bool fixed_dt = false;
  std::string limiter = "none";
  double j_floor = 1e-6;
  double momentum_tol = 1e-12;
  int momentum_max_iter = 4000;

  // [scenario]
  std::map<std::string, double> params;

  bool operator==(const RunConfig&) const = default;
};

/// Scenario names with their parameters and defaults.
inline const std::map<std::string, std::map<std::string, double>>& scenario_catalogue() {
  static const std::map<std::string, std::map<std::string, double>> cat = {
      {"static-equilibrium", {{"rho", 1.0}}},
      {"uniform-sphere",
       {{"radius", 0.3}, {"rho_in", 1.0}, {"rho_out", 1e-3}, {"perturbation", 0.0}, {"hydrostatic", 0.0}}},
      {"two-layer-RT",
       {{"core_radius", 0.2},
        {"shell_radius", 0.35},
        {"rho_heavy", 3.0},
        {"rho_light", 1.0},
        {"rho_air", 0.1},
        {"amplitude", 0.1},
        {"mode", 5.0},
        {"noise", 0.0},
        {"interface_width", 1.5},
        {"hydrostatic", 1.0}}},
      {"mixing-box", {{"velocity", 1.0}, {"rho", 1.0}, {"interface", 0.5}, {"interface_width", 1.0}}},
      {"tidal", {{"radius", 0.25}, {"rho_body", 1.0}, {"rho_out", 1e-3}, {"hydrostatic", 1.0}}},
  };
  return cat;
}

namespace detail {

using FieldRef = std::variant<double*, int*, std::uint64_t*, bool*, std::string*, std::vector<double>*,
                              std::vector<int>*, std::vector<std::vector<double>>*>;

struct KeyBinding {
  std::string section;
  std::string key;
  FieldRef ref;
  std::vector<std::string> choices;  ///< non-empty for enumerated strings
};

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  T value{};
  const auto* first = t.data();
  const auto* last = t.data() + t.size();
  if (!t.empty() && t.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || t.empty()) throw ConfigError(key, "cannot parse '" + text + "' as a number");
  return value;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError(key, "expected true/false, got '" + text + "'");
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  if (trim(text).empty()) return out;
  for (const auto& item : split(text, ',')) out.push_back(parse_number<T>(key, item));
  return out;
}

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

template <class T>
std::string format_list(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    if constexpr (std::is_floating_point_v<T>)
      s += format_double(v[i]);
    else
      s += std::to_string(v[i]);
  }
  return s;
}

inline std::vector<KeyBinding> bindings(RunConfig& c) {
  return {
      {"run", "scenario", &c.scenario, {}},
      {"run", "units", &c.units, {"desk", "si"}},
      {"run", "seed", &c.seed, {}},
      {"run", "output_dir", &c.output_dir, {}},
      {"run", "snapshot_every", &c.snapshot_every, {}},
      {"run", "images", &c.images, {}},
      {"grid", "dim", &c.dim, {}},
      {"grid", "cells", &c.cells, {}},
      {"grid", "length", &c.length, {}},
      {"grid", "boundary", &c.boundary, {"slip_wall", "periodic"}},
      {"material", "volumetric", &c.volumetric, {"power_law", "double_well"}},
      {"material", "eps_phi", &c.eps_phi, {}},
      {"material", "alpha", &c.alpha, {}},
      {"material", "kappa", &c.kappa, {}},
      {"material", "well_height", &c.well_height, {}},
      {"material", "well_a", &c.well_a, {}},
      {"material", "well_b", &c.well_b, {}},
      {"material", "nu1", &c.nu1, {}},
      {"material", "nu1_species", &c.nu1_species, {}},
      {"material", "nu2", &c.nu2, {}},
      {"material", "nu2_species", &c.nu2_species, {}},
      {"material", "q", &c.q, {}},
      {"material", "modulus", &c.modulus, {}},
      {"material", "target", &c.target, {}},
      {"mixture", "species", &c.species, {}},
      {"mixture", "mobility", &c.mobility, {"constant", "maxwell-stefan", "none"}},
      {"mixture", "mobility_matrix", &c.mobility_matrix, {}},
      {"mixture", "mobility_scale", &c.mobility_scale, {}},
      {"mixture", "ms_modulus", &c.ms_modulus, {}},
      {"mixture", "eps_pen", &c.eps_pen, {}},
      {"mixture", "reaction_directions", &c.reaction_directions, {}},
      {"mixture", "reaction_rates", &c.reaction_rates, {}},
      {"mixture", "solver_tol", &c.solver_tol, {}},
      {"mixture", "solver_max_iter", &c.solver_max_iter, {}},
      {"gravity", "G", &c.G, {}},
      {"gravity", "padding", &c.padding, {}},
      {"gravity", "external_mass", &c.external_mass, {}},
      {"gravity", "external_orbit_radius", &c.external_orbit_radius, {}},
      {"gravity", "external_angular_rate", &c.external_angular_rate, {}},
      {"gravity", "external_phase", &c.external_phase, {}},
      {"gravity", "external_softening", &c.external_softening, {}},
      {"gravity", "external_center", &c.external_center, {}},
      {"step", "dt_max", &c.dt_max, {}},
      {"step", "cfl", &c.cfl, {}},
      {"step", "c_visc", &c.c_visc, {}},
      {"step", "c_hyp", &c.c_hyp, {}},
      {"step", "max_steps", &c.max_steps, {}},
      {"step", "max_retries", &c.max_retries, {}},
      {"step", "explicit_viscosity", &c.explicit_viscosity, {}},
      {"step", "implicit_hyperviscosity", &c.implicit_hyperviscosity, {}},
      {"step", "fixed_dt", &c.fixed_dt, {}},
      {"step", "limiter", &c.limiter, {"none", "minmod"}},
      {"step", "j_floor", &c.j_floor, {}},
      {"step", "momentum_tol", &c.momentum_tol, {}},
      {"step", "momentum_max_iter", &c.momentum_max_iter, {}},
  };
}

inline void assign(const KeyBinding& b, const std::string& text) {
  const std::string key = b.section + "." + b.key;
  std::visit(
      [&](auto* p) {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, double> || std::is_same_v<T, int> || std::is_same_v<T, std::uint64_t>) {
          *p = parse_number<T>(key, text);
        } else if constexpr (std::is_same_v<T, bool>) {
          *p = parse_bool(key, text);
        } else if constexpr (std::is_same_v<T, std::string>) {
          const std::string t = trim(text);
          if (!b.choices.empty() && std::find(b.choices.begin(), b.choices.end(), t) == b.choices.end()) {
            std::string allowed;
            for (const auto& ch : b.choices) allowed += (allowed.empty() ? "" : ", ") + ch;
            throw ConfigError(key, "'" + t + "' is not one of {" + allowed + "}");
          }
          *p = t;
        } else if constexpr (std::is_same_v<T, std::vector<double>>) {
          *p = parse_list<double>(key, text);
        } else if constexpr (std::is_same_v<T, std::vector<int>>) {
          *p = parse_list<int>(key, text);
        } else {
          p->clear();
          if (trim(text).empty()) return;
          for (const auto& row : split(text, ';')) p->push_back(parse_list<double>(key, row));
        }
      },
      b.ref);
}

inline std::string render(const KeyBinding& b) {
  return std::visit(
      [&](auto* p) -> std::string {
        using T = std::remove_pointer_t<decltype(p)>;
        if constexpr (std::is_same_v<T, double>) {
          return format_double(*p);
        } else if constexpr (std::is_same_v<T, int> || std::is_same_v<T, std::uint64_t>) {
          return std::to_string(*p);
        } else if constexpr (std::is_same_v<T, bool>) {
          return *p ? "true" : "false";
        } else if constexpr (std::is_same_v<T, std::string>) {
          return *p;
        } else if constexpr (std::is_same_v<T, std::vector<double>> || std::is_same_v<T, std::vector<int>>) {
          return format_list(*p);
        } else {
          std::string s;
          for (std::size_t i = 0; i < p->size(); ++i) s += (i ? "; " : "") + format_list((*p)[i]);
          return s;
        }
      },
      b.ref);
}

}  // namespace detail

/// Fills defaults that depend on other keys: per-axis grid lists, the
/// mixing target, the mobility matrix, G for the unit system and the
/// scenario parameters.
inline RunConfig normalize(RunConfig c) {
  if (c.cells.size() == 1 && c.dim > 1) c.cells.assign(c.dim, c.cells[0]);
  if (c.length.size() == 1 && c.dim > 1) c.length.assign(c.dim, c.length[0]);
  if (c.target.empty() && c.species > 0) c.target.assign(c.species, 1.0 / c.species);
  if (c.mobility_matrix.empty() && c.species > 0 && c.mobility == "constant") {
    c.mobility_matrix.assign(static_cast<std::size_t>(c.species) * c.species, 0.0);
    for (int i = 0; i < c.species; ++i) c.mobility_matrix[i * c.species + i] = c.mobility_scale;
  }
  if (std::isnan(c.G)) c.G = c.units == "si" ? G_si : 1.0;
  const std::size_t ne = c.external_mass.size();
  if (c.external_phase.empty()) c.external_phase.assign(ne, 0.0);
  if (c.external_angular_rate.empty()) c.external_angular_rate.assign(ne, 0.0);
  if (c.external_center.empty() && ne > 0) {
    c.external_center.assign(3, 0.0);
    for (int a = 0; a < c.dim && a < static_cast<int>(c.length.size()); ++a) c.external_center[a] = 0.5 * c.length[a];
  }
  const auto& cat = scenario_catalogue();
  if (auto it = cat.find(c.scenario); it != cat.end())
    for (const auto& [k, v] : it->second) c.params.try_emplace(k, v);
  return c;
}

/// Checks every key; throws ConfigError naming the first offending key.
inline void validate(const RunConfig& raw) {
  const RunConfig c = normalize(raw);
  const auto& cat = scenario_catalogue();
  const auto sc = cat.find(c.scenario);
  if (sc == cat.end()) {
    std::string names;
    for (const auto& [k, v] : cat) names += (names.empty() ? "" : ", ") + k;
    throw ConfigError("run.scenario", "unknown scenario '" + c.scenario + "' (known: " + names + ")");
  }
  for (const auto& [k, v] : c.params) {
    if (!sc->second.count(k)) throw ConfigError("scenario." + k, "unknown parameter for scenario " + c.scenario);
    if (!std::isfinite(v)) throw ConfigError("scenario." + k, "must be finite");
  }
  if (c.dim != 2 && c.dim != 3) throw ConfigError("grid.dim", "must be 2 or 3");
  if (static_cast<int>(c.cells.size()) != c.dim) throw ConfigError("grid.cells", "needs one value or one per axis");
  if (static_cast<int>(c.length.size()) != c.dim) throw ConfigError("grid.length", "needs one value or one per axis");
  for (int n : c.cells)
    if (n < 4) throw ConfigError("grid.cells", "at least 4 cells per axis are required");
  for (double L : c.length)
    if (!(L > 0.0) || !std::isfinite(L)) throw ConfigError("grid.length", "must be positive and finite");

  if (!(c.eps_phi > 0.0)) throw ConfigError("material.eps_phi", "must be > 0");
  if (!(c.alpha > 0.0)) throw ConfigError("material.alpha", "must be > 0");
  if (!(c.kappa >= 0.0)) throw ConfigError("material.kappa", "must be >= 0");
  if (!(c.well_height >= 0.0)) throw ConfigError("material.well_height", "must be >= 0");
  if (!(c.well_a > 0.0 && c.well_a < c.well_b)) throw ConfigError("material.well_a", "must satisfy 0 < well_a < well_b");
  if (!(c.nu1 > 0.0)) throw ConfigError("material.nu1", "must be > 0");
  if (!(c.nu2 > 0.0)) throw ConfigError("material.nu2", "must be > 0");
  for (double x : c.nu1_species)
    if (!(x > 0.0)) throw ConfigError("material.nu1_species", "entries must be > 0");
  for (double x : c.nu2_species)
    if (!(x > 0.0)) throw ConfigError("material.nu2_species", "entries must be > 0");
  if (!c.nu1_species.empty() && static_cast<int>(c.nu1_species.size()) != c.species)
    throw ConfigError("material.nu1_species", "needs one entry per species");
  if (!c.nu2_species.empty() && static_cast<int>(c.nu2_species.size()) != c.species)
    throw ConfigError("material.nu2_species", "needs one entry per species");
  if (!(c.q > 3.0) || !std::isfinite(c.q))
    throw ConfigError("material.q", "must satisfy q > 3 (coercivity of the hyperviscous term)");
  if (!(c.modulus >= 0.0)) throw ConfigError("material.modulus", "must be >= 0");
  if (c.mobility != "none" && !(c.modulus > 0.0))
    throw ConfigError("material.modulus", "must be > 0 when species diffuse");
  if (static_cast<int>(c.target.size()) != c.species) throw ConfigError("material.target", "needs one entry per species");
  {
    double sum = 0.0;
    for (double x : c.target) {
      if (!(x >= 0.0)) throw ConfigError("material.target", "entries must be >= 0");
      sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw ConfigError("material.target", "entries must sum to 1");
  }

  if (c.species < 1 || c.species > 6) throw ConfigError("mixture.species", "must be in [1, 6]");
  if (!(c.eps_pen > 0.0)) throw ConfigError("mixture.eps_pen", "must be > 0");
  if (!(c.mobility_scale >= 0.0)) throw ConfigError("mixture.mobility_scale", "must be >= 0");
  if (c.mobility == "constant" &&
      c.mobility_matrix.size() != static_cast<std::size_t>(c.species) * c.species)
    throw ConfigError("mixture.mobility_matrix", "needs species^2 entries (row-major)");
  if (!(c.ms_modulus >= 0.0)) throw ConfigError("mixture.ms_modulus", "must be >= 0");
  if (c.reaction_directions.size() != c.reaction_rates.size())
    throw ConfigError("mixture.reaction_rates", "needs one rate per reaction direction");
  for (const auto& d : c.reaction_directions)
    if (static_cast<int>(d.size()) != c.species)
      throw ConfigError("mixture.reaction_directions", "each direction needs one entry per species");
  for (double k : c.reaction_rates)
    if (!(k >= 0.0)) throw ConfigError("mixture.reaction_rates", "must be >= 0");
  if (!(c.solver_tol > 0.0)) throw ConfigError("mixture.solver_tol", "must be > 0");
  if (c.solver_max_iter < 1) throw ConfigError("mixture.solver_max_iter", "must be >= 1");

  if (!(c.G >= 0.0) || !std::isfinite(c.G)) throw ConfigError("gravity.G", "must be finite and >= 0");
  if (c.padding < 2) throw ConfigError("gravity.padding", "must be >= 2");
  const std::size_t ne = c.external_mass.size();
  const std::pair<const char*, std::size_t> lists[] = {
      {"gravity.external_orbit_radius", c.external_orbit_radius.size()},
      {"gravity.external_angular_rate", c.external_angular_rate.size()},
      {"gravity.external_phase", c.external_phase.size()},
      {"gravity.external_softening", c.external_softening.size()}};
  for (const auto& [key, size] : lists)
    if (size != ne) throw ConfigError(key, "needs one entry per external mass");
  if (ne > 0 && c.external_center.size() != 3) throw ConfigError("gravity.external_center", "needs 3 coordinates");
  for (std::size_t i = 0; i < ne; ++i) {
    if (!(c.external_mass[i] >= 0.0)) throw ConfigError("gravity.external_mass", "must be >= 0");
    if (!(c.external_softening[i] > 0.0)) throw ConfigError("gravity.external_softening", "must be > 0");
    if (!(c.external_orbit_radius[i] >= 0.0)) throw ConfigError("gravity.external_orbit_radius", "must be >= 0");
  }

  if (!(c.dt_max > 0.0)) throw ConfigError("step.dt_max", "must be > 0");
  if (!(c.cfl > 0.0 && c.cfl <= 1.0)) throw ConfigError("step.cfl", "must be in (0, 1]");
  if (!(c.c_visc > 0.0)) throw ConfigError("step.c_visc", "must be > 0");
  if (!(c.c_hyp > 0.0)) throw ConfigError("step.c_hyp", "must be > 0");
  if (c.max_retries < 0) throw ConfigError("step.max_retries", "must be >= 0");
  if (c.explicit_viscosity && c.implicit_hyperviscosity)
    throw ConfigError("step.implicit_hyperviscosity", "requires implicit Newtonian viscosity");
  if (!(c.j_floor > 0.0)) throw ConfigError("step.j_floor", "must be > 0");
  if (!(c.momentum_tol > 0.0)) throw ConfigError("step.momentum_tol", "must be > 0");
  if (c.momentum_max_iter < 1) throw ConfigError("step.momentum_max_iter", "must be >= 1");
}

/// Parses INI text. Unknown sections/keys and malformed values throw
/// ConfigError; syntax errors carry the line number.
inline RunConfig parse_config(std::istream& in, const std::string& origin = "<config>") {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(origin + ":" + std::to_string(e.line()), e.message());
  }
  RunConfig c;
  auto binds = detail::bindings(c);
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError(section, "key outside of any section");
    if (section == "scenario") {
      for (const auto& [k, v] : body) c.params[k] = detail::parse_number<double>("scenario." + k, v.data());
      continue;
    }
    bool known_section = false;
    for (const auto& b : binds) known_section = known_section || b.section == section;
    if (!known_section) throw ConfigError(section, "unknown section");
    for (const auto& [k, v] : body) {
      auto it = std::find_if(binds.begin(), binds.end(),
                             [&](const detail::KeyBinding& b) { return b.section == section && b.key == k; });
      if (it == binds.end()) throw ConfigError(section + "." + k, "unknown key");
      detail::assign(*it, v.data());
    }
  }
  return c;
}

inline RunConfig parse_config(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

/// Reads, normalizes and validates a configuration file.
inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open configuration file");
  RunConfig c = normalize(parse_config(in, path));
  validate(c);
  return c;
}

/// Writes every key (normalized form); load(dump(c)) reproduces c exactly.
inline std::string dump(const RunConfig& cfg) {
  RunConfig c = cfg;
  std::ostringstream os;
  std::string section;
  for (const auto& b : detail::bindings(c)) {
    if (b.section != section) {
      if (!section.empty()) os << "\n";
      section = b.section;
      os << "[" << section << "]\n";
    }
    os << b.key << " = " << detail::render(b) << "\n";
  }
  if (!c.params.empty()) {
    os << "\n[scenario]\n";
    for (const auto& [k, v] : c.params) os << k << " = " << detail::format_double(v) << "\n";
  }
  return os.str();
}

/// Output directory after the SGDF_OUTPUT_DIR override.
inline std::string output_directory(const RunConfig& c) {
  if (const char* env = std::getenv("SGDF_OUTPUT_DIR"); env && *env) return env;
  return c.output_dir;
}

}  // namespace sgdf
