#pragma once

// Output formats.
//
// SGDF1 snapshot (native byte order, tagged):
//   char[8]  "SGDF1\0\0\0"
//   u32      endianness tag 0x01020304
//   u32      d
//   u64[d]   N_i
//   f64[d]   L_i
//   u32[d]   boundary per axis (0 periodic, 1 slip wall)
//   f64      t
//   u64      step
//   u32      n (species)
//   u32      field count F
//   F x { char[16] name, u32 components, u64 values }
//   F blocks of f64, component-major, row-major cells
//
// Ledger CSV: one row per step with the columns of csv_header().
// PGM: 8-bit binary (P5) slice, min-max scaled, sidecar text with the scale.

#include <sgdf/diagnostics.hpp>
#include <sgdf/errors.hpp>
#include <sgdf/grid.hpp>
#include <sgdf/integrator.hpp>
#include <sgdf/model.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace sgdf {

struct SnapshotField {
  std::string name;
  int components = 0;
  std::vector<double> data;

  bool operator==(const SnapshotField&) const = default;
};

struct Snapshot {
  int dim = 0;
  std::vector<std::uint64_t> cells;
  std::vector<double> length;
  std::vector<std::uint32_t> boundary;
  double t = 0.0;
  std::uint64_t step = 0;
  int species = 0;
  std::vector<SnapshotField> fields;

  const SnapshotField& field(const std::string& name) const {
    for (const auto& f : fields)
      if (f.name == name) return f;
    throw IoError("snapshot: no field named '" + name + "'");
  }

  bool operator==(const Snapshot&) const = default;
};

template <int Dim>
Snapshot make_snapshot(const SimState<Dim>& s) {
  Snapshot out;
  const auto& g = s.v.grid();
  out.dim = Dim;
  for (int a = 0; a < Dim; ++a) {
    out.cells.push_back(static_cast<std::uint64_t>(g.cells[a]));
    out.length.push_back(g.length[a]);
    out.boundary.push_back(g.boundary[a] == Boundary::periodic ? 0u : 1u);
  }
  out.t = s.t;
  out.step = s.step;
  out.species = s.species.c.components();
  auto add = [&](const char* name, const Field<Dim>& f) {
    out.fields.push_back({name, f.components(), f.data()});
  };
  add("rho", s.rho);
  add("v", s.v);
  add("xi", s.kin.xi);
  add("J", s.kin.J);
  add("c", s.species.c);
  add("mu", s.species.mu);
  add("V", s.potential.total());
  add("p", s.p);
  return out;
}

namespace detail {

inline constexpr char snapshot_magic[8] = {'S', 'G', 'D', 'F', '1', 0, 0, 0};
inline constexpr std::uint32_t endian_tag = 0x01020304u;

template <class T>
void put(std::ostream& os, const T& x) {
  os.write(reinterpret_cast<const char*>(&x), sizeof(T));
}

template <class T>
T get(std::istream& is, const std::string& what) {
  T x{};
  if (!is.read(reinterpret_cast<char*>(&x), sizeof(T))) throw IoError("snapshot: truncated while reading " + what);
  return x;
}

}  // namespace detail

inline void write_snapshot(const std::string& path, const Snapshot& s) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os.write(detail::snapshot_magic, sizeof detail::snapshot_magic);
  detail::put(os, detail::endian_tag);
  detail::put(os, static_cast<std::uint32_t>(s.dim));
  for (auto n : s.cells) detail::put(os, n);
  for (auto L : s.length) detail::put(os, L);
  for (auto b : s.boundary) detail::put(os, b);
  detail::put(os, s.t);
  detail::put(os, s.step);
  detail::put(os, static_cast<std::uint32_t>(s.species));
  detail::put(os, static_cast<std::uint32_t>(s.fields.size()));
  for (const auto& f : s.fields) {
    char name[16] = {};
    if (f.name.size() >= sizeof name) throw IoError("snapshot: field name too long: " + f.name);
    std::memcpy(name, f.name.data(), f.name.size());
    os.write(name, sizeof name);
    detail::put(os, static_cast<std::uint32_t>(f.components));
    detail::put(os, static_cast<std::uint64_t>(f.data.size()));
  }
  for (const auto& f : s.fields)
    os.write(reinterpret_cast<const char*>(f.data.data()), static_cast<std::streamsize>(f.data.size() * sizeof(double)));
  if (!os) throw IoError("write to '" + path + "' failed");
}

inline Snapshot read_snapshot(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, detail::snapshot_magic, sizeof magic) != 0)
    throw IoError("'" + path + "' is not an SGDF1 snapshot");
  if (detail::get<std::uint32_t>(is, "endianness tag") != detail::endian_tag)
    throw IoError("'" + path + "' was written with a different byte order");
  Snapshot s;
  s.dim = static_cast<int>(detail::get<std::uint32_t>(is, "d"));
  if (s.dim != 2 && s.dim != 3) throw IoError("snapshot: unsupported dimension");
  std::uint64_t cells = 1;
  for (int a = 0; a < s.dim; ++a) {
    s.cells.push_back(detail::get<std::uint64_t>(is, "N"));
    cells *= s.cells.back();
  }
  for (int a = 0; a < s.dim; ++a) s.length.push_back(detail::get<double>(is, "L"));
  for (int a = 0; a < s.dim; ++a) s.boundary.push_back(detail::get<std::uint32_t>(is, "boundary"));
  s.t = detail::get<double>(is, "t");
  s.step = detail::get<std::uint64_t>(is, "step");
  s.species = static_cast<int>(detail::get<std::uint32_t>(is, "n"));
  const auto nf = detail::get<std::uint32_t>(is, "field count");
  if (nf > 64) throw IoError("snapshot: implausible field count");
  for (std::uint32_t i = 0; i < nf; ++i) {
    char name[16];
    if (!is.read(name, sizeof name)) throw IoError("snapshot: truncated field table");
    SnapshotField f;
    f.name.assign(name, strnlen(name, sizeof name));
    f.components = static_cast<int>(detail::get<std::uint32_t>(is, "components"));
    const auto count = detail::get<std::uint64_t>(is, "value count");
    if (count != cells * static_cast<std::uint64_t>(f.components))
      throw IoError("snapshot: field '" + f.name + "' size does not match the grid");
    f.data.resize(count);
    s.fields.push_back(std::move(f));
  }
  for (auto& f : s.fields)
    if (!is.read(reinterpret_cast<char*>(f.data.data()), static_cast<std::streamsize>(f.data.size() * sizeof(double))))
      throw IoError("snapshot: truncated data block for '" + f.name + "'");
  return s;
}

/// Ledger CSV columns, fixed order.
inline std::vector<std::string> csv_header(int species) {
  std::vector<std::string> h = {"step",     "t",        "dt",       "kinetic",        "stored",
                                "penalty",  "coupling", "field",    "field_quadrature", "external_coupling",
                                "total",    "viscous",  "diffusive", "reactive",      "external_power",
                                "residual", "residual_rel", "mass"};
  for (int i = 0; i < species; ++i) h.push_back("species_" + std::to_string(i + 1));
  for (const char* s : {"simplex_sum_l2", "negative_l2", "min_J", "j_consistency", "clamp_count", "retries",
                        "momentum_iterations", "dt_limit"})
    h.push_back(s);
  return h;
}

struct CsvRow {
  std::uint64_t step = 0;
  double dt = 0.0;
  EnergyLedger ledger;
  BalanceResidual residual;
  ConservationReport conservation;
  int retries = 0;
  int momentum_iterations = 0;
  DtLimit limit = DtLimit::dt_max;
};

class LedgerCsv {
 public:
  LedgerCsv(const std::string& path, int species) : os_(path, std::ios::trunc), species_(species) {
    if (!os_) throw IoError("cannot open '" + path + "' for writing");
    const auto h = csv_header(species);
    for (std::size_t i = 0; i < h.size(); ++i) os_ << (i ? "," : "") << h[i];
    os_ << "\n";
  }

  void write(const CsvRow& r) {
    char buf[64];
    auto num = [&](double x) {
      std::snprintf(buf, sizeof buf, ",%.17g", x);
      os_ << buf;
    };
    os_ << r.step;
    const auto& L = r.ledger;
    for (double x : {L.t, r.dt, L.kinetic, L.stored, L.penalty, L.coupling, L.field, L.field_quadrature,
                     L.external_coupling, L.total(), L.viscous, L.diffusive, L.reactive, L.external_power,
                     r.residual.absolute, r.residual.relative, r.conservation.mass})
      num(x);
    for (int i = 0; i < species_; ++i)
      num(i < static_cast<int>(r.conservation.species.size()) ? r.conservation.species[i] : 0.0);
    num(r.conservation.simplex_sum_l2);
    num(r.conservation.negative_l2);
    num(r.conservation.min_J);
    num(r.conservation.j_consistency);
    os_ << "," << r.conservation.clamp_count << "," << r.retries << "," << r.momentum_iterations << ","
        << to_string(r.limit) << "\n";
    if (!os_) throw IoError("ledger CSV write failed");
  }

  void flush() {
    os_.flush();
    if (!os_) throw IoError("ledger CSV flush failed");
  }

 private:
  std::ofstream os_;
  int species_;
};

/// Parsed ledger CSV: header names and numeric columns (non-numeric cells NaN).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw IoError("CSV has no column '" + name + "'");
  }
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path + "'");
  CsvTable t;
  std::string line;
  if (!std::getline(is, line)) throw IoError("'" + path + "' is empty");
  {
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) t.header.push_back(cell);
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      char* end = nullptr;
      const double x = std::strtod(cell.c_str(), &end);
      row.push_back(end != cell.c_str() && *end == '\0' ? x : std::nan(""));
    }
    if (row.size() != t.header.size()) throw IoError("'" + path + "': row width differs from header");
    t.rows.push_back(std::move(row));
  }
  return t;
}

struct ImageScale {
  double min = 0.0;
  double max = 0.0;
  int width = 0;
  int height = 0;
};

/// Writes component `comp` of a scalar/species field as a PGM image (the
/// mid-plane x3 slice in 3D) and a sidecar `<path>.txt` with the scale.
template <int Dim>
ImageScale write_pgm(const std::string& path, const Field<Dim>& f, int comp, const std::string& label, double t) {
  const auto& g = f.grid();
  ImageScale sc;
  sc.width = g.cells[0];
  sc.height = g.cells[1];
  std::vector<double> vals(static_cast<std::size_t>(sc.width) * sc.height);
  for (int j = 0; j < sc.height; ++j)
    for (int i = 0; i < sc.width; ++i) {
      Index<Dim> idx{};
      idx[0] = i;
      idx[1] = j;
      if constexpr (Dim == 3) idx[2] = g.cells[2] / 2;
      vals[static_cast<std::size_t>(j) * sc.width + i] = f(comp, g.linear(idx));
    }
  const auto [lo, hi] = std::minmax_element(vals.begin(), vals.end());
  sc.min = *lo;
  sc.max = *hi;
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << "P5\n" << sc.width << " " << sc.height << "\n255\n";
  const double span = sc.max - sc.min;
  for (int j = sc.height - 1; j >= 0; --j)  // top row is the largest x2
    for (int i = 0; i < sc.width; ++i) {
      const double x = vals[static_cast<std::size_t>(j) * sc.width + i];
      const double u = span > 0.0 ? (x - sc.min) / span : 0.0;
      os.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * std::clamp(u, 0.0, 1.0)))));
    }
  if (!os) throw IoError("write to '" + path + "' failed");
  std::ofstream side(path + ".txt", std::ios::trunc);
  if (!side) throw IoError("cannot open '" + path + ".txt' for writing");
  char buf[128];
  side << "field " << label << "\n";
  std::snprintf(buf, sizeof buf, "t %.17g\nmin %.17g\nmax %.17g\n", t, sc.min, sc.max);
  side << buf << "width " << sc.width << "\nheight " << sc.height << "\n";
  if constexpr (Dim == 3) side << "slice x3 index " << g.cells[2] / 2 << "\n";
  side << "gray 0 = min, 255 = max, linear\n";
  return sc;
}

}  // namespace sgdf
