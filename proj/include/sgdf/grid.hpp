#pragma once

// Uniform cell-centred Cartesian grid, field storage and the discrete
// differential operators shared by every other module.
//
// Cell i along axis a has its centre at (i + 1/2) h_a inside the box [0, L_a].
// Slip-wall axes are closed by one mirrored ghost layer; the mirror rule of a
// component is carried by its Parity (even, odd, or "coordinate-like" for the
// reference map). Periodic axes wrap, and coordinate-like components pick up
// a shift of +-L_a when they cross the seam.

#include <sgdf/errors.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace sgdf {

enum class Boundary { periodic, slip_wall };

template <int Dim>
using Index = std::array<int, Dim>;

template <int Dim>
using Vec = std::array<double, Dim>;

template <int Dim>
struct Grid {
  static_assert(Dim == 2 || Dim == 3, "only d = 2 and d = 3 are supported");

  Index<Dim> cells{};
  Vec<Dim> length{};
  std::array<Boundary, Dim> boundary{};

  static Grid cube(int n, double len, Boundary b = Boundary::slip_wall) {
    Grid g;
    g.cells.fill(n);
    g.length.fill(len);
    g.boundary.fill(b);
    return g;
  }

  void validate() const {
    for (int a = 0; a < Dim; ++a) {
      if (cells[a] < 4) throw ContractViolation("grid: at least 4 cells per axis are required");
      if (!(length[a] > 0.0) || !std::isfinite(length[a]))
        throw ContractViolation("grid: box lengths must be positive and finite");
    }
  }

  double spacing(int a) const { return length[a] / cells[a]; }

  double min_spacing() const {
    double h = spacing(0);
    for (int a = 1; a < Dim; ++a) h = std::min(h, spacing(a));
    return h;
  }

  double cell_volume() const {
    double v = 1.0;
    for (int a = 0; a < Dim; ++a) v *= spacing(a);
    return v;
  }

  double volume() const {
    double v = 1.0;
    for (int a = 0; a < Dim; ++a) v *= length[a];
    return v;
  }

  std::size_t size() const {
    std::size_t s = 1;
    for (int a = 0; a < Dim; ++a) s *= static_cast<std::size_t>(cells[a]);
    return s;
  }

  /// Row-major: the last axis is contiguous.
  std::size_t stride(int a) const {
    std::size_t s = 1;
    for (int b = Dim - 1; b > a; --b) s *= static_cast<std::size_t>(cells[b]);
    return s;
  }

  std::size_t linear(const Index<Dim>& idx) const {
    std::size_t lin = 0;
    for (int a = 0; a < Dim; ++a) lin = lin * static_cast<std::size_t>(cells[a]) + idx[a];
    return lin;
  }

  Index<Dim> unravel(std::size_t lin) const {
    Index<Dim> idx{};
    for (int a = Dim - 1; a >= 0; --a) {
      idx[a] = static_cast<int>(lin % cells[a]);
      lin /= cells[a];
    }
    return idx;
  }

  Vec<Dim> center(const Index<Dim>& idx) const {
    Vec<Dim> x{};
    for (int a = 0; a < Dim; ++a) x[a] = (idx[a] + 0.5) * spacing(a);
    return x;
  }

  bool operator==(const Grid&) const = default;
};

/// Visits every cell in storage order, passing the multi-index and the linear index.
template <int Dim, class F>
void for_each_cell(const Grid<Dim>& g, F&& f) {
  Index<Dim> idx{};
  const std::size_t n = g.size();
  for (std::size_t lin = 0; lin < n; ++lin) {
    f(static_cast<const Index<Dim>&>(idx), lin);
    for (int a = Dim - 1; a >= 0; --a) {
      if (++idx[a] < g.cells[a]) break;
      idx[a] = 0;
    }
  }
}

/// Mirror behaviour of one field component.
///
/// `odd` has bit a set when the component flips sign under reflection through
/// a wall normal to axis a. `coordinate_axis` >= 0 marks a component that
/// behaves like the coordinate x_a itself: mirrored about the wall position
/// and shifted by L_a across a periodic seam.
struct Parity {
  std::uint8_t odd = 0;
  int coordinate_axis = -1;

  bool odd_in(int a) const { return (odd >> a) & 1u; }
  bool operator==(const Parity&) const = default;
};

template <int Dim>
class Field {
 public:
  Field() = default;

  Field(const Grid<Dim>& g, std::vector<Parity> parity, double fill = 0.0)
      : grid_(g), parity_(std::move(parity)), data_(g.size() * parity_.size(), fill) {
    if (parity_.empty()) throw ContractViolation("field: at least one component is required");
  }

  static Field scalar(const Grid<Dim>& g, double fill = 0.0) { return Field(g, {Parity{}}, fill); }

  /// Velocity-like: component a is odd across walls normal to a.
  static Field vector(const Grid<Dim>& g, double fill = 0.0) {
    std::vector<Parity> p(Dim);
    for (int a = 0; a < Dim; ++a) p[a].odd = static_cast<std::uint8_t>(1u << a);
    return Field(g, std::move(p), fill);
  }

  /// Reference-map-like vector: component a mirrors like the coordinate x_a.
  static Field coordinates(const Grid<Dim>& g) {
    std::vector<Parity> p(Dim);
    for (int a = 0; a < Dim; ++a) {
      p[a].odd = static_cast<std::uint8_t>(1u << a);
      p[a].coordinate_axis = a;
    }
    Field f(g, std::move(p));
    for_each_cell(g, [&](const Index<Dim>& idx, std::size_t lin) {
      const auto x = g.center(idx);
      for (int a = 0; a < Dim; ++a) f(a, lin) = x[a];
    });
    return f;
  }

  /// Rank-r Cartesian tensor; component (i_1..i_r) is odd across axis a when
  /// an odd number of its indices equal a.
  static Field tensor(const Grid<Dim>& g, int rank, double fill = 0.0) {
    int count = 1;
    for (int r = 0; r < rank; ++r) count *= Dim;
    std::vector<Parity> p(count);
    for (int c = 0; c < count; ++c) {
      int rest = c;
      std::uint8_t mask = 0;
      for (int r = 0; r < rank; ++r) {
        mask ^= static_cast<std::uint8_t>(1u << (rest % Dim));
        rest /= Dim;
      }
      p[c].odd = mask;
    }
    return Field(g, std::move(p), fill);
  }

  /// n even scalars (concentrations, chemical potentials).
  static Field species(const Grid<Dim>& g, int n, double fill = 0.0) {
    return Field(g, std::vector<Parity>(n), fill);
  }

  const Grid<Dim>& grid() const { return grid_; }
  int components() const { return static_cast<int>(parity_.size()); }
  std::size_t cells() const { return grid_.size(); }
  const Parity& parity(int c) const { return parity_[c]; }
  const std::vector<Parity>& parities() const { return parity_; }

  double& operator()(int c, std::size_t cell) { return data_[c * grid_.size() + cell]; }
  double operator()(int c, std::size_t cell) const { return data_[c * grid_.size() + cell]; }

  std::span<double> component(int c) { return {data_.data() + c * grid_.size(), grid_.size()}; }
  std::span<const double> component(int c) const {
    return {data_.data() + c * grid_.size(), grid_.size()};
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  /// Value of component c at idx displaced by `offset` cells along `axis`,
  /// using the ghost rules when the displaced index leaves the box.
  double shifted(int c, const Index<Dim>& idx, std::size_t lin, int axis, int offset) const {
    const int n = grid_.cells[axis];
    const int i = idx[axis] + offset;
    const auto s = static_cast<std::ptrdiff_t>(grid_.stride(axis));
    const std::size_t base = c * grid_.size();
    if (i >= 0 && i < n) return data_[base + lin + offset * s];
    const Parity& par = parity_[c];
    if (grid_.boundary[axis] == Boundary::periodic) {
      const int wrapped = ((i % n) + n) % n;
      double v = data_[base + lin + (wrapped - idx[axis]) * s];
      if (par.coordinate_axis == axis) v += (i < 0 ? -1.0 : 1.0) * grid_.length[axis];
      return v;
    }
    // slip wall: reflect through the face at 0 or L
    const int mirrored = i < 0 ? -1 - i : 2 * n - 1 - i;
    const double v = data_[base + lin + (mirrored - idx[axis]) * s];
    if (par.coordinate_axis == axis) {
      const double wall = i < 0 ? 0.0 : grid_.length[axis];
      return 2.0 * wall - v;
    }
    return par.odd_in(axis) ? -v : v;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
  }

  double min(int c) const {
    const auto s = component(c);
    return *std::min_element(s.begin(), s.end());
  }
  double max(int c) const {
    const auto s = component(c);
    return *std::max_element(s.begin(), s.end());
  }

  Field& operator+=(const Field& o) {
    check_same(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  Field& operator-=(const Field& o) {
    check_same(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  Field& operator*=(double s) {
    for (double& x : data_) x *= s;
    return *this;
  }
  /// this += s * o
  Field& axpy(double s, const Field& o) {
    check_same(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += s * o.data_[k];
    return *this;
  }

  void check_same(const Field& o) const {
    if (!(grid_ == o.grid_) || parity_.size() != o.parity_.size())
      throw ContractViolation("field: shape mismatch");
  }

 private:
  Grid<Dim> grid_{};
  std::vector<Parity> parity_;
  std::vector<double> data_;
};

template <int Dim>
Field<Dim> operator+(Field<Dim> a, const Field<Dim>& b) {
  return a += b;
}
template <int Dim>
Field<Dim> operator-(Field<Dim> a, const Field<Dim>& b) {
  return a -= b;
}
template <int Dim>
Field<Dim> operator*(double s, Field<Dim> a) {
  return a *= s;
}

// ---------------------------------------------------------------------------
// Centred operators. Gradient and divergence are exact negative adjoints of
// each other (summation by parts) on periodic axes and on slip-wall axes with
// the even/odd pairing above.
// ---------------------------------------------------------------------------

/// Appends a derivative index: component (c, a) = d_a f_c.
template <int Dim>
Field<Dim> gradient(const Field<Dim>& f) {
  const auto& g = f.grid();
  const int nc = f.components();
  std::vector<Parity> par(nc * Dim);
  for (int c = 0; c < nc; ++c)
    for (int a = 0; a < Dim; ++a)
      par[c * Dim + a].odd = static_cast<std::uint8_t>(f.parity(c).odd ^ (1u << a));
  Field<Dim> out(g, std::move(par));
  Vec<Dim> inv2h{};
  for (int a = 0; a < Dim; ++a) inv2h[a] = 0.5 / g.spacing(a);
  for_each_cell(g, [&](const Index<Dim>& idx, std::size_t lin) {
    for (int c = 0; c < nc; ++c)
      for (int a = 0; a < Dim; ++a)
        out(c * Dim + a, lin) =
            (f.shifted(c, idx, lin, a, 1) - f.shifted(c, idx, lin, a, -1)) * inv2h[a];
  });
  return out;
}

/// Contracts the last index with the derivative: out_c = sum_a d_a u_{(c, a)}.
template <int Dim>
Field<Dim> divergence(const Field<Dim>& u) {
  if (u.components() % Dim != 0)
    throw ContractViolation("divergence: component count must be a multiple of the dimension");
  const auto& g = u.grid();
  const int nc = u.components() / Dim;
  std::vector<Parity> par(nc);
  for (int c = 0; c < nc; ++c)
    par[c].odd = static_cast<std::uint8_t>(u.parity(c * Dim).odd ^ 1u);
  Field<Dim> out(g, std::move(par));
  Vec<Dim> inv2h{};
  for (int a = 0; a < Dim; ++a) inv2h[a] = 0.5 / g.spacing(a);
  for_each_cell(g, [&](const Index<Dim>& idx, std::size_t lin) {
    for (int c = 0; c < nc; ++c) {
      double s = 0.0;
      for (int a = 0; a < Dim; ++a) {
        const int k = c * Dim + a;
        s += (u.shifted(k, idx, lin, a, 1) - u.shifted(k, idx, lin, a, -1)) * inv2h[a];
      }
      out(c, lin) = s;
    }
  });
  return out;
}

/// e(v) = (grad v + grad v^T) / 2, with component (i, j) at i * Dim + j.
template <int Dim>
Field<Dim> sym_grad(const Field<Dim>& v) {
  if (v.components() != Dim) throw ContractViolation("sym_grad: expects a vector field");
  const Field<Dim> gv = gradient(v);
  Field<Dim> e = Field<Dim>::tensor(v.grid(), 2);
  for (std::size_t lin = 0; lin < v.cells(); ++lin)
    for (int i = 0; i < Dim; ++i)
      for (int j = 0; j < Dim; ++j)
        e(i * Dim + j, lin) = 0.5 * (gv(i * Dim + j, lin) + gv(j * Dim + i, lin));
  return e;
}

/// Componentwise gradient of a tensor field (rank grows by one).
template <int Dim>
Field<Dim> grad_of_tensor(const Field<Dim>& t) {
  return gradient(t);
}

/// Midpoint-rule integral of one component over the box.
template <int Dim>
double integrate(const Field<Dim>& f, int c = 0) {
  const auto s = f.component(c);
  return std::accumulate(s.begin(), s.end(), 0.0) * f.grid().cell_volume();
}

/// Sum over all components of a .* b, times the cell volume.
template <int Dim>
double inner(const Field<Dim>& a, const Field<Dim>& b) {
  a.check_same(b);
  double s = 0.0;
  for (std::size_t k = 0; k < a.data().size(); ++k) s += a.data()[k] * b.data()[k];
  return s * a.grid().cell_volume();
}

/// Pointwise Frobenius norm over all components.
template <int Dim>
Field<Dim> pointwise_norm(const Field<Dim>& f) {
  Field<Dim> out = Field<Dim>::scalar(f.grid());
  for (std::size_t lin = 0; lin < f.cells(); ++lin) {
    double s = 0.0;
    for (int c = 0; c < f.components(); ++c) s += f(c, lin) * f(c, lin);
    out(0, lin) = std::sqrt(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Compact face operators, used for diffusion. Face (lin, a) sits between cell
// lin and its +a neighbour; faces on slip walls carry zero flux.
// ---------------------------------------------------------------------------

/// Calls f(left_lin, right_lin, axis) for every interior or periodic face.
template <int Dim, class F>
void for_each_face(const Grid<Dim>& g, F&& f) {
  for_each_cell(g, [&](const Index<Dim>& idx, std::size_t lin) {
    for (int a = 0; a < Dim; ++a) {
      const int n = g.cells[a];
      const auto s = g.stride(a);
      if (idx[a] + 1 < n) {
        f(lin, lin + s, a);
      } else if (g.boundary[a] == Boundary::periodic) {
        f(lin, lin - (n - 1) * s, a);
      }
    }
  });
}

}  // namespace sgdf
