#pragma once

// Multicomponent concentrations near the Gibbs simplex: exterior penalty,
// chemical potentials, mobility (constant SPD or Maxwell-Stefan), reactions
// and the split advection / diffusion / reaction step.

#include <sgdf/constitutive.hpp>
#include <sgdf/errors.hpp>
#include <sgdf/grid.hpp>
#include <sgdf/kinematics.hpp>
#include <sgdf/linalg.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace sgdf {

inline constexpr int max_species = 6;

using SmallMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, max_species, max_species>;
using SmallVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, max_species, 1>;

enum class MobilityModel { constant, maxwell_stefan, none };

inline std::string to_string(MobilityModel m) {
  switch (m) {
    case MobilityModel::constant: return "constant";
    case MobilityModel::maxwell_stefan: return "maxwell-stefan";
    case MobilityModel::none: return "none";
  }
  return "?";
}

/// One reaction channel: rate k and a stoichiometric direction b with
/// sum_i b_i = 0. The reaction matrix is K = sum_r k_r b_r b_r^T, so K 1 = 0
/// and K is positive semidefinite by construction.
struct ReactionChannel {
  std::vector<double> direction;
  double rate = 0.0;
};

struct MixtureSpec {
  int n = 2;
  MobilityModel mobility = MobilityModel::constant;
  std::vector<double> mobility_matrix;  ///< n x n row-major, constant mode
  double ms_modulus = 0.0;              ///< m in m (diag(c) - c c^T)
  std::vector<ReactionChannel> reactions;
  double eps_pen = 1e-4;
  CgOptions solver{1e-12, 5000};

  SmallMat constant_mobility() const {
    SmallMat M(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) M(i, j) = mobility_matrix[i * n + j];
    return M;
  }

  SmallMat reaction_matrix() const {
    SmallMat K = SmallMat::Zero(n, n);
    for (const auto& r : reactions)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) K(i, j) += r.rate * r.direction[i] * r.direction[j];
    return K;
  }

  /// Turns every reaction direction into a mean-free vector (sum exactly 0
  /// for integer-valued stoichiometry such as e_i - e_j).
  void normalize_reactions() {
    for (auto& r : reactions) {
      const double mean = std::accumulate(r.direction.begin(), r.direction.end(), 0.0) / n;
      if (mean != 0.0)
        for (double& b : r.direction) b -= mean;
    }
  }

  void validate() const {
    if (n < 2 || n > max_species)
      throw ConfigError("mixture.n", "species count must be in [2, " + std::to_string(max_species) + "]");
    if (!(eps_pen > 0.0)) throw ConfigError("mixture.eps_pen", "penalization strength must be > 0");
    if (mobility == MobilityModel::constant) {
      if (static_cast<int>(mobility_matrix.size()) != n * n)
        throw ConfigError("mixture.mobility_matrix", "needs n*n entries");
      const SmallMat M = constant_mobility();
      if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-14 * (1.0 + M.cwiseAbs().maxCoeff()))
        throw ConfigError("mixture.mobility_matrix", "must be symmetric");
      Eigen::LLT<SmallMat> llt(M);
      if (llt.info() != Eigen::Success)
        throw ConfigError("mixture.mobility_matrix", "must be positive definite");
    }
    if (mobility == MobilityModel::maxwell_stefan && !(ms_modulus >= 0.0))
      throw ConfigError("mixture.ms_modulus", "must be >= 0");
    for (const auto& r : reactions) {
      if (static_cast<int>(r.direction.size()) != n)
        throw ConfigError("mixture.reactions", "each direction needs n entries");
      if (!(r.rate >= 0.0)) throw ConfigError("mixture.reactions", "rates must be >= 0");
      const double s = std::accumulate(r.direction.begin(), r.direction.end(), 0.0);
      double scale = 0.0;
      for (double b : r.direction) scale = std::max(scale, std::abs(b));
      if (std::abs(s) > 1e-12 * (1.0 + scale))
        throw ConfigError("mixture.reactions", "directions must sum to zero (K 1 = 0)");
    }
  }
};

// ---------------------------------------------------------------------------
// Pointwise pieces
// ---------------------------------------------------------------------------

struct PenaltyValue {
  double value = 0.0;
  std::vector<double> gradient;
  std::vector<double> hessian;  ///< n x n row-major
};

/// P_eps(c) = (1/2eps) sum_i min(0, c_i)^2 + (1/2eps) (sum_i c_i - 1)^2.
inline PenaltyValue penalty(std::span<const double> c, double eps) {
  if (!(eps > 0.0)) throw ContractViolation("penalty: eps must be > 0");
  const std::size_t n = c.size();
  PenaltyValue p;
  p.gradient.assign(n, 0.0);
  p.hessian.assign(n * n, 1.0 / eps);
  double sum = 0.0, neg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum += c[i];
    if (c[i] < 0.0) {
      neg += c[i] * c[i];
      p.gradient[i] += c[i] / eps;
      p.hessian[i * n + i] += 1.0 / eps;
    }
  }
  const double s = sum - 1.0;
  p.value = 0.5 * (neg + s * s) / eps;
  for (std::size_t i = 0; i < n; ++i) p.gradient[i] += s / eps;
  return p;
}

inline double penalty_value(std::span<const double> c, double eps) {
  double sum = 0.0, neg = 0.0;
  for (double x : c) {
    sum += x;
    if (x < 0.0) neg += x * x;
  }
  return 0.5 * (neg + (sum - 1.0) * (sum - 1.0)) / eps;
}

/// (P mu)_i = mu_i - mean(mu).
inline std::vector<double> projection_P(std::span<const double> mu) {
  const double mean = std::accumulate(mu.begin(), mu.end(), 0.0) / static_cast<double>(mu.size());
  std::vector<double> out(mu.begin(), mu.end());
  for (double& x : out) x -= mean;
  return out;
}

/// Euclidean projection onto the simplex {c >= 0, sum c = 1}.
inline std::vector<double> project_to_simplex(std::span<const double> c) {
  std::vector<double> u(c.begin(), c.end());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0, theta = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    cum += u[k];
    const double t = (cum - 1.0) / static_cast<double>(k + 1);
    if (u[k] - t > 0.0) theta = t;
  }
  std::vector<double> out(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) out[i] = std::max(c[i] - theta, 0.0);
  return out;
}

/// m (diag(c) - c c^T) with c first projected onto the simplex, which keeps
/// the matrix positive semidefinite with kernel containing 1.
inline SmallMat maxwell_stefan_mobility(std::span<const double> c, double m) {
  const auto p = project_to_simplex(c);
  const int n = static_cast<int>(c.size());
  SmallMat M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = m * ((i == j ? p[i] : 0.0) - p[i] * p[j]);
  return M;
}

/// mu = d_c phi_1(c) / J + P_eps'(c) at one point.
template <int Dim>
void chemical_potential_at(std::span<const double> c, double J, const MaterialLaw<Dim>& law,
                           const MixtureSpec& spec, std::span<double> mu) {
  double sum = 0.0;
  for (double x : c) sum += x;
  const double s = (sum - 1.0) / spec.eps_pen;
  for (std::size_t i = 0; i < c.size(); ++i) {
    mu[i] = law.mixing.derivative(c, i) / J + s;
    if (c[i] < 0.0) mu[i] += c[i] / spec.eps_pen;
  }
}

/// d mu / d c at one point (lagged active set of the penalty).
template <int Dim>
SmallMat potential_hessian(std::span<const double> c, double J, const MaterialLaw<Dim>& law,
                           const MixtureSpec& spec) {
  const int n = static_cast<int>(c.size());
  SmallMat H = SmallMat::Constant(n, n, 1.0 / spec.eps_pen);
  for (int i = 0; i < n; ++i) {
    H(i, i) += law.mixing.modulus / J;
    if (c[i] < 0.0) H(i, i) += 1.0 / spec.eps_pen;
  }
  return H;
}

// ---------------------------------------------------------------------------
// Field-level operations
// ---------------------------------------------------------------------------

template <int Dim>
struct SpeciesState {
  Field<Dim> c;   ///< mass fractions
  Field<Dim> mu;  ///< chemical potentials
};

template <int Dim>
Field<Dim> chemical_potential(const Field<Dim>& c, const Field<Dim>& J, const Field<Dim>& /*xi*/,
                              const MaterialLaw<Dim>& law, const MixtureSpec& spec) {
  const int n = c.components();
  Field<Dim> mu = Field<Dim>::species(c.grid(), n);
  std::vector<double> cb(n), mb(n);
  for (std::size_t k = 0; k < c.cells(); ++k) {
    if (!(J(0, k) > 0.0)) throw PositivityFailure("chemical_potential: J <= 0");
    for (int i = 0; i < n; ++i) cb[i] = c(i, k);
    chemical_potential_at<Dim>(cb, J(0, k), law, spec, mb);
    for (int i = 0; i < n; ++i) mu(i, k) = mb[i];
  }
  return mu;
}

/// Subtracts (1/n) of the global spatial mean of mu . 1 from every species.
template <int Dim>
Field<Dim> projection_Q(const Field<Dim>& mu) {
  const int n = mu.components();
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += integrate(mu, i);
  const double shift = total / (n * mu.grid().volume());
  Field<Dim> out = mu;
  for (double& x : out.data()) x -= shift;
  return out;
}

/// r = K mu, mu the penalized chemical potential.
template <int Dim>
Field<Dim> reaction_rate(const Field<Dim>& c, const Field<Dim>& J, const Field<Dim>& xi,
                         const MixtureSpec& spec, const MaterialLaw<Dim>& law) {
  const Field<Dim> mu = chemical_potential(c, J, xi, law, spec);
  const int n = c.components();
  Field<Dim> r = Field<Dim>::species(c.grid(), n);
  for (std::size_t k = 0; k < c.cells(); ++k)
    for (const auto& ch : spec.reactions) {
      double bmu = 0.0;
      for (int i = 0; i < n; ++i) bmu += ch.direction[i] * mu(i, k);
      for (int i = 0; i < n; ++i) r(i, k) += ch.rate * ch.direction[i] * bmu;
    }
  return r;
}

/// Face mobilities for the lagged diffusion operator, one n x n block per
/// face in for_each_face order.
template <int Dim>
std::vector<SmallMat> face_mobilities(const Field<Dim>& c, const MixtureSpec& spec) {
  std::vector<SmallMat> out;
  const int n = c.components();
  const SmallMat Mc = spec.mobility == MobilityModel::constant ? spec.constant_mobility() : SmallMat();
  std::vector<double> avg(n);
  for_each_face(c.grid(), [&](std::size_t l, std::size_t r, int) {
    switch (spec.mobility) {
      case MobilityModel::constant: out.push_back(Mc); break;
      case MobilityModel::none: out.push_back(SmallMat::Zero(n, n)); break;
      case MobilityModel::maxwell_stefan:
        for (int i = 0; i < n; ++i) avg[i] = 0.5 * (c(i, l) + c(i, r));
        out.push_back(maxwell_stefan_mobility(avg, spec.ms_modulus));
        break;
    }
  });
  return out;
}

/// div(M grad mu) with compact face fluxes; zero flux through slip walls.
template <int Dim>
Field<Dim> diffusion_operator(const Field<Dim>& mu, const std::vector<SmallMat>& Mf) {
  const auto& g = mu.grid();
  const int n = mu.components();
  Field<Dim> out = Field<Dim>::species(g, n);
  std::size_t f = 0;
  SmallVec grad(n);
  for_each_face(g, [&](std::size_t l, std::size_t r, int a) {
    const double h = g.spacing(a);
    for (int i = 0; i < n; ++i) grad(i) = (mu(i, r) - mu(i, l)) / h;
    const SmallVec flux = Mf[f++] * grad;
    for (int i = 0; i < n; ++i) {
      out(i, l) += flux(i) / h;
      out(i, r) -= flux(i) / h;
    }
  });
  return out;
}

/// integral of M grad mu : grad mu with the same face stencil as the
/// diffusion operator. Maxwell-Stefan blocks use the manifestly
/// nonnegative form m sum_i c_i (g_i - sum_j c_j g_j)^2.
template <int Dim>
double diffusive_dissipation(const Field<Dim>& c, const Field<Dim>& mu, const MixtureSpec& spec) {
  if (spec.mobility == MobilityModel::none) return 0.0;
  const auto& g = mu.grid();
  const int n = mu.components();
  SmallMat chol;
  if (spec.mobility == MobilityModel::constant) {
    Eigen::LLT<SmallMat> llt(spec.constant_mobility());
    chol = llt.matrixL();
  }
  double s = 0.0;
  std::vector<double> avg(n);
  SmallVec grad(n);
  for_each_face(g, [&](std::size_t l, std::size_t r, int a) {
    const double h = g.spacing(a);
    for (int i = 0; i < n; ++i) grad(i) = (mu(i, r) - mu(i, l)) / h;
    if (spec.mobility == MobilityModel::constant) {
      s += (chol.transpose() * grad).squaredNorm();
    } else {
      for (int i = 0; i < n; ++i) avg[i] = 0.5 * (c(i, l) + c(i, r));
      const auto p = project_to_simplex(avg);
      double mean = 0.0;
      for (int i = 0; i < n; ++i) mean += p[i] * grad(i);
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += p[i] * (grad(i) - mean) * (grad(i) - mean);
      s += spec.ms_modulus * acc;
    }
  });
  return s * g.cell_volume();
}

/// integral of r . mu = sum_r k_r (b_r . mu)^2 >= 0.
template <int Dim>
double reactive_dissipation(const Field<Dim>& mu, const MixtureSpec& spec) {
  const int n = mu.components();
  double s = 0.0;
  for (std::size_t k = 0; k < mu.cells(); ++k)
    for (const auto& ch : spec.reactions) {
      double bmu = 0.0;
      for (int i = 0; i < n; ++i) bmu += ch.direction[i] * mu(i, k);
      s += ch.rate * bmu * bmu;
    }
  return s * mu.grid().cell_volume();
}

/// integral of P_eps(c).
template <int Dim>
double penalty_energy(const Field<Dim>& c, double eps) {
  const int n = c.components();
  std::vector<double> buf(n);
  double s = 0.0;
  for (std::size_t k = 0; k < c.cells(); ++k) {
    for (int i = 0; i < n; ++i) buf[i] = c(i, k);
    s += penalty_value(buf, eps);
  }
  return s * c.grid().cell_volume();
}

/// integral of sum_i c_i.
template <int Dim>
double species_total(const Field<Dim>& c) {
  double s = 0.0;
  for (int i = 0; i < c.components(); ++i) s += integrate(c, i);
  return s;
}

struct MixtureStepReport {
  double total_before_diffusion = 0.0;
  double total_after_diffusion = 0.0;
  double total_after_reaction = 0.0;
  int cg_iterations = 0;
  double cg_residual = 0.0;
};

/// Semi-implicit diffusion with frozen mobility and frozen dmu/dc = H:
/// solve (H^{-1} - dt L) w = dt L mu for the potential increment w, then
/// update c by the flux form dt L (mu + w) so the species totals telescope.
template <int Dim>
Field<Dim> diffusion_substep(const Field<Dim>& c, const Field<Dim>& J, const Field<Dim>& xi, double dt,
                             const MixtureSpec& spec, const MaterialLaw<Dim>& law,
                             MixtureStepReport* report = nullptr) {
  if (spec.mobility == MobilityModel::none) return c;
  const auto& g = c.grid();
  const int n = c.components();
  const Field<Dim> mu = chemical_potential(c, J, xi, law, spec);
  const auto Mf = face_mobilities(c, spec);

  std::vector<SmallMat> Hinv(c.cells());
  std::vector<double> cb(n);
  for (std::size_t k = 0; k < c.cells(); ++k) {
    for (int i = 0; i < n; ++i) cb[i] = c(i, k);
    Hinv[k] = potential_hessian<Dim>(cb, J(0, k), law, spec).inverse();
  }
  // block-Jacobi preconditioner: inverse of H^{-1} + dt * (diagonal face blocks)
  std::vector<SmallMat> diag(c.cells(), SmallMat::Zero(n, n));
  {
    std::size_t f = 0;
    for_each_face(g, [&](std::size_t l, std::size_t r, int a) {
      const double h2 = g.spacing(a) * g.spacing(a);
      diag[l] += Mf[f] / h2;
      diag[r] += Mf[f] / h2;
      ++f;
    });
  }
  std::vector<SmallMat> pinv(c.cells());
  for (std::size_t k = 0; k < c.cells(); ++k) pinv[k] = (Hinv[k] + dt * diag[k]).inverse();

  auto block_apply = [&](const std::vector<SmallMat>& blocks, const Field<Dim>& x) {
    Field<Dim> y = Field<Dim>::species(g, n);
    SmallVec xv(n);
    for (std::size_t k = 0; k < x.cells(); ++k) {
      for (int i = 0; i < n; ++i) xv(i) = x(i, k);
      const SmallVec yv = blocks[k] * xv;
      for (int i = 0; i < n; ++i) y(i, k) = yv(i);
    }
    return y;
  };
  auto apply = [&](const Field<Dim>& w) {
    Field<Dim> y = block_apply(Hinv, w);
    y.axpy(-dt, diffusion_operator(w, Mf));
    return y;
  };
  Field<Dim> rhs = diffusion_operator(mu, Mf);
  rhs *= dt;
  Field<Dim> w = Field<Dim>::species(g, n);
  const CgResult res = conjugate_gradient<Dim>(
      apply, rhs, w, [&](const Field<Dim>& r) { return block_apply(pinv, r); }, spec.solver);
  if (report) {
    report->cg_iterations = res.iterations;
    report->cg_residual = res.residual;
  }
  if (!res.converged) {
    std::ostringstream os;
    os << "diffusion: CG stalled after " << res.iterations << " iterations (relative residual "
       << res.residual << ")";
    throw StabilityRejection(os.str());
  }
  Field<Dim> mu_next = mu;
  mu_next += w;
  Field<Dim> out = c;
  out.axpy(dt, diffusion_operator(mu_next, Mf));
  return out;
}

/// Pointwise semi-implicit reaction: (I + dt K H) d = -dt K mu, then the
/// increment is re-expressed as -dt K (mu + H d) so it lies in range(K).
template <int Dim>
Field<Dim> reaction_substep(const Field<Dim>& c, const Field<Dim>& J, double dt, const MixtureSpec& spec,
                            const MaterialLaw<Dim>& law) {
  if (spec.reactions.empty()) return c;
  const int n = c.components();
  const SmallMat K = spec.reaction_matrix();
  const SmallMat I = SmallMat::Identity(n, n);
  Field<Dim> out = c;
  std::vector<double> cb(n), mb(n);
  SmallVec mu(n);
  for (std::size_t k = 0; k < c.cells(); ++k) {
    for (int i = 0; i < n; ++i) cb[i] = c(i, k);
    chemical_potential_at<Dim>(cb, J(0, k), law, spec, mb);
    for (int i = 0; i < n; ++i) mu(i) = mb[i];
    const SmallMat H = potential_hessian<Dim>(cb, J(0, k), law, spec);
    const SmallVec d = (I + dt * K * H).partialPivLu().solve(-dt * K * mu);
    const SmallVec arg = mu + H * d;
    for (const auto& ch : spec.reactions) {
      double b = 0.0;
      for (int i = 0; i < n; ++i) b += ch.direction[i] * arg(i);
      for (int i = 0; i < n; ++i) out(i, k) -= dt * ch.rate * ch.direction[i] * b;
    }
  }
  return out;
}

/// Advection by v (upwind), then diffusion, then reaction; mu refreshed at
/// the end.
template <int Dim>
SpeciesState<Dim> diffusion_reaction_step(const SpeciesState<Dim>& state, const Field<Dim>& v,
                                          const Field<Dim>& J, const Field<Dim>& xi, double dt,
                                          const MixtureSpec& spec, const MaterialLaw<Dim>& law,
                                          Limiter limiter = Limiter::none,
                                          MixtureStepReport* report = nullptr) {
  SpeciesState<Dim> next;
  next.c = transport(state.c, v, dt, limiter);
  if (report) report->total_before_diffusion = species_total(next.c);
  next.c = diffusion_substep(next.c, J, xi, dt, spec, law, report);
  if (report) report->total_after_diffusion = species_total(next.c);
  next.c = reaction_substep(next.c, J, dt, spec, law);
  if (report) report->total_after_reaction = species_total(next.c);
  if (!next.c.all_finite()) throw ContractViolation("mixture: non-finite concentration");
  next.mu = chemical_potential(next.c, J, xi, law, spec);
  return next;
}

}  // namespace sgdf
