#pragma once

// Matrix-free preconditioned conjugate gradients over Field vectors.

#include <sgdf/grid.hpp>

#include <cmath>
#include <functional>

namespace sgdf {

struct CgResult {
  int iterations = 0;
  double residual = 0.0;  ///< final ||r|| / ||b||
  bool converged = false;
};

struct CgOptions {
  double tolerance = 1e-12;
  int max_iterations = 2000;
};

/// Solves A x = b for a symmetric positive definite operator A. `x` holds the
/// initial guess on entry. `precond` applies an SPD approximation of A^{-1};
/// pass an empty function for plain CG.
template <int Dim>
CgResult conjugate_gradient(const std::function<Field<Dim>(const Field<Dim>&)>& apply,
                            const Field<Dim>& b, Field<Dim>& x,
                            const std::function<Field<Dim>(const Field<Dim>&)>& precond = {},
                            const CgOptions& opt = {}) {
  CgResult res;
  auto dot = [](const Field<Dim>& u, const Field<Dim>& w) {
    double s = 0.0;
    for (std::size_t k = 0; k < u.data().size(); ++k) s += u.data()[k] * w.data()[k];
    return s;
  };
  const double bnorm = std::sqrt(dot(b, b));
  if (bnorm == 0.0) {
    x *= 0.0;
    res.converged = true;
    return res;
  }
  Field<Dim> r = b;
  r -= apply(x);
  Field<Dim> z = precond ? precond(r) : r;
  Field<Dim> p = z;
  double rz = dot(r, z);
  for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
    res.residual = std::sqrt(dot(r, r)) / bnorm;
    if (res.residual <= opt.tolerance) {
      res.converged = true;
      return res;
    }
    const Field<Dim> Ap = apply(p);
    const double pAp = dot(p, Ap);
    if (!(pAp > 0.0)) break;
    const double alpha = rz / pAp;
    x.axpy(alpha, p);
    r.axpy(-alpha, Ap);
    z = precond ? precond(r) : r;
    const double rz_next = dot(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    p *= beta;
    p += z;
  }
  res.residual = std::sqrt(dot(r, r)) / bnorm;
  res.converged = res.residual <= opt.tolerance;
  return res;
}

}  // namespace sgdf
