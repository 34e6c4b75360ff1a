#pragma once

#include <functional>
#include <limits>

#include "waveband/numerics/types.hpp"

namespace waveband {

template <typename Scalar>
using VecApply = std::function<void(const Vec<Scalar>&, Vec<Scalar>&)>;

struct MinresResult {
  int iterations = 0;
  double residual = 0.0;  // true relative residual ||b - A x|| / ||b||
  bool converged = false;
};

// Preconditioned MINRES for Hermitian (possibly indefinite or singular but
// consistent) systems. `precond` must be Hermitian positive definite when given.
// Restarts on the true residual until it meets `tol` or the budget runs out.
template <typename Scalar>
MinresResult minres(const VecApply<Scalar>& apply, const Vec<Scalar>& b, Vec<Scalar>& x, double tol, int max_iter,
                    const VecApply<Scalar>& precond = nullptr) {
  const Index n = b.size();
  MinresResult out;
  const double bnorm = b.norm();
  x = Vec<Scalar>::Zero(n);
  if (bnorm == 0.0) {
    out.converged = true;
    return out;
  }
  Vec<Scalar> ax(n);
  Vec<Scalar> rhs = b;
  for (int cycle = 0; cycle < 8 && out.iterations < max_iter; ++cycle) {
    Vec<Scalar> dx = Vec<Scalar>::Zero(n);
    Vec<Scalar> r1 = rhs, r2 = rhs, y(n), v(n), w = Vec<Scalar>::Zero(n), w1(n), w2 = Vec<Scalar>::Zero(n);
    if (precond) {
      precond(r1, y);
    } else {
      y = r1;
    }
    double beta1 = std::real(r1.dot(y));
    if (beta1 <= 0.0) break;
    beta1 = std::sqrt(beta1);
    double beta = beta1, oldb = 0.0, dbar = 0.0, epsln = 0.0, phibar = beta1;
    double cs = -1.0, sn = 0.0;
    const double inner_tol = tol * bnorm / std::max(rhs.norm(), 1e-300);
    while (out.iterations < max_iter) {
      ++out.iterations;
      v = y / beta;
      apply(v, y);
      if (oldb != 0.0) y -= (beta / oldb) * r1;
      const double alfa = std::real(v.dot(y));
      y -= (alfa / beta) * r2;
      r1 = r2;
      r2 = y;
      if (precond) {
        precond(r2, y);
      } else {
        y = r2;
      }
      oldb = beta;
      const double bb = std::real(r2.dot(y));
      beta = bb > 0.0 ? std::sqrt(bb) : 0.0;

      const double oldeps = epsln;
      const double delta = cs * dbar + sn * alfa;
      const double gbar = sn * dbar - cs * alfa;
      epsln = sn * beta;
      dbar = -cs * beta;
      double gamma = std::hypot(gbar, beta);
      gamma = std::max(gamma, std::numeric_limits<double>::min());
      cs = gbar / gamma;
      sn = beta / gamma;
      const double phi = cs * phibar;
      phibar = sn * phibar;

      w1 = w2;
      w2 = w;
      w = (v - oldeps * w1 - delta * w2) / gamma;
      dx += phi * w;
      if (phibar <= 0.5 * inner_tol * beta1 || beta == 0.0) break;
    }
    x += dx;
    apply(x, ax);
    rhs = b - ax;
    out.residual = rhs.norm() / bnorm;
    if (out.residual <= tol) {
      out.converged = true;
      return out;
    }
  }
  apply(x, ax);
  out.residual = (b - ax).norm() / bnorm;
  out.converged = out.residual <= tol;
  return out;
}

struct ProjectedSolveOptions {
  int max_iterations = 20000;
  Index dense_fallback_below = 2000;
  bool force_dense = false;
};

// Solves (A - shift) u = P rhs on the orthogonal complement of `exclude`
// (P = 1 - |e><e|), returning u with <e, u> = 0. `exclude` must be normalized
// in the Euclidean inner product. MINRES first; dense LU when it fails and the
// dimension is small.
template <typename Scalar, typename OpScalar>
Vec<Scalar> solve_shifted_projected(const SparseHermitianOp<OpScalar>& op, double shift, const Vec<Scalar>& exclude,
                                    const Vec<Scalar>& rhs, double tol = 1e-10, ProjectedSolveOptions opt = {},
                                    const VecApply<Scalar>& precond = nullptr) {
  const Index n = op.dimension();
  if (exclude.size() != n || rhs.size() != n) throw GridMismatch("solve_shifted_projected: size mismatch");
  auto project = [&](Vec<Scalar>& z) { z -= exclude * exclude.dot(z); };
  Vec<Scalar> b = rhs;
  project(b);
  const double rnorm = rhs.norm();
  if (b.norm() <= 1e-15 * std::max(rnorm, 1e-300)) return Vec<Scalar>::Zero(n);

  Vec<Scalar> u;
  bool done = false;
  if (!opt.force_dense) {
    VecApply<Scalar> a = [&](const Vec<Scalar>& x, Vec<Scalar>& y) {
      Vec<Scalar> px = x;
      project(px);
      y.noalias() = op.matrix() * px;
      y -= shift * px;
      project(y);
    };
    VecApply<Scalar> m = nullptr;
    if (precond) {
      m = [&](const Vec<Scalar>& x, Vec<Scalar>& y) {
        Vec<Scalar> px = x;
        project(px);
        precond(px, y);
        project(y);
        y += exclude * exclude.dot(x);
      };
    }
    // MINRES works on the projected residual; request a slightly tighter
    // target so the unprojected bound against ||rhs|| holds.
    const double inner = tol * rnorm / b.norm();
    MinresResult res = minres<Scalar>(a, b, u, inner, opt.max_iterations, m);
    done = res.converged;
  }
  if (!done) {
    if (n >= opt.dense_fallback_below)
      throw NonConvergence("projected MINRES failed to converge (gap too small or wrong shift?)");
    Mat<Scalar> dense = Mat<Scalar>(op.matrix().template cast<Scalar>());
    dense.diagonal().array() -= shift;
    Mat<Scalar> p = Mat<Scalar>::Identity(n, n) - exclude * exclude.adjoint();
    Mat<Scalar> sys = p * dense * p + exclude * exclude.adjoint();
    u = Eigen::PartialPivLU<Mat<Scalar>>(sys).solve(b);
  }
  project(u);
  return u;
}

}  // namespace waveband
