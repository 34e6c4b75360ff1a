#pragma once

#include <Eigen/SparseLU>

#include "waveband/numerics/types.hpp"

namespace waveband {

// Crank-Nicolson stepper psi <- (1 + i dt/2 H)^{-1} (1 - i dt/2 H) psi with a
// single sparse LU factorization reused across steps.
class CrankNicolson {
 public:
  template <typename OpScalar>
  CrankNicolson(const SparseHermitianOp<OpScalar>& op, double dt) : dt_(dt) {
    if (!(dt > 0.0)) throw LinearSolveFailure("Crank-Nicolson requires dt > 0");
    const Index n = op.dimension();
    h_ = op.matrix().template cast<cplx>();
    Eigen::SparseMatrix<cplx> lhs = Eigen::SparseMatrix<cplx>(h_) * cplx(0.0, 0.5 * dt);
    Eigen::SparseMatrix<cplx> id(n, n);
    id.setIdentity();
    lhs += id;
    lhs.makeCompressed();
    lu_.analyzePattern(lhs);
    lu_.factorize(lhs);
    if (lu_.info() != Eigen::Success) throw LinearSolveFailure("Crank-Nicolson factorization failed");
  }

  void step(Vec<cplx>& psi, int steps = 1) const {
    for (int s = 0; s < steps; ++s) {
      Vec<cplx> rhs = psi - cplx(0.0, 0.5 * dt_) * (h_ * psi);
      psi = lu_.solve(rhs);
      if (lu_.info() != Eigen::Success || !psi.allFinite())
        throw LinearSolveFailure("Crank-Nicolson step failed");
    }
  }

  double dt() const { return dt_; }

 private:
  double dt_;
  SpMat<cplx> h_;
  Eigen::SparseLU<Eigen::SparseMatrix<cplx>> lu_;
};

template <typename OpScalar>
Vec<cplx> propagate_cn(const SparseHermitianOp<OpScalar>& op, const Vec<cplx>& psi0, double dt, int steps) {
  if (psi0.size() != op.dimension()) throw GridMismatch("propagate_cn: size mismatch");
  CrankNicolson cn(op, dt);
  Vec<cplx> psi = psi0;
  cn.step(psi, steps);
  return psi;
}

}  // namespace waveband
