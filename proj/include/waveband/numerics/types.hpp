#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "waveband/errors.hpp"

namespace waveband {

using Index = Eigen::Index;
using cplx = std::complex<double>;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using SpMat = Eigen::SparseMatrix<Scalar, Eigen::RowMajor>;
template <typename Scalar>
using Triplets = std::vector<Eigen::Triplet<Scalar>>;

// Applies an operator to a block of column vectors: Y = A X.
template <typename Scalar>
using BlockApply = std::function<void(const Mat<Scalar>&, Mat<Scalar>&)>;

inline constexpr double kHermitianTol = 1e-13;

inline double conj_of(double v) { return v; }
inline cplx conj_of(cplx v) { return std::conj(v); }

// Largest relative mismatch |A_ij - conj(A_ji)| / max(|A_ij|, |A_ji|) over stored entries.
// Entries below 1e-300 on both sides are skipped.
template <typename Scalar>
double hermiticity_defect(const SpMat<Scalar>& m) {
  if (m.rows() != m.cols()) return 1.0;
  SpMat<Scalar> adj = m.adjoint();
  double worst = 0.0;
  for (Index r = 0; r < m.outerSize(); ++r) {
    typename SpMat<Scalar>::InnerIterator it(m, r);
    typename SpMat<Scalar>::InnerIterator jt(adj, r);
    // Merge the two sorted rows.
    while (it || jt) {
      Scalar a{0}, b{0};
      if (it && (!jt || it.col() < jt.col())) {
        a = it.value();
        ++it;
      } else if (jt && (!it || jt.col() < it.col())) {
        b = jt.value();
        ++jt;
      } else {
        a = it.value();
        b = jt.value();
        ++it;
        ++jt;
      }
      const double scale = std::max(std::abs(a), std::abs(b));
      if (scale < 1e-300) continue;
      worst = std::max(worst, std::abs(a - b) / scale);
    }
  }
  return worst;
}

// Immutable Hermitian sparse matrix. Construction sums duplicate entries and
// rejects matrices that are not Hermitian to `tol` (relative, entrywise).
template <typename Scalar>
class SparseHermitianOp {
 public:
  using Matrix = SpMat<Scalar>;

  SparseHermitianOp() = default;

  explicit SparseHermitianOp(Matrix m, double tol = kHermitianTol) : m_(std::move(m)) {
    m_.makeCompressed();
    if (m_.rows() != m_.cols()) throw NotHermitian("operator is not square");
    const double defect = hermiticity_defect(m_);
    if (defect > tol) throw NotHermitian("hermiticity defect " + std::to_string(defect));
    for (Index r = 0; r < m_.outerSize(); ++r) {
      double row = 0.0;
      for (typename Matrix::InnerIterator it(m_, r); it; ++it) row += std::abs(it.value());
      norm_ = std::max(norm_, row);
    }
  }

  static SparseHermitianOp from_triplets(Index n, const Triplets<Scalar>& t, double tol = kHermitianTol) {
    Matrix m(n, n);
    m.setFromTriplets(t.begin(), t.end());
    return SparseHermitianOp(std::move(m), tol);
  }

  Index dimension() const { return m_.rows(); }
  const Matrix& matrix() const { return m_; }
  // Max absolute row sum; bounds the spectral radius.
  double norm_estimate() const { return norm_; }

  Triplets<Scalar> entries() const {
    Triplets<Scalar> out;
    out.reserve(static_cast<std::size_t>(m_.nonZeros()));
    for (Index r = 0; r < m_.outerSize(); ++r)
      for (typename Matrix::InnerIterator it(m_, r); it; ++it) out.emplace_back(it.row(), it.col(), it.value());
    return out;
  }

  template <typename Derived>
  auto operator*(const Eigen::MatrixBase<Derived>& x) const {
    return m_ * x.derived();
  }

  BlockApply<Scalar> as_block_apply() const {
    return [this](const Mat<Scalar>& x, Mat<Scalar>& y) { y.noalias() = m_ * x; };
  }

 private:
  Matrix m_;
  double norm_ = 0.0;
};

template <typename Scalar>
struct EigpairSet {
  Eigen::VectorXd eigenvalues;
  Mat<Scalar> eigenvectors;
  Eigen::VectorXd residual_norms;
  int iterations = 0;

  Index size() const { return eigenvalues.size(); }
};

}  // namespace waveband
