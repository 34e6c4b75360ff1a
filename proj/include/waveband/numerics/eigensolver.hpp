#pragma once

#include <cstdint>
#include <numeric>
#include <random>

#include "waveband/numerics/types.hpp"

namespace waveband {

enum class SpectrumTarget { lowest, largest_magnitude };

struct EigenOptions {
  double tol = 1e-10;
  int block_size = 0;  // 0 picks min(k, 8) clamped to >= 2
  int max_basis = 0;   // 0 picks max(3k, k + 4 block, 24)
  int max_iterations = 5000;
  int check_every = 4;  // Rayleigh-Ritz cadence for the unpreconditioned Krylov expansion
  std::uint64_t seed = 0x5eed;
  SpectrumTarget target = SpectrumTarget::lowest;
  // Pairs that must meet the tolerance; the rest of the k act as guard vectors. 0 means all.
  int wanted = 0;
  // Below this dimension the problem is solved densely.
  Index dense_cutoff = 64;
};

namespace detail {

template <typename Scalar>
void fill_random(Mat<Scalar>& x, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  for (Index j = 0; j < x.cols(); ++j)
    for (Index i = 0; i < x.rows(); ++i) {
      if constexpr (std::is_same_v<Scalar, double>) {
        x(i, j) = g(rng);
      } else {
        const double re = g(rng);
        x(i, j) = Scalar(re, g(rng));
      }
    }
}

// Orthonormalizes the columns of w against the first `m` columns of v and
// among themselves (two passes of classical Gram-Schmidt). Columns that lose
// more than 1e-10 of their norm are dropped.
template <typename Scalar>
Mat<Scalar> orthonormalize_against(const Mat<Scalar>& v, Index m, Mat<Scalar> w) {
  if (m > 0) {
    for (int pass = 0; pass < 2; ++pass) w.noalias() -= v.leftCols(m) * (v.leftCols(m).adjoint() * w);
  }
  std::vector<Index> keep;
  for (Index j = 0; j < w.cols(); ++j) {
    const double before = w.col(j).norm();
    if (before == 0.0) continue;
    for (int pass = 0; pass < 2; ++pass) {
      if (m > 0) w.col(j) -= v.leftCols(m) * (v.leftCols(m).adjoint() * w.col(j));
      for (Index q : keep) w.col(j) -= w.col(q) * w.col(q).dot(w.col(j));
    }
    const double after = w.col(j).norm();
    if (after <= 1e-10 * before) continue;
    w.col(j) /= after;
    keep.push_back(j);
  }
  Mat<Scalar> out(w.rows(), static_cast<Index>(keep.size()));
  for (std::size_t q = 0; q < keep.size(); ++q) out.col(static_cast<Index>(q)) = w.col(keep[q]);
  return out;
}

inline std::vector<Index> target_order(const Eigen::VectorXd& theta, SpectrumTarget target) {
  std::vector<Index> order(static_cast<std::size_t>(theta.size()));
  std::iota(order.begin(), order.end(), Index{0});
  if (target == SpectrumTarget::largest_magnitude) {
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return std::abs(theta(a)) > std::abs(theta(b)); });
  }
  return order;
}

}  // namespace detail

// Restarted block subspace iteration with Rayleigh-Ritz extraction.
// Without a preconditioner the basis grows along the block Krylov sequence
// (block Lanczos with full reorthogonalization and thick restart); with one,
// residuals are preconditioned (block Davidson). Returned pairs are ordered
// ascending by eigenvalue for `lowest` and by decreasing magnitude otherwise.
template <typename Scalar>
EigpairSet<Scalar> subspace_eigensolve(Index n, int k, const BlockApply<Scalar>& apply, EigenOptions opt = {},
                                       const BlockApply<Scalar>& precond = nullptr) {
  if (k < 1 || k >= n) throw DimensionTooSmall("need 1 <= k < dimension");
  const int b = opt.block_size > 0 ? opt.block_size : std::clamp(k, 2, 8);
  const Index mb = std::min<Index>(n, opt.max_basis > 0 ? opt.max_basis : std::max({3 * k, k + 4 * b, 24}));
  const int wanted = opt.wanted > 0 ? std::min(opt.wanted, k) : k;
  std::mt19937_64 rng(opt.seed);

  if (n <= opt.dense_cutoff || mb >= n) {
    Mat<Scalar> dense(n, n);
    apply(Mat<Scalar>::Identity(n, n), dense);
    dense = (dense + dense.adjoint()).eval() * 0.5;
    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(dense);
    auto order = detail::target_order(es.eigenvalues(), opt.target);
    EigpairSet<Scalar> out;
    out.eigenvalues.resize(k);
    out.eigenvectors.resize(n, k);
    out.residual_norms.resize(k);
    for (int j = 0; j < k; ++j) {
      out.eigenvalues(j) = es.eigenvalues()(order[j]);
      out.eigenvectors.col(j) = es.eigenvectors().col(order[j]);
    }
    Mat<Scalar> ax(n, k);
    apply(out.eigenvectors, ax);
    for (int j = 0; j < k; ++j) out.residual_norms(j) = (ax.col(j) - out.eigenvalues(j) * out.eigenvectors.col(j)).norm();
    return out;
  }

  Mat<Scalar> v(n, mb), av(n, mb), h = Mat<Scalar>::Zero(mb, mb);
  Index m = 0;
  Mat<Scalar> w(n, b);
  detail::fill_random(w, rng);

  Eigen::VectorXd theta_k(k), res_k(k);
  Mat<Scalar> ritz_y;
  Eigen::VectorXd ritz_theta;
  std::vector<Index> order;

  for (int it = 0; it < opt.max_iterations; ++it) {
    Mat<Scalar> q = detail::orthonormalize_against(v, m, w);
    const Index room = mb - m;
    if (q.cols() > room) q = q.leftCols(room).eval();
    if (q.cols() == 0) {
      Mat<Scalar> r(n, b);
      detail::fill_random(r, rng);
      q = detail::orthonormalize_against(v, m, r);
      if (q.cols() > room) q = q.leftCols(room).eval();
      if (q.cols() == 0) throw NonConvergence("eigensolver basis exhausted");
    }
    Mat<Scalar> aq(n, q.cols());
    apply(q, aq);
    const Index nb = q.cols();
    v.middleCols(m, nb) = q;
    av.middleCols(m, nb) = aq;
    Mat<Scalar> c = v.leftCols(m + nb).adjoint() * aq;
    h.block(0, m, m + nb, nb) = c;
    h.block(m, 0, nb, m + nb) = c.adjoint();
    m += nb;
    {
      Mat<Scalar> d = h.block(m - nb, m - nb, nb, nb);
      h.block(m - nb, m - nb, nb, nb) = (d + d.adjoint()) * 0.5;
    }

    const bool full = m + b > mb;
    const bool check = precond || full || (it % opt.check_every == opt.check_every - 1) || m >= k + b;
    if (!check) {
      w = aq;
      continue;
    }
    if (m < k) {
      w = aq;
      continue;
    }

    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(h.topLeftCorner(m, m));
    ritz_theta = es.eigenvalues();
    ritz_y = es.eigenvectors();
    order = detail::target_order(ritz_theta, opt.target);

    Mat<Scalar> yk(m, k);
    for (int j = 0; j < k; ++j) {
      yk.col(j) = ritz_y.col(order[j]);
      theta_k(j) = ritz_theta(order[j]);
    }
    Mat<Scalar> x = v.leftCols(m) * yk;
    Mat<Scalar> r = av.leftCols(m) * yk - x * theta_k.asDiagonal();
    std::vector<Index> unconverged;
    for (int j = 0; j < k; ++j) {
      res_k(j) = r.col(j).norm();
      if (j < wanted && res_k(j) > opt.tol * (1.0 + std::abs(theta_k(j)))) unconverged.push_back(j);
    }

    if (unconverged.empty()) {
      // Confirm with freshly applied operator to rule out drift in the stored images.
      Mat<Scalar> ax(n, k);
      apply(x, ax);
      bool ok = true;
      for (int j = 0; j < k; ++j) {
        res_k(j) = (ax.col(j) - theta_k(j) * x.col(j)).norm();
        if (j < wanted && res_k(j) > opt.tol * (1.0 + std::abs(theta_k(j)))) ok = false;
      }
      if (ok) {
        EigpairSet<Scalar> out;
        out.iterations = it + 1;
        std::vector<Index> idx(static_cast<std::size_t>(k));
        std::iota(idx.begin(), idx.end(), Index{0});
        if (opt.target == SpectrumTarget::lowest)
          std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index bb) { return theta_k(a) < theta_k(bb); });
        out.eigenvalues.resize(k);
        out.residual_norms.resize(k);
        out.eigenvectors.resize(n, k);
        for (int j = 0; j < k; ++j) {
          out.eigenvalues(j) = theta_k(idx[j]);
          out.residual_norms(j) = res_k(idx[j]);
          out.eigenvectors.col(j) = x.col(idx[j]);
        }
        return out;
      }
      // Refresh stored images and keep iterating.
      av.leftCols(m) = Mat<Scalar>::Zero(n, m);
      Mat<Scalar> vv = v.leftCols(m);
      Mat<Scalar> avv(n, m);
      apply(vv, avv);
      av.leftCols(m) = avv;
      Mat<Scalar> hh = vv.adjoint() * avv;
      h.topLeftCorner(m, m) = (hh + hh.adjoint()) * 0.5;
      for (int j = 0; j < wanted; ++j) unconverged.push_back(j);
    }

    // Next expansion block.
    Mat<Scalar> next(n, std::min<Index>(b, static_cast<Index>(unconverged.size())));
    if (precond || full) {
      for (Index j = 0; j < next.cols(); ++j) next.col(j) = r.col(unconverged[static_cast<std::size_t>(j)]);
      if (precond) {
        Mat<Scalar> t(n, next.cols());
        precond(next, t);
        next = t;
      }
    } else {
      next = aq;
    }

    if (full) {
      const Index keep = std::min<Index>(m - 1, std::max<Index>(k + b, mb / 2));
      Mat<Scalar> yp(m, keep);
      Eigen::VectorXd tp(keep);
      for (Index j = 0; j < keep; ++j) {
        yp.col(j) = ritz_y.col(order[static_cast<std::size_t>(j)]);
        tp(j) = ritz_theta(order[static_cast<std::size_t>(j)]);
      }
      Mat<Scalar> nv = v.leftCols(m) * yp;
      Mat<Scalar> nav = av.leftCols(m) * yp;
      v.leftCols(keep) = nv;
      av.leftCols(keep) = nav;
      h.setZero();
      h.topLeftCorner(keep, keep) = tp.cast<Scalar>().asDiagonal();
      m = keep;
    }
    w = next;
  }
  throw NonConvergence("eigensolver iteration budget exhausted");
}

template <typename Scalar>
EigpairSet<Scalar> lowest_eigenpairs(const SparseHermitianOp<Scalar>& op, int k, double tol = 1e-10,
                                     EigenOptions opt = {}) {
  opt.tol = tol;
  opt.target = SpectrumTarget::lowest;
  return subspace_eigensolve<Scalar>(op.dimension(), k, op.as_block_apply(), opt);
}

}  // namespace waveband
