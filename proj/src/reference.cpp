#include "waveband/reference.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "waveband/parallel.hpp"

namespace waveband {

double faded_metric(double s, double fade_start, double h_floor) {
  if (s <= fade_start) return 1.0 - s;
  const double span = 1.0 - fade_start - h_floor;
  return h_floor + span * std::exp(-(s - fade_start) / span);
}

void faded_metric_derivatives(double s, double fade_start, double h_floor, double& d1, double& d2) {
  if (s <= fade_start) {
    d1 = -1.0;
    d2 = 0.0;
    return;
  }
  const double span = 1.0 - fade_start - h_floor;
  const double e = std::exp(-(s - fade_start) / span);
  d1 = -e;
  d2 = e / span;
}

namespace {

struct Stencil {
  std::vector<Index> idx;
  std::vector<double> val;
  void add(Index i, double v) {
    idx.push_back(i);
    val.push_back(v);
  }
};

// Adds c * a a^T for the sparse row vector a.
void add_square(Triplets<double>& t, const Stencil& a, double c) {
  for (std::size_t j = 0; j < a.idx.size(); ++j)
    for (std::size_t l = 0; l < a.idx.size(); ++l) t.emplace_back(a.idx[j], a.idx[l], c * a.val[j] * a.val[l]);
}

// Central-difference angular momentum N1 d2 - N2 d1 at fiber point p, as
// (fiber index, weight) pairs; ghost points are dropped.
void angular_stencil(const CrossSectionGrid& g, Index p, std::vector<std::pair<Index, double>>& out) {
  out.clear();
  if (g.dim != 2) return;
  const Index N = g.N, a = p / N, b = p % N;
  const double s = 0.5 / g.h(), n1 = g.coord(a), n2 = g.coord(b);
  if (b + 1 < N) out.emplace_back(g.index(a, b + 1), n1 * s);
  if (b > 0) out.emplace_back(g.index(a, b - 1), -n1 * s);
  if (a + 1 < N) out.emplace_back(g.index(a + 1, b), -n2 * s);
  if (a > 0) out.emplace_back(g.index(a - 1, b), n2 * s);
}

}  // namespace

TubeOperator assemble_tube(const TubeOperatorSpec& spec) {
  if (!(spec.eps > 0.0) || !(spec.eps < 1.0)) throw MetricDegenerate("eps must lie in (0, 1)");
  if (spec.xgrid.boundary == Boundary::periodic && spec.curve.topology != Topology::circle)
    throw TopologyMismatch("periodic grid requires a circle");
  if (spec.xgrid.boundary == Boundary::dirichlet && spec.curve.topology != Topology::line)
    throw TopologyMismatch("Dirichlet grid requires a line");

  TubeOperator tube;
  tube.spec = spec;
  const auto& g = spec.grid;
  const auto& xg = spec.xgrid;
  const auto& pot = spec.potential;
  tube.frame = SliceFrame::choose(pot, g, xg, spec.prefer_corotating);
  const auto& fr = tube.frame;
  const Index M = xg.M, F = g.size(), N = g.N;
  const double eps = spec.eps, hn = g.h(), dx = xg.h;

  // The fade must not reach the region that carries the band.
  const double kmax = spec.curve.max_curvature(xg);
  if (spec.metric_fade) {
    if (eps * kmax * 0.5 * g.r_max >= spec.fade_start) {
      std::ostringstream msg;
      msg << "metric fade reaches |N| <= r_max/2 (eps " << eps << ", max curvature " << kmax << ")";
      throw MetricDegenerate(msg.str());
    }
  } else {
    const double reach = eps * kmax * (g.r_max + hn) * (g.dim == 2 ? std::sqrt(2.0) : 1.0);
    if (reach >= 1.0) throw MetricDegenerate("metric factor 1 - eps kappa.N is not positive on the grid");
  }

  auto angle_at = [&](double x) { return fr.corotating ? pot.twist.angle(x) : 0.0; };
  auto rate_at = [&](double x) { return fr.corotating ? pot.twist.rate(x) : 0.0; };
  double hmin = std::numeric_limits<double>::infinity();
  bool faded = false;
  auto metric = [&](const Eigen::Vector2d& kb, double n1, double n2) {
    const double s = eps * (kb(0) * n1 + kb(1) * n2);
    hmin = std::min(hmin, 1.0 - s);
    if (s > spec.fade_start) faded = true;
    return spec.metric_fade ? faded_metric(s, spec.fade_start, spec.h_floor) : 1.0 - s;
  };
  auto slice_potential = [&](Index i, double n1, double n2) {
    return fr.corotating ? pot.body(n1, n2) : pot(xg.x(i), n1, n2);
  };

  tube.metric.resize(M * F);
  Triplets<double> t, tu;
  const std::size_t per_node = fr.corotating ? 110 : 12;
  t.reserve(static_cast<std::size_t>(M * F) * per_node);
  tu.reserve(static_cast<std::size_t>(M * F) * 5);

  // Fiber part in the half-density variable u = h^{1/2} psi: the transverse
  // form int h |grad psi|^2 becomes int |grad u|^2 + W u^2 with
  // W = (Lap h)/(2h) - |grad h|^2/(4h^2), evaluated from the exact metric.
  const double inv2 = 1.0 / (hn * hn);
  for (Index i = 0; i < M; ++i) {
    const double x = xg.x(i);
    const Eigen::Vector2d kb = fr.slice_kappa(spec.curve, x, angle_at(x));
    const double grad2 = eps * eps * (g.dim == 2 ? kb.squaredNorm() : kb(0) * kb(0));
    for (Index p = 0; p < F; ++p) {
      const Eigen::Vector2d n = g.point(p);
      const double hm = metric(kb, n(0), n(1));
      const Index r = i * F + p;
      tube.metric(r) = hm;
      double d1 = -1.0, d2 = 0.0;
      if (spec.metric_fade) faded_metric_derivatives(eps * (kb(0) * n(0) + kb(1) * n(1)), spec.fade_start, spec.h_floor, d1, d2);
      const double geometric = grad2 * (d2 / (2.0 * hm) - d1 * d1 / (4.0 * hm * hm));
      tu.emplace_back(r, r, slice_potential(i, n(0), n(1)) + geometric + 2.0 * g.dim * inv2);
      for (int d = 0; d < g.dim; ++d) {
        const Index a = g.dim == 2 ? (d == 0 ? p / N : p % N) : p;
        const Index stride = g.dim == 2 ? (d == 0 ? N : 1) : 1;
        if (a + 1 < N) {
          tu.emplace_back(r, r + stride, -inv2);
          tu.emplace_back(r + stride, r, -inv2);
        }
      }
    }
  }

  // Longitudinal links: eps^2 / h_mid * |(psi_{i+1} - psi_i)/dx + alpha'_mid (L psi_i + L psi_{i+1})/2|^2.
  std::vector<std::pair<Index, double>> lst;
  Stencil st;
  const bool periodic = xg.boundary == Boundary::periodic;
  const Index first = periodic ? 0 : -1;
  for (Index i = first; i < M; ++i) {
    const bool left_ghost = i < 0;
    const bool right_ghost = !periodic && i == M - 1;
    const bool wraps = periodic && i == M - 1;
    const double xm = xg.x(0) + (static_cast<double>(i) + 0.5) * dx;
    const double am = angle_at(xm), rm = rate_at(xm);
    const Eigen::Vector2d kb = fr.slice_kappa(spec.curve, xm, am);
    for (Index p = 0; p < F; ++p) {
      const Eigen::Vector2d n = g.point(p);
      const double c = eps * eps / metric(kb, n(0), n(1));
      st.idx.clear();
      st.val.clear();
      // Right endpoint of the link.
      if (!right_ghost) {
        const Index j = wraps ? 0 : i + 1;
        const Index pp = wraps ? fr.wrap[static_cast<std::size_t>(p)] : p;
        st.add(j * F + pp, 1.0 / dx);
        if (rm != 0.0) {
          angular_stencil(g, p, lst);
          for (auto [q, v] : lst) st.add(j * F + (wraps ? fr.wrap[static_cast<std::size_t>(q)] : q), 0.5 * rm * v);
        }
      }
      if (!left_ghost) {
        st.add(i * F + p, -1.0 / dx);
        if (rm != 0.0) {
          angular_stencil(g, p, lst);
          for (auto [q, v] : lst) st.add(i * F + q, 0.5 * rm * v);
        }
      }
      add_square(t, st, c);
    }
  }

  tube.min_metric = hmin;
  tube.faded = faded;
  const Index n = M * F;
  SpMat<double> sx(n, n), su(n, n);
  sx.setFromTriplets(t.begin(), t.end());
  su.setFromTriplets(tu.begin(), tu.end());
  Triplets<double>().swap(t);
  Triplets<double>().swap(tu);

  const Eigen::VectorXd root = tube.metric.cwiseSqrt();
  const Eigen::VectorXd isq = root.cwiseInverse();
  SpMat<double> sym = SpMat<double>(isq.asDiagonal() * sx * isq.asDiagonal()) + su;
  // Summation order differs between mirrored entries; average them and drop
  // cancellation residue so the operator is exactly symmetric.
  {
    SpMat<double> tr = sym.transpose();
    sym = (sym + tr) * 0.5;
    const double scale = sym.coeffs().cwiseAbs().maxCoeff();
    sym.prune(1e-15 * scale, 1.0);
  }
  sym.makeCompressed();
  tube.stiffness = root.asDiagonal() * sym * root.asDiagonal();
  tube.symmetric = SparseHermitianOp<double>(std::move(sym));
  return tube;
}

SpMat<double> TubeOperator::weighted() const {
  SpMat<double> w = stiffness;
  for (Index r = 0; r < w.outerSize(); ++r)
    for (SpMat<double>::InnerIterator it(w, r); it; ++it) it.valueRef() /= metric(it.row());
  return w;
}

double TubeOperator::boundary_mass(const Vec<double>& psi) const {
  const Index F = fiber_size();
  double ring = 0.0;
  for (Index i = 0; i < slices(); ++i) {
    Vec<cplx> slice = psi.segment(i * F, F).cast<cplx>();
    ring += ring_mass(spec.grid, slice);
  }
  return ring / (spec.grid.weight() * psi.squaredNorm());
}

TwoLevelPreconditioner::TwoLevelPreconditioner(const TubeOperator& tube, double shift, int coarse_bands, bool absolute,
                                               int threads)
    : tube_(&tube), shift_(shift) {
  const Index M = tube.slices(), F = tube.fiber_size();
  const int nb = std::max(1, coarse_bands);
  const auto& b = tube.symmetric.matrix();
  blocks_.resize(static_cast<std::size_t>(M));
  slice_basis_.resize(static_cast<std::size_t>(M));

  parallel_for(M, threads, [&](Index i) {
    Eigen::SparseMatrix<double> blk = b.block(i * F, i * F, F, F);
    SparseHermitianOp<double> op(SpMat<double>(blk), 1e-12);
    EigenOptions eo;
    eo.seed = 0x5eed + static_cast<std::uint64_t>(i);
    eo.block_size = std::clamp(nb + 1, 2, 8);
    auto low = lowest_eigenpairs(op, nb + 1, 1e-8, eo);
    slice_basis_[static_cast<std::size_t>(i)] = low.eigenvectors.leftCols(nb);
    // The block only sees the complement of the slice basis; the offset keeps
    // the factorization away from the (inexact) lowest eigenvector.
    const double s = low.eigenvalues(0) - 0.5 * (low.eigenvalues(1) - low.eigenvalues(0));
    Eigen::SparseMatrix<double> shifted = blk;
    for (Index p = 0; p < F; ++p) shifted.coeffRef(p, p) -= s;
    auto f = std::make_unique<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>(shifted);
    if (f->info() != Eigen::Success) throw LinearSolveFailure("fiber block factorization failed");
    blocks_[static_cast<std::size_t>(i)] = std::move(f);
  });

  // Galerkin operator on span{e_i x phi_b(x_i)}.
  const Index nc = M * nb;
  Eigen::SparseMatrix<double> basis(M * F, nc);
  {
    Triplets<double> t;
    t.reserve(static_cast<std::size_t>(M * F * nb));
    for (Index i = 0; i < M; ++i)
      for (int c = 0; c < nb; ++c)
        for (Index p = 0; p < F; ++p) t.emplace_back(i * F + p, i * nb + c, slice_basis_[static_cast<std::size_t>(i)](p, c));
    basis.setFromTriplets(t.begin(), t.end());
  }
  Eigen::SparseMatrix<double> bc = Eigen::SparseMatrix<double>(b) * basis;
  Mat<double> coarse = Mat<double>(Eigen::SparseMatrix<double>(basis.transpose()) * bc);
  coarse = (coarse + coarse.transpose()).eval() * 0.5;
  Eigen::SelfAdjointEigenSolver<Mat<double>> es(coarse);
  coarse_vectors_ = es.eigenvectors();
  coarse_values_ = es.eigenvalues();
  coarse_inverse_.resize(nc);
  const double floor = 1e-10 * std::max(1.0, coarse_values_.cwiseAbs().maxCoeff());
  for (Index j = 0; j < nc; ++j) {
    double d = coarse_values_(j) - shift_;
    if (absolute) d = std::abs(d);
    if (std::abs(d) < floor) d = d < 0 ? -floor : floor;
    coarse_inverse_(j) = 1.0 / d;
  }
}

void TwoLevelPreconditioner::apply(const Mat<double>& x, Mat<double>& y) const {
  const Index M = tube_->slices(), F = tube_->fiber_size();
  const Index nb = slice_basis_.front().cols();
  y.resize(x.rows(), x.cols());
  Mat<double> c(M * nb, x.cols());
  for (Index i = 0; i < M; ++i) {
    const auto& bi = slice_basis_[static_cast<std::size_t>(i)];
    Mat<double> xi = x.middleRows(i * F, F);
    c.middleRows(i * nb, nb) = bi.transpose() * xi;
    // The slice basis spans invariant subspaces of the block, so the fine
    // part acts on the complement only.
    xi.noalias() -= bi * c.middleRows(i * nb, nb);
    y.middleRows(i * F, F) = blocks_[static_cast<std::size_t>(i)]->solve(xi);
  }
  Mat<double> z = coarse_vectors_ * (coarse_inverse_.asDiagonal() * (coarse_vectors_.transpose() * c));
  for (Index i = 0; i < M; ++i)
    y.middleRows(i * F, F) += slice_basis_[static_cast<std::size_t>(i)] * z.middleRows(i * nb, nb);
}

EigpairSet<double> reference_spectrum(const TubeOperator& tube, int k, const ReferenceOptions& opt) {
  const Index n = tube.dimension();
  const int kk = k + std::max(0, opt.guard);
  // Preconditioner shift below the coarse spectrum bottom.
  TwoLevelPreconditioner probe(tube, 0.0, opt.coarse_bands, false, opt.threads);
  const auto& cv = probe.coarse_values();
  const Index top = std::min<Index>(kk, cv.size() - 1);
  const double spread = std::max(cv(top) - cv(0), 1e-6);
  TwoLevelPreconditioner pre(tube, cv(0) - 0.5 * spread, opt.coarse_bands, false, opt.threads);
  EigenOptions eo;
  eo.tol = opt.tol;
  eo.seed = opt.seed;
  eo.wanted = k;
  eo.block_size = std::clamp(kk, 2, 12);
  eo.max_basis = std::max(4 * kk, 3 * eo.block_size + kk);
  eo.max_iterations = opt.max_iterations;
  BlockApply<double> a = tube.symmetric.as_block_apply();
  BlockApply<double> m = [&pre](const Mat<double>& x, Mat<double>& y) { pre.apply(x, y); };
  auto all = subspace_eigensolve<double>(n, kk, a, eo, m);
  EigpairSet<double> out;
  out.iterations = all.iterations;
  out.eigenvalues = all.eigenvalues.head(k);
  out.eigenvectors = all.eigenvectors.leftCols(k);
  out.residual_norms = all.residual_norms.head(k);
  return out;
}

EigpairSet<double> reference_spectrum_near(const TubeOperator& tube, double sigma, int k, const ReferenceOptions& opt) {
  const Index n = tube.dimension();
  const int kk = k + std::max(0, opt.guard);
  TwoLevelPreconditioner pre(tube, sigma, opt.coarse_bands, true, opt.threads);
  const auto& b = tube.symmetric.matrix();
  VecApply<double> shifted = [&](const Vec<double>& x, Vec<double>& y) {
    y.noalias() = b * x;
    y -= sigma * x;
  };
  VecApply<double> prec = [&](const Vec<double>& x, Vec<double>& y) {
    Mat<double> xm = x, ym;
    pre.apply(xm, ym);
    y = ym.col(0);
  };
  const double inner_tol = std::min(1e-11, 0.1 * opt.tol);
  BlockApply<double> inv = [&](const Mat<double>& x, Mat<double>& y) {
    y.resize(x.rows(), x.cols());
    for (Index j = 0; j < x.cols(); ++j) {
      Vec<double> u;
      auto res = minres<double>(shifted, Vec<double>(x.col(j)), u, inner_tol, 20000, prec);
      if (!res.converged) throw NonConvergence("shift-invert MINRES did not converge");
      y.col(j) = u;
    }
  };
  EigenOptions eo;
  eo.tol = 1e-3 * opt.tol;
  eo.seed = opt.seed;
  eo.wanted = k;
  eo.target = SpectrumTarget::largest_magnitude;
  eo.block_size = std::clamp(kk, 2, 12);
  eo.max_basis = std::max(4 * kk, 3 * eo.block_size + kk);
  eo.max_iterations = opt.max_iterations;
  // Convergence is judged on the original operator below; the inverse
  // iteration runs to a tight relative tolerance.
  EigpairSet<double> inner;
  for (double tol = 1e-3 * opt.tol;; tol *= 0.1) {
    eo.tol = tol;
    inner = subspace_eigensolve<double>(n, kk, inv, eo);
    Mat<double> bv = b * inner.eigenvectors.leftCols(k);
    bool ok = true;
    for (int j = 0; j < k; ++j) {
      const double lam = inner.eigenvectors.col(j).dot(bv.col(j));
      if ((bv.col(j) - lam * inner.eigenvectors.col(j)).norm() > opt.tol * (1.0 + std::abs(lam))) ok = false;
    }
    if (ok || tol < 1e-15) break;
  }
  Mat<double> v = inner.eigenvectors.leftCols(k);
  Mat<double> bv = b * v;
  EigpairSet<double> out;
  out.iterations = inner.iterations;
  out.eigenvalues.resize(k);
  out.residual_norms.resize(k);
  for (int j = 0; j < k; ++j) out.eigenvalues(j) = v.col(j).dot(bv.col(j));
  std::vector<Index> idx(static_cast<std::size_t>(k));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index c) { return out.eigenvalues(a) < out.eigenvalues(c); });
  EigpairSet<double> sorted;
  sorted.iterations = out.iterations;
  sorted.eigenvalues.resize(k);
  sorted.residual_norms.resize(k);
  sorted.eigenvectors.resize(n, k);
  for (int j = 0; j < k; ++j) {
    const Index s = idx[static_cast<std::size_t>(j)];
    sorted.eigenvalues(j) = out.eigenvalues(s);
    sorted.eigenvectors.col(j) = v.col(s);
    sorted.residual_norms(j) = (bv.col(s) - out.eigenvalues(s) * v.col(s)).norm();
  }
  return sorted;
}

HarmonicCorollary build_ho_corollary_operator(const Eigen::VectorXd& energy, const Grid1D& grid, double x0,
                                              int levels) {
  const Index M = grid.M;
  if (energy.size() != M) throw GridMismatch("band energy and grid differ in size");
  Index i0 = 0;
  if (x0 < 0.0) {
    energy.minCoeff(&i0);
  } else {
    double best = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < M; ++i)
      if (std::abs(grid.x(i) - x0) < best) {
        best = std::abs(grid.x(i) - x0);
        i0 = i;
      }
  }
  const bool periodic = grid.boundary == Boundary::periodic;
  if (!periodic && (i0 == 0 || i0 == M - 1)) throw DegenerateMinimum("band minimum sits on the grid boundary");
  const double em = energy(periodic ? (i0 + M - 1) % M : i0 - 1);
  const double ep = energy(periodic ? (i0 + 1) % M : i0 + 1);
  HarmonicCorollary hc;
  hc.index = i0;
  hc.x0 = grid.x(i0);
  hc.energy = energy(i0);
  hc.curvature = (ep - 2.0 * energy(i0) + em) / (grid.h * grid.h);
  if (!(hc.curvature > 0.0)) {
    std::ostringstream msg;
    msg << "second difference of E_f at x0 = " << hc.x0 << " is " << hc.curvature;
    throw DegenerateMinimum(msg.str());
  }
  hc.omega = std::sqrt(0.5 * hc.curvature);
  hc.analytic.resize(levels);
  for (int l = 0; l < levels; ++l) hc.analytic(l) = hc.omega * (2 * l + 1);

  // Cross-check on a fine symmetric grid.
  const double extent = 2.0 * std::sqrt((2.0 * levels + 1.0) / hc.omega) + 6.0 / std::sqrt(hc.omega);
  const Index n = 1200;
  const double h = 2.0 * extent / static_cast<double>(n + 1);
  Eigen::VectorXd diag(n), off(n - 1);
  for (Index j = 0; j < n; ++j) {
    const double y = -extent + (j + 1) * h;
    diag(j) = 2.0 / (h * h) + 0.5 * hc.curvature * y * y;
  }
  off.setConstant(-1.0 / (h * h));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, off, Eigen::EigenvaluesOnly);
  hc.fd = es.eigenvalues().head(levels);
  return hc;
}

Vec<cplx> lift(const FiberBand& band, const Vec<cplx>& chi) {
  const Index M = band.slices(), F = band.grid.size();
  if (chi.size() != M) throw GridMismatch("effective state and band differ in slice count");
  Vec<cplx> psi(M * F);
  for (Index i = 0; i < M; ++i) psi.segment(i * F, F) = band.phi.col(i) * chi(i);
  return psi;
}

Vec<cplx> project_to_band(const FiberBand& band, const Vec<cplx>& psi) {
  const Index M = band.slices(), F = band.grid.size();
  if (psi.size() != M * F) throw GridMismatch("tube state and band differ in size");
  Vec<cplx> chi(M);
  for (Index i = 0; i < M; ++i) chi(i) = band.phi.col(i).dot(psi.segment(i * F, F)) * band.grid.weight();
  return chi;
}

double tube_norm(const FiberBand& band, const Vec<cplx>& psi) {
  return std::sqrt(psi.squaredNorm() * band.xgrid.h * band.grid.weight());
}

double line_norm(const Grid1D& grid, const Vec<cplx>& chi) { return std::sqrt(chi.squaredNorm() * grid.h); }

ToyDynamicsResult propagate_toy(const TubeOperator& tube, const FiberBand& band, const SparseHermitianOp<cplx>& effective,
                                const Vec<cplx>& chi0, double t, double dt, int samples,
                                const Vec<cplx>* psi0_override) {
  if (tube.spec.curve.max_curvature(tube.spec.xgrid) != 0.0)
    throw TopologyMismatch("toy dynamics requires a flat guide");
  if (!(tube.spec.grid == band.grid) || !(tube.spec.xgrid == band.xgrid))
    throw GridMismatch("tube and band grids differ");
  if (effective.dimension() != band.slices()) throw GridMismatch("effective operator and band differ in size");
  if (!(t > 0.0) || !(dt > 0.0) || samples < 1) throw LinearSolveFailure("propagation needs t, dt > 0");

  Vec<cplx> chi = chi0 / line_norm(band.xgrid, chi0);
  Vec<cplx> psi = psi0_override ? *psi0_override : lift(band, chi);
  psi /= tube_norm(band, psi);

  const int total = std::max(1, static_cast<int>(std::lround(t / dt)));
  const double step = t / total;
  CrankNicolson full(tube.symmetric, step);
  CrankNicolson eff(effective, step);

  ToyDynamicsResult out;
  out.times.resize(samples + 1);
  out.difference.resize(samples + 1);
  out.band_weight.resize(samples + 1);
  auto record = [&](int s, double time) {
    out.times(s) = time;
    out.difference(s) = tube_norm(band, psi - lift(band, chi));
    const double w = line_norm(band.xgrid, project_to_band(band, psi));
    out.band_weight(s) = w * w;
  };
  record(0, 0.0);
  int done = 0;
  for (int s = 1; s <= samples; ++s) {
    const int target = static_cast<int>(std::lround(static_cast<double>(total) * s / samples));
    full.step(psi, target - done);
    eff.step(chi, target - done);
    done = target;
    record(s, done * step);
  }
  out.psi = psi;
  out.chi = chi;
  return out;
}

}  // namespace waveband
