#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "waveband/numerics.hpp"

using namespace waveband;

namespace {

SparseHermitianOp<double> dirichlet_laplacian(Index n) {
  Triplets<double> t;
  for (Index i = 0; i < n; ++i) {
    t.emplace_back(i, i, 2.0);
    if (i + 1 < n) {
      t.emplace_back(i, i + 1, -1.0);
      t.emplace_back(i + 1, i, -1.0);
    }
  }
  return SparseHermitianOp<double>::from_triplets(n, t);
}

// Hermitian tridiagonal with complex off-diagonals and a varying diagonal.
SparseHermitianOp<cplx> random_hermitian(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Triplets<cplx> t;
  for (Index i = 0; i < n; ++i) {
    t.emplace_back(i, i, 4.0 * u(rng));
    if (i + 1 < n) {
      const cplx z(u(rng), u(rng));
      t.emplace_back(i, i + 1, z);
      t.emplace_back(i + 1, i, std::conj(z));
    }
  }
  return SparseHermitianOp<cplx>::from_triplets(n, t);
}

}  // namespace

TEST_CASE("lowest eigenpairs of the Dirichlet Laplacian match the closed form") {
  const Index n = 300;
  const auto op = dirichlet_laplacian(n);
  const auto pairs = lowest_eigenpairs(op, 5, 1e-11);
  for (int k = 0; k < 5; ++k) {
    const double exact = 2.0 - 2.0 * std::cos((k + 1) * std::numbers::pi / (n + 1));
    CHECK(pairs.eigenvalues(k) == doctest::Approx(exact).epsilon(1e-8));
  }
  // eigenvectors orthonormal
  const Mat<double> gram = pairs.eigenvectors.adjoint() * pairs.eigenvectors;
  CHECK((gram - Mat<double>::Identity(5, 5)).norm() < 1e-9);
}

TEST_CASE("complex Hermitian eigensolve agrees with a dense diagonalization") {
  const auto op = random_hermitian(400, 7);
  const auto pairs = lowest_eigenpairs(op, 4, 1e-11);
  const Eigen::MatrixXcd dense = Eigen::MatrixXcd(op.matrix());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(dense);
  for (int k = 0; k < 4; ++k) CHECK(std::abs(pairs.eigenvalues(k) - es.eigenvalues()(k)) < 1e-8);
  const Mat<cplx> r = op.matrix() * pairs.eigenvectors - pairs.eigenvectors * pairs.eigenvalues.asDiagonal();
  CHECK(r.norm() < 1e-7);
}

TEST_CASE("non-Hermitian input is rejected") {
  Triplets<double> t{{0, 1, 1.0}, {1, 0, 2.0}, {0, 0, 1.0}, {1, 1, 1.0}};
  CHECK_THROWS_AS(SparseHermitianOp<double>::from_triplets(2, t), NotHermitian);
}

TEST_CASE("hermiticity defect of assembled operators is at roundoff") {
  const auto op = random_hermitian(200, 3);
  CHECK(hermiticity_defect(op.matrix()) < 1e-13);
}

TEST_CASE("minres solves a shifted definite system") {
  const Index n = 120;
  const auto op = dirichlet_laplacian(n);
  Vec<double> b = Vec<double>::LinSpaced(n, -1.0, 2.0);
  Vec<double> x = Vec<double>::Zero(n);
  VecApply<double> apply = [&](const Vec<double>& v, Vec<double>& y) { y = op.matrix() * v + 0.3 * v; };
  const auto res = minres<double>(apply, b, x, 1e-12, 1000);
  CHECK(res.converged);
  const Eigen::MatrixXd dense = Eigen::MatrixXd(op.matrix()) + 0.3 * Eigen::MatrixXd::Identity(n, n);
  const Vec<double> oracle = dense.lu().solve(b);
  CHECK((x - oracle).norm() < 1e-9 * oracle.norm());
}

TEST_CASE("projected shifted solve stays off the excluded vector") {
  const Index n = 150;
  const auto op = dirichlet_laplacian(n);
  const auto low = lowest_eigenpairs(op, 1, 1e-12);
  const Vec<cplx> e = low.eigenvectors.col(0).cast<cplx>();
  const double shift = low.eigenvalues(0);
  Vec<cplx> rhs(n);
  for (Index i = 0; i < n; ++i) rhs(i) = cplx(std::sin(0.1 * i), std::cos(0.05 * i));
  const Vec<cplx> u = solve_shifted_projected<cplx, double>(op, shift, e, rhs, 1e-12);
  CHECK(std::abs(e.dot(u)) < 1e-10);
  Vec<cplx> pr = rhs - e * e.dot(rhs);
  Vec<cplx> lhs = op.matrix().cast<cplx>() * u - shift * u;
  lhs -= e * e.dot(lhs);
  CHECK((lhs - pr).norm() < 1e-9 * pr.norm());
}

TEST_CASE("Crank-Nicolson is unitary and reproduces the Cayley phase") {
  const Index n = 6;
  Triplets<double> t;
  for (Index i = 0; i < n; ++i) t.emplace_back(i, i, 0.5 * (i + 1));
  const auto op = SparseHermitianOp<double>::from_triplets(n, t);
  Vec<cplx> psi = Vec<cplx>::Constant(n, 1.0 / std::sqrt(6.0));
  const double dt = 0.05;
  const int steps = 40;
  const Vec<cplx> out = propagate_cn(op, psi, dt, steps);
  CHECK(std::abs(out.norm() - 1.0) < 1e-13);
  for (Index i = 0; i < n; ++i) {
    const double e = 0.5 * (i + 1);
    const cplx factor = std::pow((1.0 - cplx(0, 0.5 * dt * e)) / (1.0 + cplx(0, 0.5 * dt * e)), steps);
    CHECK(std::abs(out(i) - factor * psi(i)) < 1e-13);
  }
}
