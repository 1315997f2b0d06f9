#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "tnfo/linalg.hpp"
#include "tnfo/solver.hpp"

using namespace tnfo;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd random_matrix(TestRng& rng, int rows, int cols, double lo = -1.0, double hi = 1.0) {
  MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

VectorXd random_vector(TestRng& rng, int n) {
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.uniform(-1.0, 1.0);
  return v;
}

}  // namespace

TEST_SUITE("linalg") {
  TEST_CASE("factors and solves a positive definite system") {
    TestRng rng(7);
    const int n = 8;
    MatrixXd M = random_matrix(rng, n, n);
    MatrixXd A = M.transpose() * M + static_cast<double>(n) * MatrixXd::Identity(n, n);
    VectorXd b = random_vector(rng, n);

    LdltFactor F;
    REQUIRE(F.compute(A, 1e-12));
    CHECK(F.size() == n);
    CHECK(F.inertia().positive == n);
    CHECK(F.inertia().negative == 0);
    CHECK(F.inertia().zero == 0);

    VectorXd x = F.solve(b);
    CHECK((A * x - b).cwiseAbs().maxCoeff() <= 1e-12 * b.cwiseAbs().maxCoeff());
  }

  TEST_CASE("reads the inertia of a saddle system off the pivots") {
    TestRng rng(11);
    const int n = 5, m = 3;
    MatrixXd M = random_matrix(rng, n, n);
    MatrixXd H = M.transpose() * M + MatrixXd::Identity(n, n);
    MatrixXd A = random_matrix(rng, m, n);

    MatrixXd K = MatrixXd::Zero(n + m, n + m);
    K.topLeftCorner(n, n) = H;
    K.topRightCorner(n, m) = A.transpose();
    K.bottomLeftCorner(m, n) = A;
    K.bottomRightCorner(m, m) = -1e-8 * MatrixXd::Identity(m, m);

    LdltFactor F;
    REQUIRE(F.compute(K, 1e-30));
    CHECK(F.inertia().positive == n);
    CHECK(F.inertia().negative == m);
    CHECK(F.inertia().zero == 0);

    // The saddle solve is still accurate despite the indefiniteness.
    VectorXd b = random_vector(rng, n + m);
    VectorXd x = F.solve_refined(K, b);
    CHECK((K * x - b).cwiseAbs().maxCoeff() <= 1e-10 * b.cwiseAbs().maxCoeff());
  }

  TEST_CASE("rejects pivots below the floor") {
    LdltFactor F;
    CHECK(!F.compute(MatrixXd::Zero(3, 3), 1e-12));

    // Second pivot of this rank-1 matrix is exactly zero.
    MatrixXd A(2, 2);
    A << 1.0, 1.0, 1.0, 1.0;
    CHECK(!F.compute(A, 1e-12));

    A << 1.0, 0.0, 0.0, -1.0;
    CHECK(F.compute(A, 1e-12));  // indefinite is fine, only magnitude matters
    CHECK(F.inertia().negative == 1);
  }

  TEST_CASE("refinement recovers accuracy lost to a perturbed factor") {
    // The interior-point loop factors A + delta*I but wants A-accurate
    // solves; refinement against the unperturbed matrix must bridge that.
    TestRng rng(3);
    const int n = 10;
    MatrixXd M = random_matrix(rng, n, n);
    MatrixXd A = M.transpose() * M + MatrixXd::Identity(n, n);
    MatrixXd A_reg = A + 1e-3 * MatrixXd::Identity(n, n);
    VectorXd b = random_vector(rng, n);

    LdltFactor F;
    REQUIRE(F.compute(A_reg, 1e-12));
    double plain = (A * F.solve(b) - b).norm();
    double refined = (A * F.solve_refined(A, b, 3) - b).norm();
    CHECK(plain > 1e-6);  // the perturbation is visible without refinement
    CHECK(refined <= 1e-6 * plain);
  }

  TEST_CASE("repeated factorizations are bitwise identical") {
    TestRng rng(19);
    const int n = 6;
    MatrixXd M = random_matrix(rng, n, n);
    MatrixXd A = M.transpose() * M + MatrixXd::Identity(n, n);
    VectorXd b = random_vector(rng, n);

    LdltFactor F1, F2;
    REQUIRE(F1.compute(A, 1e-12));
    REQUIRE(F2.compute(A, 1e-12));
    VectorXd x1 = F1.solve(b), x2 = F2.solve(b);
    CHECK(x1 == x2);
  }

  TEST_CASE("newton solves a small square system") {
    // Circle of radius 2 intersected with the diagonal.
    NewtonEval eval = [](const VectorXd& x, VectorXd& r, MatrixXd* J) {
      r.resize(2);
      r[0] = x[0] * x[0] + x[1] * x[1] - 4.0;
      r[1] = x[0] - x[1];
      if (J) {
        J->resize(2, 2);
        (*J)(0, 0) = 2.0 * x[0];
        (*J)(0, 1) = 2.0 * x[1];
        (*J)(1, 0) = 1.0;
        (*J)(1, 1) = -1.0;
      }
      return true;
    };
    VectorXd x(2);
    x << 3.0, 0.5;
    NewtonReport rep = solve_newton(eval, x);
    CHECK(rep.converged);
    CHECK(!rep.singular);
    CHECK(rep.iterations < 20);
    CHECK(rep.residual_norm <= 1e-10);
    CHECK(x[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
    CHECK(x[1] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
    // Accepted damped steps strictly shrink the residual norm.
    for (size_t i = 1; i < rep.history.size(); ++i) CHECK(rep.history[i] < rep.history[i - 1]);
  }

  TEST_CASE("newton reports a rank-deficient jacobian") {
    NewtonEval eval = [](const VectorXd& x, VectorXd& r, MatrixXd* J) {
      r.resize(2);
      r[0] = x[0] + x[1] - 1.0;
      r[1] = 2.0 * x[0] + 2.0 * x[1] - 2.0;
      if (J) {
        J->resize(2, 2);
        *J << 1.0, 1.0, 2.0, 2.0;
      }
      return true;
    };
    VectorXd x = VectorXd::Zero(2);
    NewtonReport rep = solve_newton(eval, x);
    CHECK(rep.singular);
    CHECK(!rep.converged);
  }

  TEST_CASE("newton damps steps that would overshoot") {
    // Full Newton on atan diverges from |x| > ~1.39; damping must rescue it.
    NewtonEval eval = [](const VectorXd& x, VectorXd& r, MatrixXd* J) {
      r.resize(1);
      r[0] = std::atan(x[0]);
      if (J) {
        J->resize(1, 1);
        (*J)(0, 0) = 1.0 / (1.0 + x[0] * x[0]);
      }
      return true;
    };
    VectorXd x(1);
    x << 3.0;
    NewtonReport rep = solve_newton(eval, x);
    CHECK(rep.converged);
    CHECK(std::abs(x[0]) <= 1e-10);
  }

  TEST_CASE("finite-difference jacobian") {
    auto F = [](const VectorXd& x) {
      VectorXd r(3);
      r[0] = std::sin(x[0]) * x[1];
      r[1] = x[0] * x[0] + std::exp(x[2]);
      r[2] = x[1] * x[2];
      return r;
    };
    VectorXd x(3);
    x << 0.3, -1.2, 0.7;
    MatrixXd J = fd_jacobian(F, x, 1e-6);
    MatrixXd want(3, 3);
    want << std::cos(x[0]) * x[1], std::sin(x[0]), 0.0,
            2.0 * x[0], 0.0, std::exp(x[2]),
            0.0, x[2], x[1];
    CHECK((J - want).cwiseAbs().maxCoeff() <= 1e-8);

    CHECK_THROWS_AS(fd_jacobian(F, x, 0.0), InvalidArgument);
    auto bad = [](const VectorXd&) {
      VectorXd r(1);
      r[0] = std::numeric_limits<double>::quiet_NaN();
      return r;
    };
    CHECK_THROWS_AS(fd_jacobian(bad, x, 1e-6), NonFiniteValueError);

    // Residual-free systems yield a 0 x n jacobian rather than tripping up.
    auto empty = [](const VectorXd&) { return VectorXd(0); };
    MatrixXd E = fd_jacobian(empty, x, 1e-6);
    CHECK(E.rows() == 0);
    CHECK(E.cols() == 3);
  }
}
