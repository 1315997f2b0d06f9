#include "tnfo/linalg.hpp"

#include <cmath>

namespace tnfo {

// Right-looking blocked factorization; only the lower triangle of A is read.
bool LdltFactor::compute(const Eigen::MatrixXd& A, double min_pivot) {
  const Eigen::Index n = A.rows();
  fact_ = A;
  inertia_ = Inertia{};
  if (n == 0) return true;

  const Eigen::Index nb = 96;
  Eigen::MatrixXd W(n, nb);  // panel columns scaled by their pivots

  for (Eigen::Index k = 0; k < n; k += nb) {
    const Eigen::Index kb = std::min(nb, n - k);
    const Eigen::Index pend = k + kb;

    // Panel: rank-1 updates restricted to panel columns, full row height.
    for (Eigen::Index j = k; j < pend; ++j) {
      const double d = fact_(j, j);
      if (std::abs(d) < min_pivot) {
        inertia_.zero++;
        return false;
      }
      (d > 0.0 ? inertia_.positive : inertia_.negative)++;
      for (Eigen::Index c = j + 1; c < pend; ++c)
        fact_.col(c).tail(n - c).noalias() -= (fact_(c, j) / d) * fact_.col(j).tail(n - c);
      if (j + 1 < n) fact_.col(j).tail(n - j - 1) /= d;
    }

    // Trailing update A22 -= L21 D L21^T, column block by column block so only
    // the lower triangle is touched.
    if (pend < n) {
      const Eigen::Index m2 = n - pend;
      for (Eigen::Index t = 0; t < kb; ++t)
        W.block(0, t, m2, 1) = fact_.block(pend, k + t, m2, 1) * fact_(k + t, k + t);
      for (Eigen::Index c2 = pend; c2 < n; c2 += nb) {
        const Eigen::Index cb = std::min(nb, n - c2);
        fact_.block(c2, c2, n - c2, cb).noalias() -=
            fact_.block(c2, k, n - c2, kb) * W.block(c2 - pend, 0, cb, kb).transpose();
      }
    }
  }
  return true;
}

void LdltFactor::solve_in_place(Eigen::VectorXd& b) const {
  fact_.triangularView<Eigen::UnitLower>().solveInPlace(b);
  b.array() /= fact_.diagonal().array();
  fact_.triangularView<Eigen::UnitLower>().transpose().solveInPlace(b);
}

Eigen::VectorXd LdltFactor::solve_refined(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                          int refinements) const {
  Eigen::VectorXd x = solve(b);
  for (int it = 0; it < refinements; ++it) {
    Eigen::VectorXd r = b - A.selfadjointView<Eigen::Lower>() * x;
    x += solve(r);
  }
  return x;
}

}  // namespace tnfo
