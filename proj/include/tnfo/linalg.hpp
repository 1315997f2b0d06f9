#pragma once

#include <Eigen/Dense>

// Unpivoted blocked LDL^T for symmetric quasidefinite matrices (the saddle
// systems the interior-point solver produces after regularization). No
// pivoting keeps the factorization deterministic and the inertia readable
// straight off the diagonal.
namespace tnfo {

struct Inertia {
  int positive = 0;
  int negative = 0;
  int zero = 0;
};

class LdltFactor {
 public:
  // Factors the lower triangle of A. Returns false when a diagonal pivot
  // falls below min_pivot in magnitude (matrix not quasidefinite enough);
  // the caller is expected to regularize and retry.
  bool compute(const Eigen::MatrixXd& A, double min_pivot);

  const Inertia& inertia() const { return inertia_; }
  Eigen::Index size() const { return fact_.rows(); }

  void solve_in_place(Eigen::VectorXd& b) const;
  Eigen::VectorXd solve(Eigen::VectorXd b) const {
    solve_in_place(b);
    return b;
  }

  // x = A^{-1} b polished with steps of iterative refinement against the
  // original matrix (pass the same A given to compute).
  Eigen::VectorXd solve_refined(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                int refinements = 2) const;

 private:
  Eigen::MatrixXd fact_;  // L strictly below diagonal, D on it
  Inertia inertia_;
};

}  // namespace tnfo
