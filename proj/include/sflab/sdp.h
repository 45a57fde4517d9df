#ifndef SFLAB_SDP_H
#define SFLAB_SDP_H

// A small dense primal-dual interior-point solver for semidefinite programs
// of the form
//
//   maximize    b^T y
//   subject to  S_j = C_j - sum_k y_k A_jk  is positive semidefinite,  each j
//               s   = h - G y               is nonnegative,
//
// whose conic dual is
//
//   minimize    sum_j <C_j, X_j> + h^T x
//   subject to  sum_j <A_jk, X_j> + (G^T x)_k = b_k,   X_j PSD,  x >= 0.
//
// Uses the HKM search direction with Mehrotra predictor-corrector steps from
// an infeasible starting point, and reports unboundedness or infeasibility
// of the y-problem from the diverging iterates.

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace sflab::sdp {

// One coefficient of a symmetric matrix: value sits at (row, col) and
// (col, row). Requires row <= col.
struct SymEntry {
  int var = -1;  // -1 for the constant matrix C, else the index of y
  int row = 0;
  int col = 0;
  double value = 0.0;
};

struct Block {
  int size = 0;
  std::vector<SymEntry> entries;
};

// sum_i coeffs[i].second * y[coeffs[i].first] <= rhs.
struct LinearRow {
  std::vector<std::pair<int, double>> coeffs;
  double rhs = 0.0;
};

struct Problem {
  int num_vars = 0;
  Eigen::VectorXd objective;  // b
  std::vector<Block> blocks;
  std::vector<LinearRow> rows;
};

enum class Status { Optimal, Unbounded, Infeasible, NumericalTrouble };

std::string to_string(Status status);

struct Options {
  // Relative gap and relative residual target.
  double tol = 1e-9;
  // Accept a stalled solve as optimal when the gap is below
  // relaxed_tol * max(1, |value|) and residuals below relaxed_tol.
  double relaxed_tol = 1e-6;
  // Threshold on the normalized certificate residual for declaring the
  // y-problem unbounded or infeasible.
  double infeasibility_tol = 1e-8;
  int max_iterations = 200;
  bool verbose = false;
};

struct Result {
  Status status = Status::NumericalTrouble;
  Eigen::VectorXd y;
  // b^T y (the y-problem objective) and the dual objective bounding it.
  double value = 0.0;
  double dual_value = 0.0;
  // dual_value - value.
  double gap = 0.0;
  double primal_residual = 0.0;  // relative, of the X-side equations
  double dual_residual = 0.0;    // relative, of the y-side slacks
  int iterations = 0;
  std::string message;
};

Result solve(const Problem& problem, const Options& options = {});

}  // namespace sflab::sdp

#endif  // SFLAB_SDP_H
