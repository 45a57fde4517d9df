#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "sflab/sdp.h"

using namespace sflab::sdp;

namespace {

Problem one_var() {
  Problem p;
  p.num_vars = 1;
  p.objective = Eigen::VectorXd::Ones(1);
  return p;
}

// max t  s.t.  M - t I is PSD; the optimum is lambda_min(M).
Problem min_eigen_problem(const Eigen::MatrixXd& M) {
  Problem p = one_var();
  Block b;
  b.size = static_cast<int>(M.rows());
  for (int i = 0; i < b.size; ++i) {
    for (int j = i; j < b.size; ++j) {
      if (M(i, j) != 0.0) b.entries.push_back({-1, i, j, M(i, j)});
    }
    b.entries.push_back({0, i, i, 1.0});
  }
  p.blocks.push_back(b);
  return p;
}

}  // namespace

TEST_CASE("2x2 PSD constraint") {
  // S = [[1, y], [y, 1]] is PSD iff |y| <= 1.
  Problem p = one_var();
  p.blocks.push_back(Block{2, {{-1, 0, 0, 1.0}, {-1, 1, 1, 1.0}, {0, 0, 1, -1.0}}});
  const Result r = solve(p);
  CHECK(r.status == Status::Optimal);
  CHECK(r.value == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(r.gap <= 1e-6);
}

TEST_CASE("pure LP") {
  Problem p;
  p.num_vars = 2;
  p.objective = Eigen::VectorXd::Ones(2);
  p.rows = {{{{0, 1.0}}, 1.0}, {{{1, 1.0}}, 2.0}, {{{0, 1.0}, {1, 1.0}}, 2.5}};
  const Result r = solve(p);
  CHECK(r.status == Status::Optimal);
  CHECK(r.value == doctest::Approx(2.5).epsilon(1e-7));
}

TEST_CASE("unbounded and infeasible problems are detected") {
  Problem u = one_var();
  u.rows = {{{{0, -1.0}}, 1.0}};
  CHECK(solve(u).status == Status::Unbounded);

  Problem inf = one_var();
  inf.rows = {{{{0, 1.0}}, -1.0}, {{{0, -1.0}}, -1.0}};
  CHECK(solve(inf).status == Status::Infeasible);

  // An SDP whose PSD block never binds in the objective direction.
  Problem su = one_var();
  su.blocks.push_back(Block{2, {{-1, 0, 0, 1.0}, {-1, 1, 1, 1.0}, {0, 0, 0, -1.0}}});
  CHECK(solve(su).status == Status::Unbounded);
}

TEST_CASE("minimum eigenvalue matches a dense eigensolver") {
  Eigen::MatrixXd M(2, 2);
  M << 3, 1, 1, 1;
  CHECK(solve(min_eigen_problem(M)).value == doctest::Approx(2 - std::sqrt(2.0)).epsilon(1e-7));

  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal;
  for (int n : {3, 6, 10}) {
    for (int rep = 0; rep < 3; ++rep) {
      Eigen::MatrixXd A(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) A(i, j) = normal(rng);
      const Eigen::MatrixXd S = 0.5 * (A + A.transpose());
      const double ref = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(S).eigenvalues()[0];
      const Result r = solve(min_eigen_problem(S));
      CAPTURE(n);
      CHECK(r.status == Status::Optimal);
      CHECK(r.value == doctest::Approx(ref).epsilon(1e-7).scale(1.0));
    }
  }
}

TEST_CASE("mixed PSD and linear constraints") {
  // max y1 + y2 s.t. [[1, y1], [y1, 1]] PSD, [[1, y2], [y2, 1]] PSD, y1 + y2 <= 1.5.
  Problem p;
  p.num_vars = 2;
  p.objective = Eigen::VectorXd::Ones(2);
  p.blocks.push_back(Block{2, {{-1, 0, 0, 1.0}, {-1, 1, 1, 1.0}, {0, 0, 1, -1.0}}});
  p.blocks.push_back(Block{2, {{-1, 0, 0, 1.0}, {-1, 1, 1, 1.0}, {1, 0, 1, -1.0}}});
  p.rows = {{{{0, 1.0}, {1, 1.0}}, 1.5}};
  const Result r = solve(p);
  CHECK(r.status == Status::Optimal);
  CHECK(r.value == doctest::Approx(1.5).epsilon(1e-7));
  CHECK(r.y[0] <= 1.0 + 1e-7);
  CHECK(r.y[1] <= 1.0 + 1e-7);
}

TEST_CASE("status names") {
  CHECK(to_string(Status::Optimal) == "optimal");
  CHECK(to_string(Status::Unbounded) == "unbounded");
  CHECK(to_string(Status::Infeasible) == "infeasible");
}
