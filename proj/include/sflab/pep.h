#ifndef SFLAB_PEP_H
#define SFLAB_PEP_H

// Worst-case performance estimation for the schedule-free iteration with
// beta = 1 (so y_t = x_t): the iterates are affine in a Gram basis of oracle
// gradients, interpolation conditions of the function class become linear
// constraints on the Gram matrix and function values, and the worst case is
// the value of a semidefinite program.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sflab/schedule.h"
#include "sflab/sdp.h"

namespace sflab::pep {

enum class ScenarioKind { DecC, IncC, LinStepGrad, LinStepDist };

// DecC(alpha):  eta = 1/L, c_{t+1} = (t+1)^(-alpha).
// IncC(alpha):  eta = 1/L, c_{t+1} = (t/(t+1))^alpha, alpha in [0, 1).
// LinStep*:     eta_t = (t+1)/L, c_{t+1} = 1/(t+1).
struct Scenario {
  ScenarioKind kind = ScenarioKind::DecC;
  double alpha = 1.0;
};

enum class Metric { LastGradSq, MinGradSq, MaxGradSq, LastDistSq };

enum class FunctionClass { SmoothNonconvex, SmoothConvex };

enum class InitialCondition {
  // f(x_0) - f(x_n) <= D.
  FinalGap,
  // f(x_0) - f* <= D, with a global minimizer x* added as an anchor point.
  OptimalityGap,
};

std::string to_string(ScenarioKind kind);
std::string to_string(const Scenario& scenario);
std::string to_string(Metric metric);
std::string to_string(FunctionClass fclass);
ScenarioKind parse_scenario_kind(const std::string& name);
Metric parse_metric(const std::string& name);
FunctionClass parse_function_class(const std::string& name);

Schedule scenario_schedule(const Scenario& scenario, double L);
Metric default_metric(const Scenario& scenario);

struct BuildOptions {
  Metric metric = Metric::MinGradSq;
  FunctionClass function_class = FunctionClass::SmoothNonconvex;
  InitialCondition initial = InitialCondition::FinalGap;
};

// A distinct interpolation point: coordinates and gradient are coefficient
// vectors over the Gram basis; `f_var` is the SDP variable holding its
// function value, or -1 when the value is fixed to zero.
struct Point {
  std::string label;
  Eigen::VectorXd x;
  Eigen::VectorXd g;
  int f_var = -1;
  bool stationary = false;
};

struct PepProblem {
  Scenario scenario;
  int n = 0;
  double L = 1.0;
  double D = 1.0;
  Schedule schedule;
  BuildOptions options;
  // Labels of the Gram basis vectors.
  std::vector<std::string> basis;
  // Affine iterate expressions (coefficients over the basis).
  std::vector<Eigen::VectorXd> x;  // t = 0..n
  std::vector<Eigen::VectorXd> z;  // t = 0..n
  std::vector<Eigen::VectorXd> y;  // t = 0..n-1
  // Index into `points` of the point x_t.
  std::vector<int> point_of_x;
  std::vector<Point> points;
  // Index into `points` of the anchor x*, or -1.
  int anchor = -1;
  // The SDP: Gram entries first, then free function values, then the
  // epigraph variable of MinGradSq (if any).
  int num_gram_vars = 0;
  int tau_var = -1;
  sdp::Problem sdp;
  // Gram coefficient rows of each gradient-norm metric candidate, used by
  // MaxGradSq (one SDP per candidate).
  std::vector<int> metric_points;
};

// Builds the SDP for `n` SF steps. n = 0 is accepted so the degenerate
// single-point problems can be posed.
PepProblem build(const Scenario& scenario, int n, double L, double D,
                 const BuildOptions& options = {});

enum class CertificateStatus { Optimal, Unbounded, Infeasible, NumericalTrouble };

std::string to_string(CertificateStatus status);

struct SolverConfig {
  std::string solver = "ipm";
  double tol = 1e-9;
  int max_n = 30;
  bool verbose = false;
};

struct PepCertificate {
  Scenario scenario;
  int n = 0;
  double L = 1.0;
  double D = 1.0;
  Metric metric = Metric::MinGradSq;
  double value = 0.0;
  CertificateStatus status = CertificateStatus::NumericalTrouble;
  double gap = 0.0;
  int iterations = 0;
  std::string message;
};

PepCertificate solve(const PepProblem& problem, const SolverConfig& config = {});

// Evaluates the metric of the problem on a concrete Gram matrix / value
// assignment given as an SDP variable vector.
double metric_from_solution(const PepProblem& problem, const Eigen::VectorXd& y);

// Figure weights: DecC -> t^(1-alpha); IncC -> t - 2 - alpha ln t (t >= 3,
// NaN otherwise); LinStepGrad -> (t+1)/ln(t+1); LinStepDist -> 1.
double figure_weight(const Scenario& scenario, int t);

struct CurvePoint {
  int t = 0;
  double tau = 0.0;
  double weighted = 0.0;
  CertificateStatus status = CertificateStatus::NumericalTrouble;
  double gap = 0.0;
};

// Solves the SDP for every horizon t = 1..n_max on up to `workers` threads;
// results are ordered by t. Unbounded horizons carry tau = +inf.
std::vector<CurvePoint> curve(const Scenario& scenario, int n_max, double L,
                              double D, const BuildOptions& options,
                              const SolverConfig& config, int workers = 1);

// Result of replaying concrete L-smooth instances through the method and
// comparing their metric with the certificate.
struct SoundnessReport {
  int samples = 0;
  int skipped = 0;
  // max over samples of metric - tau * max(f0 - fn, 0) / D.
  double max_excess = -1e300;
  std::string worst_instance;
};

// Draws random quadratics with spectrum in [-L, L] ([0, L] for the convex
// class) and rescaled builtin problems, runs n steps of the scenario's
// method, and measures each metric against the certificate rescaled to the
// instance's own f(x_0) - f(x_n) (the certificate is linear in D).
SoundnessReport sample_soundness(const PepProblem& problem,
                                 const PepCertificate& certificate,
                                 int samples, std::uint64_t seed);

}  // namespace sflab::pep

#endif  // SFLAB_PEP_H
