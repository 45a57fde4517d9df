#include "sflab/pep.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

#include "sflab/errors.h"
#include "sflab/optimizer.h"
#include "sflab/problem.h"

namespace sflab::pep {

namespace {

using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

int gram_index(int a, int b, int k) {
  if (a > b) std::swap(a, b);
  return a * k - a * (a - 1) / 2 + (b - a);
}

// row += scale * <u, v> expressed over the Gram variables.
void add_inner(VectorXd& row, const VectorXd& u, const VectorXd& v,
               double scale, int k) {
  for (int a = 0; a < k; ++a) {
    if (u[a] == 0.0 && v[a] == 0.0) continue;
    for (int b = a; b < k; ++b) {
      const double coef = a == b ? u[a] * v[a] : u[a] * v[b] + u[b] * v[a];
      if (coef != 0.0) row[gram_index(a, b, k)] += scale * coef;
    }
  }
}

void add_f(VectorXd& row, const Point& p, double scale) {
  if (p.f_var >= 0) row[p.f_var] += scale;
}

sdp::LinearRow to_row(const VectorXd& dense, double rhs) {
  sdp::LinearRow r;
  r.rhs = rhs;
  for (Eigen::Index i = 0; i < dense.size(); ++i) {
    if (dense[i] != 0.0) r.coeffs.emplace_back(static_cast<int>(i), dense[i]);
  }
  return r;
}

// Gram matrix from the SDP variable vector.
Eigen::MatrixXd gram_from(const PepProblem& p, const VectorXd& y) {
  const int k = static_cast<int>(p.basis.size());
  Eigen::MatrixXd G(k, k);
  for (int a = 0; a < k; ++a) {
    for (int b = a; b < k; ++b) {
      G(a, b) = G(b, a) = y[gram_index(a, b, k)];
    }
  }
  return G;
}

VectorXd metric_objective(const PepProblem& p, int point) {
  const int k = static_cast<int>(p.basis.size());
  VectorXd b = VectorXd::Zero(p.sdp.num_vars);
  add_inner(b, p.points[point].g, p.points[point].g, 1.0, k);
  return b;
}

CertificateStatus convert(sdp::Status s) {
  switch (s) {
    case sdp::Status::Optimal: return CertificateStatus::Optimal;
    case sdp::Status::Unbounded: return CertificateStatus::Unbounded;
    case sdp::Status::Infeasible: return CertificateStatus::Infeasible;
    case sdp::Status::NumericalTrouble:
      return CertificateStatus::NumericalTrouble;
  }
  return CertificateStatus::NumericalTrouble;
}

}  // namespace

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::DecC: return "dec_c";
    case ScenarioKind::IncC: return "inc_c";
    case ScenarioKind::LinStepGrad: return "lin_step_grad";
    case ScenarioKind::LinStepDist: return "lin_step_dist";
  }
  return "?";
}

std::string to_string(const Scenario& scenario) {
  std::ostringstream os;
  os << to_string(scenario.kind);
  if (scenario.kind == ScenarioKind::DecC ||
      scenario.kind == ScenarioKind::IncC) {
    os << "(" << scenario.alpha << ")";
  }
  return os.str();
}

std::string to_string(Metric metric) {
  switch (metric) {
    case Metric::LastGradSq: return "last_grad_sq";
    case Metric::MinGradSq: return "min_grad_sq";
    case Metric::MaxGradSq: return "max_grad_sq";
    case Metric::LastDistSq: return "last_dist_sq";
  }
  return "?";
}

std::string to_string(FunctionClass fclass) {
  return fclass == FunctionClass::SmoothConvex ? "smooth_convex"
                                               : "smooth_nonconvex";
}

std::string to_string(CertificateStatus status) {
  switch (status) {
    case CertificateStatus::Optimal: return "optimal";
    case CertificateStatus::Unbounded: return "unbounded";
    case CertificateStatus::Infeasible: return "infeasible";
    case CertificateStatus::NumericalTrouble: return "numerical_trouble";
  }
  return "?";
}

ScenarioKind parse_scenario_kind(const std::string& name) {
  if (name == "dec_c" || name == "DecC") return ScenarioKind::DecC;
  if (name == "inc_c" || name == "IncC") return ScenarioKind::IncC;
  if (name == "lin_step_grad" || name == "LinStepGrad") {
    return ScenarioKind::LinStepGrad;
  }
  if (name == "lin_step_dist" || name == "LinStepDist") {
    return ScenarioKind::LinStepDist;
  }
  throw ConfigError("pep: unknown scenario '" + name + "'");
}

Metric parse_metric(const std::string& name) {
  if (name == "last_grad_sq" || name == "LastGradSq") return Metric::LastGradSq;
  if (name == "min_grad_sq" || name == "MinGradSq") return Metric::MinGradSq;
  if (name == "max_grad_sq" || name == "MaxGradSq") return Metric::MaxGradSq;
  if (name == "last_dist_sq" || name == "LastDistSq") return Metric::LastDistSq;
  throw ConfigError("pep: unknown metric '" + name + "'");
}

FunctionClass parse_function_class(const std::string& name) {
  if (name == "smooth_nonconvex") return FunctionClass::SmoothNonconvex;
  if (name == "smooth_convex") return FunctionClass::SmoothConvex;
  throw ConfigError("pep: unknown function class '" + name + "'");
}

Schedule scenario_schedule(const Scenario& scenario, double L) {
  if (!(std::isfinite(L) && L > 0)) throw ConfigError("pep: L must be > 0");
  switch (scenario.kind) {
    case ScenarioKind::DecC:
      if (!(std::isfinite(scenario.alpha) && scenario.alpha >= 0.0)) {
        throw ConfigError("pep: dec_c requires alpha >= 0");
      }
      return make_schedule(ConstantStep{1.0 / L},
                           PolyDecreasing{scenario.alpha}, 1.0, L);
    case ScenarioKind::IncC:
      if (!(std::isfinite(scenario.alpha) && scenario.alpha >= 0.0 &&
            scenario.alpha < 1.0)) {
        throw ConfigError("pep: inc_c requires alpha in [0, 1)");
      }
      return make_schedule(ConstantStep{1.0 / L},
                           PolyIncreasing{scenario.alpha}, 1.0, L);
    case ScenarioKind::LinStepGrad:
    case ScenarioKind::LinStepDist:
      return make_schedule(LinearGrowthStep{1.0 / L}, Uniform{}, 1.0, L);
  }
  throw ConfigError("pep: unknown scenario");
}

Metric default_metric(const Scenario& scenario) {
  return scenario.kind == ScenarioKind::LinStepDist ? Metric::LastDistSq
                                                    : Metric::MinGradSq;
}

PepProblem build(const Scenario& scenario, int n, double L, double D,
                 const BuildOptions& options) {
  if (n < 0) throw ConfigError("pep: horizon n must be >= 0");
  if (!(std::isfinite(D) && D >= 0.0)) throw ConfigError("pep: D must be >= 0");
  PepProblem p;
  p.scenario = scenario;
  p.n = n;
  p.L = L;
  p.D = D;
  p.options = options;
  p.schedule = scenario_schedule(scenario, L);
  const bool anchored = options.initial == InitialCondition::OptimalityGap;

  // Columns: [x0 - x*] (anchored only), then one gradient per distinct point.
  const int kmax = (anchored ? 1 : 0) + n + 1;
  std::vector<std::string> labels;
  if (anchored) labels.push_back("x0-x*");

  if (anchored) {
    Point star;
    star.label = "x*";
    star.x = VectorXd::Zero(kmax);
    star.g = VectorXd::Zero(kmax);
    star.stationary = true;
    p.points.push_back(star);
    p.anchor = 0;
  }
  auto point_for = [&](const VectorXd& x, int t) {
    for (std::size_t i = 0; i < p.points.size(); ++i) {
      if (static_cast<int>(i) == p.anchor) continue;
      if (p.points[i].x == x) return static_cast<int>(i);
    }
    Point pt;
    pt.label = "x" + std::to_string(t);
    pt.x = x;
    pt.g = VectorXd::Zero(kmax);
    pt.g[static_cast<int>(labels.size())] = 1.0;
    labels.push_back("g(" + pt.label + ")");
    p.points.push_back(pt);
    return static_cast<int>(p.points.size()) - 1;
  };

  VectorXd x0 = VectorXd::Zero(kmax);
  if (anchored) x0[0] = 1.0;
  p.x.push_back(x0);
  p.z.push_back(x0);
  for (int t = 0; t < n; ++t) {
    const int pt = point_for(p.x[t], t);
    p.point_of_x.push_back(pt);
    p.y.push_back(p.x[t]);
    const double e = eta<double>(p.schedule, t);
    const double ct = c<double>(p.schedule, t);
    VectorXd z_next = p.z[t] - e * p.points[pt].g;
    VectorXd x_next = (1.0 - ct) * p.x[t] + ct * z_next;
    p.z.push_back(std::move(z_next));
    p.x.push_back(std::move(x_next));
  }
  p.point_of_x.push_back(point_for(p.x[n], n));

  // Trim unused gradient columns.
  const int k = static_cast<int>(labels.size());
  p.basis = labels;
  auto trim = [k](VectorXd& v) { v.conservativeResize(k); };
  for (auto& v : p.x) trim(v);
  for (auto& v : p.z) trim(v);
  for (auto& v : p.y) trim(v);
  for (auto& pt : p.points) {
    trim(pt.x);
    trim(pt.g);
  }

  // Variables.
  p.num_gram_vars = k * (k + 1) / 2;
  int next_var = p.num_gram_vars;
  const int fixed_point = anchored ? p.anchor : p.point_of_x[n];
  for (std::size_t i = 0; i < p.points.size(); ++i) {
    if (static_cast<int>(i) == fixed_point) continue;
    p.points[i].f_var = next_var++;
  }
  // Gradient-norm metric candidates: x_1..x_n (x_0 when n = 0).
  for (int t = std::min(1, n); t <= n; ++t) {
    const int pt = p.point_of_x[t];
    if (std::find(p.metric_points.begin(), p.metric_points.end(), pt) ==
        p.metric_points.end()) {
      p.metric_points.push_back(pt);
    }
  }
  if (options.metric == Metric::MinGradSq) p.tau_var = next_var++;
  const int m = next_var;
  p.sdp.num_vars = m;
  p.sdp.objective = VectorXd::Zero(m);

  // Gram matrix is PSD: S = sum_{a<=b} G_ab E_ab.
  sdp::Block gram;
  gram.size = k;
  for (int a = 0; a < k; ++a) {
    for (int b = a; b < k; ++b) {
      gram.entries.push_back(sdp::SymEntry{gram_index(a, b, k), a, b, -1.0});
    }
  }
  p.sdp.blocks.push_back(std::move(gram));

  // Interpolation conditions, written as row . vars <= 0.
  const double invL = 1.0 / L;
  for (std::size_t i = 0; i < p.points.size(); ++i) {
    for (std::size_t j = 0; j < p.points.size(); ++j) {
      if (i == j) continue;
      const Point& pi = p.points[i];
      const Point& pj = p.points[j];
      const VectorXd dx = pi.x - pj.x;
      const VectorXd dg = pi.g - pj.g;
      VectorXd row = VectorXd::Zero(m);
      if (options.function_class == FunctionClass::SmoothNonconvex) {
        // f_i - f_j >= 1/2 <g_i + g_j, x_i - x_j> + |g_i - g_j|^2 / (4L)
        //              - L/4 |x_i - x_j|^2
        add_f(row, pi, -1.0);
        add_f(row, pj, 1.0);
        add_inner(row, pi.g + pj.g, dx, 0.5, k);
        add_inner(row, dg, dg, 0.25 * invL, k);
        add_inner(row, dx, dx, -0.25 * L, k);
      } else {
        // f_i >= f_j + <g_j, x_i - x_j> + |g_i - g_j|^2 / (2L)
        add_f(row, pi, -1.0);
        add_f(row, pj, 1.0);
        add_inner(row, pj.g, dx, 1.0, k);
        add_inner(row, dg, dg, 0.5 * invL, k);
      }
      p.sdp.rows.push_back(to_row(row, 0.0));
    }
  }
  if (anchored) {
    // f* is the global minimum: f_i - f* >= |g_i|^2 / (2L).
    for (std::size_t i = 0; i < p.points.size(); ++i) {
      if (static_cast<int>(i) == p.anchor) continue;
      VectorXd row = VectorXd::Zero(m);
      add_f(row, p.points[i], -1.0);
      add_inner(row, p.points[i].g, p.points[i].g, 0.5 * invL, k);
      p.sdp.rows.push_back(to_row(row, 0.0));
    }
  }

  // Initial condition f(x_0) - f_ref <= D, with f_ref fixed to zero.
  {
    VectorXd row = VectorXd::Zero(m);
    add_f(row, p.points[p.point_of_x[0]], 1.0);
    p.sdp.rows.push_back(to_row(row, D));
  }

  // Objective.
  switch (options.metric) {
    case Metric::LastGradSq:
      p.sdp.objective = metric_objective(p, p.point_of_x[n]);
      break;
    case Metric::MaxGradSq:
      p.sdp.objective = metric_objective(p, p.metric_points.front());
      break;
    case Metric::MinGradSq:
      p.sdp.objective[p.tau_var] = 1.0;
      for (int pt : p.metric_points) {
        // tau <= |g_t|^2.
        VectorXd row = VectorXd::Zero(m);
        row[p.tau_var] = 1.0;
        add_inner(row, p.points[pt].g, p.points[pt].g, -1.0, k);
        p.sdp.rows.push_back(to_row(row, 0.0));
      }
      break;
    case Metric::LastDistSq: {
      const VectorXd d = p.x[n] - p.z[n];
      add_inner(p.sdp.objective, d, d, 1.0, k);
      break;
    }
  }
  return p;
}

double metric_from_solution(const PepProblem& p, const VectorXd& y) {
  const Eigen::MatrixXd G = gram_from(p, y);
  auto sq = [&](const VectorXd& v) { return v.dot(G * v); };
  switch (p.options.metric) {
    case Metric::LastGradSq: return sq(p.points[p.point_of_x[p.n]].g);
    case Metric::MinGradSq: {
      double best = kInf;
      for (int pt : p.metric_points) best = std::min(best, sq(p.points[pt].g));
      return best;
    }
    case Metric::MaxGradSq: {
      double best = -kInf;
      for (int pt : p.metric_points) best = std::max(best, sq(p.points[pt].g));
      return best;
    }
    case Metric::LastDistSq: return sq(p.x[p.n] - p.z[p.n]);
  }
  return 0.0;
}

PepCertificate solve(const PepProblem& problem, const SolverConfig& config) {
  if (config.solver != "ipm") {
    throw ConfigError("pep: unknown solver '" + config.solver +
                      "' (available: ipm)");
  }
  if (!(config.tol > 0.0)) throw ConfigError("pep: tol must be > 0");
  sdp::Options opts;
  opts.tol = config.tol;
  opts.verbose = config.verbose;

  PepCertificate cert;
  cert.scenario = problem.scenario;
  cert.n = problem.n;
  cert.L = problem.L;
  cert.D = problem.D;
  cert.metric = problem.options.metric;

  auto record = [&](const sdp::Result& r) {
    cert.status = convert(r.status);
    cert.gap = r.gap;
    cert.iterations += r.iterations;
    cert.message = r.message;
    cert.value = r.status == sdp::Status::Unbounded ? kInf : r.value;
  };

  if (problem.options.metric != Metric::MaxGradSq) {
    record(sdp::solve(problem.sdp, opts));
    return cert;
  }
  // Max over iterates: one SDP per candidate, keep the largest.
  double best = -kInf;
  CertificateStatus worst = CertificateStatus::Optimal;
  double gap = 0.0;
  int iterations = 0;
  std::string message;
  for (int pt : problem.metric_points) {
    sdp::Problem sub = problem.sdp;
    sub.objective = metric_objective(problem, pt);
    const sdp::Result r = sdp::solve(sub, opts);
    iterations += r.iterations;
    const CertificateStatus st = convert(r.status);
    if (st == CertificateStatus::Unbounded) {
      best = kInf;
      worst = st;
      message = r.message;
      break;
    }
    if (st != CertificateStatus::Optimal) {
      worst = st;
      message = r.message;
      continue;
    }
    if (r.value > best) {
      best = r.value;
      gap = r.gap;
      if (message.empty()) message = r.message;
    }
  }
  cert.value = best;
  cert.status = worst;
  cert.gap = gap;
  cert.iterations = iterations;
  cert.message = message;
  return cert;
}

double figure_weight(const Scenario& scenario, int t) {
  const double tt = static_cast<double>(t);
  switch (scenario.kind) {
    case ScenarioKind::DecC: return std::pow(tt, 1.0 - scenario.alpha);
    case ScenarioKind::IncC:
      if (t < 3) return std::numeric_limits<double>::quiet_NaN();
      return tt - 2.0 - scenario.alpha * std::log(tt);
    case ScenarioKind::LinStepGrad: return (tt + 1.0) / std::log(tt + 1.0);
    case ScenarioKind::LinStepDist: return 1.0;
  }
  return 1.0;
}

std::vector<CurvePoint> curve(const Scenario& scenario, int n_max, double L,
                              double D, const BuildOptions& options,
                              const SolverConfig& config, int workers) {
  if (n_max < 1) throw ConfigError("pep: n_max must be >= 1");
  if (n_max > config.max_n) {
    std::ostringstream os;
    os << "pep: n_max = " << n_max << " exceeds the configured limit "
       << config.max_n << " (raise pep.max_n)";
    throw ConfigError(os.str());
  }
  std::vector<CurvePoint> out(n_max);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n_max; i = next++) {
      const int t = i + 1;
      CurvePoint cp;
      cp.t = t;
      try {
        const PepProblem prob = build(scenario, t, L, D, options);
        const PepCertificate cert = solve(prob, config);
        cp.status = cert.status;
        cp.gap = cert.gap;
        cp.tau = cert.value;
      } catch (const std::exception&) {
        cp.status = CertificateStatus::NumericalTrouble;
        cp.tau = std::numeric_limits<double>::quiet_NaN();
      }
      cp.weighted = cp.tau * figure_weight(scenario, t);
      out[i] = cp;
    }
  };
  const int nthreads = std::clamp(workers, 1, n_max);
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sampling soundness.

namespace {

Problem<double> random_quadratic(std::mt19937_64& rng, double L, bool convex) {
  std::uniform_int_distribution<int> dim_dist(1, 4);
  const int d = dim_dist(rng);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd A(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) A(i, j) = normal(rng);
  }
  const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(A).householderQ();
  const double lo = convex ? 0.0 : -L;
  std::uniform_real_distribution<double> uni(lo, L);
  std::uniform_int_distribution<int> pick(0, 3);
  VectorXd eig(d);
  for (int i = 0; i < d; ++i) {
    // Bias toward the extreme curvatures where worst cases live.
    switch (pick(rng)) {
      case 0: eig[i] = L; break;
      case 1: eig[i] = lo; break;
      default: eig[i] = uni(rng); break;
    }
  }
  const Eigen::MatrixXd H = Q * eig.asDiagonal() * Q.transpose();
  Problem<double> p;
  p.name = "random_quadratic";
  p.dim = d;
  p.L = L;
  p.f_star = convex ? 0.0 : -kInf;
  p.objective = [H](const VectorXd& x) { return 0.5 * x.dot(H * x); };
  p.gradient = [H](const VectorXd& x) -> VectorXd { return H * x; };
  p.x0_hint = VectorXd::Ones(d);
  return p;
}

// Rescales a builtin so its certified smoothness constant equals L.
Problem<double> rescaled_builtin(const std::string& name, double L) {
  Problem<double> base = make_builtin<double>(name, 2, 1.0);
  const double s = L / base.L;
  Problem<double> p = base;
  p.L = L;
  p.f_star = s * base.f_star;
  auto f = base.objective;
  auto g = base.gradient;
  p.objective = [f, s](const VectorXd& x) { return s * f(x); };
  p.gradient = [g, s](const VectorXd& x) -> VectorXd { return s * g(x); };
  return p;
}

double concrete_metric(const Trajectory<double>& tr, Metric metric, int n) {
  switch (metric) {
    case Metric::LastGradSq: return tr.grad_x_sq[n];
    case Metric::MinGradSq: {
      if (n == 0) return tr.grad_x_sq[0];
      double best = kInf;
      for (int t = 1; t <= n; ++t) best = std::min(best, tr.grad_x_sq[t]);
      return best;
    }
    case Metric::MaxGradSq: {
      if (n == 0) return tr.grad_x_sq[0];
      double best = -kInf;
      for (int t = 1; t <= n; ++t) best = std::max(best, tr.grad_x_sq[t]);
      return best;
    }
    case Metric::LastDistSq: return (tr.x[n] - tr.z[n]).squaredNorm();
  }
  return 0.0;
}

}  // namespace

SoundnessReport sample_soundness(const PepProblem& problem,
                                 const PepCertificate& certificate,
                                 int samples, std::uint64_t seed) {
  SoundnessReport rep;
  if (certificate.status != CertificateStatus::Optimal) {
    rep.skipped = samples;
    return rep;
  }
  const bool convex =
      problem.options.function_class == FunctionClass::SmoothConvex;
  const bool anchored =
      problem.options.initial == InitialCondition::OptimalityGap;
  const double per_unit_D =
      problem.D > 0.0 ? certificate.value / problem.D : kInf;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> kind_dist(0, 7);
  const std::vector<std::string> builtins =
      convex ? std::vector<std::string>{"quad"} : builtin_names();
  for (int sidx = 0; sidx < samples; ++sidx) {
    const int kind = kind_dist(rng);
    Problem<double> f;
    if (kind < 4 || (anchored && !convex && kind < 6)) {
      // Anchored runs need a finite f*: use convex quadratics there.
      f = random_quadratic(rng, problem.L, convex || anchored);
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, builtins.size() - 1);
      f = rescaled_builtin(builtins[pick(rng)], problem.L);
    }
    VectorXd x0(f.dim);
    if (f.box) {
      std::uniform_real_distribution<double> uni(-*f.box, *f.box);
      for (Eigen::Index i = 0; i < f.dim; ++i) x0[i] = uni(rng);
    } else {
      for (Eigen::Index i = 0; i < f.dim; ++i) x0[i] = normal(rng);
    }
    Trajectory<double> tr;
    try {
      tr = run(f, no_noise(), problem.schedule, x0,
               std::max<StepIndex>(problem.n, 1));
    } catch (const DomainEscape&) {
      ++rep.skipped;
      continue;
    }
    const double m = concrete_metric(tr, problem.options.metric, problem.n);
    const double budget =
        anchored ? tr.f_x[0] - f.f_star : tr.f_x[0] - tr.f_x[problem.n];
    const double allowed = budget > 0.0 ? per_unit_D * budget : 0.0;
    const double excess = m - allowed;
    ++rep.samples;
    if (excess > rep.max_excess) {
      rep.max_excess = excess;
      std::ostringstream os;
      os.precision(10);
      os << f.name << " dim " << f.dim << ": metric " << m << ", f0-fref "
         << budget << ", certificate " << allowed;
      rep.worst_instance = os.str();
    }
  }
  return rep;
}

}  // namespace sflab::pep
