#include "sflab/harness.h"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "sflab/errors.h"

namespace sflab::harness {

using json = nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

// Absolute slack for per-step descent inequalities.
constexpr double kStepSlack = 1e-10;
// Absolute slack for telescoped rate bounds.
constexpr double kBoundSlack = 1e-12;
// Claim 1 recursion tolerance, relative to the iterate scale.
constexpr double kClaim1Tol = 1e-12;
// Claims 2-3 tolerance, relative to the gradient scale.
constexpr double kClaimTol = 1e-10;
// Equivalence tolerance on the relative x deviation.
constexpr double kEquivalenceTol = 1e-9;
// Monte-Carlo band width in standard errors.
constexpr double kMcBand = 5.0;

// ---------------------------------------------------------------------------
// Parsing helpers.

double get_number(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) {
    throw ConfigError(where + ": missing key '" + key + "'");
  }
  if (!j.at(key).is_number()) {
    throw ConfigError(where + ": '" + key + "' must be a number");
  }
  return j.at(key).get<double>();
}

std::uint64_t get_seed(const json& j, const std::string& where) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) {
    throw ConfigError(where + ": seeds must be nonnegative integers");
  }
  if (j.is_number_integer() && j.get<std::int64_t>() < 0) {
    throw ConfigError(where + ": seeds must be nonnegative integers");
  }
  return j.get<std::uint64_t>();
}

StepLaw parse_step(const json& j, double L) {
  if (!j.is_object()) throw ConfigError("schedule.step must be an object");
  const std::string kind = j.value("kind", "constant");
  auto step_value = [&](const char* key, const char* rel_key) {
    if (j.contains(rel_key)) return get_number(j, rel_key, "schedule.step") / L;
    return get_number(j, key, "schedule.step");
  };
  if (kind == "constant") return ConstantStep{step_value("eta", "eta_over_L")};
  if (kind == "linear") return LinearGrowthStep{step_value("eta0", "eta0_over_L")};
  throw ConfigError("schedule.step: unknown kind '" + kind +
                    "' (constant, linear)");
}

AvgLaw parse_avg(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "uniform") return Uniform{};
    throw ConfigError("schedule.avg: unknown law '" + j.get<std::string>() + "'");
  }
  if (!j.is_object()) throw ConfigError("schedule.avg must be an object");
  const std::string kind = j.value("kind", "uniform");
  if (kind == "uniform") return Uniform{};
  if (kind == "poly_dec") return PolyDecreasing{get_number(j, "alpha", "schedule.avg")};
  if (kind == "poly_inc") return PolyIncreasing{get_number(j, "alpha", "schedule.avg")};
  throw ConfigError("schedule.avg: unknown kind '" + kind +
                    "' (uniform, poly_dec, poly_inc)");
}

json step_json(const StepLaw& law) {
  if (const auto* c = std::get_if<ConstantStep>(&law)) {
    return json{{"kind", "constant"}, {"eta", c->eta}};
  }
  return json{{"kind", "linear"}, {"eta0", std::get<LinearGrowthStep>(law).eta0}};
}

json avg_json(const AvgLaw& law) {
  if (std::holds_alternative<Uniform>(law)) return json{{"kind", "uniform"}};
  if (const auto* d = std::get_if<PolyDecreasing>(&law)) {
    return json{{"kind", "poly_dec"}, {"alpha", d->alpha}};
  }
  return json{{"kind", "poly_inc"}, {"alpha", std::get<PolyIncreasing>(law).alpha}};
}

json x0_json(const X0Spec& x0) {
  switch (x0.kind) {
    case X0Spec::Kind::Ones: return "ones";
    case X0Spec::Kind::Problem: return "problem";
    case X0Spec::Kind::Gaussian:
      return json{{"kind", "gaussian"}, {"seed", x0.seed}, {"radius", x0.radius}};
    case X0Spec::Kind::Explicit: return json(x0.values);
  }
  return "ones";
}

X0Spec parse_x0(const json& j) {
  X0Spec out;
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "ones") return out;
    if (s == "problem") {
      out.kind = X0Spec::Kind::Problem;
      return out;
    }
    throw ConfigError("x0: unknown preset '" + s + "' (ones, problem)");
  }
  if (j.is_array()) {
    out.kind = X0Spec::Kind::Explicit;
    for (const auto& v : j) {
      if (!v.is_number()) throw ConfigError("x0: entries must be numbers");
      out.values.push_back(v.get<double>());
    }
    return out;
  }
  if (j.is_object()) {
    const std::string kind = j.value("kind", "");
    if (kind != "gaussian") throw ConfigError("x0: unknown kind '" + kind + "'");
    out.kind = X0Spec::Kind::Gaussian;
    if (j.contains("seed")) out.seed = get_seed(j.at("seed"), "x0");
    if (j.contains("radius")) out.radius = get_number(j, "radius", "x0");
    if (!(out.radius > 0)) throw ConfigError("x0: radius must be > 0");
    return out;
  }
  throw ConfigError("x0: expected a preset name, a vector or an object");
}

// Parses without the compatibility validation.
RunConfig parse_unvalidated(const json& j) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  RunConfig cfg;
  // Problem.
  if (j.contains("problem")) {
    const json& pj = j.at("problem");
    if (pj.is_string()) {
      cfg.problem = pj.get<std::string>();
    } else if (pj.is_object()) {
      if (pj.contains("kind")) {
        cfg.problem = pj.at("kind").get<std::string>();
      } else if (pj.contains("name")) {
        cfg.problem = pj.at("name").get<std::string>();
      } else {
        throw ConfigError("problem: object needs 'kind' or 'name'");
      }
      if (pj.contains("L")) cfg.L = get_number(pj, "L", "problem");
      if (pj.contains("dim")) {
        if (!pj.at("dim").is_number_integer()) {
          throw ConfigError("problem: dim must be an integer");
        }
        cfg.dim = pj.at("dim").get<Eigen::Index>();
      }
    } else {
      throw ConfigError("problem: expected a name or an object");
    }
  }
  const Problem<double> probe = make_builtin<double>(cfg.problem, cfg.dim, cfg.L);
  // Schedule.
  cfg.schedule = make_schedule(ConstantStep{1.0 / probe.L}, Uniform{}, 1.0, probe.L);
  if (j.contains("schedule")) {
    const json& sj = j.at("schedule");
    if (!sj.is_object()) throw ConfigError("schedule must be an object");
    if (sj.contains("step")) cfg.schedule.step = parse_step(sj.at("step"), probe.L);
    if (sj.contains("avg")) cfg.schedule.avg = parse_avg(sj.at("avg"));
    if (sj.contains("beta")) cfg.schedule.beta_law.beta = get_number(sj, "beta", "schedule");
    if (sj.contains("L")) cfg.schedule.L_bound = get_number(sj, "L", "schedule");
  }
  // Noise.
  if (j.contains("noise")) {
    const json& nj = j.at("noise");
    if (!nj.is_object()) throw ConfigError("noise must be an object");
    if (nj.contains("sigma2")) cfg.sigma2 = get_number(nj, "sigma2", "noise");
    if (nj.contains("seed")) cfg.seed = get_seed(nj.at("seed"), "noise");
  }
  if (!(std::isfinite(cfg.sigma2) && cfg.sigma2 >= 0)) {
    throw ConfigError("noise: sigma2 must be >= 0");
  }
  if (j.contains("seeds")) {
    if (!j.at("seeds").is_array()) throw ConfigError("seeds must be an array");
    for (const auto& s : j.at("seeds")) cfg.seeds.push_back(get_seed(s, "seeds"));
  }
  if (j.contains("x0")) cfg.x0 = parse_x0(j.at("x0"));
  if (j.contains("T")) {
    if (!j.at("T").is_number_integer()) throw ConfigError("T must be an integer");
    cfg.T = j.at("T").get<StepIndex>();
  }
  if (j.contains("checks")) {
    if (!j.at("checks").is_array()) throw ConfigError("checks must be an array");
    for (const auto& c : j.at("checks")) {
      if (!c.is_string()) throw ConfigError("checks: entries must be strings");
      cfg.checks.push_back(parse_check(c.get<std::string>()));
    }
  }
  if (j.contains("unsafe_schedule")) {
    cfg.unsafe = j.at("unsafe_schedule").get<bool>();
  }
  return cfg;
}

json config_to_json(const RunConfig& c) {
  json j;
  j["problem"] = json{{"kind", c.problem}, {"dim", c.dim}, {"L", c.L}};
  j["schedule"] = json{{"step", step_json(c.schedule.step)},
                       {"avg", avg_json(c.schedule.avg)},
                       {"beta", c.schedule.beta_law.beta},
                       {"L", c.schedule.L_bound}};
  j["noise"] = json{{"sigma2", c.sigma2}, {"seed", c.seed}};
  j["seeds"] = c.seeds;
  j["x0"] = x0_json(c.x0);
  j["T"] = c.T;
  json checks = json::array();
  for (Check ch : c.checks) checks.push_back(to_string(ch));
  j["checks"] = checks;
  j["unsafe_schedule"] = c.unsafe;
  return j;
}

std::vector<Check> auto_checks(const Schedule& s) {
  std::vector<Check> out = {Check::Lemma1, Check::Claim1};
  if (s.beta_law.beta != 1.0) {
    out.push_back(Check::Claim2);
    out.push_back(Check::Claim3);
    return out;
  }
  if (is_linear_growth(s)) {
    if (is_uniform_averaging(s)) {
      out.push_back(Check::T4);
      out.push_back(Check::Assumption2);
    }
    return out;
  }
  if (std::holds_alternative<PolyIncreasing>(s.avg)) {
    out.push_back(Check::T5Inc);
  } else {
    if (is_uniform_averaging(s)) out.push_back(Check::T3);
    out.push_back(Check::T5Dec);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Check evaluation.

CheckRecord make_record(Check check) {
  CheckRecord r;
  r.id = to_string(check);
  return r;
}

CheckRecord skipped(Check check, const std::string& cause) {
  CheckRecord r = make_record(check);
  r.status = Status::Skip;
  r.measured = kNaN;
  r.bound = kNaN;
  r.slack = kNaN;
  r.note = cause;
  return r;
}

// Tracks the worst and first violation of lhs <= rhs + tol over a sweep.
struct InequalityScan {
  double worst_slack = kInf;
  double worst_lhs = kNaN;
  double worst_rhs = kNaN;
  std::optional<StepIndex> first;
  double first_lhs = 0.0;
  double first_rhs = 0.0;

  void add(StepIndex t, double lhs, double rhs, double tol) {
    const double slack = rhs - lhs;
    if (!(slack >= worst_slack)) {
      worst_slack = slack;
      worst_lhs = lhs;
      worst_rhs = rhs;
    }
    if (!(lhs <= rhs + tol) && !first) {
      first = t;
      first_lhs = lhs;
      first_rhs = rhs;
    }
  }

  void finish(CheckRecord& r) const {
    r.measured = worst_lhs;
    r.bound = worst_rhs;
    r.slack = worst_slack;
    r.status = first ? Status::Fail : Status::Pass;
    if (first) {
      r.first_violation = first;
      r.violation_lhs = first_lhs;
      r.violation_rhs = first_rhs;
    }
  }
};

std::optional<Theorem> theorem_of(Check check) {
  switch (check) {
    case Check::T3: return Theorem::T3;
    case Check::T4: return Theorem::T4;
    case Check::T5Dec: return Theorem::T5Dec;
    case Check::T5Inc: return Theorem::T5Inc;
    default: return std::nullopt;
  }
}

double d_hat_sq(const Trajectory<double>& tr, StepIndex t_end) {
  double best = 0.0;
  for (StepIndex t = 0; t <= t_end; ++t) {
    best = std::max(best, tr.delta_norm_sq(t) / static_cast<double>(t + 1));
  }
  return best;
}

// Potential-based descent check. Where the |delta|^2 coefficient is
// nonpositive the residual must be <= 0; otherwise <= coefficient*|delta|^2.
CheckRecord check_lemma1(const Trajectory<double>& tr,
                         const PotentialTrace<double>& trace) {
  CheckRecord r = make_record(Check::Lemma1);
  InequalityScan scan;
  double strong_worst = -kInf;
  for (StepIndex t = 2; t <= tr.T - 1; ++t) {
    const auto& rec = trace.records[t];
    const double dsq = tr.delta_norm_sq(t);
    const double coeff = std::isnan(rec.delta_coeff) ? 0.0 : rec.delta_coeff;
    scan.add(t, rec.descent_residual, std::max(0.0, coeff) * dsq, kStepSlack);
    strong_worst = std::max(strong_worst, rec.descent_residual - coeff * dsq);
  }
  scan.finish(r);
  std::ostringstream os;
  os << "max_t (residual - delta_coeff*|delta|^2) = " << format_double(strong_worst);
  r.note = os.str();
  return r;
}

CheckRecord check_lemma1_expectation(const std::vector<Trajectory<double>>& runs,
                                     const std::vector<PotentialTrace<double>>& traces,
                                     const std::vector<std::uint64_t>& seeds) {
  CheckRecord r = make_record(Check::Lemma1);
  r.seeds = seeds;
  InequalityScan scan;
  const StepIndex T = runs.front().T;
  const double n = static_cast<double>(runs.size());
  for (StepIndex t = 2; t <= T - 1; ++t) {
    double sum = 0.0, sum_sq = 0.0, bound_sum = 0.0;
    for (std::size_t k = 0; k < runs.size(); ++k) {
      const auto& rec = traces[k].records[t];
      const double coeff = std::isnan(rec.delta_coeff) ? 0.0 : rec.delta_coeff;
      sum += rec.descent_residual;
      sum_sq += rec.descent_residual * rec.descent_residual;
      bound_sum += std::max(0.0, coeff) * runs[k].delta_norm_sq(t);
    }
    const double mean = sum / n;
    const double var = n > 1 ? std::max(0.0, (sum_sq - n * mean * mean) / (n - 1)) : 0.0;
    const double band = kMcBand * std::sqrt(var / n);
    scan.add(t, mean, bound_sum / n + band, 1e-12);
  }
  scan.finish(r);
  r.note = "mean residual over seeds vs 5-standard-error band";
  return r;
}

CheckRecord check_bound(Check check, const Trajectory<double>& tr,
                        const PotentialTrace<double>& trace, double sigma2) {
  CheckRecord r = make_record(check);
  const Theorem th = *theorem_of(check);
  std::optional<double> d2;
  if (th == Theorem::T4) d2 = d_hat_sq(tr, tr.T);
  RateBound rb = bound(th, trace.V2, tr.schedule, tr.T, sigma2, d2);
  if (rb.qualitative) return skipped(check, "only an O(1) statement exists for alpha > 1");
  fill_window(rb, tr);
  InequalityScan scan;
  if (th == Theorem::T4) {
    // Per-step form with the measured D^2.
    const double e0 = base_eta(tr.schedule);
    for (StepIndex t = 2; t <= tr.T - 1; ++t) {
      const double lhs = e0 / 4.0 * tr.grad_x_sq[t];
      const double rhs = trace.records[t].V - trace.records[t + 1].V +
                         E_coeff<double>(t, tr.schedule.L_bound) * *d2 *
                             static_cast<double>(t + 1);
      scan.add(t, lhs, rhs, kStepSlack);
    }
  }
  scan.add(rb.window_argmin, rb.window_min, rb.bound_value,
           kBoundSlack * std::max(1.0, std::abs(rb.bound_value)));
  scan.finish(r);
  // Report the telescoped bound itself as the headline numbers.
  r.measured = rb.window_min;
  r.bound = rb.bound_value;
  r.slack = rb.bound_value - rb.window_min;
  std::ostringstream os;
  os << "V2 = " << format_double(trace.V2) << ", window argmin t = "
     << rb.window_argmin;
  if (d2) os << ", D_hat = " << format_double(std::sqrt(*d2));
  if (th == Theorem::T4) {
    os << ", per-step worst slack = " << format_double(scan.worst_slack);
  }
  r.note = os.str();
  return r;
}

CheckRecord check_bound_expectation(Check check,
                                    const std::vector<Trajectory<double>>& runs,
                                    const std::vector<PotentialTrace<double>>& traces,
                                    double sigma2,
                                    const std::vector<std::uint64_t>& seeds) {
  CheckRecord r = make_record(check);
  r.seeds = seeds;
  const Theorem th = *theorem_of(check);
  const double n = static_cast<double>(runs.size());
  double sum = 0.0, sum_sq = 0.0, mean_min = 0.0, mean_bound = 0.0;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    std::optional<double> d2;
    if (th == Theorem::T4) d2 = d_hat_sq(runs[k], runs[k].T);
    RateBound rb = bound(th, traces[k].V2, runs[k].schedule, runs[k].T, sigma2, d2);
    if (rb.qualitative) return skipped(check, "only an O(1) statement exists for alpha > 1");
    fill_window(rb, runs[k]);
    const double diff = rb.window_min - rb.bound_value;
    sum += diff;
    sum_sq += diff * diff;
    mean_min += rb.window_min / n;
    mean_bound += rb.bound_value / n;
  }
  const double mean = sum / n;
  const double var = n > 1 ? std::max(0.0, (sum_sq - n * mean * mean) / (n - 1)) : 0.0;
  const double band = kMcBand * std::sqrt(var / n);
  r.measured = mean_min;
  r.bound = mean_bound + band;
  r.slack = r.bound - r.measured;
  r.status = r.slack >= -kBoundSlack ? Status::Pass : Status::Fail;
  if (r.status == Status::Fail) {
    r.first_violation = runs.front().T - 1;
    r.violation_lhs = r.measured;
    r.violation_rhs = r.bound;
  }
  r.note = "seed-averaged window minimum vs bound (+5 standard errors)";
  return r;
}

CheckRecord check_claim1(const Trajectory<double>& tr) {
  CheckRecord r = make_record(Check::Claim1);
  InequalityScan scan;
  double worst = 0.0;
  for (StepIndex t = 0; t < tr.T; ++t) {
    const double ct = c<double>(tr.schedule, t);
    const double e = eta<double>(tr.schedule, t);
    const Vector<double> predicted = (1.0 - ct) * (tr.delta(t) - e * tr.g[t]);
    const double resid = (tr.delta(t + 1) - predicted).lpNorm<Eigen::Infinity>();
    const double scale = std::max({1.0, tr.x[t + 1].lpNorm<Eigen::Infinity>(),
                                   tr.z[t + 1].lpNorm<Eigen::Infinity>()});
    worst = std::max(worst, resid / scale);
    scan.add(t, resid / scale, kClaim1Tol, 0.0);
  }
  scan.finish(r);
  r.measured = worst;
  r.bound = kClaim1Tol;
  r.slack = kClaim1Tol - worst;
  r.note = "max relative residual of delta_{t+1} = (1-c_{t+1})(delta_t - eta_t g_t)";
  return r;
}

CheckRecord check_claim(Check check, const Trajectory<double>& tr,
                        const Problem<double>& p) {
  CheckRecord r = make_record(check);
  InequalityScan scan;
  const double L = p.L;
  for (StepIndex t = 0; t < tr.T; ++t) {
    const double b = beta<double>(tr.schedule, t);
    const double pen = L * L * (1.0 - b) * (1.0 - b) * tr.delta_norm_sq(t);
    const double gy = grad(p, tr.y[t]).squaredNorm();
    const double gx = tr.grad_x_sq[t];
    const double tol = kClaimTol * std::max({1.0, gx, gy});
    if (check == Check::Claim2) {
      scan.add(t, 0.5 * gx - 2.0 * pen, gy, tol);
    } else {
      scan.add(t, gy, gx + pen, tol);
    }
  }
  scan.finish(r);
  r.note = check == Check::Claim2
               ? "|grad f(y)|^2 >= |grad f(x)|^2/2 - 2L^2(1-beta)^2|delta|^2"
               : "|grad f(y)|^2 <= |grad f(x)|^2 + L^2(1-beta)^2|delta|^2";
  return r;
}

CheckRecord check_equivalence(const RunConfig& cfg, const Problem<double>& p,
                              const Vector<double>& x0,
                              const Trajectory<double>& sf,
                              const NoiseModel& noise) {
  CheckRecord r = make_record(Check::Equivalence);
  if (cfg.schedule.beta_law.beta != 1.0) {
    return skipped(Check::Equivalence, "equivalence maps require beta = 1");
  }
  double dev_sgdm = kNaN, dev_shbm = kNaN;
  std::string notes;
  try {
    const SgdmParams sp = sgdm_params_from_spa(cfg.schedule, cfg.T);
    dev_sgdm = max_relative_deviation(sf, run_sgdm(p, noise, sp, x0, cfg.T));
  } catch (const MapInfeasible& e) {
    notes += std::string("SGD+M: ") + e.what() + "; ";
  }
  try {
    const ShbmParams hp = shbm_params_from_spa(cfg.schedule, cfg.T);
    dev_shbm = max_relative_deviation(sf, run_shbm(p, noise, hp, x0, cfg.T));
  } catch (const MapInfeasible& e) {
    notes += std::string("SHBM: ") + e.what() + "; ";
  }
  if (std::isnan(dev_sgdm) && std::isnan(dev_shbm)) {
    return skipped(Check::Equivalence, notes);
  }
  double worst = 0.0;
  if (!std::isnan(dev_sgdm)) worst = std::max(worst, dev_sgdm);
  if (!std::isnan(dev_shbm)) worst = std::max(worst, dev_shbm);
  r.measured = worst;
  r.bound = kEquivalenceTol;
  r.slack = kEquivalenceTol - worst;
  r.status = worst <= kEquivalenceTol ? Status::Pass : Status::Fail;
  std::ostringstream os;
  os << notes << "max relative deviation SGD+M " << format_double(dev_sgdm)
     << ", SHBM " << format_double(dev_shbm);
  r.note = os.str();
  if (!notes.empty() && r.status == Status::Pass) r.status = Status::Skip;
  return r;
}

// Fits D^2 on the first half of the run and checks the second half.
CheckRecord check_assumption2(const Trajectory<double>& tr) {
  CheckRecord r = make_record(Check::Assumption2);
  const StepIndex half = tr.T / 2;
  const double fit = d_hat_sq(tr, half);
  InequalityScan scan;
  for (StepIndex t = half + 1; t <= tr.T; ++t) {
    scan.add(t, tr.delta_norm_sq(t), fit * static_cast<double>(t + 1),
             1e-12 * std::max(1.0, fit * static_cast<double>(t + 1)));
  }
  scan.finish(r);
  std::ostringstream os;
  os << "D_hat^2 fitted on t <= " << half << ": " << format_double(fit)
     << "; over the whole run: " << format_double(d_hat_sq(tr, tr.T));
  r.note = os.str();
  return r;
}

std::string label_of(const RunConfig& c) {
  std::ostringstream os;
  os << c.problem << " " << describe(c.schedule) << " T=" << c.T;
  if (c.sigma2 > 0) os << " sigma2=" << c.sigma2;
  return os.str();
}

template <typename Fn>
void parallel_for(int count, int workers, Fn&& fn) {
  std::atomic<int> next{0};
  auto body = [&] {
    for (int i = next++; i < count; i = next++) fn(i);
  };
  const int n = std::clamp(workers, 1, std::max(1, count));
  if (n == 1) {
    body();
    return;
  }
  std::vector<std::thread> pool;
  for (int i = 0; i < n; ++i) pool.emplace_back(body);
  for (auto& t : pool) t.join();
}

void write_file(const std::string& path, const std::string& content,
                bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc
                                 : std::ios::trunc);
  if (!out) {
    throw IoError("cannot open '" + path + "' for writing: " + std::strerror(errno));
  }
  out << content;
  out.close();
  if (!out) throw IoError("failed writing '" + path + "'");
}

void require_format(const std::string& format,
                    std::initializer_list<const char*> allowed) {
  for (const char* a : allowed) {
    if (format == a) return;
  }
  std::string list;
  for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
  throw ConfigError("export: unknown format '" + format + "' (expected " + list + ")");
}

json number_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

json record_json(const CheckRecord& r) {
  json j;
  j["id"] = r.id;
  j["status"] = to_string(r.status);
  j["measured"] = number_or_null(r.measured);
  j["bound"] = number_or_null(r.bound);
  j["slack"] = number_or_null(r.slack);
  if (r.first_violation) {
    j["first_violation"] = json{{"t", *r.first_violation},
                                {"lhs", number_or_null(r.violation_lhs)},
                                {"rhs", number_or_null(r.violation_rhs)}};
  } else {
    j["first_violation"] = nullptr;
  }
  j["seeds"] = r.seeds;
  j["note"] = r.note;
  return j;
}

json report_to_json(const Report& rep) {
  json j;
  j["label"] = rep.label;
  j["config"] = rep.config_json.empty() ? json(nullptr) : json::parse(rep.config_json);
  j["config_hash"] = rep.config_hash;
  j["code_version"] = rep.code_version;
  j["solver_version"] = rep.solver_version;
  json checks = json::array();
  for (const auto& c : rep.checks) checks.push_back(record_json(c));
  j["checks"] = checks;
  j["pass"] = all_pass(rep);
  return j;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string to_string(Check check) {
  switch (check) {
    case Check::Lemma1: return "Lemma1";
    case Check::T3: return "T3";
    case Check::T4: return "T4";
    case Check::T5Dec: return "T5dec";
    case Check::T5Inc: return "T5inc";
    case Check::Claim1: return "Claim1";
    case Check::Claim2: return "Claim2";
    case Check::Claim3: return "Claim3";
    case Check::Equivalence: return "Equivalence";
    case Check::Assumption2: return "Assumption2";
  }
  return "?";
}

Check parse_check(const std::string& name) {
  static const Check all[] = {Check::Lemma1, Check::T3, Check::T4,
                              Check::T5Dec, Check::T5Inc, Check::Claim1,
                              Check::Claim2, Check::Claim3, Check::Equivalence,
                              Check::Assumption2};
  for (Check c : all) {
    if (to_string(c) == name) return c;
  }
  throw ConfigError("unknown check '" + name + "'");
}

std::string to_string(Status status) {
  switch (status) {
    case Status::Pass: return "pass";
    case Status::Fail: return "fail";
    case Status::Skip: return "skip";
  }
  return "?";
}

std::vector<std::uint64_t> default_seeds() {
  std::vector<std::uint64_t> s(64);
  std::iota(s.begin(), s.end(), 1);
  return s;
}

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed config JSON: ") + e.what());
  }
  RunConfig cfg;
  try {
    cfg = parse_unvalidated(j);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

std::string to_json(const RunConfig& config) {
  return config_to_json(config).dump();
}

void validate(const RunConfig& c) {
  validate(c.schedule, c.unsafe);
  if (c.T < 1) throw ConfigError("T must be >= 1");
  const Problem<double> p = make_builtin<double>(c.problem, c.dim, c.L);
  if (c.x0.kind == X0Spec::Kind::Explicit &&
      static_cast<Eigen::Index>(c.x0.values.size()) != p.dim) {
    std::ostringstream os;
    os << "x0 has " << c.x0.values.size() << " entries, problem '" << p.name
       << "' has dimension " << p.dim;
    throw ConfigError(os.str());
  }
  const Schedule& s = c.schedule;
  const bool beta_one = s.beta_law.beta == 1.0;
  for (Check ch : c.checks) {
    const std::string id = to_string(ch);
    auto need = [&](bool cond, const std::string& what) {
      if (!cond) throw ConfigError(id + " requires " + what);
    };
    switch (ch) {
      case Check::T3:
        need(is_constant_step(s), "a constant stepsize eta");
        need(is_uniform_averaging(s), "c_{t+1}=1/(t+1)");
        need(beta_one, "beta = 1");
        need(c.T >= 3, "T >= 3");
        break;
      case Check::T4:
        need(is_linear_growth(s), "η_t=η₀(t+1)");
        need(is_uniform_averaging(s), "c_{t+1}=1/(t+1)");
        need(beta_one, "beta = 1");
        need(c.T >= 3, "T >= 3");
        break;
      case Check::T5Dec:
        need(is_constant_step(s), "a constant stepsize eta");
        need(!std::holds_alternative<PolyIncreasing>(s.avg),
             "c_{t+1}=(t+1)^(-alpha)");
        need(beta_one, "beta = 1");
        need(c.T >= 3, "T >= 3");
        break;
      case Check::T5Inc:
        need(is_constant_step(s), "a constant stepsize eta");
        need(std::holds_alternative<PolyIncreasing>(s.avg),
             "c_{t+1}=(t/(t+1))^alpha");
        need(beta_one, "beta = 1");
        need(c.T >= 3, "T >= 3");
        break;
      case Check::Lemma1:
        need(c.T >= 3, "T >= 3");
        break;
      case Check::Equivalence:
        need(beta_one, "beta = 1");
        break;
      case Check::Assumption2:
        need(c.T >= 2, "T >= 2");
        break;
      default:
        break;
    }
  }
}

Problem<double> make_problem(const RunConfig& config) {
  return make_builtin<double>(config.problem, config.dim, config.L);
}

Vector<double> make_x0(const RunConfig& config, const Problem<double>& p) {
  switch (config.x0.kind) {
    case X0Spec::Kind::Ones: return Vector<double>::Ones(p.dim);
    case X0Spec::Kind::Problem: return p.x0_hint;
    case X0Spec::Kind::Explicit: {
      check_dimension(p, Eigen::Map<const Vector<double>>(
                             config.x0.values.data(),
                             static_cast<Eigen::Index>(config.x0.values.size()))
                             .eval());
      return Eigen::Map<const Vector<double>>(config.x0.values.data(), p.dim);
    }
    case X0Spec::Kind::Gaussian: {
      // Uniform in the ball: Gaussian direction, radius r U^(1/d).
      std::mt19937_64 rng(config.x0.seed);
      std::normal_distribution<double> normal;
      std::uniform_real_distribution<double> uni(0.0, 1.0);
      Vector<double> v(p.dim);
      for (Eigen::Index i = 0; i < p.dim; ++i) v[i] = normal(rng);
      const double norm = v.norm();
      const double rad = config.x0.radius *
                         std::pow(uni(rng), 1.0 / static_cast<double>(p.dim));
      return norm > 0 ? Vector<double>(v * (rad / norm)) : v;
    }
  }
  return Vector<double>::Ones(p.dim);
}

std::string config_hash(const RunConfig& config) {
  const std::string text = to_json(config);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

bool all_pass(const Report& report) {
  return std::none_of(report.checks.begin(), report.checks.end(),
                      [](const CheckRecord& r) { return r.status == Status::Fail; });
}

bool all_pass(const std::vector<Report>& reports) {
  return std::all_of(reports.begin(), reports.end(),
                     [](const Report& r) { return all_pass(r); });
}

Report verify(const RunConfig& cfg) {
  Report rep;
  rep.label = label_of(cfg);
  rep.config_json = to_json(cfg);
  rep.config_hash = config_hash(cfg);

  auto skip_all = [&](const std::string& cause) {
    for (Check ch : cfg.checks) rep.checks.push_back(skipped(ch, cause));
    return rep;
  };

  Problem<double> p;
  Vector<double> x0;
  try {
    p = make_problem(cfg);
    x0 = make_x0(cfg, p);
  } catch (const std::exception& e) {
    return skip_all(e.what());
  }
  const RunOptions opts{cfg.unsafe};
  const bool stochastic = cfg.sigma2 > 0.0;
  const NoiseModel main_noise =
      stochastic ? gaussian_noise(cfg.sigma2, cfg.seed) : no_noise();

  // The primary trajectory (shared noise seed for pathwise checks).
  Trajectory<double> tr;
  std::optional<PotentialTrace<double>> trace;
  std::string run_error, trace_error;
  try {
    tr = run(p, main_noise, cfg.schedule, x0, cfg.T, opts);
    try {
      trace = potential(tr, p, cfg.sigma2);
    } catch (const std::exception& e) {
      trace_error = e.what();
    }
  } catch (const std::exception& e) {
    run_error = e.what();
  }

  // Seed ensemble for expectation checks.
  const std::vector<std::uint64_t> seeds =
      cfg.seeds.empty() ? default_seeds() : cfg.seeds;
  bool need_ensemble = false;
  if (stochastic) {
    for (Check ch : cfg.checks) {
      if (ch == Check::Lemma1 || theorem_of(ch)) need_ensemble = true;
    }
  }
  std::vector<Trajectory<double>> runs;
  std::vector<PotentialTrace<double>> traces;
  std::string ensemble_error;
  if (need_ensemble && run_error.empty()) {
    runs.resize(seeds.size());
    traces.resize(seeds.size());
    std::vector<std::string> errors(seeds.size());
    parallel_for(static_cast<int>(seeds.size()), worker_count(), [&](int k) {
      try {
        runs[k] = run(p, gaussian_noise(cfg.sigma2, seeds[k]), cfg.schedule,
                      x0, cfg.T, opts);
        traces[k] = potential(runs[k], p, cfg.sigma2);
      } catch (const std::exception& e) {
        errors[k] = "seed " + std::to_string(seeds[k]) + ": " + e.what();
      }
    });
    for (const auto& e : errors) {
      if (!e.empty()) {
        ensemble_error = e;
        break;
      }
    }
  }

  for (Check ch : cfg.checks) {
    if (!run_error.empty()) {
      rep.checks.push_back(skipped(ch, "run failed: " + run_error));
      continue;
    }
    try {
      switch (ch) {
        case Check::Lemma1:
          if (cfg.schedule.beta_law.beta != 1.0) {
            CheckRecord r = trace ? check_lemma1(tr, *trace)
                                  : skipped(ch, trace_error);
            r.status = Status::Skip;
            r.note = "no descent theorem for beta < 1; residuals reported. " + r.note;
            rep.checks.push_back(r);
          } else if (!trace) {
            rep.checks.push_back(skipped(ch, trace_error));
          } else if (stochastic) {
            rep.checks.push_back(ensemble_error.empty()
                                     ? check_lemma1_expectation(runs, traces, seeds)
                                     : skipped(ch, ensemble_error));
          } else {
            rep.checks.push_back(check_lemma1(tr, *trace));
          }
          break;
        case Check::T3:
        case Check::T4:
        case Check::T5Dec:
        case Check::T5Inc:
          if (!trace) {
            rep.checks.push_back(skipped(ch, trace_error));
          } else if (stochastic) {
            rep.checks.push_back(
                ensemble_error.empty()
                    ? check_bound_expectation(ch, runs, traces, cfg.sigma2, seeds)
                    : skipped(ch, ensemble_error));
          } else {
            rep.checks.push_back(check_bound(ch, tr, *trace, 0.0));
          }
          break;
        case Check::Claim1:
          rep.checks.push_back(check_claim1(tr));
          break;
        case Check::Claim2:
        case Check::Claim3:
          rep.checks.push_back(check_claim(ch, tr, p));
          break;
        case Check::Equivalence: {
          CheckRecord r = check_equivalence(cfg, p, x0, tr, main_noise);
          if (stochastic) r.seeds = {cfg.seed};
          rep.checks.push_back(r);
          break;
        }
        case Check::Assumption2:
          rep.checks.push_back(check_assumption2(tr));
          break;
      }
    } catch (const std::exception& e) {
      rep.checks.push_back(skipped(ch, e.what()));
    }
  }
  return rep;
}

int worker_count() {
  if (const char* env = std::getenv("SF_LAB_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<GridEntry> expand_grid(const std::string& grid_json) {
  json g;
  try {
    g = json::parse(grid_json);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed grid JSON: ") + e.what());
  }
  if (!g.is_object()) throw ConfigError("grid must be a JSON object");
  const json base = g.value("base", json::object());
  const json axes = g.value("axes", json::object());
  bool auto_checks_on = false;
  json explicit_checks;
  if (g.contains("checks")) {
    if (g.at("checks").is_string() && g.at("checks").get<std::string>() == "auto") {
      auto_checks_on = true;
    } else if (g.at("checks").is_array()) {
      explicit_checks = g.at("checks");
    } else {
      throw ConfigError("grid: checks must be \"auto\" or an array");
    }
  }
  static const char* kAxisOrder[] = {"problem", "step", "avg", "beta", "sigma2", "T"};
  for (auto it = axes.begin(); it != axes.end(); ++it) {
    if (std::find_if(std::begin(kAxisOrder), std::end(kAxisOrder),
                     [&](const char* a) { return it.key() == a; }) ==
        std::end(kAxisOrder)) {
      throw ConfigError("grid: unknown axis '" + it.key() + "'");
    }
    if (!it.value().is_array()) throw ConfigError("grid: axis '" + it.key() + "' must be an array");
  }
  std::vector<json> combos = {base};
  for (const char* axis : kAxisOrder) {
    if (!axes.contains(axis)) continue;
    const json& values = axes.at(axis);
    std::vector<json> next;
    for (const json& partial : combos) {
      for (const json& v : values) {
        json cj = partial;
        const std::string a = axis;
        if (a == "problem") cj["problem"] = v;
        if (a == "step") cj["schedule"]["step"] = v;
        if (a == "avg") cj["schedule"]["avg"] = v;
        if (a == "beta") cj["schedule"]["beta"] = v;
        if (a == "sigma2") cj["noise"]["sigma2"] = v;
        if (a == "T") cj["T"] = v;
        next.push_back(cj);
      }
    }
    combos = std::move(next);
  }
  std::vector<GridEntry> out;
  if (axes.empty() && !g.contains("base")) return out;
  for (json& cj : combos) {
    if (!explicit_checks.is_null()) cj["checks"] = explicit_checks;
    GridEntry e;
    e.label = cj.dump();
    try {
      RunConfig cfg = parse_unvalidated(cj);
      if (auto_checks_on) cfg.checks = auto_checks(cfg.schedule);
      validate(cfg);
      e.label = label_of(cfg);
      e.config = cfg;
    } catch (const ConfigError& err) {
      e.error = err.what();
    } catch (const json::exception& err) {
      e.error = err.what();
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<Report> sweep(const std::vector<GridEntry>& grid) {
  std::vector<Report> reports(grid.size());
  parallel_for(static_cast<int>(grid.size()), worker_count(), [&](int i) {
    const GridEntry& e = grid[i];
    if (e.config) {
      reports[i] = verify(*e.config);
      return;
    }
    Report rep;
    rep.label = e.label;
    CheckRecord r;
    r.id = "config";
    r.status = Status::Skip;
    r.measured = r.bound = r.slack = kNaN;
    r.note = e.error;
    rep.checks.push_back(r);
    reports[i] = rep;
  });
  return reports;
}

// ---------------------------------------------------------------------------
// PEP campaign.

double shape_weight(const pep::Scenario& scenario, int t) {
  if (scenario.kind == pep::ScenarioKind::DecC && scenario.alpha == 1.0) {
    return static_cast<double>(t);
  }
  return pep::figure_weight(scenario, t);
}

ShapeVerdict boundedness(const std::vector<double>& values) {
  ShapeVerdict v;
  const int n = static_cast<int>(values.size());
  const int half = n / 2;
  v.early_max = -kInf;
  v.late_max = -kInf;
  bool late_diverges = false;
  for (int t = 3; t <= n; ++t) {
    const double val = values[t - 1];
    ++v.total;
    if (std::isnan(val)) continue;
    ++v.solved;
    if (t <= half) v.early_max = std::max(v.early_max, val);
    if (t >= half) {
      if (!std::isfinite(val)) late_diverges = true;
      v.late_max = std::max(v.late_max, val);
    }
  }
  if (!(v.early_max > -kInf) || !(v.late_max > -kInf)) {
    v.applicable = false;
    v.pass = false;
    v.ratio = kNaN;
    return v;
  }
  v.applicable = true;
  v.ratio = v.late_max / v.early_max;
  v.pass = !late_diverges && std::isfinite(v.early_max) &&
           v.late_max <= 1.05 * v.early_max;
  return v;
}

CampaignResult pep_campaign(const std::vector<pep::Scenario>& scenarios,
                            int n_max, double L, double D,
                            std::optional<pep::Metric> metric,
                            const pep::SolverConfig& config, int workers) {
  CampaignResult out;
  out.report.label = "pep campaign";
  {
    json cj;
    cj["n_max"] = n_max;
    cj["L"] = L;
    cj["D"] = D;
    cj["metric"] = metric ? pep::to_string(*metric) : "default";
    cj["pep"] = json{{"solver", config.solver}, {"tol", config.tol}, {"max_n", config.max_n}};
    json sc = json::array();
    for (const auto& s : scenarios) sc.push_back(pep::to_string(s));
    cj["scenarios"] = sc;
    out.report.config_json = cj.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : out.report.config_json) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    out.report.config_hash = buf;
  }
  for (const auto& sc : scenarios) {
    CampaignCurve cc;
    cc.scenario = sc;
    cc.metric = metric.value_or(pep::default_metric(sc));
    pep::BuildOptions bo;
    bo.metric = cc.metric;
    cc.points = pep::curve(sc, n_max, L, D, bo, config, workers);
    const bool dist = sc.kind == pep::ScenarioKind::LinStepDist;
    int unbounded = 0;
    for (const auto& pt : cc.points) {
      double v = kNaN;
      if (pt.status == pep::CertificateStatus::Optimal) {
        v = dist ? pt.tau / static_cast<double>(pt.t + 1)
                 : pt.tau * shape_weight(sc, pt.t);
        if (dist) cc.d_hat_sq = std::max(cc.d_hat_sq, v);
      } else if (pt.status == pep::CertificateStatus::Unbounded) {
        v = kInf;
        ++unbounded;
      }
      cc.shape_values.push_back(v);
    }
    const ShapeVerdict verdict = boundedness(cc.shape_values);
    CheckRecord r;
    r.id = "shape:" + pep::to_string(sc);
    r.status = !verdict.applicable ? Status::Skip
               : verdict.pass     ? Status::Pass
                                  : Status::Fail;
    r.measured = verdict.late_max;
    r.bound = 1.05 * verdict.early_max;
    r.slack = r.bound - r.measured;
    std::ostringstream os;
    os << "metric " << pep::to_string(cc.metric) << "; "
       << (dist ? "tau_t/(t+1)" : "weighted tau") << " late/early ratio "
       << format_double(verdict.ratio) << "; certified " << verdict.solved << "/"
       << verdict.total << " points in the windows; unbounded horizons "
       << unbounded;
    if (!verdict.applicable) os << "; horizon too short for the windows [3, n/2] and [n/2, n]";
    if (dist) os << "; D_hat^2 = " << format_double(cc.d_hat_sq);
    if (sc.kind == pep::ScenarioKind::DecC && sc.alpha == 1.0) {
      std::vector<double> log_weighted;
      for (const auto& pt : cc.points) {
        log_weighted.push_back(pt.status == pep::CertificateStatus::Optimal
                                   ? pt.tau * std::log(static_cast<double>(pt.t))
                                   : kNaN);
      }
      os << "; tau*ln(t) late/early ratio "
         << format_double(boundedness(log_weighted).ratio);
    }
    r.note = os.str();
    if (verdict.applicable && !verdict.pass) {
      // First horizon in the late window exceeding the early maximum.
      const int n = static_cast<int>(cc.shape_values.size());
      for (int t = n / 2; t <= n; ++t) {
        const double v = cc.shape_values[t - 1];
        if (!std::isnan(v) && !(v <= 1.05 * verdict.early_max)) {
          r.first_violation = t;
          r.violation_lhs = v;
          r.violation_rhs = 1.05 * verdict.early_max;
          break;
        }
      }
    }
    out.report.checks.push_back(r);
    out.curves.push_back(std::move(cc));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Export.

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trajectory_csv(const Trajectory<double>& tr) {
  std::ostringstream os;
  os << "t,f_x,grad_norm_sq,delta_norm_sq,eta_t,c_t1,beta_t\n";
  for (StepIndex t = 0; t <= tr.T; ++t) {
    os << t << ',' << format_double(tr.f_x[t]) << ','
       << format_double(tr.grad_x_sq[t]) << ','
       << format_double(tr.delta_norm_sq(t)) << ','
       << format_double(eta<double>(tr.schedule, t)) << ','
       << format_double(c<double>(tr.schedule, t)) << ','
       << format_double(beta<double>(tr.schedule, t)) << '\n';
  }
  return os.str();
}

std::string potential_csv(const PotentialTrace<double>& trace) {
  std::ostringstream os;
  os << "t,A_t,V_t,descent_residual,delta_coeff\n";
  for (const auto& r : trace.records) {
    os << r.t << ',' << format_double(r.A) << ',' << format_double(r.V) << ','
       << format_double(r.descent_residual) << ','
       << format_double(r.delta_coeff) << '\n';
  }
  return os.str();
}

std::string report_json(const Report& report) {
  return report_to_json(report).dump(2) + "\n";
}

std::string reports_csv(const std::vector<Report>& reports) {
  std::ostringstream os;
  os << "index,label,config_hash,check,status,measured,bound,slack,first_violation_t\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    for (const auto& c : reports[i].checks) {
      std::string label = reports[i].label;
      std::replace(label.begin(), label.end(), '"', '\'');
      os << i << ",\"" << label << "\"," << reports[i].config_hash << ','
         << c.id << ',' << to_string(c.status) << ',' << format_double(c.measured)
         << ',' << format_double(c.bound) << ',' << format_double(c.slack) << ','
         << (c.first_violation ? std::to_string(*c.first_violation) : "") << '\n';
    }
  }
  return os.str();
}

std::string curve_csv(const CampaignCurve& curve) {
  std::ostringstream os;
  os << "t,tau,weighted_tau,status\n";
  for (const auto& p : curve.points) {
    os << p.t << ',' << format_double(p.tau) << ',' << format_double(p.weighted)
       << ',' << pep::to_string(p.status) << '\n';
  }
  return os.str();
}

std::string certificate_json(const pep::PepCertificate& cert) {
  json j;
  j["scenario"] = pep::to_string(cert.scenario.kind);
  j["alpha"] = cert.scenario.alpha;
  j["n"] = cert.n;
  j["L"] = cert.L;
  j["D"] = cert.D;
  j["metric"] = pep::to_string(cert.metric);
  j["value"] = number_or_null(cert.value);
  j["status"] = pep::to_string(cert.status);
  j["gap"] = number_or_null(cert.gap);
  return j.dump(2) + "\n";
}

void export_trajectory(const Trajectory<double>& tr, const std::string& path,
                       const std::string& format) {
  require_format(format, {"csv", "json", "bin"});
  if (format == "csv") {
    write_file(path, trajectory_csv(tr));
    return;
  }
  if (format == "json") {
    json j;
    j["T"] = tr.T;
    j["schedule"] = describe(tr.schedule);
    auto rows = [](const std::vector<Vector<double>>& vs) {
      json a = json::array();
      for (const auto& v : vs) a.push_back(std::vector<double>(v.data(), v.data() + v.size()));
      return a;
    };
    j["x"] = rows(tr.x);
    j["z"] = rows(tr.z);
    j["y"] = rows(tr.y);
    j["g"] = rows(tr.g);
    j["f_x"] = tr.f_x;
    j["grad_norm_sq"] = tr.grad_x_sq;
    write_file(path, j.dump() + "\n");
    return;
  }
  // Flat little-endian float64, row-major, arrays back to back.
  std::string bytes;
  json arrays = json::array();
  std::size_t offset = 0;
  auto append = [&](const char* name, const std::vector<Vector<double>>& vs) {
    const std::size_t rows = vs.size();
    const std::size_t cols = rows ? static_cast<std::size_t>(vs.front().size()) : 0;
    for (const auto& v : vs) {
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        std::uint64_t u = std::bit_cast<std::uint64_t>(v[i]);
        if constexpr (std::endian::native == std::endian::big) {
          u = __builtin_bswap64(u);
        }
        bytes.append(reinterpret_cast<const char*>(&u), sizeof u);
      }
    }
    arrays.push_back(json{{"name", name}, {"shape", {rows, cols}}, {"offset_bytes", offset}});
    offset += rows * cols * sizeof(double);
  };
  append("x", tr.x);
  append("z", tr.z);
  append("y", tr.y);
  append("g", tr.g);
  json side;
  side["dtype"] = "float64";
  side["byte_order"] = "little";
  side["layout"] = "row-major";
  side["arrays"] = arrays;
  side["T"] = tr.T;
  side["schedule"] = describe(tr.schedule);
  write_file(path, bytes, true);
  write_file(path + ".json", side.dump(2) + "\n");
}

void export_potential(const PotentialTrace<double>& trace,
                      const std::string& path, const std::string& format) {
  require_format(format, {"csv", "json"});
  if (format == "csv") {
    write_file(path, potential_csv(trace));
    return;
  }
  json a = json::array();
  for (const auto& r : trace.records) {
    a.push_back(json{{"t", r.t},
                     {"A_t", number_or_null(r.A)},
                     {"V_t", number_or_null(r.V)},
                     {"descent_residual", number_or_null(r.descent_residual)},
                     {"delta_coeff", number_or_null(r.delta_coeff)}});
  }
  json j{{"records", a}, {"V2", number_or_null(trace.V2)},
         {"first_tracked", trace.first_tracked}, {"window_start", trace.window_start},
         {"sigma2", trace.sigma2}};
  write_file(path, j.dump(2) + "\n");
}

void export_report(const Report& report, const std::string& path,
                   const std::string& format) {
  require_format(format, {"csv", "json"});
  if (format == "csv") {
    write_file(path, reports_csv({report}));
  } else {
    write_file(path, report_json(report));
  }
}

void export_reports(const std::vector<Report>& reports,
                    const std::string& path, const std::string& format) {
  require_format(format, {"csv", "json"});
  if (format == "csv") {
    write_file(path, reports_csv(reports));
    return;
  }
  json a = json::array();
  for (const auto& r : reports) a.push_back(report_to_json(r));
  write_file(path, a.dump(2) + "\n");
}

void export_curve(const CampaignCurve& curve, const std::string& path,
                  const std::string& format) {
  require_format(format, {"csv", "json"});
  if (format == "csv") {
    write_file(path, curve_csv(curve));
    return;
  }
  json a = json::array();
  for (const auto& p : curve.points) {
    a.push_back(json{{"t", p.t},
                     {"tau", number_or_null(p.tau)},
                     {"weighted_tau", number_or_null(p.weighted)},
                     {"status", pep::to_string(p.status)}});
  }
  json j{{"scenario", pep::to_string(curve.scenario.kind)},
         {"alpha", curve.scenario.alpha},
         {"metric", pep::to_string(curve.metric)},
         {"points", a}};
  write_file(path, j.dump(2) + "\n");
}

void export_certificate(const pep::PepCertificate& cert, const std::string& path) {
  write_file(path, certificate_json(cert));
}

}  // namespace sflab::harness
