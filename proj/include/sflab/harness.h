#ifndef SFLAB_HARNESS_H
#define SFLAB_HARNESS_H

// Experiment runner: run configurations, theorem checks over trajectories,
// parameter sweeps, PEP campaigns, and bit-stable exports.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sflab/lyapunov.h"
#include "sflab/optimizer.h"
#include "sflab/pep.h"
#include "sflab/problem.h"
#include "sflab/schedule.h"

namespace sflab::harness {

inline constexpr const char* kCodeVersion = "0.1.0";
inline constexpr const char* kSolverVersion = "sflab-ipm-hkm 1";

enum class Check {
  Lemma1,
  T3,
  T4,
  T5Dec,
  T5Inc,
  Claim1,
  Claim2,
  Claim3,
  Equivalence,
  Assumption2,
};

std::string to_string(Check check);
Check parse_check(const std::string& name);

struct X0Spec {
  enum class Kind {
    Ones,      // all-ones vector
    Gaussian,  // seeded uniform draw from the ball of given radius
    Problem,   // the problem's own nontrivial starting point
    Explicit,  // user-supplied vector
  };
  Kind kind = Kind::Ones;
  std::vector<double> values;
  std::uint64_t seed = 0;
  double radius = 1.0;
};

struct RunConfig {
  std::string problem = "quad";
  Eigen::Index dim = kDefaultDim;
  double L = 1.0;
  Schedule schedule;
  double sigma2 = 0.0;
  std::uint64_t seed = 0;
  // Seeds for stochastic expectation checks.
  std::vector<std::uint64_t> seeds;
  X0Spec x0;
  StepIndex T = 1000;
  std::vector<Check> checks;
  bool unsafe = false;
};

// Default seed list for expectation checks: 1..64.
std::vector<std::uint64_t> default_seeds();

// Parses a run configuration from JSON text; the schedule's L_bound is taken
// from the problem when not given. Validates it (see `validate`).
RunConfig parse_run_config(const std::string& json_text);
std::string to_json(const RunConfig& config);

// Rejects incompatible check/schedule pairings with the violated
// precondition named, e.g. T4 requires eta_t = eta0 (t+1).
void validate(const RunConfig& config);

Problem<double> make_problem(const RunConfig& config);
Vector<double> make_x0(const RunConfig& config, const Problem<double>& p);

// FNV-1a hash of the canonical config JSON, as 16 hex digits.
std::string config_hash(const RunConfig& config);

enum class Status { Pass, Fail, Skip };
std::string to_string(Status status);

struct CheckRecord {
  std::string id;
  Status status = Status::Skip;
  // Measured quantity and the bound it is compared with, and
  // slack = bound - measured (negative on failure).
  double measured = 0.0;
  double bound = 0.0;
  double slack = 0.0;
  // First violating step with both sides of the inequality.
  std::optional<StepIndex> first_violation;
  double violation_lhs = 0.0;
  double violation_rhs = 0.0;
  std::vector<std::uint64_t> seeds;
  std::string note;
};

struct Report {
  std::string label;
  std::string config_json;
  std::string config_hash;
  std::string code_version = kCodeVersion;
  std::string solver_version = kSolverVersion;
  std::vector<CheckRecord> checks;
};

bool all_pass(const Report& report);
bool all_pass(const std::vector<Report>& reports);

// Runs the configured trajectories and evaluates every requested check.
// Run or map failures become skip records carrying the cause.
Report verify(const RunConfig& config);

// Number of workers: SF_LAB_WORKERS when set and positive, otherwise the
// hardware concurrency (at least 1).
int worker_count();

// Expands a grid description
//   {"base": {...run config...},
//    "axes": {"problem": [...], "avg": [...], "step": [...],
//             "beta": [...], "sigma2": [...], "T": [...]},
//    "checks": "auto" | [...]}
// into the cross product of configurations, in a fixed axis order. With
// "checks": "auto" each combo gets the theorem checks matching its schedule.
// Combos whose schedule is rejected are kept, carrying the error text.
struct GridEntry {
  std::string label;
  std::optional<RunConfig> config;
  std::string error;
};
std::vector<GridEntry> expand_grid(const std::string& grid_json);

// Runs every grid entry (in parallel) and returns one report per entry in
// grid order; rejected combos produce all-skip reports with the cause.
std::vector<Report> sweep(const std::vector<GridEntry>& grid);

// PEP campaign over scenarios: curves plus figure-shape checks.
struct CampaignCurve {
  pep::Scenario scenario;
  pep::Metric metric = pep::Metric::MinGradSq;
  std::vector<pep::CurvePoint> points;
  // Weight used by the shape check (t for DecC(1), otherwise the figure
  // weight), and the weighted values it saw.
  std::vector<double> shape_values;
  // max_t tau_t / (t + 1) over solved points (distance metric).
  double d_hat_sq = 0.0;
};

struct CampaignResult {
  std::vector<CampaignCurve> curves;
  Report report;
};

// Weight of the shape check: t for DecC(1), figure weight otherwise.
double shape_weight(const pep::Scenario& scenario, int t);

// Boundedness rule on a curve indexed by t = 1..n: the maximum over
// t in [n/2, n] is at most 1.05 times the maximum over t in [3, n/2].
// Non-finite late values fail; NaN marks excluded points.
struct ShapeVerdict {
  // False when either window holds no certified point (horizon too short).
  bool applicable = false;
  bool pass = false;
  double early_max = 0.0;
  double late_max = 0.0;
  double ratio = 0.0;
  int solved = 0;
  int total = 0;
};
ShapeVerdict boundedness(const std::vector<double>& values_by_t);

CampaignResult pep_campaign(const std::vector<pep::Scenario>& scenarios,
                            int n_max, double L, double D,
                            std::optional<pep::Metric> metric,
                            const pep::SolverConfig& config, int workers);

// ---------------------------------------------------------------------------
// Export. Formats: "csv", "json" (plus "bin" for trajectories, which writes
// flat little-endian float64 arrays with a JSON sidecar). Unknown formats
// are rejected before anything is written.

void export_trajectory(const Trajectory<double>& tr, const std::string& path,
                       const std::string& format);
void export_potential(const PotentialTrace<double>& trace,
                      const std::string& path, const std::string& format);
void export_report(const Report& report, const std::string& path,
                   const std::string& format);
void export_reports(const std::vector<Report>& reports,
                    const std::string& path, const std::string& format);
void export_curve(const CampaignCurve& curve, const std::string& path,
                  const std::string& format);
void export_certificate(const pep::PepCertificate& cert,
                        const std::string& path);

// In-memory renderings used by the writers.
std::string trajectory_csv(const Trajectory<double>& tr);
std::string potential_csv(const PotentialTrace<double>& trace);
std::string report_json(const Report& report);
std::string reports_csv(const std::vector<Report>& reports);
std::string curve_csv(const CampaignCurve& curve);
std::string certificate_json(const pep::PepCertificate& cert);

// Formats a double with 17 significant digits ("nan", "inf", "-inf" for
// non-finite values).
std::string format_double(double v);

}  // namespace sflab::harness

#endif  // SFLAB_HARNESS_H
