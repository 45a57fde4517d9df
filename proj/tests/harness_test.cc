#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "sflab/errors.h"
#include "sflab/harness.h"

using namespace sflab;
using namespace sflab::harness;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path temp_dir() {
  auto dir = std::filesystem::temp_directory_path() / "sflab_harness_test";
  std::filesystem::create_directories(dir);
  return dir;
}

const CheckRecord& record(const Report& rep, const std::string& id) {
  for (const auto& c : rep.checks) {
    if (c.id == id) return c;
  }
  FAIL("missing check " << id);
  return rep.checks.front();
}

constexpr const char* kQuadT3 = R"({
  "problem": {"kind": "quad", "L": 1.0, "dim": 3},
  "schedule": {"step": {"kind": "constant", "eta": 1.0},
               "avg": {"kind": "uniform"}, "beta": 1.0},
  "T": 1000,
  "checks": ["T3", "Claim1", "Lemma1", "Equivalence"]
})";

}  // namespace

TEST_CASE("config parsing and defaults") {
  const RunConfig c = parse_run_config(kQuadT3);
  CHECK(c.problem == "quad");
  CHECK(c.dim == 3);
  CHECK(c.T == 1000);
  CHECK(c.schedule.L_bound == 1.0);
  CHECK(c.checks.size() == 4);
  CHECK(c.x0.kind == X0Spec::Kind::Ones);
  // Relative stepsizes and scientific notation.
  const RunConfig r = parse_run_config(R"({"problem": "nonconvex_cos",
      "schedule": {"step": {"kind": "constant", "eta_over_L": 5e-1}}, "T": 10})");
  CHECK(r.schedule.step.index() == 0);
  CHECK(eta(r.schedule, 0) == 0.25);
  CHECK(r.schedule.L_bound == 2.0);
  // Round trip through canonical JSON keeps the hash.
  CHECK(config_hash(parse_run_config(to_json(c))) == config_hash(c));
  CHECK(config_hash(c).size() == 16);
}

TEST_CASE("load-time rejections name the violated precondition") {
  try {
    parse_run_config(R"({"schedule": {"step": {"kind": "constant", "eta": 1.0}},
                         "checks": ["T4"]})");
    FAIL("expected rejection");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("T4 requires η_t=η₀(t+1)") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_run_config(R"({"checks": ["T5inc"]})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"schedule": {"beta": 0.5}, "checks": ["T3"]})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"T": 2, "checks": ["T3"]})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"checks": ["Nope"]})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"x0": [1, 2]})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("{not json"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"schedule": {"avg": {"kind": "poly_inc", "alpha": 1.0}}})"),
                  ConfigError);
  CHECK_NOTHROW(parse_run_config(R"({"schedule": {"avg": {"kind": "poly_inc", "alpha": 1.0}},
                                     "unsafe_schedule": true})"));
}

TEST_CASE("verify: quadratic with uniform averaging") {
  const Report rep = verify(parse_run_config(kQuadT3));
  CHECK(all_pass(rep));
  const auto& t3 = record(rep, "T3");
  CHECK(t3.status == Status::Pass);
  CHECK(t3.measured <= t3.bound);
  CHECK(record(rep, "Claim1").measured <= 1e-12);
  CHECK(record(rep, "Equivalence").status == Status::Pass);
  CHECK(rep.code_version == kCodeVersion);
  CHECK(rep.solver_version == kSolverVersion);
}

TEST_CASE("verify: linear growth with the measured D") {
  const Report rep = verify(parse_run_config(R"({
    "problem": "nonconvex_cos",
    "schedule": {"step": {"kind": "linear", "eta0_over_L": 1.0}, "avg": {"kind": "uniform"}},
    "T": 1000, "checks": ["T4", "Assumption2", "Claim1"]})"));
  const auto& t4 = record(rep, "T4");
  CHECK(t4.status == Status::Pass);
  CHECK(t4.note.find("D_hat") != std::string::npos);
}

TEST_CASE("verify: beta < 1 reports residuals and checks the claims") {
  const Report rep = verify(parse_run_config(R"({
    "problem": "quartic_well", "x0": "problem",
    "schedule": {"step": {"kind": "constant", "eta_over_L": 1.0}, "beta": 0.7},
    "T": 300, "checks": ["Lemma1", "Claim1", "Claim2", "Claim3"]})"));
  CHECK(record(rep, "Lemma1").status == Status::Skip);
  CHECK(record(rep, "Claim1").status == Status::Pass);
  CHECK(record(rep, "Claim2").status == Status::Pass);
}

TEST_CASE("verify: stochastic expectation checks use the seed list") {
  RunConfig c = parse_run_config(R"({
    "problem": "quad", "noise": {"sigma2": 0.01, "seed": 3},
    "schedule": {"step": {"kind": "constant", "eta": 1.0}}, "T": 200,
    "seeds": [1, 2, 3, 4, 5, 6, 7, 8], "checks": ["Lemma1", "T3"]})");
  const Report rep = verify(c);
  CHECK(record(rep, "Lemma1").seeds.size() == 8);
  CHECK(record(rep, "Lemma1").status == Status::Pass);
  CHECK(record(rep, "T3").status == Status::Pass);
  CHECK(default_seeds().size() == 64);
  CHECK(default_seeds().front() == 1);
}

TEST_CASE("failed checks carry the first violation") {
  // Deliberately unsafe step: L eta = 3 breaks the descent inequality.
  const Report rep = verify(parse_run_config(R"({
    "problem": "quad", "unsafe_schedule": true,
    "schedule": {"step": {"kind": "constant", "eta": 3.0}}, "T": 50,
    "checks": ["Lemma1"]})"));
  const auto& l1 = record(rep, "Lemma1");
  CHECK(l1.status == Status::Fail);
  REQUIRE(l1.first_violation.has_value());
  CHECK(*l1.first_violation >= 2);
  CHECK(l1.violation_lhs > l1.violation_rhs);
  CHECK_FALSE(all_pass(rep));
}

TEST_CASE("run failures become skip records with the cause") {
  // The quartic escapes its certified box under an unsafe step.
  const Report rep = verify(parse_run_config(R"({
    "problem": "quartic_well", "x0": [2, 2, 2], "unsafe_schedule": true,
    "schedule": {"step": {"kind": "constant", "eta": 1.0}}, "T": 20,
    "checks": ["Claim1"]})"));
  CHECK(record(rep, "Claim1").status == Status::Skip);
  CHECK(record(rep, "Claim1").note.find("box") != std::string::npos);
}

TEST_CASE("grid expansion and sweep") {
  CHECK(sweep(expand_grid("{}")).empty());
  const auto grid = expand_grid(R"({
    "base": {"T": 200},
    "axes": {"problem": ["quad", "nonconvex_cos"],
             "avg": [{"kind": "poly_dec", "alpha": 0.5}, {"kind": "poly_inc", "alpha": 1.0},
                     {"kind": "poly_inc", "alpha": 0.5}],
             "step": [{"kind": "constant", "eta_over_L": 1.0}]},
    "checks": "auto"})");
  REQUIRE(grid.size() == 6);
  CHECK_FALSE(grid[1].config.has_value());
  CHECK(grid[1].error.find("alpha < 1") != std::string::npos);
  const auto reports = sweep(grid);
  REQUIRE(reports.size() == 6);
  CHECK(reports[1].checks.front().status == Status::Skip);
  for (int i : {0, 2, 3, 5}) CHECK(all_pass(reports[i]));
  // Deterministic aggregate.
  CHECK(reports_csv(reports) == reports_csv(sweep(grid)));
  CHECK_THROWS_AS(expand_grid(R"({"axes": {"colour": [1]}})"), ConfigError);
}

TEST_CASE("worker count honours the environment") {
  setenv("SF_LAB_WORKERS", "3", 1);
  CHECK(worker_count() == 3);
  setenv("SF_LAB_WORKERS", "zero", 1);
  CHECK(worker_count() >= 1);
  unsetenv("SF_LAB_WORKERS");
}

TEST_CASE("boundedness rule") {
  std::vector<double> flat(20, 1.0);
  CHECK(boundedness(flat).pass);
  std::vector<double> growing;
  for (int t = 1; t <= 20; ++t) growing.push_back(t);
  const ShapeVerdict g = boundedness(growing);
  CHECK_FALSE(g.pass);
  CHECK(g.ratio == doctest::Approx(2.0));
  std::vector<double> diverging(20, 1.0);
  diverging[17] = std::numeric_limits<double>::infinity();
  CHECK_FALSE(boundedness(diverging).pass);
  std::vector<double> gaps(20, 1.0);
  gaps[15] = std::numeric_limits<double>::quiet_NaN();
  const ShapeVerdict v = boundedness(gaps);
  CHECK(v.pass);
  CHECK(v.solved == v.total - 1);
  // Five horizons leave the early window [3, 2] empty.
  const ShapeVerdict short_run = boundedness(std::vector<double>(5, 1.0));
  CHECK_FALSE(short_run.applicable);
  CHECK(g.applicable);
}

TEST_CASE("trajectory export schema and determinism") {
  const RunConfig c = parse_run_config(R"({
    "problem": {"kind": "quad", "L": 1.0, "dim": 1},
    "schedule": {"step": {"kind": "constant", "eta": 0.5}}, "T": 3})");
  const auto p = make_problem(c);
  const auto tr = run(p, no_noise(), c.schedule, make_x0(c, p), c.T);
  const std::string csv = trajectory_csv(tr);
  std::istringstream lines(csv);
  std::string header, first;
  std::getline(lines, header);
  std::getline(lines, first);
  CHECK(header == "t,f_x,grad_norm_sq,delta_norm_sq,eta_t,c_t1,beta_t");
  CHECK(first == "0,0.5,1,0,0.5,1,1");

  const auto dir = temp_dir();
  const std::string a = (dir / "a.csv").string(), b = (dir / "b.csv").string();
  export_trajectory(tr, a, "csv");
  export_trajectory(tr, b, "csv");
  CHECK(slurp(a) == slurp(b));
  export_trajectory(tr, (dir / "t.bin").string(), "bin");
  CHECK(std::filesystem::file_size(dir / "t.bin") == (4 + 4 + 3 + 3) * sizeof(double));
  CHECK(std::filesystem::exists(dir / "t.bin.json"));

  const std::string never = (dir / "never.xml").string();
  std::filesystem::remove(never);
  CHECK_THROWS_AS(export_trajectory(tr, never, "xml"), ConfigError);
  CHECK_FALSE(std::filesystem::exists(never));
  try {
    export_trajectory(tr, "/nonexistent-dir/x.csv", "csv");
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("/nonexistent-dir/x.csv") != std::string::npos);
  }
}

TEST_CASE("report export is byte-stable with sorted keys") {
  const Report rep = verify(parse_run_config(kQuadT3));
  const auto dir = temp_dir();
  export_report(rep, (dir / "r1.json").string(), "json");
  export_report(verify(parse_run_config(kQuadT3)), (dir / "r2.json").string(), "json");
  const std::string text = slurp((dir / "r1.json").string());
  CHECK(text == slurp((dir / "r2.json").string()));
  CHECK(text.find("\"checks\"") < text.find("\"code_version\""));
  CHECK(text.find("\"config_hash\"") < text.find("\"label\""));
  CHECK_THROWS_AS(export_report(rep, (dir / "r.yaml").string(), "yaml"), ConfigError);
}

TEST_CASE("potential export schema") {
  const RunConfig c = parse_run_config(R"({"problem": "quad", "T": 4})");
  const auto p = make_problem(c);
  const auto tr = run(p, no_noise(), c.schedule, make_x0(c, p), c.T);
  const std::string csv = potential_csv(potential(tr, p));
  CHECK(csv.rfind("t,A_t,V_t,descent_residual,delta_coeff\n", 0) == 0);
  CHECK(csv.find("nan") != std::string::npos);
}

TEST_CASE("format_double uses 17 significant digits") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
}

TEST_CASE("gaussian starting point lies in the ball") {
  RunConfig c = parse_run_config(R"({"problem": "quad", "dim": 5,
                                     "x0": {"kind": "gaussian", "seed": 9, "radius": 0.5}})");
  const auto p = make_problem(c);
  const auto x0 = make_x0(c, p);
  CHECK(x0.norm() <= 0.5);
  CHECK(x0 == make_x0(c, p));
}

TEST_CASE("pep campaign produces a curve and a shape check") {
  pep::SolverConfig cfg;
  const auto res = pep_campaign({{pep::ScenarioKind::DecC, 0.5}}, 8, 1.0, 1.0,
                                std::nullopt, cfg, 1);
  REQUIRE(res.curves.size() == 1);
  CHECK(res.curves[0].points.size() == 8);
  REQUIRE(res.report.checks.size() == 1);
  CHECK(res.report.checks[0].id == "shape:dec_c(0.5)");
  const std::string csv = curve_csv(res.curves[0]);
  CHECK(csv.rfind("t,tau,weighted_tau,status\n", 0) == 0);
}
