// sflab: command-line front end for schedule-free trajectory checks, grid
// sweeps and PEP worst-case campaigns.
//
//   sflab run     --config run.json [--out traj.csv --format csv|json|bin]
//   sflab verify  --config run.json [--checks T3,Claim1] [--report r.json]
//   sflab sweep   --grid grid.json --out-dir results/
//   sflab pep     --scenario DecC --alpha 1 --n-max 30 [--L 1 --D 1]
//                 [--metric min_grad_sq] [--n 5] [--config pep.json]
//   sflab export  --config run.json --what trajectory|potential|report
//                 --out file --format csv|json|bin
//
// Exit codes: 0 all checks pass, 1 some check failed, 2 configuration error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sflab/errors.h"
#include "sflab/harness.h"
#include "sflab/lyapunov.h"
#include "sflab/optimizer.h"
#include "sflab/pep.h"

namespace {

namespace h = sflab::harness;
namespace pep = sflab::pep;
using json = nlohmann::json;

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitConfig = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw sflab::IoError("cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void print_report(const h::Report& rep) {
  std::printf("%s  [config %s]\n", rep.label.c_str(), rep.config_hash.c_str());
  for (const auto& c : rep.checks) {
    std::printf("  %-12s %-4s measured=%s bound=%s slack=%s", c.id.c_str(),
                h::to_string(c.status).c_str(),
                h::format_double(c.measured).c_str(),
                h::format_double(c.bound).c_str(),
                h::format_double(c.slack).c_str());
    if (c.first_violation) {
      std::printf(" first_violation t=%lld (%s > %s)",
                  static_cast<long long>(*c.first_violation),
                  h::format_double(c.violation_lhs).c_str(),
                  h::format_double(c.violation_rhs).c_str());
    }
    std::printf("\n");
    if (!c.note.empty()) std::printf("      %s\n", c.note.c_str());
  }
}

h::RunConfig load_config(const std::string& path, bool unsafe) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw sflab::ConfigError("malformed config '" + path + "': " + e.what());
  }
  if (unsafe) j["unsafe_schedule"] = true;
  return h::parse_run_config(j.dump());
}

std::vector<h::Check> parse_check_list(const std::string& text) {
  std::vector<h::Check> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(h::parse_check(item));
  }
  return out;
}

pep::SolverConfig load_pep_config(const std::string& path) {
  pep::SolverConfig cfg;
  if (path.empty()) return cfg;
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw sflab::ConfigError("malformed config '" + path + "': " + e.what());
  }
  const json p = j.value("pep", json::object());
  cfg.solver = p.value("solver", cfg.solver);
  cfg.tol = p.value("tol", cfg.tol);
  cfg.max_n = p.value("max_n", cfg.max_n);
  if (cfg.solver != "ipm") {
    throw sflab::ConfigError("pep.solver: unknown solver '" + cfg.solver +
                             "' (available: ipm)");
  }
  return cfg;
}

int cmd_run(const std::string& config_path, const std::string& out,
            const std::string& format, bool unsafe) {
  const h::RunConfig cfg = load_config(config_path, unsafe);
  const auto p = h::make_problem(cfg);
  const auto x0 = h::make_x0(cfg, p);
  const auto noise = cfg.sigma2 > 0 ? sflab::gaussian_noise(cfg.sigma2, cfg.seed)
                                    : sflab::no_noise();
  const auto tr = sflab::run(p, noise, cfg.schedule, x0, cfg.T,
                             sflab::RunOptions{cfg.unsafe});
  if (!out.empty()) h::export_trajectory(tr, out, format);
  std::printf("%s %s T=%lld f(x_T)-f*=%s |grad f(x_T)|^2=%s\n", p.name.c_str(),
              sflab::describe(cfg.schedule).c_str(),
              static_cast<long long>(cfg.T),
              h::format_double(tr.f_x.back() - p.f_star).c_str(),
              h::format_double(tr.grad_x_sq.back()).c_str());
  return kExitPass;
}

int cmd_verify(const std::string& config_path, const std::string& checks,
               const std::string& report_path, const std::string& format,
               bool unsafe) {
  h::RunConfig cfg = load_config(config_path, unsafe);
  if (!checks.empty()) {
    cfg.checks = parse_check_list(checks);
    h::validate(cfg);
  }
  const h::Report rep = h::verify(cfg);
  if (!report_path.empty()) h::export_report(rep, report_path, format);
  print_report(rep);
  return h::all_pass(rep) ? kExitPass : kExitFail;
}

int cmd_sweep(const std::string& grid_path, const std::string& out_dir) {
  const auto grid = h::expand_grid(read_file(grid_path));
  const auto reports = h::sweep(grid);
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    for (std::size_t i = 0; i < reports.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "report_%04zu.json", i);
      h::export_report(reports[i], out_dir + "/" + name, "json");
    }
    h::export_reports(reports, out_dir + "/aggregate.csv", "csv");
  }
  int pass = 0, fail = 0, skip = 0;
  for (const auto& r : reports) {
    for (const auto& c : r.checks) {
      if (c.status == h::Status::Pass) ++pass;
      if (c.status == h::Status::Fail) ++fail;
      if (c.status == h::Status::Skip) ++skip;
    }
    std::printf("%-4s %s\n", h::all_pass(r) ? "ok" : "FAIL", r.label.c_str());
  }
  std::printf("%zu reports: %d checks pass, %d fail, %d skip\n", reports.size(),
              pass, fail, skip);
  return fail == 0 ? kExitPass : kExitFail;
}

int cmd_pep(const std::string& scenario_name, double alpha, int n_max, int n,
            double L, double D, const std::string& metric_name,
            const std::string& config_path, const std::string& out_dir) {
  pep::SolverConfig cfg = load_pep_config(config_path);
  const pep::Scenario sc{pep::parse_scenario_kind(scenario_name), alpha};
  std::optional<pep::Metric> metric;
  if (!metric_name.empty()) metric = pep::parse_metric(metric_name);
  if (!(L > 0) || !(D > 0)) throw sflab::ConfigError("pep: L and D must be > 0");
  pep::scenario_schedule(sc, L);  // validates alpha

  if (n >= 0) {
    if (n > cfg.max_n) {
      throw sflab::ConfigError("pep: n exceeds pep.max_n = " +
                               std::to_string(cfg.max_n));
    }
    pep::BuildOptions bo;
    bo.metric = metric.value_or(pep::default_metric(sc));
    const auto cert = pep::solve(pep::build(sc, n, L, D, bo), cfg);
    std::fputs(h::certificate_json(cert).c_str(), stdout);
    if (!out_dir.empty()) {
      std::filesystem::create_directories(out_dir);
      h::export_certificate(cert, out_dir + "/certificate.json");
    }
    return kExitPass;
  }

  const auto result = h::pep_campaign({sc}, n_max, L, D, metric, cfg,
                                      h::worker_count());
  const auto& curve = result.curves.front();
  std::fputs(h::curve_csv(curve).c_str(), stdout);
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::string stem = pep::to_string(sc.kind);
    if (sc.kind == pep::ScenarioKind::DecC || sc.kind == pep::ScenarioKind::IncC) {
      stem += "_alpha" + h::format_double(sc.alpha);
    }
    h::export_curve(curve, out_dir + "/curve_" + stem + ".csv", "csv");
    h::export_report(result.report, out_dir + "/report.json", "json");
  }
  print_report(result.report);
  return h::all_pass(result.report) ? kExitPass : kExitFail;
}

int cmd_export(const std::string& config_path, const std::string& what,
               const std::string& out, const std::string& format, bool unsafe) {
  const h::RunConfig cfg = load_config(config_path, unsafe);
  if (what == "report") {
    h::export_report(h::verify(cfg), out, format);
    return kExitPass;
  }
  // Validate the format before running anything.
  if (what == "trajectory") {
    if (format != "csv" && format != "json" && format != "bin") {
      throw sflab::ConfigError("export: unknown format '" + format + "'");
    }
  } else if (what == "potential") {
    if (format != "csv" && format != "json") {
      throw sflab::ConfigError("export: unknown format '" + format + "'");
    }
  } else {
    throw sflab::ConfigError("export: unknown object '" + what +
                             "' (trajectory, potential, report)");
  }
  const auto p = h::make_problem(cfg);
  const auto noise = cfg.sigma2 > 0 ? sflab::gaussian_noise(cfg.sigma2, cfg.seed)
                                    : sflab::no_noise();
  const auto tr = sflab::run(p, noise, cfg.schedule, h::make_x0(cfg, p), cfg.T,
                             sflab::RunOptions{cfg.unsafe});
  if (what == "trajectory") {
    h::export_trajectory(tr, out, format);
  } else {
    h::export_potential(sflab::potential(tr, p, cfg.sigma2), out, format);
  }
  return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sflab: schedule-free averaging analysis lab"};
  app.require_subcommand(1);
  bool unsafe = false;
  app.add_flag("--unsafe-schedule", unsafe,
               "accept schedules outside the proven parameter ranges");

  std::string config, out, format = "csv", checks, report, grid, out_dir, what;
  std::string scenario = "DecC", metric, pep_config;
  double alpha = 1.0, L = 1.0, D = 1.0;
  int n_max = 30, n = -1;

  auto* run = app.add_subcommand("run", "run one configuration");
  run->add_option("--config", config, "run config JSON")->required();
  run->add_option("--out", out, "trajectory output path");
  run->add_option("--format", format, "csv | json | bin");

  auto* verify = app.add_subcommand("verify", "run and evaluate checks");
  verify->add_option("--config", config, "run config JSON")->required();
  verify->add_option("--checks", checks, "comma-separated check list override");
  verify->add_option("--report", report, "report output path");
  verify->add_option("--format", format, "csv | json");

  auto* sweep = app.add_subcommand("sweep", "run a cross-product grid");
  sweep->add_option("--grid", grid, "grid JSON")->required();
  sweep->add_option("--out-dir", out_dir, "directory for reports");

  auto* pepc = app.add_subcommand("pep", "worst-case curves by PEP");
  pepc->add_option("--scenario", scenario, "DecC | IncC | LinStepGrad | LinStepDist");
  pepc->add_option("--alpha", alpha, "averaging power");
  pepc->add_option("--n-max", n_max, "largest horizon of the curve");
  pepc->add_option("--n", n, "solve a single horizon and print its certificate");
  pepc->add_option("--L", L, "smoothness constant");
  pepc->add_option("--D", D, "initial gap");
  pepc->add_option("--metric", metric,
                   "last_grad_sq | min_grad_sq | max_grad_sq | last_dist_sq");
  pepc->add_option("--config", pep_config, "JSON with pep.solver, pep.tol, pep.max_n");
  pepc->add_option("--out-dir", out_dir, "directory for curve and report");

  auto* exp = app.add_subcommand("export", "write a trajectory, potential or report");
  exp->add_option("--config", config, "run config JSON")->required();
  exp->add_option("--what", what, "trajectory | potential | report")->required();
  exp->add_option("--out", out, "output path")->required();
  exp->add_option("--format", format, "csv | json | bin");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config, out, format, unsafe);
    if (*verify) {
      if (!verify->count("--format") && report.size() > 5 &&
          report.substr(report.size() - 5) == ".json") {
        format = "json";
      }
      return cmd_verify(config, checks, report, format, unsafe);
    }
    if (*sweep) return cmd_sweep(grid, out_dir);
    if (*pepc) {
      return cmd_pep(scenario, alpha, n_max, n, L, D, metric, pep_config, out_dir);
    }
    if (*exp) return cmd_export(config, what, out, format, unsafe);
  } catch (const sflab::ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kExitConfig;
  } catch (const sflab::IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFail;
  }
  return kExitConfig;
}
