// Command-line driver: background | supersonic | solve | sweep | verify.
// Exit codes: 0 success, 2 configuration/validation error, 3 solver failure.
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tsn/harness.hpp"

namespace {

enum class LogLevel { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3 };

LogLevel g_log_level = LogLevel::kInfo;

void log_info(const std::string& msg) {
  if (g_log_level <= LogLevel::kInfo) std::cout << msg << "\n";
}

std::vector<std::string> split_csv_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(tsn::detail::trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!tsn::detail::trim(cur).empty() || !out.empty())
    out.push_back(tsn::detail::trim(cur));
  return out;
}

struct CliOptions {
  std::string config_path;
  std::string out_dir = ".";
  std::string log_level = "info";
  // solve/verify overrides
  double epsilon = -1.0;
  std::string grid;
  int max_iter = 0;
  double tol = -1.0;
  // background
  double pe_override = 0.0;
  // sweep
  std::string param;
  std::string values;
  // verify
  int level = -1;
  // explicit output paths
  std::string out_file;
};

tsn::CaseConfig make_config(const CliOptions& o) {
  tsn::CaseConfig cfg =
      o.config_path.empty() ? tsn::CaseConfig{} : tsn::load_config(o.config_path);
  if (o.epsilon >= 0.0) cfg.pert.epsilon = o.epsilon;
  if (!o.grid.empty()) {
    std::size_t x = o.grid.find('x');
    int a = 0, b = 0;
    if (x == std::string::npos || !tsn::detail::parse_int(o.grid.substr(0, x), &a) ||
        !tsn::detail::parse_int(o.grid.substr(x + 1), &b) || a < 8 || b < 8)
      throw tsn::ConfigError("bad --grid value '" + o.grid +
                             "' (expected <n1>x<n2> with n1, n2 >= 8)");
    cfg.n1 = a;
    cfg.n2 = b;
  }
  if (o.max_iter > 0) cfg.max_iter = o.max_iter;
  if (o.tol >= 0.0) cfg.tol = o.tol;
  if (o.pe_override > 0.0) cfg.P_e = o.pe_override;
  if (o.level >= 0) cfg.level = o.level;
  return cfg;
}

tsn::BackgroundSolution make_background(const tsn::CaseConfig& cfg) {
  double Pe = cfg.P_e;
  if (!(Pe > 0.0))
    Pe = tsn::exit_pressure_given_shock(0.5 * (cfg.geom.r1 + cfg.geom.r2),
                                        cfg.inlet, cfg.geom, cfg.gas);
  return tsn::shoot_shock_position(Pe, cfg.inlet, cfg.geom, cfg.gas);
}

int cmd_background(const CliOptions& o) {
  tsn::CaseConfig cfg = make_config(o);
  tsn::BackgroundSolution bg = make_background(cfg);
  std::string path =
      o.out_file.empty() ? o.out_dir + "/background.csv" : o.out_file;
  tsn::write_text_file(path, tsn::background_csv(bg));
  log_info("shock radius r_b = " + tsn::fmt17(bg.r_b));
  log_info("admissible exit pressures (" + tsn::fmt17(bg.range.P1) + ", " +
           tsn::fmt17(bg.range.P2) + ")");
  log_info("wrote " + path);
  return 0;
}

int cmd_supersonic(const CliOptions& o) {
  tsn::CaseConfig cfg = make_config(o);
  tsn::BackgroundSolution bg = make_background(cfg);
  tsn::SupersonicField F = tsn::march(cfg.pert, bg, cfg.nsig, cfg.nr);
  std::string path =
      o.out_file.empty() ? o.out_dir + "/supersonic.csv" : o.out_file;
  tsn::write_text_file(path, tsn::supersonic_csv(F));
  log_info("marched " + std::to_string(cfg.nr) + " x " +
           std::to_string(cfg.nsig) + " nodes up to r = " +
           tsn::fmt17(F.rs.back()));
  log_info("wrote " + path);
  return 0;
}

int cmd_solve(const CliOptions& o) {
  tsn::CaseConfig cfg = make_config(o);
  tsn::SolutionBundle b = tsn::run_case(cfg);
  tsn::write_solve_outputs(b, o.out_dir);
  log_info("converged = " + std::string(b.rep.converged ? "true" : "false") +
           ", iterations = " + std::to_string(b.rep.iters) +
           ", final update = " + tsn::fmt17(b.rep.final_update));
  log_info("wrote " + o.out_dir +
           "/{shock.csv, fields.csv, convergence.jsonl, report.json}");
  if (!b.rep.converged)
    throw tsn::SolveError("fixed-point iteration did not converge in " +
                          std::to_string(cfg.max_iter) + " iterations");
  return 0;
}

int cmd_sweep(const CliOptions& o) {
  tsn::CaseConfig cfg = make_config(o);
  std::vector<std::string> vals = split_csv_list(o.values);
  if (vals.empty()) throw tsn::ConfigError("sweep: --values must be nonempty");
  std::vector<tsn::SweepRow> rows = tsn::sweep(cfg, o.param, vals);
  std::string path = o.out_file.empty() ? o.out_dir + "/sweep.csv" : o.out_file;
  tsn::write_text_file(path, tsn::sweep_csv(o.param, rows));
  int failed = 0;
  for (const auto& r : rows) {
    if (!r.ok) ++failed;
    log_info(o.param + " = " + r.value + ": " +
             (r.ok ? "r_b = " + tsn::fmt17(r.r_b) + ", iters = " +
                         std::to_string(r.iters)
                   : "failed (" + r.error + ")"));
  }
  log_info("wrote " + path);
  if (failed == int(rows.size()))
    throw tsn::SolveError("sweep: every case failed");
  return 0;
}

int cmd_verify(const CliOptions& o) {
  tsn::CaseConfig cfg = make_config(o);
  tsn::SolutionBundle b = tsn::run_case(cfg);
  tsn::json rep = tsn::verify(b, cfg.level);
  std::string path =
      o.out_file.empty() ? o.out_dir + "/verify.json" : o.out_file;
  tsn::write_text_file(path, rep.dump(2) + "\n");
  for (const auto& c : rep["checks"])
    std::cout << (bool(c["pass"]) ? "pass" : "FAIL") << "  "
              << std::string(c["name"]) << "  value = " << double(c["value"])
              << "  tolerance = " << double(c["tolerance"]) << "\n";
  std::cout << (bool(rep["pass"]) ? "all checks passed" : "some checks failed")
            << "\n";
  log_info("wrote " + path);
  return 0;  // report-only: failing checks do not change the exit code
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transonic shock solutions in divergent nozzles with swirl"};
  app.require_subcommand(1);
  app.fallthrough();

  CliOptions o;
  app.add_option("--config", o.config_path, "Path to the configuration file");
  app.add_option("--out-dir", o.out_dir,
                 "Directory for output files (must exist)");
  app.add_option("--log-level", o.log_level, "debug | info | warn | error")
      ->check(CLI::IsMember({"debug", "info", "warn", "error"}));

  CLI::App* bgc = app.add_subcommand(
      "background", "Solve the unperturbed transonic background flow");
  bgc->add_option("--pe", o.pe_override, "Override the exit pressure");
  bgc->add_option("--out", o.out_file, "Output CSV path");

  CLI::App* supc = app.add_subcommand(
      "supersonic", "March the perturbed supersonic flow downstream");
  supc->add_option("--out", o.out_file, "Output CSV path");

  CLI::App* solc = app.add_subcommand(
      "solve", "Run the full free-boundary fixed-point solve");
  solc->add_option("--epsilon", o.epsilon, "Override perturbation amplitude");
  solc->add_option("--grid", o.grid, "Override subsonic grid as <n1>x<n2>");
  solc->add_option("--max-iter", o.max_iter, "Override iteration cap");
  solc->add_option("--tol", o.tol, "Override convergence tolerance");

  CLI::App* swc =
      app.add_subcommand("sweep", "Run a parameter sweep of full solves");
  swc->add_option("--param", o.param, "epsilon | grid | P_e")
      ->required()
      ->check(CLI::IsMember({"epsilon", "grid", "P_e"}));
  swc->add_option("--values", o.values, "Comma-separated parameter values")
      ->required();
  swc->add_option("--out", o.out_file, "Output CSV path");

  CLI::App* verc = app.add_subcommand(
      "verify", "Solve and run the diagnostic check suite (report-only)");
  verc->add_option("--level", o.level, "Diagnostics level (0 or 1)");
  verc->add_option("--epsilon", o.epsilon, "Override perturbation amplitude");
  verc->add_option("--grid", o.grid, "Override subsonic grid as <n1>x<n2>");
  verc->add_option("--out", o.out_file, "Output JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (o.log_level == "debug") g_log_level = LogLevel::kDebug;
  else if (o.log_level == "warn") g_log_level = LogLevel::kWarn;
  else if (o.log_level == "error") g_log_level = LogLevel::kError;

  try {
    if (bgc->parsed()) return cmd_background(o);
    if (supc->parsed()) return cmd_supersonic(o);
    if (solc->parsed()) return cmd_solve(o);
    if (swc->parsed()) return cmd_sweep(o);
    if (verc->parsed()) return cmd_verify(o);
  } catch (const tsn::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const tsn::DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const tsn::SolveError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
