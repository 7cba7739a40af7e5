// Tests for the orchestration layer: configuration parsing and validation,
// CSV/JSON emission, the end-to-end pipeline at epsilon = 0 against the
// background solution, the verification report on converged and corrupted
// states, determinism of emitted artifacts, and parameter sweeps.
#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "tsn/harness.hpp"

using namespace tsn;

namespace {

// wall-bump case used throughout: compatible inlet data with swirl
CaseConfig bump_config(double eps, int n) {
  double th0 = 0.5235987755982988;
  CaseConfig cfg;
  cfg.inlet.U1 = 2.0 * std::sqrt(1.4);
  double u3 = 0.8, p2 = 0.4;
  double p3 = (u3 * u3 * std::pow(th0, 4) / std::tan(th0) - 2.0 * p2 * th0) /
              (3.0 * th0 * th0);
  cfg.pert.epsilon = eps;
  cfg.pert.U1p = Poly({0.3, 0.0, 0.5});
  cfg.pert.U2p = Poly({0.0, 0.0, 0.0, th0, -1.0});
  cfg.pert.U3p = Poly({0.0, 0.0, u3});
  cfg.pert.Pp = Poly({0.2, 0.0, p2, p3});
  cfg.pert.Sp = Poly({0.1, 0.0, 0.3});
  cfg.pert.f = Poly({0.0, 0.0, 0.4, -0.2});
  cfg.P0 = Poly({0.5, 0.0, -0.3});
  cfg.P_e = exit_pressure_given_shock(1.5, cfg.inlet, cfg.geom, cfg.gas);
  cfg.n1 = n;
  cfg.n2 = n;
  cfg.nsig = 64;
  cfg.nr = 160;
  cfg.nr_out = 48;
  cfg.ntheta_out = 48;
  return cfg;
}

// straight-wall case with data of higher axis/wall compatibility
CaseConfig straight_config(double eps, int n) {
  double th0 = 0.5235987755982988;
  CaseConfig cfg = bump_config(eps, n);
  cfg.straight_wall = true;
  cfg.pert.f = Poly();
  cfg.pert.U1p = Poly({0.3, 0.0, 0.5, -2.0 * 0.5 / (3.0 * th0)});
  cfg.pert.U2p = Poly({0.0, 0.0, 0.0, th0, -1.0});
  cfg.pert.U3p = Poly({0.0, 0.0, th0 * th0, -2.0 * th0, 1.0});
  cfg.pert.Pp = Poly({0.2, 0.0, 0.4, -2.0 * 0.4 / (3.0 * th0)});
  cfg.pert.Sp = Poly({0.1, 0.0, 0.3, -2.0 * 0.3 / (3.0 * th0)});
  cfg.P0 = Poly({0.5, 0.0, -0.3, 2.0 * 0.3 / (3.0 * th0)});
  return cfg;
}

const SolutionBundle& bump_bundle() {
  static SolutionBundle b = run_case(bump_config(1e-3, 48));
  return b;
}

}  // namespace

TEST_CASE("csv fields follow RFC 4180 quoting") {
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("has,comma") == "\"has,comma\"");
  CHECK(csv_field("has\"quote") == "\"has\"\"quote\"");
  CHECK(csv_field("two\nlines") == "\"two\nlines\"");
  CHECK(csv_row({"a", "b,c", ""}) == "a,\"b,c\",\n");
}

TEST_CASE("minimal config loads with defaults applied") {
  CaseConfig cfg = parse_config("");
  CHECK(cfg.gas.gamma == 1.4);
  CHECK(cfg.geom.r1 == 1.0);
  CHECK(cfg.geom.r2 == 2.0);
  CHECK(cfg.inlet.U1 == 2.0 * std::sqrt(1.4));
  CHECK(cfg.P_e == 0.0);  // auto: mid-radius shock
  CHECK(cfg.pert.epsilon == 0.0);
  CHECK(cfg.n1 == 64);
  CHECK(cfg.straight_wall == false);
}

TEST_CASE("config keys, comments, and coefficient lists parse") {
  std::string text =
      "# leading comment\n"
      "[gas]\n"
      "gamma = 1.6   ; trailing comment\n"
      "[geometry]\n"
      "r1 = 1.5\n"
      "r2 = 3.0\n"
      "theta0 = 0.4\n"
      "[inlet]\n"
      "U1 = 3.0\n"
      "P_e = 0\n"
      "[perturbation]\n"
      "epsilon = 2e-3\n"
      "U1p = 0.3, 0, 0.5\n"
      "Pp = 0.2 0 0.4\n"
      "straight_wall = false\n"
      "[numerics]\n"
      "n1 = 32\n"
      "n2 = 16\n"
      "tol = 1e-11\n";
  CaseConfig cfg = parse_config(text);
  CHECK(cfg.gas.gamma == 1.6);
  CHECK(cfg.geom.r1 == 1.5);
  CHECK(cfg.geom.theta0 == 0.4);
  CHECK(cfg.inlet.U1 == 3.0);
  CHECK(cfg.pert.epsilon == 2e-3);
  REQUIRE(cfg.pert.U1p.coeffs().size() == 3);
  CHECK(cfg.pert.U1p.coeffs()[2] == 0.5);
  REQUIRE(cfg.pert.Pp.coeffs().size() == 3);
  CHECK(cfg.pert.Pp.coeffs()[2] == 0.4);
  CHECK(cfg.n1 == 32);
  CHECK(cfg.n2 == 16);
  CHECK(cfg.tol == 1e-11);
}

TEST_CASE("theta0 beyond a right angle is rejected") {
  REQUIRE_THROWS_AS(parse_config("[geometry]\ntheta0 = 2.0\n"), ConfigError);
}

TEST_CASE("exit pressure outside the admissible interval quotes the range") {
  ExitPressureRange er =
      exit_pressure_range({2.0 * std::sqrt(1.4), 0.0, 0.0, 1.0, 0.0},
                          {1.0, 2.0, 0.5235987755982988}, {1.4, 1.0, 1.0});
  std::string text = "[inlet]\nP_e = " + fmt17(er.P2 * 2.0) + "\n";
  try {
    parse_config(text);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    CHECK(msg.find("exit-pressure interval") != std::string::npos);
    CHECK(msg.find(fmt17(er.P1)) != std::string::npos);
    CHECK(msg.find(fmt17(er.P2)) != std::string::npos);
  }
}

TEST_CASE("all validation failures are reported together") {
  std::string text =
      "[gas]\n"
      "gamma = 0.9\n"
      "[geometry]\n"
      "r1 = 3.0\n"
      "r2 = 2.0\n"
      "[numerics]\n"
      "n1 = 4\n";
  try {
    parse_config(text);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    CHECK(msg.find("[gas]") != std::string::npos);
    CHECK(msg.find("[geometry]") != std::string::npos);
    CHECK(msg.find("n1, n2 >= 8") != std::string::npos);
  }
}

TEST_CASE("parse errors carry line numbers") {
  try {
    parse_config("[gas]\ngamma = 1.4\nbogus_key = 1\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("bogus_key") != std::string::npos);
  }
}

TEST_CASE("straight-wall mode requires a flat wall profile") {
  std::string text =
      "[perturbation]\n"
      "straight_wall = true\n"
      "f = 0 0 0.4\n";
  REQUIRE_THROWS_AS(parse_config(text), ConfigError);
}

TEST_CASE("unperturbed pipeline reproduces the background solution") {
  CaseConfig cfg = bump_config(0.0, 48);
  SolutionBundle b = run_case(cfg);
  ShockCurve sc = shock_curve(b);
  for (double xi : sc.xi) CHECK(std::abs(xi - b.bg.r_b) < 1e-8);
  EulerianField e = reconstruct_eulerian(b);
  double dev = 0.0;
  for (std::size_t i = 0; i < e.r.size(); ++i)
    for (std::size_t j = 0; j < e.th.size(); ++j) {
      FlowState ref =
          e.region[i][j] ? b.bg.sub(std::max(e.r[i], b.bg.r_b))
                         : b.bg.sup(e.r[i]);
      dev = std::max({dev, std::abs(e.U1[i][j] - ref.U1),
                      std::abs(e.U2[i][j]), std::abs(e.U3[i][j]),
                      std::abs(e.P[i][j] - ref.P),
                      std::abs(e.S[i][j] - ref.S)});
    }
  CHECK(dev < 1e-6);
}

TEST_CASE("verify passes on a converged perturbed run") {
  json rep = verify(bump_bundle(), 1);
  CAPTURE(rep.dump(2));
  for (const auto& c : rep["checks"]) CHECK(bool(c["pass"]));
  CHECK(bool(rep["pass"]));
}

TEST_CASE("shock curve is flat at the axis") {
  const SolutionBundle& b = bump_bundle();
  ShockCurve sc = shock_curve(b);
  double slope0 = (sc.xi[1] - sc.xi[0]) / (sc.th[1] - sc.th[0]);
  double hs = b.fd.hs();
  double th0 = b.bg.geom.theta0;
  double eps = b.cfg.pert.epsilon;
  // even profile sampled at cell centers: first slope is O(h) * curvature
  CHECK(std::abs(slope0) < 20.0 * eps * hs / (th0 * th0));
  // mirror evaluation across the axis
  CHECK(sc.at(-0.01) == sc.at(0.01));
}

TEST_CASE("corrupted pressure field trips the interior-residual check") {
  SolutionBundle b = bump_bundle();
  for (int i = 0; i <= b.fd.n1; ++i) {
    double Pb = b.bg.sub(b.bg.r_b + b.fd.z1(i)).P;
    for (int j = 0; j < b.fd.n2; ++j)
      b.W.W4[i][j] = 1.01 * (Pb + b.W.W4[i][j]) - Pb;
  }
  json rep = verify(b, 1);
  bool interior_failed = false;
  for (const auto& c : rep["checks"])
    if (c["name"] == "interior_residual") interior_failed = !bool(c["pass"]);
  CHECK(interior_failed);
  CHECK_FALSE(bool(rep["pass"]));
}

TEST_CASE("identical configs produce bit-identical artifacts") {
  CaseConfig cfg = bump_config(1e-3, 32);
  cfg.nr_out = 16;
  cfg.ntheta_out = 16;
  SolutionBundle a = run_case(cfg);
  SolutionBundle b = run_case(cfg);
  EulerianField ea = reconstruct_eulerian(a), eb = reconstruct_eulerian(b);
  CHECK(shock_csv(ea.shock) == shock_csv(eb.shock));
  CHECK(fields_csv(ea) == fields_csv(eb));
  CHECK(convergence_jsonl(a.rep) == convergence_jsonl(b.rep));
}

TEST_CASE("report and emitted tables carry the expected shape") {
  const SolutionBundle& b = bump_bundle();
  json rep = report_json(b);
  for (const char* key : {"r_b", "P_e", "epsilon", "N", "M", "grid",
                          "converged", "iterations", "final_update", "tol",
                          "norm", "runtime_s"})
    CHECK(rep.contains(key));
  CHECK(bool(rep["converged"]));

  std::string bgc = background_csv(b.bg, 11);
  CHECK(bgc.rfind("r,branch,U,rho,P,Mach\n", 0) == 0);
  std::size_t last = bgc.rfind("summary,");
  REQUIRE(last != std::string::npos);
  CHECK(bgc.find(fmt17(b.bg.r_b), last) != std::string::npos);

  std::string sup = supersonic_csv(b.sup);
  CHECK(sup.rfind("r,theta,U1,U2,U3,P,S,Mach\n", 0) == 0);

  std::string conv = convergence_jsonl(b.rep);
  std::istringstream is(conv);
  std::string line;
  int k = 0;
  while (std::getline(is, line)) {
    json row = json::parse(line);
    CHECK(row["k"] == ++k);
    CHECK(row.contains("residual"));
  }
  CHECK(k == b.rep.iters);
}

TEST_CASE("epsilon sweep shows linear terminal norms") {
  CaseConfig base = bump_config(1e-3, 32);
  std::vector<SweepRow> rows = sweep(base, "epsilon", {"1e-3", "2e-3", "4e-3"});
  REQUIRE(rows.size() == 3);
  double K = rows[0].norm / 1e-3;
  double epses[] = {1e-3, 2e-3, 4e-3};
  for (int k = 0; k < 3; ++k) {
    REQUIRE(rows[k].ok);
    CHECK(std::abs(rows[k].norm / (K * epses[k]) - 1.0) < 0.10);
    CHECK(rows[k].ratio < 0.5);
  }
}

TEST_CASE("exit-pressure sweep moves the shock monotonically") {
  CaseConfig base = bump_config(1e-3, 32);
  FlowState in = base.inlet;
  // sample exit pressures in increasing order (shock target moving upstream)
  std::vector<std::string> vals;
  for (double rb : {1.7, 1.5, 1.3})
    vals.push_back(fmt17(exit_pressure_given_shock(rb, in, base.geom,
                                                   base.gas)));
  vals.push_back("-1");  // recorded as a failure, sweep continues
  std::vector<SweepRow> rows = sweep(base, "P_e", vals);
  REQUIRE(rows.size() == 4);
  // raising the exit pressure pushes the shock upstream: strictly
  // decreasing recovered r_b
  REQUIRE(rows[0].ok);
  REQUIRE(rows[1].ok);
  REQUIRE(rows[2].ok);
  CHECK(rows[0].r_b > rows[1].r_b);
  CHECK(rows[1].r_b > rows[2].r_b);
  CHECK_FALSE(rows[3].ok);
  CHECK_FALSE(rows[3].error.empty());

  std::string csv = sweep_csv("P_e", rows);
  CHECK(csv.rfind("P_e,status,error,", 0) == 0);
  CHECK(csv.find("failed") != std::string::npos);

  REQUIRE_THROWS_AS(sweep(base, "gamma", {"1.4"}), ConfigError);
  std::vector<SweepRow> bad = sweep(base, "grid", {"64"});
  REQUIRE(bad.size() == 1);
  CHECK_FALSE(bad[0].ok);
}

TEST_CASE("straight-wall diagnostics pass for higher-compatibility data") {
  SolutionBundle b = run_case(straight_config(1e-3, 48));
  json rep = verify(b, 1);
  CAPTURE(rep.dump(2));
  bool saw_dtheta = false, saw_slope = false;
  for (const auto& c : rep["checks"]) {
    if (c["name"] == "straight_wall_dtheta") saw_dtheta = true;
    if (c["name"] == "straight_wall_xi_slope") saw_slope = true;
    CHECK(bool(c["pass"]));
  }
  CHECK(saw_dtheta);
  CHECK(saw_slope);
  CHECK(bool(rep["pass"]));
}
