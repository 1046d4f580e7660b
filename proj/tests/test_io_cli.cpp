#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "relperf/closed_form.hpp"
#include "relperf/io.hpp"

using namespace relperf;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  size_t start = 0;
  while (start < text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    out.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(RELPERF_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string spec_path(const std::string& name) {
  return std::string(SPEC_DIR_PATH) + "/" + name;
}

}  // namespace

TEST_CASE("finite spec JSON round trip preserves every field") {
  GameSpec s;
  s.mode = Mode::Finite;
  s.rho = 0.25;
  s.horizon = 2.0;
  s.steps = 2;
  s.seed = 42;
  s.lambda = {{0.0, 1.0}, {0.5, 0.0}};

  auto a0 = testkit::agent_sign(0.5, 1.0, 0.3, 0.15, 1.5);
  auto a1 = testkit::agent1(-1.0, 2.0, 0.1, 2.0);
  Vec m2(1);
  m2 << 0.3;
  a1.mu.base.push_back(m2);  // piecewise drift, one entry per step
  Mat s2(1, 1);
  s2 << 2.5;
  a1.sigma.base.push_back(s2);
  Vec lo(1), hi(1);
  lo << -0.4;
  hi << 0.4;
  a1.constraint = Box{lo, hi};
  s.agents = {a0, a1};

  const json j1 = spec_to_json(s);
  const GameSpec back = spec_from_json(j1);
  CHECK(spec_to_json(back) == j1);
  CHECK(back.lambda == s.lambda);
  CHECK(back.agents[1].mu.base.size() == 2);
  CHECK(std::holds_alternative<Box>(back.agents[1].constraint));

  // scalar shorthands expand to the canonical one-factor shapes
  const GameSpec tiny = spec_from_json_text(R"({
    "mode": "finite", "steps": 2, "lambda": [[0.0]],
    "agents": [ { "gamma": 0.5, "mu": 0.2, "sigma": 1.0 } ]
  })");
  CHECK(tiny.agents[0].d() == 1);
  CHECK(tiny.agents[0].x0 == 1.0);
  CHECK(tiny.agents[0].mu.base[0][0] == 0.2);
  CHECK(std::holds_alternative<FullSpace>(tiny.agents[0].constraint));
}

TEST_CASE("graphon spec JSON round trip, both family and explicit types") {
  GameSpec s;
  s.mode = Mode::Graphon;
  s.rho = 0.1;
  s.horizon = 1.0;
  s.steps = 3;
  s.common_noise = true;
  s.graphon = step_graphon_from_matrix({{0.2, 0.6}, {0.6, 1.0}});
  s.types = 2;
  auto a0 = testkit::agent1(0.5, 1.0, 0.3, 1.0);
  Vec ss(1);
  ss << 0.3;
  a0.sigma_star = VecField::constant(ss);
  s.type_agents = {a0, testkit::agent1(0.25, 2.0, 0.2, 1.2)};

  const json j1 = spec_to_json(s);
  const GameSpec back = spec_from_json(j1);
  CHECK(spec_to_json(back) == j1);
  CHECK(back.graphon(0.25, 0.25) == 0.2);
  CHECK(back.graphon(0.3, 0.9) == 0.6);
  CHECK(back.common_noise);

  GameSpec f;
  f.mode = Mode::Graphon;
  f.rho = 0.05;
  f.horizon = 1.0;
  f.steps = 4;
  f.graphon = uniform_attachment_graphon();
  f.types = 8;
  TypeFamily fam;
  fam.gamma_base = 0.3;
  fam.gamma_slope = 0.2;
  fam.x0_base = 1.0;
  fam.x0_slope = 0.5;
  fam.mu = testkit::agent_sign(0.3, 1.0, 0.25, 0.1, 1.0).mu;
  fam.sigma = testkit::agent1(0.3, 1.0, 0.25, 1.0).sigma;
  fam.sigma_star = VecField::constant(Vec::Zero(1));
  f.family = fam;
  const json j2 = spec_to_json(f);
  const GameSpec back2 = spec_from_json(j2);
  CHECK(spec_to_json(back2) == j2);
  REQUIRE(back2.family.has_value());
  CHECK(back2.family->gamma_slope == 0.2);
}

TEST_CASE("dotted-path overrides rewrite nested fields") {
  json j = json::parse(read_text_file(spec_path("merton.json")));
  apply_overrides(j, {"rho=0.25", "agents.0.gamma=-1.0", "steps=16", "agents.0.mu=0.4"});
  CHECK(j["rho"] == 0.25);
  CHECK(j["agents"][0]["gamma"] == -1.0);
  CHECK(j["steps"] == 16);
  CHECK(j["agents"][0]["mu"] == 0.4);

  apply_override(j, "note=hello");  // non-JSON values fall back to strings
  CHECK(j["note"] == "hello");

  CHECK_THROWS_AS(apply_override(j, "no_equals_sign"), ValidationError);
}

TEST_CASE("printed doubles carry full precision") {
  CHECK(fmt_g17(1.0) == "1");
  CHECK(fmt_g17(0.1) == "0.10000000000000001");
  CHECK(fmt_g17(1.0 / 3.0) == "0.33333333333333331");
  // %g strips trailing zeros: the nearest double is 2.5 exactly at 17 digits
  CHECK(fmt_g17(-2.5e-300) == "-2.5e-300");
}

TEST_CASE("solution table CSV layout") {
  auto spec = testkit::finite_spec({testkit::agent_sign(0.5, 1.0, 0.3, 0.15, 1.5),
                                    testkit::agent1(-1.0, 2.0, 0.2, 2.0)},
                                   0.1, 1.0, 3);
  const auto sol = solve_n_agent_bsde(spec);
  const auto rows = lines_of(n_agent_tables_csv(sol));
  REQUIRE(rows.size() >= 2);
  CHECK(rows[0] == "agent,step,node,y,z0,g0,pi0,theta0");
  // agent 0 rides a sign axis (states 1,2,2), agent 1 is deterministic (1,1,1)
  CHECK(rows.size() == 1 + (1 + 2 + 2) + (1 + 1 + 1));
  CHECK(rows[1].rfind("0,0,0,", 0) == 0);

  const json v = n_agent_values_json(sol);
  REQUIRE(v["y0"].size() == 2);
  CHECK(v["values"][0].get<double>() == sol.values[0]);
  CHECK(v["converged"].get<bool>());
  CHECK(v.contains("picard_deltas"));
  CHECK(v.contains("strategy_set_violations"));

  // the same solve twice serializes to the same bytes
  const auto sol2 = solve_n_agent_bsde(spec);
  CHECK(n_agent_tables_csv(sol2) == n_agent_tables_csv(sol));
}

TEST_CASE("mean-field CSV layout and aggregate component rows") {
  GameSpec spec;
  spec.mode = Mode::Graphon;
  spec.rho = 0.1;
  spec.horizon = 1.0;
  spec.steps = 2;
  spec.graphon = uniform_attachment_graphon();
  spec.types = 2;
  spec.type_agents = {testkit::agent_sign(0.5, 1.0, 0.3, 0.15, 1.5),
                      testkit::agent1(-1.0, 2.0, 0.2, 2.0)};
  const auto sol = solve_graphon_bsde_no_common(spec);

  const auto rows = lines_of(graphon_tables_csv(sol));
  CHECK(rows[0] == "type,u,step,node,y,z0,g0,pi0,theta0");
  CHECK(rows.size() == 1 + (1 + 2) + (1 + 1));

  const auto agg = lines_of(aggregate_csv(sol));
  REQUIRE(agg.size() == 1 + 2 * 2 * 2);  // types x steps x components
  CHECK(agg[0] == "step,common_node,type,component,value");
  // row order: type-major, then step, then component; common_node pinned to 0
  CHECK(agg[1] ==
        "0,0,0,0," + fmt_g17(sol.aggregate.hbar_tg[0][0]));
  CHECK(agg[2] ==
        "0,0,0,1," + fmt_g17(sol.aggregate.hbar_gg[0][0]));

  const json v = graphon_values_json(sol);
  REQUIRE(v["u"].size() == 2);
  CHECK(v["u"][0].get<double>() == 0.25);
  CHECK(v["values"][1].get<double>() == sol.values[1]);
}

TEST_CASE("common-factor CSV layout") {
  GameSpec spec;
  spec.mode = Mode::Graphon;
  spec.rho = 0.1;
  spec.horizon = 1.0;
  spec.steps = 2;
  spec.common_noise = true;
  spec.graphon = constant_graphon(1.0);
  spec.types = 1;
  auto a = testkit::agent1(0.5, 1.0, 0.3, 1.0);
  Vec ss(1);
  ss << 0.3;
  a.sigma_star = VecField::constant(ss);
  spec.type_agents = {a};
  const auto sol = solve_graphon_bsde_common_noise(spec);

  const auto rows = lines_of(common_tables_csv(sol));
  CHECK(rows[0] == "type,u,step,node,y,ztilde,zstar,g,pi");
  // own axis is trivial here, so nodes = common states: 1 at t=0, 2 at t=1
  CHECK(rows.size() == 1 + 1 + 2);

  const auto agg = lines_of(common_aggregate_csv(sol));
  CHECK(agg[0] == "step,common_node,type,component,value");
  CHECK(agg.size() == 1 + (1 + 2) * 2);

  const auto tr = lines_of(gmap_trace_csv(sol.gmap_traces));
  CHECK(tr[0] == "t,common_state,iteration,delta");
  CHECK(tr.size() >= 2);

  const json v = common_values_json(sol);
  CHECK(v.contains("gmap_measured_ratio"));
  CHECK(v.contains("gmap_theoretical_bound"));
}

TEST_CASE("convergence CSV column order") {
  ConvergenceRow r;
  r.n = 4;
  r.strategy_gap = 0.5;
  r.value_gap = 1.5;
  r.y_gap = 2.5;
  r.dz_bmo = 3.5;
  r.lhs = 4.5;
  r.gamma1_bmo = 5.5;
  r.gamma2_bmo = 6.5;
  r.a_max = 7.5;
  r.rhs = 8.5;
  r.dominance_ok = true;
  r.gamma_method = "exact";
  r.scaled_l2 = 9.5;
  r.modulus = 10.5;
  r.l1_gap = 11.5;
  r.chain_rhs = 12.5;
  r.chain_ok = false;
  r.logx_gap = 13.5;
  const auto rows = lines_of(convergence_csv({r}));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] ==
        "n,strategy_gap,value_gap,y_gap,dz_bmo,lhs,gamma1_bmo,gamma2_bmo,a_max,rhs,"
        "dominance_ok,gamma_method,scaled_l2,modulus,l1_gap,chain_rhs,chain_ok,logx_gap");
  CHECK(rows[1] == "4,0.5,1.5,2.5,3.5,4.5,5.5,6.5,7.5,8.5,1,exact,9.5,10.5,11.5,12.5,0,13.5");
}

TEST_CASE("command-line end to end") {
  const fs::path tmp =
      fs::temp_directory_path() / ("relperf_cli_" + std::to_string(::getpid()));
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  const std::string out = " --out " + tmp.string();

  // finite solve: artifacts, values, determinism across identical runs
  CHECK(run_cli("solve-n --spec " + spec_path("merton.json") + out + " --stamp a1") == 0);
  const fs::path a1 = tmp / "solve-n-a1";
  REQUIRE(fs::exists(a1 / "spec.json"));
  REQUIRE(fs::exists(a1 / "tables.csv"));
  REQUIRE(fs::exists(a1 / "values.json"));
  const json v1 = json::parse(read_text_file((a1 / "values.json").string()));
  CHECK(v1["y0"][0].get<double>() == Catch::Approx(0.02).margin(1e-12));
  CHECK(v1["converged"].get<bool>());

  CHECK(run_cli("solve-n --spec " + spec_path("two_agent_statedep.json") + out + " --stamp d1") ==
        0);
  CHECK(run_cli("solve-n --spec " + spec_path("two_agent_statedep.json") + out + " --stamp d2") ==
        0);
  CHECK(read_text_file((tmp / "solve-n-d1" / "tables.csv").string()) ==
        read_text_file((tmp / "solve-n-d2" / "tables.csv").string()));
  CHECK(read_text_file((tmp / "solve-n-d1" / "values.json").string()) ==
        read_text_file((tmp / "solve-n-d2" / "values.json").string()));

  // overrides show up in the echoed spec
  CHECK(run_cli("solve-n --spec " + spec_path("merton.json") + out +
                " --set rho=0.25 --stamp ov") == 0);
  const json echoed = json::parse(read_text_file((tmp / "solve-n-ov" / "spec.json").string()));
  CHECK(echoed["rho"] == 0.25);

  // implicit scheme accepts the same spec
  CHECK(run_cli("solve-n --spec " + spec_path("merton.json") + out +
                " --scheme implicit --stamp im") == 0);

  // mean-field solve without and with the common factor
  CHECK(run_cli("solve-graphon --spec " + spec_path("graphon_ua.json") + out + " --stamp g1") ==
        0);
  const fs::path g1 = tmp / "solve-graphon-g1";
  REQUIRE(fs::exists(g1 / "aggregate.csv"));
  const json gv = json::parse(read_text_file((g1 / "values.json").string()));
  CHECK(gv["u"].size() == 8);

  CHECK(run_cli("solve-graphon --spec " + spec_path("common_noise.json") + out + " --stamp c1") ==
        0);
  const fs::path c1 = tmp / "solve-graphon-c1";
  REQUIRE(fs::exists(c1 / "gmap_trace.csv"));
  const json cv = json::parse(read_text_file((c1 / "values.json").string()));
  CHECK(cv["gmap_measured_ratio"].get<double>() <=
        cv["gmap_theoretical_bound"].get<double>() + 1e-6);

  // reference strategies, certification, convergence, contraction diagnostic
  CHECK(run_cli("closed-form --spec " + spec_path("selfweight_pair.json") + out +
                " --stamp cf") == 0);
  REQUIRE(fs::exists(tmp / "closed-form-cf" / "closed_form.csv"));
  const auto cf = lines_of(read_text_file((tmp / "closed-form-cf" / "closed_form.csv").string()));
  CHECK(cf[0] == "agent,step,component,sigma_pi,gap_bound");
  CHECK(cf[1] == "0,0,0," + fmt_g17(0.2 / 0.75) + "," + fmt_g17(prop_gap_bound(
                                spec_from_json_text(read_text_file(
                                    spec_path("selfweight_pair.json"))), 0)));

  CHECK(run_cli("verify-nash --spec " + spec_path("merton.json") + out +
                " --grid 51 --eps 1e-3 --stamp vn") == 0);
  const json cert =
      json::parse(read_text_file((tmp / "verify-nash-vn" / "nash_certificate.json").string()));
  CHECK(cert["pass"].get<bool>());
  const json mart =
      json::parse(read_text_file((tmp / "verify-nash-vn" / "martingale.json").string()));
  CHECK(mart[0]["pass"].get<bool>());

  CHECK(run_cli("converge --spec " + spec_path("graphon_ua.json") + out +
                " --n-list 2,4 --stamp cv") == 0);
  const auto conv =
      lines_of(read_text_file((tmp / "converge-cv" / "convergence.csv").string()));
  CHECK(conv.size() == 3);

  CHECK(run_cli("g-map --spec " + spec_path("common_noise.json") + out + " --stamp gm") == 0);
  const json gj = json::parse(read_text_file((tmp / "g-map-gm" / "gmap.json").string()));
  CHECK(gj["measured_ratio"].get<double>() <= gj["theoretical_bound"].get<double>() + 1e-6);

  // failure exits: 2 validation, 3 solver refusal, 4 unsupported transform
  write_text_file((tmp / "bad.json").string(), "{ not json");
  CHECK(run_cli("solve-n --spec " + (tmp / "bad.json").string()) == 2);
  CHECK(run_cli("solve-n --spec " + spec_path("merton.json") + out +
                " --set agents.0.gamma=0.0 --stamp f1") == 2);
  CHECK(run_cli("g-map --spec " + spec_path("graphon_ua.json") + out + " --stamp f2") == 2);
  CHECK(run_cli("g-map --spec " + spec_path("common_noise.json") + out +
                " --set rho=1.0 --stamp f3") == 3);

  write_text_file((tmp / "box2d.json").string(), R"({
    "mode": "finite", "steps": 2, "lambda": [[0.0]],
    "agents": [ {
      "gamma": 0.5, "mu": [0.2, 0.1],
      "sigma": [[1.0, 0.5], [0.0, 1.0]],
      "constraint": { "kind": "box", "lower": [-1.0, -1.0], "upper": [1.0, 1.0] }
    } ]
  })");
  CHECK(run_cli("solve-n --spec " + (tmp / "box2d.json").string() + out + " --stamp f4") == 4);

  CHECK(run_cli("no-such-command") != 0);
  CHECK(run_cli("solve-n") != 0);  // --spec is required

  fs::remove_all(tmp);
}
