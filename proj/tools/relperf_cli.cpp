// Command-line front end. Subcommands:
//   solve-n        finite-population equilibrium solve
//   solve-graphon  mean-field equilibrium solve (with or without common factor)
//   closed-form    deterministic-coefficient reference strategies and values
//   verify-nash    best-response certification + martingale certificate
//   converge       finite-vs-mean-field convergence experiment
//   g-map          common-factor decoupling map contraction diagnostic
//
// Every run writes artifacts into <out>/<command>-<stamp>/ (resolved spec
// echo plus command outputs) and prints a one-line summary. Exit codes:
//   0 success, 2 validation failure, 3 solver non-convergence / refusal,
//   4 unsupported projection transform.

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "relperf/closed_form.hpp"
#include "relperf/io.hpp"

namespace {

using namespace relperf;

struct CommonOpts {
  std::string spec_path;
  std::string out_dir = ".";
  std::string stamp;  // artifact-name suffix; wall clock when empty
  std::vector<std::string> sets;
  long long seed = -1;
};

void add_common(CLI::App* cmd, CommonOpts& c) {
  cmd->add_option("--spec", c.spec_path, "GameSpec JSON path")->required();
  cmd->add_option("--out", c.out_dir, "artifact parent directory");
  cmd->add_option("--set", c.sets, "dotted-path override, e.g. --set rho=0.2")
      ->take_all()
      ->allow_extra_args(false);
  cmd->add_option("--seed", c.seed, "override the spec seed");
  cmd->add_option("--stamp", c.stamp, "artifact-name suffix (default: timestamp)");
}

json resolved_spec_json(const CommonOpts& c) {
  json j;
  try {
    j = json::parse(read_text_file(c.spec_path));
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("spec JSON: ") + e.what());
  }
  apply_overrides(j, c.sets);
  if (c.seed >= 0) j["seed"] = static_cast<uint64_t>(c.seed);
  return j;
}

std::string artifact_dir(const CommonOpts& c, const std::string& command) {
  std::string stamp = c.stamp;
  if (stamp.empty()) {
    char buf[32];
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
    stamp = buf;
  }
  const std::string dir = c.out_dir + "/" + command + "-" + stamp;
  std::filesystem::create_directories(dir);
  return dir;
}

void echo_spec(const std::string& dir, const json& j) {
  write_text_file(dir + "/spec.json", j.dump(2) + "\n");
}

int run_solve_n(const CommonOpts& c, const std::string& scheme) {
  const json j = resolved_spec_json(c);
  GameSpec spec = spec_from_json(j);
  ensure_valid(spec);
  const Scheme s = scheme == "implicit" ? Scheme::ImplicitPicard : Scheme::Explicit;
  const NAgentSolution sol = solve_n_agent_bsde(spec, s);
  const std::string dir = artifact_dir(c, "solve-n");
  echo_spec(dir, j);
  write_text_file(dir + "/tables.csv", n_agent_tables_csv(sol));
  write_text_file(dir + "/values.json", n_agent_values_json(sol).dump(2) + "\n");
  std::printf("solve-n: n=%d V0 in [%s, %s]\n", spec.n(), fmt_g17(sol.values.minCoeff()).c_str(),
              fmt_g17(sol.values.maxCoeff()).c_str());
  return 0;
}

int run_solve_graphon(const CommonOpts& c) {
  const json j = resolved_spec_json(c);
  GameSpec spec = spec_from_json(j);
  ensure_valid(spec);
  const std::string dir = artifact_dir(c, "solve-graphon");
  echo_spec(dir, j);
  if (spec.common_noise) {
    const CommonGraphonSolution sol = solve_graphon_bsde_common_noise(spec);
    write_text_file(dir + "/tables.csv", common_tables_csv(sol));
    write_text_file(dir + "/aggregate.csv", common_aggregate_csv(sol));
    write_text_file(dir + "/values.json", common_values_json(sol).dump(2) + "\n");
    write_text_file(dir + "/gmap_trace.csv", gmap_trace_csv(sol.gmap_traces));
    std::printf("solve-graphon: m=%d V0 in [%s, %s] gmap ratio %s <= bound %s\n", spec.types,
                fmt_g17(sol.values.minCoeff()).c_str(), fmt_g17(sol.values.maxCoeff()).c_str(),
                fmt_g17(sol.gmap_measured_ratio).c_str(),
                fmt_g17(sol.gmap_theoretical_bound).c_str());
  } else {
    const GraphonSolution sol = solve_graphon_bsde_no_common(spec);
    write_text_file(dir + "/tables.csv", graphon_tables_csv(sol));
    write_text_file(dir + "/aggregate.csv", aggregate_csv(sol));
    write_text_file(dir + "/values.json", graphon_values_json(sol).dump(2) + "\n");
    std::printf("solve-graphon: m=%d V0 in [%s, %s]\n", spec.types,
                fmt_g17(sol.values.minCoeff()).c_str(), fmt_g17(sol.values.maxCoeff()).c_str());
  }
  return 0;
}

int run_closed_form(const CommonOpts& c) {
  const json j = resolved_spec_json(c);
  GameSpec spec = spec_from_json(j);
  ensure_valid(spec);
  const std::string dir = artifact_dir(c, "closed-form");
  echo_spec(dir, j);

  std::string csv = "agent,step,component,sigma_pi,gap_bound\n";
  json values;
  double worst_bound = 0.0;
  if (spec.mode == Mode::Finite) {
    for (int i = 0; i < spec.n(); ++i) {
      const auto sp = prop_n_agent_strategy(spec, i);
      const double bound = prop_gap_bound(spec, i);
      worst_bound = std::max(worst_bound, bound);
      for (int t = 0; t < spec.steps; ++t)
        for (long k = 0; k < sp[static_cast<size_t>(t)].size(); ++k)
          csv += std::to_string(i) + "," + std::to_string(t) + "," + std::to_string(k) + "," +
                 fmt_g17(sp[static_cast<size_t>(t)][k]) + "," + fmt_g17(bound) + "\n";
      if (spec.rho == 0.0) {
        const auto mr = merton_benchmark(spec.agents[static_cast<size_t>(i)], spec.steps,
                                         spec.horizon, spec.common_noise);
        values["merton_y0"].push_back(mr.y0);
        values["merton_value"].push_back(mr.value);
      }
    }
  } else {
    const auto grid = type_grid(spec.types);
    for (int k = 0; k < spec.types; ++k) {
      const AgentParams a = agent_at_type(spec, grid[static_cast<size_t>(k)]);
      const auto sp = prop_graphon_strategy(a, spec.steps);
      for (int t = 0; t < spec.steps; ++t)
        for (long d = 0; d < sp[static_cast<size_t>(t)].size(); ++d)
          csv += std::to_string(k) + "," + std::to_string(t) + "," + std::to_string(d) + "," +
                 fmt_g17(sp[static_cast<size_t>(t)][d]) + ",0\n";
      if (spec.rho == 0.0) {
        const auto mr = merton_benchmark(a, spec.steps, spec.horizon, spec.common_noise);
        values["merton_y0"].push_back(mr.y0);
        values["merton_value"].push_back(mr.value);
      }
    }
  }
  write_text_file(dir + "/closed_form.csv", csv);
  if (!values.is_null()) write_text_file(dir + "/values.json", values.dump(2) + "\n");
  std::printf("closed-form: max gap bound %s\n", fmt_g17(worst_bound).c_str());
  return 0;
}

int run_verify_nash(const CommonOpts& c, int grid_points, double eps, double perturb) {
  const json j = resolved_spec_json(c);
  GameSpec spec = spec_from_json(j);
  ensure_valid(spec);
  if (spec.mode != Mode::Finite)
    throw ValidationError("verify-nash certifies finite-population specs");
  const NAgentSolution sol = solve_n_agent_bsde(spec);
  const std::string dir = artifact_dir(c, "verify-nash");
  echo_spec(dir, j);

  NashCertificate cert;
  cert.eps = eps;
  cert.dt = spec.dt();
  for (int i = 0; i < spec.n(); ++i) {
    BestResponse br;
    if (perturb != 0.0) {
      Table shifted = sol.pi[static_cast<size_t>(i)];
      for (auto& slice : shifted)
        for (auto& v : slice) v += perturb;
      br = best_response(sol, i, grid_points, &shifted);
    } else {
      br = best_response(sol, i, grid_points);
    }
    cert.responses.push_back(br);
    cert.spacing = std::max(cert.spacing, br.spacing);
    cert.max_gain = std::max(cert.max_gain, br.gain);
  }
  cert.cost_scale = eps / (cert.dt + cert.spacing);
  cert.pass = cert.max_gain <= eps;

  json mart = json::array();
  bool mart_pass = true;
  if (!spec.allow_self_weight && !spec.common_noise) {
    for (int i = 0; i < spec.n(); ++i) {
      const MartingaleCheck chk = check_martingale_optimality(sol, i, 20, spec.seed + i);
      mart.push_back(martingale_json(chk));
      mart_pass = mart_pass && chk.pass();
    }
  }
  write_text_file(dir + "/nash_certificate.json", nash_certificate_json(cert).dump(2) + "\n");
  if (!mart.empty()) write_text_file(dir + "/martingale.json", mart.dump(2) + "\n");
  std::printf("verify-nash: max gain %s (eps %s) certificate %s%s\n",
              fmt_g17(cert.max_gain).c_str(), fmt_g17(eps).c_str(),
              cert.pass ? "PASS" : "FAIL",
              mart.empty() ? "" : (mart_pass ? ", martingale PASS" : ", martingale FAIL"));
  return 0;  // report-only: the certificate carries the verdict
}

int run_converge(const CommonOpts& c, std::vector<int> n_list) {
  const json j = resolved_spec_json(c);
  GameSpec spec = spec_from_json(j);
  ensure_valid(spec);
  if (n_list.empty()) n_list = {4, 16, 64};
  const auto rows = convergence_experiment(spec, n_list);
  const std::string dir = artifact_dir(c, "converge");
  echo_spec(dir, j);
  write_text_file(dir + "/convergence.csv", convergence_csv(rows));
  write_text_file(dir + "/convergence.json", convergence_json(rows).dump(2) + "\n");
  std::printf("converge: final value gap %s at n=%d\n",
              fmt_g17(rows.back().value_gap).c_str(), rows.back().n);
  return 0;
}

int run_g_map(const CommonOpts& c) {
  const json j = resolved_spec_json(c);
  GameSpec spec = spec_from_json(j);
  ensure_valid(spec);
  if (spec.mode != Mode::Graphon || !spec.common_noise)
    throw ValidationError("g-map diagnostics need a graphon spec with common_noise=true");
  const CommonGraphonSolution sol = solve_graphon_bsde_common_noise(spec);
  const std::string dir = artifact_dir(c, "g-map");
  echo_spec(dir, j);
  write_text_file(dir + "/gmap_trace.csv", gmap_trace_csv(sol.gmap_traces));
  json summary{{"measured_ratio", sol.gmap_measured_ratio},
               {"theoretical_bound", sol.gmap_theoretical_bound},
               {"rho", spec.rho},
               {"rho_limit", g_map_rho_limit(population_moduli(spec))}};
  write_text_file(dir + "/gmap.json", summary.dump(2) + "\n");
  std::printf("g-map: measured ratio %s <= bound %s\n", fmt_g17(sol.gmap_measured_ratio).c_str(),
              fmt_g17(sol.gmap_theoretical_bound).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relative-performance portfolio-game lattice solver"};
  app.require_subcommand(1);

  CommonOpts c_solve_n, c_solve_g, c_closed, c_verify, c_conv, c_gmap;
  std::string scheme = "explicit";
  int grid_points = 101;
  double eps = 1e-3;
  double perturb = 0.0;
  std::vector<int> n_list;

  auto* cmd_solve_n = app.add_subcommand("solve-n", "solve a finite-population game");
  add_common(cmd_solve_n, c_solve_n);
  cmd_solve_n->add_option("--scheme", scheme, "explicit | implicit")
      ->check(CLI::IsMember({"explicit", "implicit"}));

  auto* cmd_solve_g = app.add_subcommand("solve-graphon", "solve a mean-field game");
  add_common(cmd_solve_g, c_solve_g);

  auto* cmd_closed = app.add_subcommand("closed-form", "deterministic-coefficient references");
  add_common(cmd_closed, c_closed);

  auto* cmd_verify = app.add_subcommand("verify-nash", "certify a solved equilibrium");
  add_common(cmd_verify, c_verify);
  cmd_verify->add_option("--grid", grid_points, "deviation grid points");
  cmd_verify->add_option("--eps", eps, "gain tolerance");
  cmd_verify->add_option("--perturb", perturb, "shift claimed strategies (negative control)");

  auto* cmd_conv = app.add_subcommand("converge", "finite-vs-mean-field experiment");
  add_common(cmd_conv, c_conv);
  cmd_conv->add_option("--n-list", n_list, "population sizes")->delimiter(',');

  auto* cmd_gmap = app.add_subcommand("g-map", "decoupling-map contraction diagnostic");
  add_common(cmd_gmap, c_gmap);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (cmd_solve_n->parsed()) return run_solve_n(c_solve_n, scheme);
    if (cmd_solve_g->parsed()) return run_solve_graphon(c_solve_g);
    if (cmd_closed->parsed()) return run_closed_form(c_closed);
    if (cmd_verify->parsed()) return run_verify_nash(c_verify, grid_points, eps, perturb);
    if (cmd_conv->parsed()) return run_converge(c_conv, n_list);
    if (cmd_gmap->parsed()) return run_g_map(c_gmap);
  } catch (const UnsupportedTransform& e) {
    std::fprintf(stderr, "unsupported transform: %s\n", e.what());
    return 4;
  } catch (const SolverError& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return 3;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "validation failure: %s\n", e.what());
    return 2;
  } catch (const json::exception& e) {
    std::fprintf(stderr, "JSON failure: %s\n", e.what());
    return 2;
  }
  return 2;
}
