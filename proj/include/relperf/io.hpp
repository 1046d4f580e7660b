#pragma once
// Spec JSON (to/from), dotted-path overrides, and the artifact writers.
//
// CSV column orders are fixed and documented in the README; doubles print
// with %.17g so identical configs + seeds give byte-identical artifacts.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "relperf/common.hpp"
#include "relperf/graphon_solver.hpp"
#include "relperf/model.hpp"
#include "relperf/n_agent.hpp"
#include "relperf/verify.hpp"

namespace relperf {

using nlohmann::json;

// ------------------------------------------------------------------ files --

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out << content;
}

inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ----------------------------------------------------------- JSON -> spec --

namespace detail {

inline Vec parse_vec(const json& j, const char* what) {
  if (j.is_number()) {
    Vec v(1);
    v[0] = j.get<double>();
    return v;
  }
  if (!j.is_array()) throw ValidationError(std::string(what) + ": expected number or array");
  Vec v(static_cast<long>(j.size()));
  for (size_t k = 0; k < j.size(); ++k) v[static_cast<long>(k)] = j[k].get<double>();
  return v;
}

inline Mat parse_mat(const json& j, const char* what) {
  if (j.is_number()) {
    Mat m(1, 1);
    m(0, 0) = j.get<double>();
    return m;
  }
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw ValidationError(std::string(what) + ": expected number or array of rows");
  Mat m(static_cast<long>(j.size()), static_cast<long>(j[0].size()));
  for (size_t r = 0; r < j.size(); ++r) {
    if (j[r].size() != j[0].size())
      throw ValidationError(std::string(what) + ": ragged matrix");
    for (size_t c = 0; c < j[r].size(); ++c)
      m(static_cast<long>(r), static_cast<long>(c)) = j[r][c].get<double>();
  }
  return m;
}

inline VecField parse_vec_field(const json& j, const char* what) {
  VecField f;
  if (j.is_object()) {
    const json& base = j.at("base");
    if (base.is_array() && !base.empty() && base[0].is_array())
      for (const auto& e : base) f.base.push_back(parse_vec(e, what));
    else
      f.base.push_back(parse_vec(base, what));
    if (j.contains("amp")) {
      f.amp = parse_vec(j.at("amp"), what);
      f.sign_modulated = true;
    }
    return f;
  }
  f.base.push_back(parse_vec(j, what));
  return f;
}

inline MatField parse_mat_field(const json& j, const char* what) {
  MatField f;
  if (j.is_object()) {
    const json& base = j.at("base");
    if (base.is_array() && !base.empty() && base[0].is_array() && !base[0].empty() &&
        base[0][0].is_array())
      for (const auto& e : base) f.base.push_back(parse_mat(e, what));
    else
      f.base.push_back(parse_mat(base, what));
    return f;
  }
  f.base.push_back(parse_mat(j, what));
  return f;
}

inline ConstraintSet parse_constraint(const json& j) {
  if (j.is_null()) return FullSpace{};
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "full" || kind == "full_space") return FullSpace{};
  if (kind == "nonneg" || kind == "nonnegative_orthant") return NonNegativeOrthant{};
  if (kind == "box") {
    Box b;
    b.lower = parse_vec(j.at("lower"), "box.lower");
    b.upper = parse_vec(j.at("upper"), "box.upper");
    return b;
  }
  if (kind == "ball") {
    Ball b;
    b.center = parse_vec(j.at("center"), "ball.center");
    b.radius = j.at("radius").get<double>();
    return b;
  }
  if (kind == "half_space") {
    HalfSpace h;
    h.normal = parse_vec(j.at("normal"), "half_space.normal");
    h.offset = j.at("offset").get<double>();
    return h;
  }
  throw ValidationError("unknown constraint kind: " + kind);
}

inline void parse_agent_fields(const json& j, VecField& mu, MatField& sigma, VecField& sstar,
                               ConstraintSet& constraint) {
  mu = parse_vec_field(j.at("mu"), "mu");
  sigma = parse_mat_field(j.at("sigma"), "sigma");
  if (j.contains("sigma_star"))
    sstar = parse_vec_field(j.at("sigma_star"), "sigma_star");
  else
    sstar = VecField::constant(Vec::Zero(mu.base[0].size()));
  constraint = j.contains("constraint") ? parse_constraint(j.at("constraint")) : FullSpace{};
}

inline AgentParams parse_agent(const json& j) {
  AgentParams a;
  a.gamma = j.at("gamma").get<double>();
  a.x0 = j.value("x0", 1.0);
  parse_agent_fields(j, a.mu, a.sigma, a.sigma_star, a.constraint);
  return a;
}

inline TypeFamily parse_family(const json& j) {
  TypeFamily f;
  f.gamma_base = j.at("gamma_base").get<double>();
  f.gamma_slope = j.value("gamma_slope", 0.0);
  f.x0_base = j.value("x0_base", 1.0);
  f.x0_slope = j.value("x0_slope", 0.0);
  parse_agent_fields(j, f.mu, f.sigma, f.sigma_star, f.constraint);
  return f;
}

inline Graphon parse_graphon(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "constant") return constant_graphon(j.value("p", 1.0));
  if (kind == "uniform_attachment") return uniform_attachment_graphon();
  if (kind == "min") return min_graphon();
  if (kind == "product") return product_graphon();
  if (kind == "step") {
    std::vector<std::vector<double>> w;
    for (const auto& row : j.at("matrix")) w.push_back(row.get<std::vector<double>>());
    return step_graphon_from_matrix(w);
  }
  throw ValidationError("unknown graphon kind: " + kind);
}

}  // namespace detail

inline GameSpec spec_from_json(const json& j) {
  GameSpec s;
  const std::string mode = j.value("mode", "finite");
  if (mode == "finite")
    s.mode = Mode::Finite;
  else if (mode == "graphon")
    s.mode = Mode::Graphon;
  else
    throw ValidationError("mode must be \"finite\" or \"graphon\"");
  s.rho = j.value("rho", 0.0);
  s.horizon = j.value("horizon", 1.0);
  s.steps = j.value("steps", 8);
  s.common_noise = j.value("common_noise", false);
  s.allow_self_weight = j.value("allow_self_weight", false);
  s.seed = j.value("seed", static_cast<uint64_t>(1));
  if (s.mode == Mode::Finite) {
    for (const auto& row : j.at("lambda"))
      s.lambda.push_back(row.get<std::vector<double>>());
    for (const auto& a : j.at("agents")) s.agents.push_back(detail::parse_agent(a));
  } else {
    s.graphon = detail::parse_graphon(j.at("graphon"));
    s.types = j.at("types").get<int>();
    if (j.contains("family")) s.family = detail::parse_family(j.at("family"));
    if (j.contains("type_agents"))
      for (const auto& a : j.at("type_agents")) s.type_agents.push_back(detail::parse_agent(a));
  }
  return s;
}

inline GameSpec spec_from_json_text(const std::string& text) {
  return spec_from_json(json::parse(text));
}

inline GameSpec load_spec(const std::string& path) {
  return spec_from_json_text(read_text_file(path));
}

// ----------------------------------------------------------- spec -> JSON --

namespace detail {

inline json vec_to_json(const Vec& v) {
  json a = json::array();
  for (long k = 0; k < v.size(); ++k) a.push_back(v[k]);
  return a;
}

inline json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (long r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (long c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

inline json vec_field_to_json(const VecField& f) {
  json base = json::array();
  for (const auto& v : f.base) base.push_back(vec_to_json(v));
  json j{{"base", base}};
  if (f.sign_modulated) j["amp"] = vec_to_json(f.amp);
  return j;
}

inline json mat_field_to_json(const MatField& f) {
  json base = json::array();
  for (const auto& m : f.base) base.push_back(mat_to_json(m));
  return json{{"base", base}};
}

inline json constraint_to_json(const ConstraintSet& A) {
  if (std::holds_alternative<FullSpace>(A)) return json{{"kind", "full"}};
  if (std::holds_alternative<NonNegativeOrthant>(A)) return json{{"kind", "nonneg"}};
  if (const auto* b = std::get_if<Box>(&A))
    return json{{"kind", "box"}, {"lower", vec_to_json(b->lower)}, {"upper", vec_to_json(b->upper)}};
  if (const auto* b = std::get_if<Ball>(&A))
    return json{{"kind", "ball"}, {"center", vec_to_json(b->center)}, {"radius", b->radius}};
  const auto& h = std::get<HalfSpace>(A);
  return json{{"kind", "half_space"}, {"normal", vec_to_json(h.normal)}, {"offset", h.offset}};
}

inline json agent_to_json(const AgentParams& a) {
  return json{{"gamma", a.gamma},
              {"x0", a.x0},
              {"mu", vec_field_to_json(a.mu)},
              {"sigma", mat_field_to_json(a.sigma)},
              {"sigma_star", vec_field_to_json(a.sigma_star)},
              {"constraint", constraint_to_json(a.constraint)}};
}

inline json graphon_to_json(const Graphon& g) {
  const std::string& n = g.name;
  if (n.rfind("constant(", 0) == 0) return json{{"kind", "constant"}, {"p", g(0.5, 0.5)}};
  if (n == "uniform_attachment") return json{{"kind", "uniform_attachment"}};
  if (n == "min") return json{{"kind", "min"}};
  if (n == "product") return json{{"kind", "product"}};
  if (n.rfind("step(", 0) == 0) {
    const int m = std::atoi(n.c_str() + 5);
    json rows = json::array();
    for (int i = 0; i < m; ++i) {
      json row = json::array();
      for (int j2 = 0; j2 < m; ++j2)
        row.push_back(g((2.0 * i + 1.0) / (2.0 * m), (2.0 * j2 + 1.0) / (2.0 * m)));
      rows.push_back(row);
    }
    return json{{"kind", "step"}, {"matrix", rows}};
  }
  throw ValidationError("kernel \"" + n + "\" has no JSON form");
}

}  // namespace detail

inline json spec_to_json(const GameSpec& s) {
  json j{{"mode", s.mode == Mode::Finite ? "finite" : "graphon"},
         {"rho", s.rho},
         {"horizon", s.horizon},
         {"steps", s.steps},
         {"common_noise", s.common_noise},
         {"allow_self_weight", s.allow_self_weight},
         {"seed", s.seed}};
  if (s.mode == Mode::Finite) {
    j["lambda"] = s.lambda;
    json agents = json::array();
    for (const auto& a : s.agents) agents.push_back(detail::agent_to_json(a));
    j["agents"] = agents;
  } else {
    j["graphon"] = detail::graphon_to_json(s.graphon);
    j["types"] = s.types;
    if (s.family) {
      const TypeFamily& f = *s.family;
      json fam{{"gamma_base", f.gamma_base}, {"gamma_slope", f.gamma_slope},
               {"x0_base", f.x0_base},       {"x0_slope", f.x0_slope},
               {"mu", detail::vec_field_to_json(f.mu)},
               {"sigma", detail::mat_field_to_json(f.sigma)},
               {"sigma_star", detail::vec_field_to_json(f.sigma_star)},
               {"constraint", detail::constraint_to_json(f.constraint)}};
      j["family"] = fam;
    }
    if (!s.type_agents.empty()) {
      json ta = json::array();
      for (const auto& a : s.type_agents) ta.push_back(detail::agent_to_json(a));
      j["type_agents"] = ta;
    }
  }
  return j;
}

// ------------------------------------------------------------- overrides --

// "a.b.0.c=value" -> json pointer /a/b/0/c; the value parses as JSON when
// possible, otherwise as a string.
inline void apply_override(json& j, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos) throw ValidationError("override needs key=value: " + kv);
  std::string path = "/" + kv.substr(0, eq);
  for (auto& c : path)
    if (c == '.') c = '/';
  const std::string raw = kv.substr(eq + 1);
  json val;
  try {
    val = json::parse(raw);
  } catch (const json::parse_error&) {
    val = raw;
  }
  j[json::json_pointer(path)] = val;
}

inline void apply_overrides(json& j, const std::vector<std::string>& kvs) {
  for (const auto& kv : kvs) apply_override(j, kv);
}

// ------------------------------------------------------------ CSV writers --

// columns: agent,step,node,y,z<c>...,g<c>...,pi<c>...,theta<c>...
inline std::string n_agent_tables_csv(const NAgentSolution& sol) {
  const int n = sol.spec.n();
  int dmax = 1;
  for (const auto& a : sol.spec.agents) dmax = std::max(dmax, a.d());
  std::string out = "agent,step,node,y";
  for (int c = 0; c < dmax; ++c) out += ",z" + std::to_string(c);
  for (int c = 0; c < dmax; ++c) out += ",g" + std::to_string(c);
  for (int c = 0; c < dmax; ++c) out += ",pi" + std::to_string(c);
  for (int c = 0; c < dmax; ++c) out += ",theta" + std::to_string(c);
  out += "\n";
  for (int i = 0; i < n; ++i) {
    const int d = sol.spec.agents[static_cast<size_t>(i)].d();
    for (int t = 0; t < sol.spec.steps; ++t) {
      const long ns = sol.states(i, t);
      for (long s = 0; s < ns; ++s) {
        out += std::to_string(i) + "," + std::to_string(t) + "," + std::to_string(s);
        out += "," + fmt_g17(sol.y_diag[static_cast<size_t>(i)][static_cast<size_t>(t)]
                                       [static_cast<size_t>(s)]);
        auto emit = [&](const Table& tab) {
          for (int c = 0; c < dmax; ++c)
            out += "," + (c < d ? fmt_g17(tab[static_cast<size_t>(t)]
                                             [static_cast<size_t>(s * d + c)])
                                : std::string("0"));
        };
        emit(sol.z_diag[static_cast<size_t>(i)]);
        emit(sol.g[static_cast<size_t>(i)]);
        emit(sol.pi[static_cast<size_t>(i)]);
        emit(sol.theta[static_cast<size_t>(i)]);
        out += "\n";
      }
    }
  }
  return out;
}

inline json n_agent_values_json(const NAgentSolution& sol) {
  json j;
  for (int i = 0; i < sol.spec.n(); ++i) {
    j["curly_y0"].push_back(sol.curly_y0[i]);
    j["y0"].push_back(sol.y0[i]);
    j["values"].push_back(sol.values[i]);
  }
  j["iterations"] = sol.trace.iterations;
  j["converged"] = sol.trace.converged;
  j["picard_deltas"] = sol.trace.deltas;
  j["strategy_set_violations"] = sol.strategy_set_violations;
  j["max_strategy_set_deviation"] = sol.max_strategy_set_deviation;
  return j;
}

// columns: type,u,step,node,y,z<c>...,g<c>...,pi<c>...,theta<c>...
inline std::string graphon_tables_csv(const GraphonSolution& sol) {
  int dmax = 1;
  for (const auto& ts : sol.types) dmax = std::max(dmax, ts.agent.d());
  std::string out = "type,u,step,node,y";
  for (int c = 0; c < dmax; ++c) out += ",z" + std::to_string(c);
  for (int c = 0; c < dmax; ++c) out += ",g" + std::to_string(c);
  for (int c = 0; c < dmax; ++c) out += ",pi" + std::to_string(c);
  for (int c = 0; c < dmax; ++c) out += ",theta" + std::to_string(c);
  out += "\n";
  for (size_t k = 0; k < sol.types.size(); ++k) {
    const TypeSolution& ts = sol.types[k];
    const int d = ts.agent.d();
    for (int t = 0; t < sol.spec.steps; ++t) {
      const long ns = Lattice::state_count(ts.kind, t);
      for (long s = 0; s < ns; ++s) {
        out += std::to_string(k) + "," + fmt_g17(ts.u) + "," + std::to_string(t) + "," +
               std::to_string(s);
        out += "," + fmt_g17(ts.y[static_cast<size_t>(t)][static_cast<size_t>(s)]);
        auto emit = [&](const Table& tab) {
          for (int c = 0; c < dmax; ++c)
            out += "," + (c < d ? fmt_g17(tab[static_cast<size_t>(t)]
                                             [static_cast<size_t>(s * d + c)])
                                : std::string("0"));
        };
        emit(ts.z);
        emit(ts.g);
        emit(ts.pi);
        emit(ts.theta);
        out += "\n";
      }
    }
  }
  return out;
}

// columns: step,common_node,type,component,value  (idiosyncratic aggregate is
// deterministic so common_node is always 0; component 0 = kernel-weighted mean
// of theta . (sigma^T pi), component 1 = kernel-weighted mean of |sigma^T pi|^2/2)
inline std::string aggregate_csv(const GraphonSolution& sol) {
  std::string out = "step,common_node,type,component,value\n";
  for (size_t k = 0; k < sol.aggregate.hbar_tg.size(); ++k)
    for (int t = 0; t < sol.spec.steps; ++t)
      for (int c = 0; c < 2; ++c) {
        const auto& tab = (c == 0) ? sol.aggregate.hbar_tg : sol.aggregate.hbar_gg;
        out += std::to_string(t) + ",0," + std::to_string(k) + "," + std::to_string(c) + "," +
               fmt_g17(tab[k][static_cast<size_t>(t)]) + "\n";
      }
  return out;
}

inline json graphon_values_json(const GraphonSolution& sol) {
  json j;
  for (size_t k = 0; k < sol.types.size(); ++k) {
    j["u"].push_back(sol.u[k]);
    j["y0"].push_back(sol.y0[static_cast<long>(k)]);
    j["values"].push_back(sol.values[static_cast<long>(k)]);
  }
  j["iterations"] = sol.trace.iterations;
  j["converged"] = sol.trace.converged;
  j["picard_deltas"] = sol.trace.deltas;
  return j;
}

// columns: type,u,step,node,y,ztilde,zstar,g,pi  (node = own * commons + common)
inline std::string common_tables_csv(const CommonGraphonSolution& sol) {
  std::string out = "type,u,step,node,y,ztilde,zstar,g,pi\n";
  for (size_t k = 0; k < sol.types.size(); ++k) {
    const CommonTypeSolution& ts = sol.types[k];
    for (int t = 0; t < sol.spec.steps; ++t) {
      const long ns = ts.y[static_cast<size_t>(t)].size();
      for (long s = 0; s < ns; ++s) {
        const auto idx = static_cast<size_t>(s);
        out += std::to_string(k) + "," + fmt_g17(ts.u) + "," + std::to_string(t) + "," +
               std::to_string(s) + "," + fmt_g17(ts.y[static_cast<size_t>(t)][idx]) + "," +
               fmt_g17(ts.ztilde[static_cast<size_t>(t)][idx]) + "," +
               fmt_g17(ts.zstar[static_cast<size_t>(t)][idx]) + "," +
               fmt_g17(ts.g[static_cast<size_t>(t)][idx]) + "," +
               fmt_g17(ts.pi[static_cast<size_t>(t)][idx]) + "\n";
      }
    }
  }
  return out;
}

inline std::string common_aggregate_csv(const CommonGraphonSolution& sol) {
  std::string out = "step,common_node,type,component,value\n";
  for (size_t k = 0; k < sol.types.size(); ++k) {
    const CommonTypeSolution& ts = sol.types[k];
    for (int t = 0; t < sol.spec.steps; ++t)
      for (size_t sc = 0; sc < ts.aggregate_tg[static_cast<size_t>(t)].size(); ++sc)
        for (int c = 0; c < 2; ++c) {
          const Table& tab = (c == 0) ? ts.aggregate_tg : ts.aggregate_gg;
          out += std::to_string(t) + "," + std::to_string(sc) + "," + std::to_string(k) + "," +
                 std::to_string(c) + "," + fmt_g17(tab[static_cast<size_t>(t)][sc]) + "\n";
        }
  }
  return out;
}

inline json common_values_json(const CommonGraphonSolution& sol) {
  json j;
  for (size_t k = 0; k < sol.types.size(); ++k) {
    j["u"].push_back(sol.u[k]);
    j["y0"].push_back(sol.y0[static_cast<long>(k)]);
    j["values"].push_back(sol.values[static_cast<long>(k)]);
  }
  j["iterations"] = sol.trace.iterations;
  j["converged"] = sol.trace.converged;
  j["picard_deltas"] = sol.trace.deltas;
  j["gmap_measured_ratio"] = sol.gmap_measured_ratio;
  j["gmap_theoretical_bound"] = sol.gmap_theoretical_bound;
  return j;
}

// columns: t,common_state,iteration,delta
inline std::string gmap_trace_csv(const std::vector<GMapTrace>& traces) {
  std::string out = "t,common_state,iteration,delta\n";
  for (const auto& tr : traces)
    for (size_t k = 0; k < tr.deltas.size(); ++k)
      out += std::to_string(tr.t) + "," + std::to_string(tr.common_state) + "," +
             std::to_string(k) + "," + fmt_g17(tr.deltas[k]) + "\n";
  return out;
}

// one row per population size; 18 columns
inline std::string convergence_csv(const std::vector<ConvergenceRow>& rows) {
  std::string out =
      "n,strategy_gap,value_gap,y_gap,dz_bmo,lhs,gamma1_bmo,gamma2_bmo,a_max,rhs,"
      "dominance_ok,gamma_method,scaled_l2,modulus,l1_gap,chain_rhs,chain_ok,logx_gap\n";
  for (const auto& r : rows) {
    out += std::to_string(r.n) + "," + fmt_g17(r.strategy_gap) + "," + fmt_g17(r.value_gap) +
           "," + fmt_g17(r.y_gap) + "," + fmt_g17(r.dz_bmo) + "," + fmt_g17(r.lhs) + "," +
           fmt_g17(r.gamma1_bmo) + "," + fmt_g17(r.gamma2_bmo) + "," + fmt_g17(r.a_max) + "," +
           fmt_g17(r.rhs) + "," + (r.dominance_ok ? "1" : "0") + "," + r.gamma_method + "," +
           fmt_g17(r.scaled_l2) + "," + fmt_g17(r.modulus) + "," + fmt_g17(r.l1_gap) + "," +
           fmt_g17(r.chain_rhs) + "," + (r.chain_ok ? "1" : "0") + "," + fmt_g17(r.logx_gap) +
           "\n";
  }
  return out;
}

inline json convergence_json(const std::vector<ConvergenceRow>& rows) {
  json arr = json::array();
  for (const auto& r : rows) {
    arr.push_back(json{{"n", r.n},
                       {"strategy_gap", r.strategy_gap},
                       {"value_gap", r.value_gap},
                       {"y_gap", r.y_gap},
                       {"dz_bmo", r.dz_bmo},
                       {"lhs", r.lhs},
                       {"gamma1_bmo", r.gamma1_bmo},
                       {"gamma2_bmo", r.gamma2_bmo},
                       {"a_max", r.a_max},
                       {"rhs", r.rhs},
                       {"dominance_ok", r.dominance_ok},
                       {"gamma_method", r.gamma_method},
                       {"scaled_l2", r.scaled_l2},
                       {"modulus", r.modulus},
                       {"l1_gap", r.l1_gap},
                       {"chain_rhs", r.chain_rhs},
                       {"chain_ok", r.chain_ok},
                       {"logx_gap", r.logx_gap}});
  }
  return arr;
}

inline json nash_certificate_json(const NashCertificate& cert) {
  json resp = json::array();
  for (const auto& r : cert.responses)
    resp.push_back(json{{"value", r.value},
                        {"claimed_value", r.claimed_value},
                        {"gain", r.gain},
                        {"solver_value", r.solver_value},
                        {"grid_points", r.grid_points},
                        {"spacing", r.spacing}});
  return json{{"eps", cert.eps},
              {"cost_scale", cert.cost_scale},
              {"dt", cert.dt},
              {"spacing", cert.spacing},
              {"max_gain", cert.max_gain},
              {"pass", cert.pass},
              {"responses", resp}};
}

inline json martingale_json(const MartingaleCheck& chk) {
  return json{{"r0", chk.r0},
              {"max_equilibrium_drift", chk.max_equilibrium_drift},
              {"max_residual", chk.max_residual},
              {"positivity_margin", chk.positivity_margin},
              {"perturbations", chk.perturbations},
              {"direction_violations", chk.direction_violations},
              {"worst_direction", chk.worst_direction},
              {"pass", chk.pass()}};
}

}  // namespace relperf
