#pragma once
// Mean-field (graphon) solvers on the Bernoulli lattice.
//
// Types live on a midpoint grid of [0,1]. Without common noise the coupling
// enters only through a deterministic aggregate drift field, so the solve is
// an outer iteration on that field with exact per-type backward sweeps
// inside. With common noise the true common-factor loading solves, slice by
// slice, a finite-dimensional fixed point across types; that map contracts
// only when rho * max|gamma| < 1 - max gamma, and the solver refuses to run
// at or beyond the threshold.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "relperf/common.hpp"
#include "relperf/lattice.hpp"
#include "relperf/model.hpp"
#include "relperf/n_agent.hpp"
#include "relperf/projection.hpp"

namespace relperf {

// Deterministic aggregate drift, stored as its two kernel-weighted integrals
//   component 0:  (1/m) sum_k G(u, u_k) E[theta_k . g_k](t)
//   component 1:  (1/m) sum_k G(u, u_k) E[|g_k|^2 / 2](t)
// the drift integrand being their difference.
struct AggregateField {
  std::vector<double> u;                     // type grid
  std::vector<std::vector<double>> hbar_tg;  // [type][t], E[theta.g]
  std::vector<std::vector<double>> hbar_gg;  // [type][t], E[|g|^2 / 2]
  Graphon kernel;

  double component_at(double uu, int t, int component) const {
    const auto& h = component == 0 ? hbar_tg : hbar_gg;
    double a = 0.0;
    for (size_t k = 0; k < u.size(); ++k) a += kernel(uu, u[k]) * h[k][static_cast<size_t>(t)];
    return a / static_cast<double>(u.size());
  }
  double at(double uu, int t) const { return component_at(uu, t, 0) - component_at(uu, t, 1); }
};

struct TypeSolution {
  double u = 0.0;
  AgentParams agent;
  StateKind kind = StateKind::Trivial;
  Table y;      // terminal slice included
  Table z;      // own loadings, d components
  Table g;      // sigma^T pi, d components
  Table pi;     // strategies, d components
  Table theta;  // d components
  Table h;      // interaction integrand theta.g - |g|^2/2

  double y0() const { return y[0][0]; }
};

struct GraphonSolution {
  GameSpec spec;
  std::vector<double> u;
  std::vector<TypeSolution> types;
  AggregateField aggregate;
  Vec y0;      // per type, after the initial-wealth shift
  Vec values;  // V_0 per type
  PicardTrace trace;
  int strategy_set_violations = 0;
  double max_strategy_set_deviation = 0.0;
};

namespace detail {

// Expectation of one scalar slice against the axis marginal.
inline double slice_mean(const std::vector<double>& slice, const std::vector<double>& probs) {
  double m = 0.0;
  for (size_t s = 0; s < probs.size(); ++s) m += probs[s] * slice[s];
  return m;
}

// Backward sweep of one type against a frozen aggregate drift.
inline void sweep_type(const GameSpec& spec, TypeSolution& ts, const AggregateField& agg) {
  const AgentParams& a = ts.agent;
  const int d = a.d();
  const double dt = spec.dt();
  const double sdt = std::sqrt(dt);
  Vec zv(d);
  for (long s = 0; s < Lattice::state_count(ts.kind, spec.steps); ++s)
    ts.y[static_cast<size_t>(spec.steps)][static_cast<size_t>(s)] = 0.0;
  for (int t = spec.steps - 1; t >= 0; --t) {
    const double drift = -spec.rho * a.gamma * agg.at(ts.u, t);
    const long ns = Lattice::state_count(ts.kind, t);
    for (long s = 0; s < ns; ++s) {
      const auto st = slice_stats(ts.y[static_cast<size_t>(t + 1)], ts.kind, t, s, sdt);
      zv.setZero(d);
      zv[0] = st.loading;
      const int sign = (ts.kind == StateKind::Sign) ? Lattice::sign_of(ts.kind, t, s) : 0;
      const Vec th = compute_theta(a, t, sign, false);
      const Vec gv = g_from_z(a, 0.0, t, sign, zv, th, false);
      const double f = own_generator(a, 0.0, zv, gv, th, t, sign, false) + drift;
      ts.y[static_cast<size_t>(t)][static_cast<size_t>(s)] = st.expect + f * dt;
      write_vec(ts.z[static_cast<size_t>(t)], s, zv);
      write_vec(ts.g[static_cast<size_t>(t)], s, gv);
      write_vec(ts.theta[static_cast<size_t>(t)], s, th);
      write_vec(ts.pi[static_cast<size_t>(t)], s,
                strategy_from_g(a, t, sign, gv, false));
      ts.h[static_cast<size_t>(t)][static_cast<size_t>(s)] =
          th.dot(gv) - 0.5 * gv.squaredNorm();
    }
  }
}

inline TypeSolution fresh_type(const GameSpec& spec, double u) {
  TypeSolution ts;
  ts.u = u;
  ts.agent = agent_at_type(spec, u);
  ts.kind = own_axis_kind(ts.agent);
  ts.y = zero_table(ts.kind, spec.steps, 1, true);
  ts.z = zero_table(ts.kind, spec.steps, ts.agent.d(), false);
  ts.g = zero_table(ts.kind, spec.steps, ts.agent.d(), false);
  ts.pi = zero_table(ts.kind, spec.steps, ts.agent.d(), false);
  ts.theta = zero_table(ts.kind, spec.steps, ts.agent.d(), false);
  ts.h = zero_table(ts.kind, spec.steps, 1, false);
  return ts;
}

// Expected interaction components of one type: E[theta.g] and E[|g|^2 / 2].
inline void type_hbar(const GameSpec& spec, const TypeSolution& ts, std::vector<double>& out_tg,
                      std::vector<double>& out_gg) {
  out_tg.assign(static_cast<size_t>(spec.steps), 0.0);
  out_gg.assign(static_cast<size_t>(spec.steps), 0.0);
  const int d = ts.agent.d();
  Vec gv(d), th(d);
  for (int t = 0; t < spec.steps; ++t) {
    const auto probs = state_probs(ts.kind, t);
    double tg = 0.0, gg = 0.0;
    for (long s = 0; s < static_cast<long>(probs.size()); ++s) {
      read_vec(ts.g[static_cast<size_t>(t)], s, d, gv);
      read_vec(ts.theta[static_cast<size_t>(t)], s, d, th);
      tg += probs[static_cast<size_t>(s)] * th.dot(gv);
      gg += probs[static_cast<size_t>(s)] * 0.5 * gv.squaredNorm();
    }
    out_tg[static_cast<size_t>(t)] = tg;
    out_gg[static_cast<size_t>(t)] = gg;
  }
}

}  // namespace detail

// Idiosyncratic-noise mean-field solve: outer iteration on the aggregate
// drift field with exact per-type sweeps. The aggregate only shifts the
// deterministic part of each type's Y, so the iteration settles in a few
// rounds; the tolerance acts on the sup-change of all fields.
inline GraphonSolution solve_graphon_bsde_no_common(const GameSpec& spec, double tol = 1e-10,
                                                    int max_iter = 200) {
  ensure_valid(spec);
  if (spec.mode != Mode::Graphon)
    throw ValidationError("solve_graphon_bsde_no_common expects a mean-field model");
  if (spec.common_noise)
    throw ValidationError("use solve_graphon_bsde_common_noise when a common factor is present");

  GraphonSolution sol;
  sol.spec = spec;
  sol.u = type_grid(spec.types);
  const size_t m = sol.u.size();
  sol.aggregate.u = sol.u;
  sol.aggregate.kernel = spec.graphon;
  sol.aggregate.hbar_tg.assign(m, std::vector<double>(static_cast<size_t>(spec.steps), 0.0));
  sol.aggregate.hbar_gg.assign(m, std::vector<double>(static_cast<size_t>(spec.steps), 0.0));
  for (size_t k = 0; k < m; ++k) sol.types.push_back(detail::fresh_type(spec, sol.u[k]));

  std::vector<std::vector<double>> tg_new(m), gg_new(m);
  for (int it = 0; it < max_iter; ++it) {
    double delta = 0.0;
    for (size_t k = 0; k < m; ++k) {
      Table y_prev = sol.types[k].y;
      detail::sweep_type(spec, sol.types[k], sol.aggregate);
      delta = std::max(delta, detail::table_gap(y_prev, sol.types[k].y));
      detail::type_hbar(spec, sol.types[k], tg_new[k], gg_new[k]);
      for (int t = 0; t < spec.steps; ++t) {
        delta = std::max(delta, std::abs(tg_new[k][static_cast<size_t>(t)] -
                                         sol.aggregate.hbar_tg[k][static_cast<size_t>(t)]));
        delta = std::max(delta, std::abs(gg_new[k][static_cast<size_t>(t)] -
                                         sol.aggregate.hbar_gg[k][static_cast<size_t>(t)]));
      }
    }
    sol.aggregate.hbar_tg = tg_new;
    sol.aggregate.hbar_gg = gg_new;
    sol.trace.deltas.push_back(delta);
    sol.trace.iterations = it + 1;
    if (delta <= tol) {
      sol.trace.converged = true;
      break;
    }
    sol.trace.converged = false;
  }
  if (!sol.trace.converged)
    throw SolverError("aggregate-field iteration did not converge in " +
                      std::to_string(max_iter) + " iterations");

  sol.y0.resize(static_cast<int>(m));
  sol.values.resize(static_cast<int>(m));
  for (size_t k = 0; k < m; ++k) {
    const AgentParams& a = sol.types[k].agent;
    double shift = 0.0;
    for (size_t v = 0; v < m; ++v)
      shift += spec.graphon(sol.u[k], sol.u[v]) *
               std::log(agent_at_type(spec, sol.u[v]).x0);
    shift *= spec.rho * a.gamma / static_cast<double>(m);
    sol.y0[static_cast<int>(k)] = sol.types[k].y0() - shift;
    sol.values[static_cast<int>(k)] =
        std::pow(a.x0, a.gamma) / a.gamma * std::exp(sol.y0[static_cast<int>(k)]);
    for (int t = 0; t < spec.steps; ++t) {
      const long ns = Lattice::state_count(sol.types[k].kind, t);
      Vec p(a.d());
      for (long s = 0; s < ns; ++s) {
        detail::read_vec(sol.types[k].pi[static_cast<size_t>(t)], s, a.d(), p);
        const double dev = (project(a.constraint, p) - p).norm();
        if (dev > 1e-10) {
          ++sol.strategy_set_violations;
          sol.max_strategy_set_deviation = std::max(sol.max_strategy_set_deviation, dev);
        }
      }
    }
  }
  return sol;
}

// Evaluate the mean-field solution at an arbitrary type u against a frozen
// aggregate field (used to compare finite games against their limit at the
// sampled types i/n).
inline TypeSolution solve_type_at(const GameSpec& spec, const AggregateField& agg, double u) {
  TypeSolution ts = detail::fresh_type(spec, u);
  detail::sweep_type(spec, ts, agg);
  return ts;
}

inline double type_value(const GameSpec& spec, const TypeSolution& ts,
                         const std::vector<double>& grid) {
  double shift = 0.0;
  for (double v : grid)
    shift += spec.graphon(ts.u, v) * std::log(agent_at_type(spec, v).x0);
  shift *= spec.rho * ts.agent.gamma / static_cast<double>(grid.size());
  const double y0 = ts.y0() - shift;
  return std::pow(ts.agent.x0, ts.agent.gamma) / ts.agent.gamma * std::exp(y0);
}

// ---------------------------------------------------------------------------
// Common noise.

struct GMapTrace {
  int t = 0;
  long common_state = 0;
  std::vector<double> deltas;
  int iterations = 0;
  bool converged = true;
  double measured_ratio = 0.0;  // max successive delta ratio
};

struct CommonTypeSolution {
  double u = 0.0;
  AgentParams agent;
  StateKind own_kind = StateKind::Trivial;
  // joint index: own_state * common_count(t) + common_state
  Table y;        // terminal slice included
  Table ztilde;   // own loading
  Table zstar;    // transformed common loading
  Table g;        // true common loading
  Table pi;       // strategies
  // [t][common_state]: the two kernel-weighted integrals the drift subtracts
  Table aggregate_tg;  // mean of theta . (sigma^T pi)
  Table aggregate_gg;  // mean of |sigma^T pi|^2 / 2
};

struct CommonGraphonSolution {
  GameSpec spec;
  std::vector<double> u;
  std::vector<CommonTypeSolution> types;
  Vec y0;
  Vec values;
  PicardTrace trace;
  std::vector<GMapTrace> gmap_traces;  // from the final outer iteration
  double gmap_measured_ratio = 0.0;
  double gmap_theoretical_bound = 0.0;
};

namespace detail {

inline long common_count(int t) { return Lattice::state_count(StateKind::Sign, t); }

struct CommonWork {
  std::vector<double> u;
  std::vector<AgentParams> agents;
  std::vector<StateKind> kinds;
  Mat kernel;  // G(u_k, u_v)
};

inline CommonWork common_work(const GameSpec& spec) {
  CommonWork w;
  w.u = type_grid(spec.types);
  const int m = static_cast<int>(w.u.size());
  w.kernel.resize(m, m);
  for (int k = 0; k < m; ++k) {
    w.agents.push_back(agent_at_type(spec, w.u[static_cast<size_t>(k)]));
    w.kinds.push_back(own_axis_kind(w.agents.back()));
    if (w.agents.back().d() != 1)
      throw ValidationError("the common-noise mean-field solver supports one risky asset");
  }
  for (int k = 0; k < m; ++k)
    for (int v = 0; v < m; ++v)
      w.kernel(k, v) = spec.graphon(w.u[static_cast<size_t>(k)], w.u[static_cast<size_t>(v)]);
  return w;
}

// eta = Sigma^T (Sigma Sigma^T)^{-1} sigma_star: the direction the projected
// ratio is paired with inside the common-loading fixed point.
inline Vec eta_vec(const AgentParams& a, int t, int sign) {
  const Mat Sigma = stacked_sigma(a, t, sign, true);
  const Mat SS = Sigma * Sigma.transpose();
  const Vec sstar = a.sigma_star.at(t, sign);
  return Sigma.transpose() * SS.ldlt().solve(sstar);
}

// Projected ratio sigma^T pi for given own loading, common loading and type.
inline Vec common_ratio(const AgentParams& a, int t, int sign, double ztilde, double g) {
  Vec zeta(2);
  zeta << ztilde, g;
  const Vec th = compute_theta(a, t, sign, true);
  const Vec v = (zeta + th) / (1.0 - a.gamma);
  const Mat M = stacked_sigma(a, t, sign, true).transpose();
  return project_transformed(M, a.constraint, v);
}

}  // namespace detail

// One slice of the common-loading fixed point: given every type's own and
// transformed common loadings at (t, common node), iterate the m-vector of
// kernel-weighted conditional means K until the true loadings
// g_u = zstar_u - rho gamma_u K_u stabilise. Refuses to run when the
// contraction condition rho max|gamma| < 1 - max gamma fails.
inline GMapTrace g_fixed_point(const GameSpec& spec, const detail::CommonWork& w, int t,
                               long sc, const std::vector<std::vector<double>>& ztilde_slice,
                               const std::vector<std::vector<double>>& zstar_slice,
                               std::vector<double>& g_out, double tol = 1e-13,
                               int max_iter = 200) {
  const PopulationModuli mod = population_moduli(spec);
  const double limit = g_map_rho_limit(mod);
  if (spec.rho >= limit) {
    char buf[128];
    std::snprintf(buf, sizeof(buf),
                  "common-loading fixed point is not a contraction: rho=%.6g >= (1-max "
                  "gamma)/max|gamma|=%.6g",
                  spec.rho, limit);
    throw SolverError(buf);
  }
  const int m = static_cast<int>(w.u.size());
  const long nc = detail::common_count(t);
  GMapTrace trace;
  trace.t = t;
  trace.common_state = sc;

  std::vector<double> K(static_cast<size_t>(m), 0.0), K_next(static_cast<size_t>(m), 0.0);
  std::vector<std::vector<double>> probs(static_cast<size_t>(m));
  for (int k = 0; k < m; ++k) probs[static_cast<size_t>(k)] = state_probs(w.kinds[static_cast<size_t>(k)], t);

  double prev_delta = -1.0;
  for (int it = 0; it < max_iter; ++it) {
    // conditional mean, per type, of the projected ratio paired with eta
    std::vector<double> pair_mean(static_cast<size_t>(m), 0.0);
    for (int v = 0; v < m; ++v) {
      const AgentParams& a = w.agents[static_cast<size_t>(v)];
      const double cv = spec.rho * a.gamma;
      double acc = 0.0;
      for (long so = 0; so < static_cast<long>(probs[static_cast<size_t>(v)].size()); ++so) {
        const int sign =
            (w.kinds[static_cast<size_t>(v)] == StateKind::Sign)
                ? Lattice::sign_of(StateKind::Sign, t, so)
                : 0;
        const size_t idx = static_cast<size_t>(so * nc + sc);
        const double zt = ztilde_slice[static_cast<size_t>(v)][idx];
        const double g = zstar_slice[static_cast<size_t>(v)][idx] - cv * K[static_cast<size_t>(v)];
        const Vec ratio = detail::common_ratio(a, t, sign, zt, g);
        acc += probs[static_cast<size_t>(v)][static_cast<size_t>(so)] *
               ratio.dot(detail::eta_vec(a, t, sign));
      }
      pair_mean[static_cast<size_t>(v)] = acc;
    }
    double delta = 0.0;
    for (int k = 0; k < m; ++k) {
      double acc = 0.0;
      for (int v = 0; v < m; ++v) acc += w.kernel(k, v) * pair_mean[static_cast<size_t>(v)];
      K_next[static_cast<size_t>(k)] = acc / static_cast<double>(m);
      delta = std::max(delta, std::abs(K_next[static_cast<size_t>(k)] - K[static_cast<size_t>(k)]));
    }
    K = K_next;
    trace.deltas.push_back(delta);
    trace.iterations = it + 1;
    // ratios on deltas at rounding level are noise, not contraction evidence
    if (prev_delta > 1e-12 && delta > 0.0)
      trace.measured_ratio = std::max(trace.measured_ratio, delta / prev_delta);
    prev_delta = delta;
    if (delta <= tol) {
      trace.converged = true;
      break;
    }
    trace.converged = false;
  }
  if (!trace.converged)
    throw SolverError("common-loading fixed point did not converge in " +
                      std::to_string(max_iter) + " iterations");

  g_out.assign(static_cast<size_t>(m), 0.0);
  for (int k = 0; k < m; ++k)
    g_out[static_cast<size_t>(k)] =
        -spec.rho * w.agents[static_cast<size_t>(k)].gamma * K[static_cast<size_t>(k)];
  // g_out holds the correction; caller adds the per-own-state zstar.
  return trace;
}

inline CommonGraphonSolution solve_graphon_bsde_common_noise(const GameSpec& spec,
                                                             double tol = 1e-9,
                                                             int max_iter = 200) {
  ensure_valid(spec);
  if (spec.mode != Mode::Graphon || !spec.common_noise)
    throw ValidationError("solve_graphon_bsde_common_noise expects a mean-field model with a "
                          "common factor");
  const detail::CommonWork w = detail::common_work(spec);
  const int m = static_cast<int>(w.u.size());
  const int N = spec.steps;
  const double dt = spec.dt();
  const double sdt = std::sqrt(dt);

  // refusal check up front (also triggered inside each slice solve)
  const PopulationModuli mod = population_moduli(spec);
  if (spec.rho >= g_map_rho_limit(mod))
    throw SolverError("common-loading fixed point is not a contraction at rho=" +
                      std::to_string(spec.rho));

  CommonGraphonSolution sol;
  sol.spec = spec;
  sol.u = w.u;
  sol.gmap_theoretical_bound = g_map_contraction_bound(mod, spec.rho);

  auto joint_table = [&](bool through_terminal) {
    return Table(static_cast<size_t>(N + (through_terminal ? 1 : 0)));
  };
  for (int k = 0; k < m; ++k) {
    CommonTypeSolution ts;
    ts.u = w.u[static_cast<size_t>(k)];
    ts.agent = w.agents[static_cast<size_t>(k)];
    ts.own_kind = w.kinds[static_cast<size_t>(k)];
    ts.y = joint_table(true);
    ts.ztilde = joint_table(false);
    ts.zstar = joint_table(false);
    ts.g = joint_table(false);
    ts.pi = joint_table(false);
    ts.aggregate_tg = joint_table(false);
    ts.aggregate_gg = joint_table(false);
    for (int t = 0; t <= N; ++t) {
      const long no = Lattice::state_count(ts.own_kind, t);
      const long nc = detail::common_count(t);
      ts.y[static_cast<size_t>(t)].assign(static_cast<size_t>(no * nc), 0.0);
      if (t < N) {
        ts.ztilde[static_cast<size_t>(t)].assign(static_cast<size_t>(no * nc), 0.0);
        ts.zstar[static_cast<size_t>(t)].assign(static_cast<size_t>(no * nc), 0.0);
        ts.g[static_cast<size_t>(t)].assign(static_cast<size_t>(no * nc), 0.0);
        ts.pi[static_cast<size_t>(t)].assign(static_cast<size_t>(no * nc), 0.0);
        ts.aggregate_tg[static_cast<size_t>(t)].assign(static_cast<size_t>(nc), 0.0);
        ts.aggregate_gg[static_cast<size_t>(t)].assign(static_cast<size_t>(nc), 0.0);
      }
    }
    sol.types.push_back(std::move(ts));
  }

  // terminal condition: kernel-weighted opponents' initial log-wealth
  std::vector<double> terminal(static_cast<size_t>(m), 0.0);
  for (int k = 0; k < m; ++k) {
    double acc = 0.0;
    for (int v = 0; v < m; ++v)
      acc += w.kernel(k, v) * std::log(w.agents[static_cast<size_t>(v)].x0);
    terminal[static_cast<size_t>(k)] =
        -spec.rho * w.agents[static_cast<size_t>(k)].gamma * acc / static_cast<double>(m);
    auto& yT = sol.types[static_cast<size_t>(k)].y[static_cast<size_t>(N)];
    std::fill(yT.begin(), yT.end(), terminal[static_cast<size_t>(k)]);
  }

  // frozen interaction fields (true common loadings and aggregate components)
  std::vector<Table> g_frozen, agg_tg_frozen, agg_gg_frozen;
  for (auto& ts : sol.types) {
    g_frozen.push_back(ts.g);
    agg_tg_frozen.push_back(ts.aggregate_tg);
    agg_gg_frozen.push_back(ts.aggregate_gg);
  }

  double damping = 1.0;
  for (int it = 0; it < max_iter; ++it) {
    if (it == 50) damping = 0.5;
    // (i) slice fixed points on the frozen loadings -> fresh g fields
    std::vector<GMapTrace> traces;
    std::vector<Table> g_new(static_cast<size_t>(m));
    for (int k = 0; k < m; ++k) g_new[static_cast<size_t>(k)] = sol.types[static_cast<size_t>(k)].g;
    for (int t = 0; t < N; ++t) {
      const long nc = detail::common_count(t);
      for (long sc = 0; sc < nc; ++sc) {
        std::vector<std::vector<double>> zt_slice(static_cast<size_t>(m)),
            zs_slice(static_cast<size_t>(m));
        for (int k = 0; k < m; ++k) {
          zt_slice[static_cast<size_t>(k)] =
              sol.types[static_cast<size_t>(k)].ztilde[static_cast<size_t>(t)];
          zs_slice[static_cast<size_t>(k)] =
              sol.types[static_cast<size_t>(k)].zstar[static_cast<size_t>(t)];
        }
        std::vector<double> corr;
        traces.push_back(g_fixed_point(spec, w, t, sc, zt_slice, zs_slice, corr));
        for (int k = 0; k < m; ++k) {
          const long no = Lattice::state_count(w.kinds[static_cast<size_t>(k)], t);
          for (long so = 0; so < no; ++so) {
            const size_t idx = static_cast<size_t>(so * nc + sc);
            g_new[static_cast<size_t>(k)][static_cast<size_t>(t)][idx] =
                sol.types[static_cast<size_t>(k)].zstar[static_cast<size_t>(t)][idx] +
                corr[static_cast<size_t>(k)];
          }
        }
      }
    }
    // (ii) aggregate components from the fresh loadings
    std::vector<Table> agg_tg_new(static_cast<size_t>(m)), agg_gg_new(static_cast<size_t>(m));
    for (int k = 0; k < m; ++k) {
      agg_tg_new[static_cast<size_t>(k)] = sol.types[static_cast<size_t>(k)].aggregate_tg;
      agg_gg_new[static_cast<size_t>(k)] = sol.types[static_cast<size_t>(k)].aggregate_gg;
    }
    for (int t = 0; t < N; ++t) {
      const long nc = detail::common_count(t);
      for (long sc = 0; sc < nc; ++sc) {
        std::vector<double> mean_tg(static_cast<size_t>(m), 0.0),
            mean_gg(static_cast<size_t>(m), 0.0);
        for (int v = 0; v < m; ++v) {
          const AgentParams& a = w.agents[static_cast<size_t>(v)];
          const auto probs = state_probs(w.kinds[static_cast<size_t>(v)], t);
          double acc_tg = 0.0, acc_gg = 0.0;
          for (long so = 0; so < static_cast<long>(probs.size()); ++so) {
            const int sign = (w.kinds[static_cast<size_t>(v)] == StateKind::Sign)
                                 ? Lattice::sign_of(StateKind::Sign, t, so)
                                 : 0;
            const size_t idx = static_cast<size_t>(so * nc + sc);
            const double zt = sol.types[static_cast<size_t>(v)].ztilde[static_cast<size_t>(t)][idx];
            const double g = g_new[static_cast<size_t>(v)][static_cast<size_t>(t)][idx];
            const Vec ratio = detail::common_ratio(a, t, sign, zt, g);
            const Vec th = compute_theta(a, t, sign, true);
            acc_tg += probs[static_cast<size_t>(so)] * th.dot(ratio);
            acc_gg += probs[static_cast<size_t>(so)] * 0.5 * ratio.squaredNorm();
          }
          mean_tg[static_cast<size_t>(v)] = acc_tg;
          mean_gg[static_cast<size_t>(v)] = acc_gg;
        }
        for (int k = 0; k < m; ++k) {
          double acc_tg = 0.0, acc_gg = 0.0;
          for (int v = 0; v < m; ++v) {
            acc_tg += w.kernel(k, v) * mean_tg[static_cast<size_t>(v)];
            acc_gg += w.kernel(k, v) * mean_gg[static_cast<size_t>(v)];
          }
          agg_tg_new[static_cast<size_t>(k)][static_cast<size_t>(t)][static_cast<size_t>(sc)] =
              acc_tg / static_cast<double>(m);
          agg_gg_new[static_cast<size_t>(k)][static_cast<size_t>(t)][static_cast<size_t>(sc)] =
              acc_gg / static_cast<double>(m);
        }
      }
    }
    // damped update of the frozen interaction fields
    double delta = 0.0;
    auto blend = [&](Table& frozen_t, const Table& fresh_t) {
      for (size_t t = 0; t < frozen_t.size(); ++t) {
        auto& f = frozen_t[t];
        const auto& n = fresh_t[t];
        for (size_t idx = 0; idx < f.size(); ++idx) {
          delta = std::max(delta, std::abs(n[idx] - f[idx]));
          f[idx] = damping * n[idx] + (1.0 - damping) * f[idx];
        }
      }
    };
    for (int k = 0; k < m; ++k) {
      blend(g_frozen[static_cast<size_t>(k)], g_new[static_cast<size_t>(k)]);
      blend(agg_tg_frozen[static_cast<size_t>(k)], agg_tg_new[static_cast<size_t>(k)]);
      blend(agg_gg_frozen[static_cast<size_t>(k)], agg_gg_new[static_cast<size_t>(k)]);
    }
    // (iii) per-type backward sweeps against the frozen fields
    for (int k = 0; k < m; ++k) {
      CommonTypeSolution& ts = sol.types[static_cast<size_t>(k)];
      const AgentParams& a = ts.agent;
      Table y_prev = ts.y;
      for (int t = N - 1; t >= 0; --t) {
        const long no = Lattice::state_count(ts.own_kind, t);
        const long nc = detail::common_count(t);
        const long nc1 = detail::common_count(t + 1);
        for (long so = 0; so < no; ++so) {
          const int sign = (ts.own_kind == StateKind::Sign)
                               ? Lattice::sign_of(StateKind::Sign, t, so)
                               : 0;
          for (long sc = 0; sc < nc; ++sc) {
            double exp_sum = 0.0, zt = 0.0, zs = 0.0;
            for (int mo = 0; mo < 2; ++mo)
              for (int mc = 0; mc < 2; ++mc) {
                const long so1 = Lattice::child_state(ts.own_kind, so, mo);
                const long sc1 = Lattice::child_state(StateKind::Sign, sc, mc);
                const double yv =
                    ts.y[static_cast<size_t>(t + 1)][static_cast<size_t>(so1 * nc1 + sc1)];
                exp_sum += yv;
                zt += (mo == 1 ? yv : -yv);
                zs += (mc == 1 ? yv : -yv);
              }
            const double e = exp_sum / 4.0;
            const double ztilde = zt / (4.0 * sdt);
            const double zstar = zs / (4.0 * sdt);
            const size_t idx = static_cast<size_t>(so * nc + sc);
            const double g = g_frozen[static_cast<size_t>(k)][static_cast<size_t>(t)][idx];
            const double atg =
                agg_tg_frozen[static_cast<size_t>(k)][static_cast<size_t>(t)][static_cast<size_t>(sc)];
            const double agg_gg =
                agg_gg_frozen[static_cast<size_t>(k)][static_cast<size_t>(t)][static_cast<size_t>(sc)];
            const double agg = atg - agg_gg;
            const Vec th = compute_theta(a, t, sign, true);
            Vec zeta(2);
            zeta << ztilde, g;
            const Vec v = (zeta + th) / (1.0 - a.gamma);
            const Mat M = stacked_sigma(a, t, sign, true).transpose();
            const Vec pv = project_transformed(M, a.constraint, v);
            double f = 0.5 * (ztilde * ztilde + g * g) +
                       a.gamma / (2.0 * (1.0 - a.gamma)) * (zeta + th).squaredNorm() -
                       a.gamma * (1.0 - a.gamma) / 2.0 * (v - pv).squaredNorm() -
                       spec.rho * a.gamma * agg;
            ts.y[static_cast<size_t>(t)][idx] = e + f * dt;
            ts.ztilde[static_cast<size_t>(t)][idx] = ztilde;
            ts.zstar[static_cast<size_t>(t)][idx] = zstar;
            ts.g[static_cast<size_t>(t)][idx] = g;
            const Mat Sigma = stacked_sigma(a, t, sign, true);
            const Mat SS = Sigma * Sigma.transpose();
            ts.pi[static_cast<size_t>(t)][idx] = (SS.ldlt().solve(Sigma * pv))(0);
            ts.aggregate_tg[static_cast<size_t>(t)][static_cast<size_t>(sc)] = atg;
            ts.aggregate_gg[static_cast<size_t>(t)][static_cast<size_t>(sc)] = agg_gg;
          }
        }
      }
      delta = std::max(delta, detail::table_gap(y_prev, ts.y));
    }
    sol.trace.deltas.push_back(delta);
    sol.trace.iterations = it + 1;
    if (delta <= tol) {
      sol.trace.converged = true;
      sol.gmap_traces = std::move(traces);
      for (const auto& tr : sol.gmap_traces)
        sol.gmap_measured_ratio = std::max(sol.gmap_measured_ratio, tr.measured_ratio);
      break;
    }
    sol.trace.converged = false;
    if (it == max_iter - 1) sol.gmap_traces = std::move(traces);
  }
  if (!sol.trace.converged)
    throw SolverError("common-noise mean-field iteration did not reach tol in " +
                      std::to_string(max_iter) + " iterations");

  sol.y0.resize(m);
  sol.values.resize(m);
  for (int k = 0; k < m; ++k) {
    const AgentParams& a = w.agents[static_cast<size_t>(k)];
    sol.y0[k] = sol.types[static_cast<size_t>(k)].y[0][0];
    sol.values[k] = std::pow(a.x0, a.gamma) / a.gamma * std::exp(sol.y0[k]);
  }
  return sol;
}

}  // namespace relperf
