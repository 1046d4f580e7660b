#pragma once
// Backward solver for the n-agent relative-performance system on the
// Bernoulli lattice. With zero self-weights and own-state coefficients the
// generator splits into per-factor terms, so the coupled solution is
// assembled from one small own-state recursion per agent plus one per
// ordered pair. Two schemes: the explicit one-sweep scheme (the exact lattice
// fixed point, because the generator is free of the current Y and the
// martingale loadings come from the next time slice) and a damped Picard
// iteration with frozen loading inputs, kept as a contraction monitor.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "relperf/common.hpp"
#include "relperf/lattice.hpp"
#include "relperf/model.hpp"
#include "relperf/projection.hpp"

namespace relperf {

enum class Scheme { Explicit, ImplicitPicard };

struct PicardTrace {
  std::vector<double> deltas;  // sup-norm change per iteration
  bool converged = true;
  int iterations = 0;
};

// [t][state * components + c]; one agent's own scalar state axis.
using Table = std::vector<std::vector<double>>;

namespace detail {

inline StateKind own_axis_kind(const AgentParams& a) {
  return a.state_dependent() ? StateKind::Sign : StateKind::Trivial;
}

inline Table zero_table(StateKind kind, int steps, int components, bool through_terminal) {
  Table tab(static_cast<size_t>(steps + (through_terminal ? 1 : 0)));
  for (int t = 0; t < static_cast<int>(tab.size()); ++t)
    tab[static_cast<size_t>(t)].assign(
        static_cast<size_t>(Lattice::state_count(kind, t) * components), 0.0);
  return tab;
}

// Conditional expectation and martingale loading of the next slice of a
// scalar process on one axis. The axis carries one binary move; loadings on
// an agent's remaining asset factors vanish because nothing varies there.
struct SliceStats {
  double expect = 0.0;
  double loading = 0.0;  // first component; others are identically zero
};

inline SliceStats slice_stats(const std::vector<double>& next, StateKind kind, int t,
                              long s, double sqrt_dt) {
  const long down = Lattice::child_state(kind, s, 0);
  const long up = Lattice::child_state(kind, s, 1);
  SliceStats st;
  st.expect = 0.5 * (next[static_cast<size_t>(down)] + next[static_cast<size_t>(up)]);
  st.loading =
      (next[static_cast<size_t>(up)] - next[static_cast<size_t>(down)]) / (2.0 * sqrt_dt);
  (void)t;
  return st;
}

}  // namespace detail

struct NAgentSolution {
  GameSpec spec;
  std::vector<StateKind> kinds;  // own axis per agent

  // Own components, indexed [agent][t][state(*d+c)].
  std::vector<Table> y_diag;   // curly-Y own part (terminal slice included)
  std::vector<Table> z_diag;   // curly-Z^{jj}, d components
  std::vector<Table> g;        // sigma^T pi~^j, d components
  std::vector<Table> pi;       // recovered strategies, d components
  std::vector<Table> theta;    // market price of risk, d components
  std::vector<Table> h;        // theta . g - |g|^2 / 2, scalar

  // Pair components [i][j] on agent j's axis (empty when the weight is zero
  // or j == i).
  std::vector<std::vector<Table>> y_off;
  std::vector<std::vector<Table>> z_off;

  Vec curly_y0;  // coupled value-process starts
  Vec y0;        // after removing the opponents' initial log-wealth
  Vec values;    // V_0^i

  PicardTrace trace;
  int strategy_set_violations = 0;
  double max_strategy_set_deviation = 0.0;

  double coupling(int i, int j) const {
    return spec.rho * spec.agents[static_cast<size_t>(i)].gamma * spec.lambda_n(i, j);
  }
  long states(int j, int t) const {
    return Lattice::state_count(kinds[static_cast<size_t>(j)], t);
  }
  // curly-Y^i at a joint own-state assignment (one state per agent).
  double curly_y(int i, int t, const std::vector<long>& s) const {
    double v = y_diag[static_cast<size_t>(i)][static_cast<size_t>(t)]
                     [static_cast<size_t>(s[static_cast<size_t>(i)])];
    for (int j = 0; j < spec.n(); ++j) {
      if (j == i || y_off[static_cast<size_t>(i)][static_cast<size_t>(j)].empty()) continue;
      v += y_off[static_cast<size_t>(i)][static_cast<size_t>(j)][static_cast<size_t>(t)]
                [static_cast<size_t>(s[static_cast<size_t>(j)])];
    }
    return v;
  }
};

namespace detail {

// sigma^T pi~ from the coupled own loading. With a self-weight the first-order
// condition inverts affinely (unconstrained only); otherwise it is the
// projected Merton-style ratio.
inline Vec g_from_z(const AgentParams& a, double c_self, int t, int sign, const Vec& z,
                    const Vec& th, bool common_noise) {
  const Mat Sigma = stacked_sigma(a, t, sign, common_noise);
  const Mat M = Sigma.transpose();
  if (c_self != 0.0) {
    if (!std::holds_alternative<FullSpace>(a.constraint))
      throw ValidationError("self-weights require an unconstrained agent");
    return (z + th) / (1.0 - a.gamma + c_self);
  }
  const Vec v = (z + th) / (1.0 - a.gamma);
  return project_transformed(M, a.constraint, v);
}

inline Vec strategy_from_g(const AgentParams& a, int t, int sign, const Vec& gv,
                           bool common_noise) {
  const Mat Sigma = stacked_sigma(a, t, sign, common_noise);
  const Mat SS = Sigma * Sigma.transpose();
  return SS.ldlt().solve(Sigma * gv);
}

// Generator of the coupled own component at one node, in coupled variables.
inline double own_generator(const AgentParams& a, double c_self, const Vec& z, const Vec& gv,
                            const Vec& th, int t, int sign, bool common_noise) {
  const Vec zfb = z - c_self * gv;
  const double gamma = a.gamma;
  double f = 0.5 * zfb.squaredNorm() + gamma / (2.0 * (1.0 - gamma)) * (zfb + th).squaredNorm();
  const Vec v = (zfb + th) / (1.0 - gamma);
  const Mat M = stacked_sigma(a, t, sign, common_noise).transpose();
  const Vec pv = (c_self != 0.0) ? v : project_transformed(M, a.constraint, v);
  f -= gamma * (1.0 - gamma) / 2.0 * (v - pv).squaredNorm();
  if (c_self != 0.0) f -= c_self * (th.dot(gv) - 0.5 * gv.squaredNorm());
  return f;
}

// Pair component: the quadratic tracking cost against the opponent's
// performance loading plus the drift it feeds back.
inline double pair_generator(double c, const Vec& z, const Vec& gv, double h_val) {
  return 0.5 * (z - c * gv).squaredNorm() - c * h_val;
}

}  // namespace detail

// Full coupled generator for agent i at one time step, given one own-state
// sign per agent, the row of coupled loadings, and every agent's current
// sigma^T pi~. Equals the sum of the per-factor pieces the solver sweeps.
inline double generator_n(const GameSpec& spec, int i, int t, const std::vector<int>& signs,
                          const std::vector<Vec>& z_row, const std::vector<Vec>& g_all) {
  const int n = spec.n();
  const AgentParams& ai = spec.agents[static_cast<size_t>(i)];
  double f = 0.0;
  const double c_self = spec.rho * ai.gamma * spec.lambda_n(i, i);
  const Vec th_i = compute_theta(ai, t, signs[static_cast<size_t>(i)], spec.common_noise);
  f += detail::own_generator(ai, c_self, z_row[static_cast<size_t>(i)],
                             g_all[static_cast<size_t>(i)], th_i, t,
                             signs[static_cast<size_t>(i)], spec.common_noise);
  for (int j = 0; j < n; ++j) {
    if (j == i) continue;
    const double c = spec.rho * ai.gamma * spec.lambda_n(i, j);
    const AgentParams& aj = spec.agents[static_cast<size_t>(j)];
    const Vec th_j = compute_theta(aj, t, signs[static_cast<size_t>(j)], spec.common_noise);
    const double h_val = th_j.dot(g_all[static_cast<size_t>(j)]) -
                         0.5 * g_all[static_cast<size_t>(j)].squaredNorm();
    f += detail::pair_generator(c, z_row[static_cast<size_t>(j)], g_all[static_cast<size_t>(j)],
                                h_val);
  }
  return f;
}

namespace detail {

inline void read_vec(const std::vector<double>& slice, long s, int d, Vec& out) {
  out.resize(d);
  for (int c = 0; c < d; ++c) out[c] = slice[static_cast<size_t>(s * d + c)];
}

inline void write_vec(std::vector<double>& slice, long s, const Vec& v) {
  for (int c = 0; c < v.size(); ++c) slice[static_cast<size_t>(s * v.size() + c)] = v[c];
}

// One backward sweep of agent j's own component. When frozen_z is non-null
// the generator is evaluated at those loadings (Picard step); the fresh
// loadings are always extracted from the next slice.
inline void sweep_diag(const GameSpec& spec, int j, StateKind kind, Table& y, Table& z,
                       Table& gtab, Table& htab, Table& thtab, const Table* frozen_z,
                       const Table* frozen_g) {
  const AgentParams& a = spec.agents[static_cast<size_t>(j)];
  const int d = a.d();
  const double dt = spec.dt();
  const double sdt = std::sqrt(dt);
  const double c_self = spec.rho * a.gamma * spec.lambda_n(j, j);
  Vec zv(d), gv(d), th(d), zgen(d);
  for (int t = spec.steps - 1; t >= 0; --t) {
    const long ns = Lattice::state_count(kind, t);
    for (long s = 0; s < ns; ++s) {
      const auto st = slice_stats(y[static_cast<size_t>(t + 1)], kind, t, s, sdt);
      zv.setZero(d);
      zv[0] = st.loading;
      const int sign = (kind == StateKind::Sign) ? Lattice::sign_of(kind, t, s) : 0;
      th = compute_theta(a, t, sign, spec.common_noise);
      if (frozen_z) {
        read_vec((*frozen_z)[static_cast<size_t>(t)], s, d, zgen);
        read_vec((*frozen_g)[static_cast<size_t>(t)], s, d, gv);
      } else {
        zgen = zv;
        gv = g_from_z(a, c_self, t, sign, zgen, th, spec.common_noise);
      }
      const double f = own_generator(a, c_self, zgen, gv, th, t, sign, spec.common_noise);
      y[static_cast<size_t>(t)][static_cast<size_t>(s)] = st.expect + f * dt;
      write_vec(z[static_cast<size_t>(t)], s, zv);
      // Equilibrium fields follow the fresh loading.
      const Vec geq = g_from_z(a, c_self, t, sign, zv, th, spec.common_noise);
      write_vec(gtab[static_cast<size_t>(t)], s, geq);
      write_vec(thtab[static_cast<size_t>(t)], s, th);
      htab[static_cast<size_t>(t)][static_cast<size_t>(s)] =
          th.dot(geq) - 0.5 * geq.squaredNorm();
    }
  }
}

inline void sweep_pair(const GameSpec& spec, double c, StateKind kind_j, int d_j,
                       const Table& g_j, const Table& h_j, Table& y, Table& z,
                       const Table* frozen_z) {
  const double dt = spec.dt();
  const double sdt = std::sqrt(dt);
  Vec zv(d_j), gv(d_j), zgen(d_j);
  for (int t = spec.steps - 1; t >= 0; --t) {
    const long ns = Lattice::state_count(kind_j, t);
    for (long s = 0; s < ns; ++s) {
      const auto st = slice_stats(y[static_cast<size_t>(t + 1)], kind_j, t, s, sdt);
      zv.setZero(d_j);
      zv[0] = st.loading;
      read_vec(g_j[static_cast<size_t>(t)], s, d_j, gv);
      if (frozen_z)
        read_vec((*frozen_z)[static_cast<size_t>(t)], s, d_j, zgen);
      else
        zgen = zv;
      const double f =
          pair_generator(c, zgen, gv, h_j[static_cast<size_t>(t)][static_cast<size_t>(s)]);
      y[static_cast<size_t>(t)][static_cast<size_t>(s)] = st.expect + f * dt;
      write_vec(z[static_cast<size_t>(t)], s, zv);
    }
  }
}

inline double table_gap(const Table& a, const Table& b) {
  double m = 0.0;
  for (size_t t = 0; t < a.size(); ++t)
    for (size_t k = 0; k < a[t].size(); ++k) m = std::max(m, std::abs(a[t][k] - b[t][k]));
  return m;
}

// The generator depends on the loading fields only; the strategy inputs are
// functions of the (frozen) own loadings and must track them.
inline void refresh_frozen_strategy(const GameSpec& spec, int j, StateKind kind,
                                    const Table& fz_diag_j, Table& fz_g_j, Table& fz_h_j) {
  const AgentParams& a = spec.agents[static_cast<size_t>(j)];
  const double c_self = spec.rho * a.gamma * spec.lambda_n(j, j);
  Vec zv(a.d());
  for (int t = 0; t < spec.steps; ++t) {
    const long ns = Lattice::state_count(kind, t);
    for (long s = 0; s < ns; ++s) {
      read_vec(fz_diag_j[static_cast<size_t>(t)], s, a.d(), zv);
      const int sign = (kind == StateKind::Sign) ? Lattice::sign_of(kind, t, s) : 0;
      const Vec th = compute_theta(a, t, sign, spec.common_noise);
      const Vec gv = g_from_z(a, c_self, t, sign, zv, th, spec.common_noise);
      write_vec(fz_g_j[static_cast<size_t>(t)], s, gv);
      fz_h_j[static_cast<size_t>(t)][static_cast<size_t>(s)] =
          th.dot(gv) - 0.5 * gv.squaredNorm();
    }
  }
}

inline void blend(Table& target, const Table& fresh, double damping) {
  for (size_t t = 0; t < target.size(); ++t)
    for (size_t k = 0; k < target[t].size(); ++k)
      target[t][k] = damping * fresh[t][k] + (1.0 - damping) * target[t][k];
}

}  // namespace detail

inline NAgentSolution solve_n_agent_bsde(const GameSpec& spec, Scheme scheme = Scheme::Explicit,
                                         double tol = 1e-12, int max_iter = 100,
                                         double damping = 1.0) {
  ensure_valid(spec);
  if (spec.mode != Mode::Finite)
    throw ValidationError("solve_n_agent_bsde expects a finite-population model");
  if (spec.common_noise)
    throw ValidationError(
        "solve_n_agent_bsde covers the idiosyncratic model; use the mean-field solver for "
        "common noise");
  const int n = spec.n();

  NAgentSolution sol;
  sol.spec = spec;
  sol.kinds.resize(static_cast<size_t>(n));
  sol.y_diag.resize(static_cast<size_t>(n));
  sol.z_diag.resize(static_cast<size_t>(n));
  sol.g.resize(static_cast<size_t>(n));
  sol.pi.resize(static_cast<size_t>(n));
  sol.theta.resize(static_cast<size_t>(n));
  sol.h.resize(static_cast<size_t>(n));
  sol.y_off.assign(static_cast<size_t>(n), std::vector<Table>(static_cast<size_t>(n)));
  sol.z_off.assign(static_cast<size_t>(n), std::vector<Table>(static_cast<size_t>(n)));

  for (int j = 0; j < n; ++j) {
    const AgentParams& a = spec.agents[static_cast<size_t>(j)];
    const StateKind kind = detail::own_axis_kind(a);
    sol.kinds[static_cast<size_t>(j)] = kind;
    sol.y_diag[static_cast<size_t>(j)] = detail::zero_table(kind, spec.steps, 1, true);
    sol.z_diag[static_cast<size_t>(j)] = detail::zero_table(kind, spec.steps, a.d(), false);
    sol.g[static_cast<size_t>(j)] = detail::zero_table(kind, spec.steps, a.d(), false);
    sol.pi[static_cast<size_t>(j)] = detail::zero_table(kind, spec.steps, a.d(), false);
    sol.theta[static_cast<size_t>(j)] = detail::zero_table(kind, spec.steps, a.d(), false);
    sol.h[static_cast<size_t>(j)] = detail::zero_table(kind, spec.steps, 1, false);
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (j == i || sol.coupling(i, j) == 0.0) continue;
      const StateKind kj = sol.kinds[static_cast<size_t>(j)];
      const int dj = spec.agents[static_cast<size_t>(j)].d();
      sol.y_off[static_cast<size_t>(i)][static_cast<size_t>(j)] =
          detail::zero_table(kj, spec.steps, 1, true);
      sol.z_off[static_cast<size_t>(i)][static_cast<size_t>(j)] =
          detail::zero_table(kj, spec.steps, dj, false);
    }

  if (scheme == Scheme::Explicit) {
    for (int j = 0; j < n; ++j)
      detail::sweep_diag(spec, j, sol.kinds[static_cast<size_t>(j)],
                         sol.y_diag[static_cast<size_t>(j)], sol.z_diag[static_cast<size_t>(j)],
                         sol.g[static_cast<size_t>(j)], sol.h[static_cast<size_t>(j)],
                         sol.theta[static_cast<size_t>(j)], nullptr, nullptr);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (sol.y_off[static_cast<size_t>(i)][static_cast<size_t>(j)].empty()) continue;
        detail::sweep_pair(spec, sol.coupling(i, j), sol.kinds[static_cast<size_t>(j)],
                           spec.agents[static_cast<size_t>(j)].d(), sol.g[static_cast<size_t>(j)],
                           sol.h[static_cast<size_t>(j)],
                           sol.y_off[static_cast<size_t>(i)][static_cast<size_t>(j)],
                           sol.z_off[static_cast<size_t>(i)][static_cast<size_t>(j)], nullptr);
      }
  } else {
    // Damped Picard iteration: freeze every loading input, sweep, re-extract.
    std::vector<Table> fz_diag(static_cast<size_t>(n)), fz_g(static_cast<size_t>(n)),
        fz_h(static_cast<size_t>(n));
    std::vector<std::vector<Table>> fz_off(static_cast<size_t>(n),
                                           std::vector<Table>(static_cast<size_t>(n)));
    for (int j = 0; j < n; ++j) {
      fz_diag[static_cast<size_t>(j)] = sol.z_diag[static_cast<size_t>(j)];
      fz_g[static_cast<size_t>(j)] = sol.g[static_cast<size_t>(j)];
      fz_h[static_cast<size_t>(j)] = sol.h[static_cast<size_t>(j)];
      detail::refresh_frozen_strategy(spec, j, sol.kinds[static_cast<size_t>(j)],
                                      fz_diag[static_cast<size_t>(j)],
                                      fz_g[static_cast<size_t>(j)], fz_h[static_cast<size_t>(j)]);
      for (int i = 0; i < n; ++i)
        fz_off[static_cast<size_t>(i)][static_cast<size_t>(j)] =
            sol.z_off[static_cast<size_t>(i)][static_cast<size_t>(j)];
    }
    for (int it = 0; it < max_iter; ++it) {
      double delta = 0.0;
      for (int j = 0; j < n; ++j) {
        Table y_prev = sol.y_diag[static_cast<size_t>(j)];
        detail::sweep_diag(spec, j, sol.kinds[static_cast<size_t>(j)],
                           sol.y_diag[static_cast<size_t>(j)],
                           sol.z_diag[static_cast<size_t>(j)], sol.g[static_cast<size_t>(j)],
                           sol.h[static_cast<size_t>(j)], sol.theta[static_cast<size_t>(j)],
                           &fz_diag[static_cast<size_t>(j)], &fz_g[static_cast<size_t>(j)]);
        delta = std::max(delta, detail::table_gap(y_prev, sol.y_diag[static_cast<size_t>(j)]));
        delta = std::max(delta, detail::table_gap(fz_diag[static_cast<size_t>(j)],
                                                  sol.z_diag[static_cast<size_t>(j)]));
      }
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          if (sol.y_off[static_cast<size_t>(i)][static_cast<size_t>(j)].empty()) continue;
          Table y_prev = sol.y_off[static_cast<size_t>(i)][static_cast<size_t>(j)];
          detail::sweep_pair(spec, sol.coupling(i, j), sol.kinds[static_cast<size_t>(j)],
                             spec.agents[static_cast<size_t>(j)].d(),
                             fz_g[static_cast<size_t>(j)], fz_h[static_cast<size_t>(j)],
                             sol.y_off[static_cast<size_t>(i)][static_cast<size_t>(j)],
                             sol.z_off[static_cast<size_t>(i)][static_cast<size_t>(j)],
                             &fz_off[static_cast<size_t>(i)][static_cast<size_t>(j)]);
          delta = std::max(
              delta, detail::table_gap(y_prev,
                                       sol.y_off[static_cast<size_t>(i)][static_cast<size_t>(j)]));
          delta = std::max(
              delta, detail::table_gap(fz_off[static_cast<size_t>(i)][static_cast<size_t>(j)],
                                       sol.z_off[static_cast<size_t>(i)][static_cast<size_t>(j)]));
        }
      sol.trace.deltas.push_back(delta);
      sol.trace.iterations = it + 1;
      for (int j = 0; j < n; ++j) {
        detail::blend(fz_diag[static_cast<size_t>(j)], sol.z_diag[static_cast<size_t>(j)],
                      damping);
        detail::refresh_frozen_strategy(spec, j, sol.kinds[static_cast<size_t>(j)],
                                        fz_diag[static_cast<size_t>(j)],
                                        fz_g[static_cast<size_t>(j)],
                                        fz_h[static_cast<size_t>(j)]);
        for (int i = 0; i < n; ++i)
          if (!sol.z_off[static_cast<size_t>(i)][static_cast<size_t>(j)].empty())
            detail::blend(fz_off[static_cast<size_t>(i)][static_cast<size_t>(j)],
                          sol.z_off[static_cast<size_t>(i)][static_cast<size_t>(j)], damping);
      }
      if (delta <= tol) {
        sol.trace.converged = true;
        break;
      }
      sol.trace.converged = false;
    }
    if (!sol.trace.converged) {
      char buf[160];
      std::snprintf(buf, sizeof(buf),
                    "picard iteration did not reach tol=%.3e in %d iterations (last delta %.3e)",
                    tol, max_iter, sol.trace.deltas.back());
      throw SolverError(buf);
    }
    // The fixed point has exact loadings; finish with one explicit pass so
    // the reported fields satisfy the scheme identities to round-off.
    for (int j = 0; j < n; ++j)
      detail::sweep_diag(spec, j, sol.kinds[static_cast<size_t>(j)],
                         sol.y_diag[static_cast<size_t>(j)], sol.z_diag[static_cast<size_t>(j)],
                         sol.g[static_cast<size_t>(j)], sol.h[static_cast<size_t>(j)],
                         sol.theta[static_cast<size_t>(j)], nullptr, nullptr);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (sol.y_off[static_cast<size_t>(i)][static_cast<size_t>(j)].empty()) continue;
        detail::sweep_pair(spec, sol.coupling(i, j), sol.kinds[static_cast<size_t>(j)],
                           spec.agents[static_cast<size_t>(j)].d(), sol.g[static_cast<size_t>(j)],
                           sol.h[static_cast<size_t>(j)],
                           sol.y_off[static_cast<size_t>(i)][static_cast<size_t>(j)],
                           sol.z_off[static_cast<size_t>(i)][static_cast<size_t>(j)], nullptr);
      }
  }

  // Strategies, set membership, values.
  sol.curly_y0.resize(n);
  sol.y0.resize(n);
  sol.values.resize(n);
  for (int j = 0; j < n; ++j) {
    const AgentParams& a = spec.agents[static_cast<size_t>(j)];
    Vec gv(a.d());
    for (int t = 0; t < spec.steps; ++t) {
      const long ns = sol.states(j, t);
      for (long s = 0; s < ns; ++s) {
        detail::read_vec(sol.g[static_cast<size_t>(j)][static_cast<size_t>(t)], s, a.d(), gv);
        const int sign = (sol.kinds[static_cast<size_t>(j)] == StateKind::Sign)
                             ? Lattice::sign_of(StateKind::Sign, t, s)
                             : 0;
        const Vec p = detail::strategy_from_g(a, t, sign, gv, spec.common_noise);
        detail::write_vec(sol.pi[static_cast<size_t>(j)][static_cast<size_t>(t)], s, p);
        const Vec proj = project(a.constraint, p);
        const double dev = (proj - p).norm();
        if (dev > 1e-10) {
          ++sol.strategy_set_violations;
          sol.max_strategy_set_deviation = std::max(sol.max_strategy_set_deviation, dev);
        }
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    double cy = sol.y_diag[static_cast<size_t>(i)][0][0];
    for (int j = 0; j < n; ++j)
      if (!sol.y_off[static_cast<size_t>(i)][static_cast<size_t>(j)].empty())
        cy += sol.y_off[static_cast<size_t>(i)][static_cast<size_t>(j)][0][0];
    sol.curly_y0[i] = cy;
    double shift = 0.0;
    for (int j = 0; j < n; ++j)
      shift += sol.coupling(i, j) * std::log(spec.agents[static_cast<size_t>(j)].x0);
    sol.y0[i] = cy - shift;
    const AgentParams& a = spec.agents[static_cast<size_t>(i)];
    sol.values[i] = std::pow(a.x0, a.gamma) / a.gamma * std::exp(sol.y0[i]);
  }
  return sol;
}

}  // namespace relperf
