#pragma once
// Equilibrium certification.
//
// Three independent devices:
//  * a multiplicative martingale certificate transplanting the continuous
//    verification argument to the lattice: the candidate-value process
//    R_{t+1} = R_t (1 + sum_f alpha_f xi_f) exp(f~ dt) satisfies
//    E_t[R_{t+1}] = R_t exp(f~ dt) exactly, f~ vanishes algebraically at the
//    solved strategies, and carries a sign for any admissible deviation;
//  * an exact best-response dynamic program on the joint product tree for
//    the true exponential utilities (the solved profile is an eps-equilibrium
//    of the exact lattice game, eps shrinking with dt and grid spacing);
//  * the finite-vs-mean-field convergence diagnostics: sup/BMO gaps, the
//    kernel-weighted coupling residuals, and the sampling moduli of the
//    interaction kernel.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "relperf/common.hpp"
#include "relperf/graphon.hpp"
#include "relperf/graphon_solver.hpp"
#include "relperf/lattice.hpp"
#include "relperf/model.hpp"
#include "relperf/n_agent.hpp"
#include "relperf/projection.hpp"

namespace relperf {

// --------------------------------------------------------------- BMO norms --

// Squared BMO norm of a loading table on one axis: max over nodes of the
// conditional remaining sum of |z|^2 dt.
inline double axis_bmo_sq(const Table& z, StateKind kind, int steps, double dt, int d) {
  std::vector<double> next(static_cast<size_t>(Lattice::state_count(kind, steps)), 0.0);
  double best = 0.0;
  for (int t = steps - 1; t >= 0; --t) {
    const long ns = Lattice::state_count(kind, t);
    std::vector<double> cur(static_cast<size_t>(ns), 0.0);
    for (long s = 0; s < ns; ++s) {
      double q = 0.0;
      for (int c = 0; c < d; ++c) {
        const double v = z[static_cast<size_t>(t)][static_cast<size_t>(s * d + c)];
        q += v * v;
      }
      const long dn = Lattice::child_state(kind, s, 0);
      const long up = Lattice::child_state(kind, s, 1);
      cur[static_cast<size_t>(s)] =
          q * dt + 0.5 * (next[static_cast<size_t>(dn)] + next[static_cast<size_t>(up)]);
      best = std::max(best, cur[static_cast<size_t>(s)]);
    }
    next = std::move(cur);
  }
  return best;
}

// Squared BMO norm of an adapted process (components summed), exact on the
// joint tree.
inline double bmo_norm_sq(const AdaptedProcess& f) {
  const Lattice& lat = *f.lat;
  AdaptedProcess b(lat, f.factors, 1);
  double best = 0.0;
  for (int t = lat.steps - 1; t >= 0; --t) {
    StateVec s(static_cast<size_t>(lat.F()), 0);
    do {
      double q = 0.0;
      for (int c = 0; c < f.components; ++c) {
        const double v = f.value(t, s, c);
        q += v * v;
      }
      b.value(t, s) = q * lat.dt + cond_expect1(b, t, s);
      best = std::max(best, b.value(t, s));
    } while (next_state(lat, f.factors, t, s));
  }
  return best;
}

// ------------------------------------------- martingale-optimality check --

struct MartingaleCheck {
  double r0 = 0.0;
  double max_equilibrium_drift = 0.0;  // max_node |exp(f~ dt) - 1| at the solution
  double max_residual = 0.0;           // node residual bound |R_t| * drift
  double positivity_margin = kInf;     // min_t (1 - sum_f max|alpha_f| sqrt(dt))
  int perturbations = 0;
  int direction_violations = 0;
  double worst_direction = -kInf;  // max sign(gamma) (exp(f~(pi') dt) - 1)

  bool equilibrium_pass(double tol = 1e-11) const { return max_residual <= tol; }
  bool pass(double tol = 1e-11) const {
    return equilibrium_pass(tol) && direction_violations == 0 && positivity_margin > 0.0;
  }
};

namespace detail {

// Drift exponent of the certificate under strategy ratio q = sigma^T pi:
//   f~ = gamma (1-gamma)/2 (|P(v) - v|^2 - |q - v|^2),
// nonpositive for gamma > 0 and nonnegative for gamma < 0 whenever pi stays
// in the constraint set; zero at the projected optimum.
inline double tilt(const AgentParams& a, const Vec& v, const Vec& pv, const Vec& q) {
  return a.gamma * (1.0 - a.gamma) / 2.0 * ((pv - v).squaredNorm() - (q - v).squaredNorm());
}

struct AxisMax {
  std::vector<double> per_step;  // max over states of the loading magnitude
};

}  // namespace detail

// Certificate for one agent of a solved finite game (zero self-weights).
inline MartingaleCheck check_martingale_optimality(const NAgentSolution& sol, int i,
                                                   int n_perturbations = 20, uint64_t seed = 7,
                                                   double magnitude = 0.25) {
  const GameSpec& spec = sol.spec;
  const AgentParams& ai = spec.agents[static_cast<size_t>(i)];
  if (spec.lambda_n(i, i) != 0.0)
    throw ValidationError("martingale certificate covers zero self-weights");
  const int n = spec.n();
  const int d = ai.d();
  const double dt = spec.dt();
  const double sdt = std::sqrt(dt);

  MartingaleCheck chk;
  chk.r0 = sol.values[i];

  // Equilibrium drift per own node and loading maxima per step.
  std::vector<double> load_max(static_cast<size_t>(spec.steps), 0.0);
  std::vector<double> drift_max(static_cast<size_t>(spec.steps), 0.0);
  Vec z(d), gv(d), th(d);
  for (int t = 0; t < spec.steps; ++t) {
    double sum_load = 0.0;
    // own factor loadings: curly-Z^{ii} + gamma sigma^T pi
    double own_max = 0.0;
    const long nsi = sol.states(i, t);
    for (long s = 0; s < nsi; ++s) {
      detail::read_vec(sol.z_diag[static_cast<size_t>(i)][static_cast<size_t>(t)], s, d, z);
      detail::read_vec(sol.g[static_cast<size_t>(i)][static_cast<size_t>(t)], s, d, gv);
      detail::read_vec(sol.theta[static_cast<size_t>(i)][static_cast<size_t>(t)], s, d, th);
      double acc = 0.0;
      for (int c = 0; c < d; ++c) acc += std::abs(z[c] + ai.gamma * gv[c]) * sdt;
      own_max = std::max(own_max, acc);
      const Vec v = (z + th) / (1.0 - ai.gamma);
      const int sign = (sol.kinds[static_cast<size_t>(i)] == StateKind::Sign)
                           ? Lattice::sign_of(StateKind::Sign, t, s)
                           : 0;
      const Mat M = stacked_sigma(ai, t, sign, false).transpose();
      const Vec pv = project_transformed(M, ai.constraint, v);
      const double f = detail::tilt(ai, v, pv, gv);
      drift_max[static_cast<size_t>(t)] =
          std::max(drift_max[static_cast<size_t>(t)], std::abs(std::expm1(f * dt)));
    }
    sum_load += own_max;
    // opponents' factors: the decoupled loadings curly-Z^{ij} - c_ij g^j
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double c_ij = sol.coupling(i, j);
      const int dj = spec.agents[static_cast<size_t>(j)].d();
      const long nsj = sol.states(j, t);
      double jm = 0.0;
      Vec zj(dj), gj(dj);
      const bool have_off = !sol.z_off[static_cast<size_t>(i)][static_cast<size_t>(j)].empty();
      for (long s = 0; s < nsj; ++s) {
        if (have_off)
          detail::read_vec(sol.z_off[static_cast<size_t>(i)][static_cast<size_t>(j)]
                                    [static_cast<size_t>(t)],
                           s, dj, zj);
        else
          zj.setZero(dj);
        detail::read_vec(sol.g[static_cast<size_t>(j)][static_cast<size_t>(t)], s, dj, gj);
        double acc = 0.0;
        for (int c = 0; c < dj; ++c) acc += std::abs(zj[c] - c_ij * gj[c]) * sdt;
        jm = std::max(jm, acc);
      }
      sum_load += jm;
    }
    load_max[static_cast<size_t>(t)] = sum_load;
    chk.positivity_margin = std::min(chk.positivity_margin, 1.0 - sum_load);
  }
  // |R_t| growth bound and per-node residual bound
  double rbar = std::abs(chk.r0);
  for (int t = 0; t < spec.steps; ++t) {
    chk.max_equilibrium_drift = std::max(chk.max_equilibrium_drift, drift_max[static_cast<size_t>(t)]);
    chk.max_residual = std::max(chk.max_residual, rbar * drift_max[static_cast<size_t>(t)]);
    rbar *= (1.0 + load_max[static_cast<size_t>(t)]) *
            std::exp(drift_max[static_cast<size_t>(t)]);
  }

  // Random adapted deviations of agent i, projected into the constraint set.
  Rng rng(seed);
  const double sgn = ai.gamma > 0.0 ? 1.0 : -1.0;
  for (int p = 0; p < n_perturbations; ++p) {
    const double delta = magnitude * rng.uniform(0.1, 1.0);
    for (int t = 0; t < spec.steps; ++t) {
      const long nsi = sol.states(i, t);
      for (long s = 0; s < nsi; ++s) {
        Vec pi(d);
        detail::read_vec(sol.pi[static_cast<size_t>(i)][static_cast<size_t>(t)], s, d, pi);
        for (int c = 0; c < d; ++c) pi[c] += delta * rng.uniform(-1.0, 1.0);
        pi = project(ai.constraint, pi);
        detail::read_vec(sol.z_diag[static_cast<size_t>(i)][static_cast<size_t>(t)], s, d, z);
        detail::read_vec(sol.theta[static_cast<size_t>(i)][static_cast<size_t>(t)], s, d, th);
        const int sign = (sol.kinds[static_cast<size_t>(i)] == StateKind::Sign)
                             ? Lattice::sign_of(StateKind::Sign, t, s)
                             : 0;
        const Mat Sig = stacked_sigma(ai, t, sign, false);
        const Vec q = Sig.transpose() * pi;
        const Vec v = (z + th) / (1.0 - ai.gamma);
        const Vec pv = project_transformed(Sig.transpose(), ai.constraint, v);
        const double dir = sgn * std::expm1(detail::tilt(ai, v, pv, q) * dt);
        chk.worst_direction = std::max(chk.worst_direction, dir);
        if (dir > 1e-14) ++chk.direction_violations;
      }
    }
    ++chk.perturbations;
  }
  return chk;
}

// Certificate for one type of a solved mean-field game (no common factor):
// the frozen aggregate does not involve the type's own strategy, so the tilt
// algebra is unchanged.
inline MartingaleCheck check_martingale_optimality(const GraphonSolution& sol, int k,
                                                   int n_perturbations = 20, uint64_t seed = 7,
                                                   double magnitude = 0.25) {
  const GameSpec& spec = sol.spec;
  const TypeSolution& ts = sol.types[static_cast<size_t>(k)];
  const AgentParams& a = ts.agent;
  const int d = a.d();
  const double dt = spec.dt();
  const double sdt = std::sqrt(dt);

  MartingaleCheck chk;
  chk.r0 = sol.values[k];
  std::vector<double> load_max(static_cast<size_t>(spec.steps), 0.0);
  std::vector<double> drift_max(static_cast<size_t>(spec.steps), 0.0);
  Vec z(d), gv(d), th(d);
  for (int t = 0; t < spec.steps; ++t) {
    const long ns = Lattice::state_count(ts.kind, t);
    double lm = 0.0;
    for (long s = 0; s < ns; ++s) {
      detail::read_vec(ts.z[static_cast<size_t>(t)], s, d, z);
      detail::read_vec(ts.g[static_cast<size_t>(t)], s, d, gv);
      detail::read_vec(ts.theta[static_cast<size_t>(t)], s, d, th);
      double acc = 0.0;
      for (int c = 0; c < d; ++c) acc += std::abs(z[c] + a.gamma * gv[c]) * sdt;
      lm = std::max(lm, acc);
      const Vec v = (z + th) / (1.0 - a.gamma);
      const int sign =
          (ts.kind == StateKind::Sign) ? Lattice::sign_of(StateKind::Sign, t, s) : 0;
      const Mat M = stacked_sigma(a, t, sign, false).transpose();
      const Vec pv = project_transformed(M, a.constraint, v);
      drift_max[static_cast<size_t>(t)] = std::max(
          drift_max[static_cast<size_t>(t)], std::abs(std::expm1(detail::tilt(a, v, pv, gv) * dt)));
    }
    load_max[static_cast<size_t>(t)] = lm;
    chk.positivity_margin = std::min(chk.positivity_margin, 1.0 - lm);
  }
  double rbar = std::abs(chk.r0);
  for (int t = 0; t < spec.steps; ++t) {
    chk.max_equilibrium_drift = std::max(chk.max_equilibrium_drift, drift_max[static_cast<size_t>(t)]);
    chk.max_residual = std::max(chk.max_residual, rbar * drift_max[static_cast<size_t>(t)]);
    rbar *= (1.0 + load_max[static_cast<size_t>(t)]) * std::exp(drift_max[static_cast<size_t>(t)]);
  }

  Rng rng(seed);
  const double sgn = a.gamma > 0.0 ? 1.0 : -1.0;
  for (int p = 0; p < n_perturbations; ++p) {
    const double delta = magnitude * rng.uniform(0.1, 1.0);
    for (int t = 0; t < spec.steps; ++t) {
      const long ns = Lattice::state_count(ts.kind, t);
      for (long s = 0; s < ns; ++s) {
        Vec pi(d);
        detail::read_vec(ts.pi[static_cast<size_t>(t)], s, d, pi);
        for (int c = 0; c < d; ++c) pi[c] += delta * rng.uniform(-1.0, 1.0);
        pi = project(a.constraint, pi);
        detail::read_vec(ts.z[static_cast<size_t>(t)], s, d, z);
        detail::read_vec(ts.theta[static_cast<size_t>(t)], s, d, th);
        const int sign =
            (ts.kind == StateKind::Sign) ? Lattice::sign_of(StateKind::Sign, t, s) : 0;
        const Mat Sig = stacked_sigma(a, t, sign, false);
        const Vec q = Sig.transpose() * pi;
        const Vec v = (z + th) / (1.0 - a.gamma);
        const Vec pv = project_transformed(Sig.transpose(), a.constraint, v);
        const double dir = sgn * std::expm1(detail::tilt(a, v, pv, q) * dt);
        chk.worst_direction = std::max(chk.worst_direction, dir);
        if (dir > 1e-14) ++chk.direction_violations;
      }
    }
    ++chk.perturbations;
  }
  return chk;
}

// ---------------------------------------------------------- best response --

struct BestResponse {
  double value = 0.0;          // optimal exact-DP value against the others
  double claimed_value = 0.0;  // claimed strategy re-evaluated on the same DP
  double gain = 0.0;           // value - claimed_value (>= 0 up to round-off)
  double solver_value = 0.0;   // scheme value, for reference
  int grid_points = 0;
  double spacing = 0.0;
};

namespace detail {

inline std::vector<double> strategy_grid(const ConstraintSet& A, int points, double* spacing) {
  const Interval J = interval_of(A);
  const double lo = std::max(J.lo, -5.0);
  const double hi = std::min(J.hi, 5.0);
  if (!(lo <= hi)) throw ValidationError("constraint set does not meet the search box");
  std::vector<double> g(static_cast<size_t>(points));
  if (points == 1) {
    g[0] = lo;
    *spacing = 0.0;
    return g;
  }
  const double step = (hi - lo) / (points - 1);
  for (int k = 0; k < points; ++k) g[static_cast<size_t>(k)] = lo + step * k;
  *spacing = step;
  return g;
}

}  // namespace detail

// Exact dynamic program for agent i's best deviation against the solved
// profile, over a uniform strategy grid on the constraint interval plus the
// claimed strategy itself. One risky asset per agent, no common factor.
inline BestResponse best_response(const NAgentSolution& sol, int i, int grid_points = 101,
                                  const Table* claimed_override = nullptr) {
  const GameSpec& spec = sol.spec;
  const int n = spec.n();
  for (const auto& a : spec.agents)
    if (a.d() != 1)
      throw ValidationError("best_response supports one risky asset per agent");
  const AgentParams& ai = spec.agents[static_cast<size_t>(i)];
  const double dt = spec.dt();
  const double sdt = std::sqrt(dt);
  const double kappa = 1.0 - spec.rho * spec.lambda_n(i, i);
  const Table& claimed = claimed_override ? *claimed_override : sol.pi[static_cast<size_t>(i)];

  BestResponse br;
  br.grid_points = grid_points;
  br.solver_value = sol.values[i];
  const auto grid = detail::strategy_grid(ai.constraint, grid_points, &br.spacing);

  auto counts_at = [&](int t) {
    std::vector<long> c(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j)
      c[static_cast<size_t>(j)] = Lattice::state_count(sol.kinds[static_cast<size_t>(j)], t);
    return c;
  };
  auto total_of = [](const std::vector<long>& c) {
    long p = 1;
    for (long v : c) p *= v;
    return p;
  };

  std::vector<double> h_opt(static_cast<size_t>(total_of(counts_at(spec.steps))), 1.0);
  std::vector<double> h_cl = h_opt;

  std::vector<long> sj(static_cast<size_t>(n));
  std::vector<long> child(static_cast<size_t>(n));
  for (int t = spec.steps - 1; t >= 0; --t) {
    const auto cnt = counts_at(t);
    const auto cnt1 = counts_at(t + 1);
    const long total = total_of(cnt);
    std::vector<double> nopt(static_cast<size_t>(total), 0.0), ncl(static_cast<size_t>(total), 0.0);
    std::fill(sj.begin(), sj.end(), 0);
    for (long node = 0; node < total; ++node) {
      // opponents' log-wealth increments per move, and own market data
      std::vector<double> inc_dn(static_cast<size_t>(n), 0.0), inc_up(static_cast<size_t>(n), 0.0);
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const double w = spec.rho * spec.lambda_n(i, j);
        if (w == 0.0) continue;
        const double g =
            sol.g[static_cast<size_t>(j)][static_cast<size_t>(t)][static_cast<size_t>(sj[static_cast<size_t>(j)])];
        const double thj =
            sol.theta[static_cast<size_t>(j)][static_cast<size_t>(t)][static_cast<size_t>(sj[static_cast<size_t>(j)])];
        const double drift = (thj * g - 0.5 * g * g) * dt;
        inc_dn[static_cast<size_t>(j)] = -w * (drift - g * sdt);
        inc_up[static_cast<size_t>(j)] = -w * (drift + g * sdt);
      }
      const int sign_i = (sol.kinds[static_cast<size_t>(i)] == StateKind::Sign)
                             ? Lattice::sign_of(StateKind::Sign, t, sj[static_cast<size_t>(i)])
                             : 0;
      const double sig = ai.sigma.at(t)(0, 0);
      const double thi = compute_theta(ai, t, sign_i, false)(0);

      // candidate evaluation over all 2^n move combinations
      auto eval = [&](double p) {
        const double q = sig * p;
        const double own_drift = kappa * (q * thi - 0.5 * q * q) * dt;
        double acc = 0.0;
        for (long mv = 0; mv < (1L << n); ++mv) {
          double expo = own_drift + kappa * (((mv >> i) & 1) ? q * sdt : -q * sdt);
          long cidx = 0;
          for (int j = 0; j < n; ++j) {
            const int m = static_cast<int>((mv >> j) & 1);
            if (j != i)
              expo += m ? inc_up[static_cast<size_t>(j)] : inc_dn[static_cast<size_t>(j)];
            child[static_cast<size_t>(j)] =
                Lattice::child_state(sol.kinds[static_cast<size_t>(j)], sj[static_cast<size_t>(j)], m);
            cidx = cidx * cnt1[static_cast<size_t>(j)] + child[static_cast<size_t>(j)];
          }
          acc += std::exp(ai.gamma * expo) * h_opt[static_cast<size_t>(cidx)];
        }
        return acc / static_cast<double>(1L << n);
      };
      auto eval_cl = [&](double p) {
        const double q = sig * p;
        const double own_drift = kappa * (q * thi - 0.5 * q * q) * dt;
        double acc = 0.0;
        for (long mv = 0; mv < (1L << n); ++mv) {
          double expo = own_drift + kappa * (((mv >> i) & 1) ? q * sdt : -q * sdt);
          long cidx = 0;
          for (int j = 0; j < n; ++j) {
            const int m = static_cast<int>((mv >> j) & 1);
            if (j != i)
              expo += m ? inc_up[static_cast<size_t>(j)] : inc_dn[static_cast<size_t>(j)];
            child[static_cast<size_t>(j)] =
                Lattice::child_state(sol.kinds[static_cast<size_t>(j)], sj[static_cast<size_t>(j)], m);
            cidx = cidx * cnt1[static_cast<size_t>(j)] + child[static_cast<size_t>(j)];
          }
          acc += std::exp(ai.gamma * expo) * h_cl[static_cast<size_t>(cidx)];
        }
        return acc / static_cast<double>(1L << n);
      };

      const double p_claimed =
          claimed[static_cast<size_t>(t)][static_cast<size_t>(sj[static_cast<size_t>(i)])];
      const bool maximize = ai.gamma > 0.0;
      double best = eval(p_claimed);
      for (double p : grid) {
        const double v = eval(p);
        if (maximize ? v > best : v < best) best = v;
      }
      nopt[static_cast<size_t>(node)] = best;
      ncl[static_cast<size_t>(node)] = eval_cl(p_claimed);

      // odometer over per-agent states (last agent fastest)
      for (int j = n - 1; j >= 0; --j) {
        if (++sj[static_cast<size_t>(j)] < cnt[static_cast<size_t>(j)]) break;
        sj[static_cast<size_t>(j)] = 0;
      }
    }
    h_opt = std::move(nopt);
    h_cl = std::move(ncl);
  }

  double pref = kappa * std::log(ai.x0);
  for (int j = 0; j < n; ++j)
    if (j != i)
      pref -= spec.rho * spec.lambda_n(i, j) * std::log(spec.agents[static_cast<size_t>(j)].x0);
  const double scale = std::exp(ai.gamma * pref) / ai.gamma;
  br.value = scale * h_opt[0];
  br.claimed_value = scale * h_cl[0];
  br.gain = br.value - br.claimed_value;
  return br;
}

struct NashCertificate {
  double eps = 0.0;
  double cost_scale = 0.0;  // eps / (dt + spacing), recorded calibration
  double dt = 0.0;
  double spacing = 0.0;
  std::vector<BestResponse> responses;
  double max_gain = 0.0;
  bool pass = false;
};

inline NashCertificate certify_nash(const NAgentSolution& sol, double eps, int grid_points = 101) {
  NashCertificate cert;
  cert.eps = eps;
  cert.dt = sol.spec.dt();
  for (int i = 0; i < sol.spec.n(); ++i) {
    cert.responses.push_back(best_response(sol, i, grid_points));
    cert.spacing = std::max(cert.spacing, cert.responses.back().spacing);
    cert.max_gain = std::max(cert.max_gain, cert.responses.back().gain);
  }
  cert.cost_scale = eps / (cert.dt + cert.spacing);
  cert.pass = cert.max_gain <= eps;
  return cert;
}

// ------------------------------------------------- convergence experiment --

struct ConvergenceRow {
  int n = 0;
  double strategy_gap = 0.0;
  double value_gap = 0.0;
  double y_gap = 0.0;     // sup_t sup_omega |coupled Y^{i,n} - Y^{i/n}|, max_i
  double dz_bmo = 0.0;    // max_i sqrt(sum_j ||dZ^{ij}||_BMO^2)
  double lhs = 0.0;       // max_i (y_gap_i^2 / 2 + sum_j ||dZ^{ij}||^2)
  double gamma1_bmo = 0.0;  // max_i || sqrt|Gamma1_i| ||_BMO^2
  double gamma2_bmo = 0.0;
  double a_max = 0.0;
  double rhs = 0.0;  // a_max^2
  bool dominance_ok = false;
  std::string gamma_method;  // "exact" or "cs-upper"
  double scaled_l2 = 0.0;    // n ||G_n - G||_2^2
  double modulus = 0.0;      // sampling modulus of the kernel
  double l1_gap = 0.0;       // max_i int |G_n(i/n,.) - G(i/n,.)|
  double chain_rhs = 0.0;    // 2 scaled_l2 + 2 modulus
  bool chain_ok = false;
  double logx_gap = 0.0;
};

namespace detail {

// mean/variance/extremes of a per-state table row under the axis marginal
struct RowStats {
  double mean = 0.0, var = 0.0, lo = 0.0, hi = 0.0;
};

inline RowStats row_stats(const std::vector<double>& row, const std::vector<double>& probs) {
  RowStats r;
  r.lo = kInf;
  r.hi = -kInf;
  for (size_t s = 0; s < probs.size(); ++s) {
    r.mean += probs[s] * row[s];
    r.lo = std::min(r.lo, row[s]);
    r.hi = std::max(r.hi, row[s]);
  }
  for (size_t s = 0; s < probs.size(); ++s) {
    const double d = row[s] - r.mean;
    r.var += probs[s] * d * d;
  }
  return r;
}

}  // namespace detail

inline std::vector<ConvergenceRow> convergence_experiment(const GameSpec& gspec,
                                                          const std::vector<int>& ns) {
  ensure_valid(gspec);
  if (gspec.mode != Mode::Graphon || gspec.common_noise)
    throw ValidationError("convergence_experiment expects an idiosyncratic mean-field spec");
  const GraphonSolution gsol = solve_graphon_bsde_no_common(gspec);
  const int N = gspec.steps;
  const double dt = gspec.dt();
  const auto grid_m = type_grid(gspec.types);
  const int m = static_cast<int>(grid_m.size());
  const PopulationModuli mod = population_moduli(gspec);

  // deterministic kernel-weighted means from the mean-field solution
  // (per type of the quadrature grid): E[theta.g] and E[|g|^2]
  std::vector<std::vector<double>> e_tg(static_cast<size_t>(m)),
      e_gg(static_cast<size_t>(m));
  for (int v = 0; v < m; ++v) {
    const TypeSolution& ts = gsol.types[static_cast<size_t>(v)];
    const int d = ts.agent.d();
    e_tg[static_cast<size_t>(v)].assign(static_cast<size_t>(N), 0.0);
    e_gg[static_cast<size_t>(v)].assign(static_cast<size_t>(N), 0.0);
    for (int t = 0; t < N; ++t) {
      const auto probs = state_probs(ts.kind, t);
      double atg = 0.0, agg = 0.0;
      for (long s = 0; s < static_cast<long>(probs.size()); ++s) {
        double tg = 0.0, gg = 0.0;
        for (int c = 0; c < d; ++c) {
          const double gv = ts.g[static_cast<size_t>(t)][static_cast<size_t>(s * d + c)];
          tg += ts.theta[static_cast<size_t>(t)][static_cast<size_t>(s * d + c)] * gv;
          gg += gv * gv;
        }
        atg += probs[static_cast<size_t>(s)] * tg;
        agg += probs[static_cast<size_t>(s)] * gg;
      }
      e_tg[static_cast<size_t>(v)][static_cast<size_t>(t)] = atg;
      e_gg[static_cast<size_t>(v)][static_cast<size_t>(t)] = agg;
    }
  }
  // growth constant of the constraint family (0 for full space)
  double c0 = 0.0;
  {
    Rng rng(gspec.seed + 11);
    for (double u : {0.0, 0.5, 1.0}) {
      const AgentParams a = agent_at_type(gspec, std::min(std::max(u, 1e-9), 1.0 - 1e-9));
      if (std::holds_alternative<FullSpace>(a.constraint)) continue;
      const Mat M = stacked_sigma(a, 0, 0, false).transpose();
      c0 = std::max(c0, growth_certificate(a.constraint, M, rng).c0);
    }
  }

  std::vector<ConvergenceRow> rows;
  for (int n : ns) {
    ConvergenceRow row;
    row.n = n;

    const GameSpec fin = finite_from_graphon(gspec, n);
    const NAgentSolution nsol = solve_n_agent_bsde(fin);
    std::vector<TypeSolution> tsols;
    tsols.reserve(static_cast<size_t>(n));
    for (int i = 1; i <= n; ++i)
      tsols.push_back(solve_type_at(gspec, gsol.aggregate, static_cast<double>(i) / n));

    double theta_sup = 0.0, r_bmo = 0.0;
    for (int i = 0; i < n; ++i) {
      const TypeSolution& ts = tsols[static_cast<size_t>(i)];
      const int d = ts.agent.d();
      for (int t = 0; t < N; ++t)
        for (size_t idx = 0; idx < ts.theta[static_cast<size_t>(t)].size(); ++idx)
          theta_sup = std::max(theta_sup, std::abs(ts.theta[static_cast<size_t>(t)][idx]));
      r_bmo = std::max(r_bmo, std::sqrt(axis_bmo_sq(ts.z, ts.kind, N, dt, d)));
    }

    double lhs_max = 0.0, dz_max = 0.0, a_max = 0.0;
    bool all_exact = true;
    for (int i = 0; i < n; ++i) {
      const TypeSolution& ts = tsols[static_cast<size_t>(i)];
      const AgentParams& a = ts.agent;
      const int d = a.d();
      const double ui = static_cast<double>(i + 1) / n;

      // strategy and value gaps
      for (int t = 0; t < N; ++t)
        for (size_t idx = 0; idx < ts.pi[static_cast<size_t>(t)].size(); ++idx)
          row.strategy_gap = std::max(
              row.strategy_gap,
              std::abs(nsol.pi[static_cast<size_t>(i)][static_cast<size_t>(t)][idx] -
                       ts.pi[static_cast<size_t>(t)][idx]));
      row.value_gap =
          std::max(row.value_gap, std::abs(nsol.values[i] - type_value(gspec, ts, grid_m)));
      {
        double fin_shift = 0.0;
        for (int j = 0; j < n; ++j)
          fin_shift += fin.lambda_n(i, j) * std::log(fin.agents[static_cast<size_t>(j)].x0);
        double lim_shift = 0.0;
        for (int v = 0; v < m; ++v)
          lim_shift += gspec.graphon(ui, grid_m[static_cast<size_t>(v)]) *
                       std::log(agent_at_type(gspec, grid_m[static_cast<size_t>(v)]).x0);
        lim_shift /= static_cast<double>(m);
        row.logx_gap = std::max(row.logx_gap, std::abs(fin_shift - lim_shift));
      }

      // sup gap of the coupled Y against the limit, via per-factor ranges
      double ygap_i = 0.0;
      for (int t = 0; t <= N; ++t) {
        const long nsi = Lattice::state_count(ts.kind, t);
        double amax = -kInf, amin = kInf;
        for (long s = 0; s < nsi; ++s) {
          const double dv = nsol.y_diag[static_cast<size_t>(i)][static_cast<size_t>(t)]
                                       [static_cast<size_t>(s)] -
                            ts.y[static_cast<size_t>(t)][static_cast<size_t>(s)];
          amax = std::max(amax, dv);
          amin = std::min(amin, dv);
        }
        double bsum_hi = 0.0, bsum_lo = 0.0;
        for (int j = 0; j < n; ++j) {
          const auto& yoff = nsol.y_off[static_cast<size_t>(i)][static_cast<size_t>(j)];
          if (j == i || yoff.empty()) continue;
          double bmax = -kInf, bmin = kInf;
          for (double v : yoff[static_cast<size_t>(t)]) {
            bmax = std::max(bmax, v);
            bmin = std::min(bmin, v);
          }
          bsum_hi += bmax;
          bsum_lo += bmin;
        }
        ygap_i = std::max(ygap_i, std::max(std::abs(amax + bsum_hi), std::abs(amin + bsum_lo)));
      }
      row.y_gap = std::max(row.y_gap, ygap_i);

      // BMO norms of the loading gaps, per opponent axis
      double dz_sq_sum = 0.0;
      {
        Table dz = nsol.z_diag[static_cast<size_t>(i)];
        for (int t = 0; t < N; ++t)
          for (size_t idx = 0; idx < dz[static_cast<size_t>(t)].size(); ++idx)
            dz[static_cast<size_t>(t)][idx] -= ts.z[static_cast<size_t>(t)][idx];
        dz_sq_sum += axis_bmo_sq(dz, ts.kind, N, dt, d);
      }
      for (int j = 0; j < n; ++j) {
        const auto& zoff = nsol.z_off[static_cast<size_t>(i)][static_cast<size_t>(j)];
        if (j == i || zoff.empty()) continue;
        dz_sq_sum += axis_bmo_sq(zoff, nsol.kinds[static_cast<size_t>(j)], N, dt,
                                 fin.agents[static_cast<size_t>(j)].d());
      }
      dz_max = std::max(dz_max, std::sqrt(dz_sq_sum));
      lhs_max = std::max(lhs_max, 0.5 * ygap_i * ygap_i + dz_sq_sum);

      // coupling residuals Gamma (kernel sample vs limit aggregate)
      // per opponent axis: a_j(t, s) = lambda^n_ij theta^j . g^j (limit fields)
      const int kexp_limit = 16;
      std::vector<std::vector<detail::RowStats>> st1(static_cast<size_t>(n)),
          st2(static_cast<size_t>(n));
      std::vector<int> dep;  // opponents with a two-state axis
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const double w = fin.lambda_n(i, j);
        const TypeSolution& tj = tsols[static_cast<size_t>(j)];
        st1[static_cast<size_t>(j)].resize(static_cast<size_t>(N));
        st2[static_cast<size_t>(j)].resize(static_cast<size_t>(N));
        bool two = false;
        for (int t = 0; t < N; ++t) {
          const auto probs = state_probs(tj.kind, t);
          std::vector<double> r1(probs.size()), r2(probs.size());
          for (long s = 0; s < static_cast<long>(probs.size()); ++s) {
            double tg = 0.0, gg = 0.0;
            for (int c = 0; c < tj.agent.d(); ++c) {
              const double gv = tj.g[static_cast<size_t>(t)][static_cast<size_t>(s * tj.agent.d() + c)];
              tg += tj.theta[static_cast<size_t>(t)][static_cast<size_t>(s * tj.agent.d() + c)] * gv;
              gg += gv * gv;
            }
            r1[static_cast<size_t>(s)] = w * tg;
            r2[static_cast<size_t>(s)] = w * gg;
          }
          st1[static_cast<size_t>(j)][static_cast<size_t>(t)] = detail::row_stats(r1, probs);
          st2[static_cast<size_t>(j)][static_cast<size_t>(t)] = detail::row_stats(r2, probs);
          if (probs.size() > 1) two = true;
        }
        if (two) dep.push_back(j);
      }
      // limit aggregates at type i/n
      std::vector<double> c1(static_cast<size_t>(N), 0.0), c2(static_cast<size_t>(N), 0.0);
      for (int t = 0; t < N; ++t) {
        double a1 = 0.0, a2 = 0.0;
        for (int v = 0; v < m; ++v) {
          const double gk = gspec.graphon(ui, grid_m[static_cast<size_t>(v)]);
          a1 += gk * e_tg[static_cast<size_t>(v)][static_cast<size_t>(t)];
          a2 += gk * e_gg[static_cast<size_t>(v)][static_cast<size_t>(t)];
        }
        c1[static_cast<size_t>(t)] = a1 / static_cast<double>(m);
        c2[static_cast<size_t>(t)] = a2 / static_cast<double>(m);
      }
      const bool exact = static_cast<int>(dep.size()) <= kexp_limit;
      if (!exact) all_exact = false;

      auto gamma_bmo = [&](const std::vector<std::vector<detail::RowStats>>& st,
                           const std::vector<double>& cc) {
        // per step: exact max |Gamma_t| over joint states, and E|Gamma_t|
        std::vector<double> absmax(static_cast<size_t>(N), 0.0),
            emean(static_cast<size_t>(N), 0.0);
        for (int t = 0; t < N; ++t) {
          double hi = -cc[static_cast<size_t>(t)], lo = -cc[static_cast<size_t>(t)], mean = 0.0,
                 var = 0.0;
          for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const auto& r = st[static_cast<size_t>(j)][static_cast<size_t>(t)];
            hi += r.hi;
            lo += r.lo;
            mean += r.mean;
            var += r.var;
          }
          absmax[static_cast<size_t>(t)] = std::max(std::abs(hi), std::abs(lo));
          if (exact) {
            // enumerate the two-state axes; single-state axes are constants
            double base = -cc[static_cast<size_t>(t)];
            for (int j = 0; j < n; ++j) {
              if (j == i) continue;
              const auto& r = st[static_cast<size_t>(j)][static_cast<size_t>(t)];
              if (std::find(dep.begin(), dep.end(), j) == dep.end() ||
                  Lattice::state_count(StateKind::Sign, t) == 1)
                base += r.mean;  // single state at this step
            }
            std::vector<double> lo_v, sp_v;
            for (int j : dep) {
              if (Lattice::state_count(StateKind::Sign, t) == 1) continue;
              const auto& r = st[static_cast<size_t>(j)][static_cast<size_t>(t)];
              lo_v.push_back(r.lo);
              sp_v.push_back(r.hi - r.lo);
            }
            const int k = static_cast<int>(lo_v.size());
            double acc = 0.0;
            for (long mask = 0; mask < (1L << k); ++mask) {
              double v = base;
              for (int b = 0; b < k; ++b)
                v += lo_v[static_cast<size_t>(b)] +
                     (((mask >> b) & 1) ? sp_v[static_cast<size_t>(b)] : 0.0);
              acc += std::abs(v);
            }
            emean[static_cast<size_t>(t)] = acc / static_cast<double>(1L << k);
          } else {
            const double centered = mean - cc[static_cast<size_t>(t)];
            emean[static_cast<size_t>(t)] = std::sqrt(centered * centered + var);
          }
        }
        // max over t of |Gamma_t| dt + sum_{r>t} E|Gamma_r| dt
        double tail = 0.0;
        std::vector<double> tails(static_cast<size_t>(N + 1), 0.0);
        for (int t = N - 1; t >= 0; --t) {
          tails[static_cast<size_t>(t)] = tail;
          tail += emean[static_cast<size_t>(t)] * dt;
        }
        double best = 0.0;
        for (int t = 0; t < N; ++t)
          best = std::max(best, absmax[static_cast<size_t>(t)] * dt + tails[static_cast<size_t>(t)]);
        return best;
      };
      const double g1 = gamma_bmo(st1, c1);
      const double g2 = gamma_bmo(st2, c2);
      row.gamma1_bmo = std::max(row.gamma1_bmo, g1);
      row.gamma2_bmo = std::max(row.gamma2_bmo, g2);

      const double sqT = std::sqrt(gspec.horizon);
      const double tail_base = r_bmo / (1.0 - mod.gamma_bar) +
                               sqT * theta_sup / (1.0 - mod.gamma_bar) + sqT * c0;
      const double tail =
          (n > 1) ? gspec.rho * mod.gamma_tilde * tail_base / (n - 1) : 0.0;
      const double a_sq = 2.0 * gspec.rho * mod.gamma_tilde * g1 +
                          gspec.rho * mod.gamma_tilde * g2 + tail * tail;
      a_max = std::max(a_max, std::sqrt(std::max(a_sq, 0.0)));
    }

    row.dz_bmo = dz_max;
    row.lhs = lhs_max;
    row.a_max = a_max;
    row.rhs = a_max * a_max;
    row.dominance_ok = row.lhs <= row.rhs + 1e-12;
    row.gamma_method = all_exact ? "exact" : "cs-upper";

    const auto sm = condition_moduli(gspec.graphon, n);
    row.scaled_l2 = sm.scaled_l2;
    row.modulus = sm.modulus_continuity;
    row.l1_gap = sampling_l1_gap(gspec.graphon, n);
    row.chain_rhs = 2.0 * row.scaled_l2 + 2.0 * row.modulus;
    row.chain_ok = row.l1_gap <= row.chain_rhs + 1e-9;
    rows.push_back(row);
  }
  return rows;
}

// --------------------------------------------- iterated conditional bound --

struct IteratedBoundCheck {
  double lhs_max = 0.0;
  double rhs = 0.0;
  bool ok = false;
};

// E[ sum_{r>=t} |E[f_r g_r | common state at r]| dt | node_t ]
//   <= ||f||_BMO ||g||_BMO  (checked at every node).
inline IteratedBoundCheck iterated_conditional_bound(const Lattice& lat, const AdaptedProcess& f,
                                                     const AdaptedProcess& g, int common_factor) {
  if (f.components != g.components)
    throw ValidationError("iterated_conditional_bound needs matching component counts");
  std::vector<int> u = f.factors;
  for (int x : g.factors)
    if (std::find(u.begin(), u.end(), x) == u.end()) u.push_back(x);
  if (std::find(u.begin(), u.end(), common_factor) == u.end()) u.push_back(common_factor);
  std::sort(u.begin(), u.end());
  std::vector<int> idio;
  for (int x : u)
    if (x != common_factor) idio.push_back(x);

  // h_r per common state: expectation of f.g over the idiosyncratic marginals
  std::vector<std::vector<double>> h(static_cast<size_t>(lat.steps));
  for (int t = 0; t < lat.steps; ++t) {
    const long nc = Lattice::state_count(lat.kind(common_factor), t);
    h[static_cast<size_t>(t)].assign(static_cast<size_t>(nc), 0.0);
    std::vector<std::vector<double>> probs;
    for (int x : idio) probs.push_back(state_probs(lat.kind(x), t));
    for (long sc = 0; sc < nc; ++sc) {
      double acc = 0.0;
      StateVec s(static_cast<size_t>(lat.F()), 0);
      s[static_cast<size_t>(common_factor)] = sc;
      bool more = true;
      while (more) {
        double w = 1.0;
        for (size_t k = 0; k < idio.size(); ++k)
          w *= probs[k][static_cast<size_t>(s[static_cast<size_t>(idio[k])])];
        double fg = 0.0;
        for (int c = 0; c < f.components; ++c) fg += f.value(t, s, c) * g.value(t, s, c);
        acc += w * fg;
        more = next_state(lat, idio, t, s);
      }
      h[static_cast<size_t>(t)][static_cast<size_t>(sc)] = std::abs(acc);
    }
  }

  // backward accumulation over the union tree
  AdaptedProcess L(lat, u, 1);
  IteratedBoundCheck out;
  for (int t = lat.steps - 1; t >= 0; --t) {
    StateVec s(static_cast<size_t>(lat.F()), 0);
    do {
      const long sc = s[static_cast<size_t>(common_factor)];
      L.value(t, s) =
          h[static_cast<size_t>(t)][static_cast<size_t>(sc)] * lat.dt + cond_expect1(L, t, s);
      out.lhs_max = std::max(out.lhs_max, L.value(t, s));
    } while (next_state(lat, u, t, s));
  }
  out.rhs = std::sqrt(bmo_norm_sq(f)) * std::sqrt(bmo_norm_sq(g));
  out.ok = out.lhs_max <= out.rhs + 1e-12;
  return out;
}

}  // namespace relperf
