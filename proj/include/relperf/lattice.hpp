#pragma once
// Exact discrete-time Bernoulli lattice.
//
// F independent factors each move +-sqrt(dt) with probability 1/2 per step.
// A factor carries one of four state abstractions:
//   Trivial  - single state (deterministic coefficients),
//   Sign     - sign of the last increment (2 states after step 0),
//   UpCount  - number of up moves (recombining, t+1 states),
//   Path     - full increment history (2^t states; capped).
// Adapted processes store values per joint state of the factor subset they
// are measurable against. Conditional expectations are equal-weight child
// averages taken in a fixed (ascending move-mask) summation order, so tower
// identities hold bit-for-bit; martingale coefficients are exact.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "relperf/common.hpp"
#include "relperf/model.hpp"

namespace relperf {

enum class StateKind { Trivial, Sign, UpCount, Path };

inline int max_tree_exponent() {
  if (const char* e = std::getenv("GE_MAX_TREE")) {
    const int v = std::atoi(e);
    if (v > 0) return v;
  }
  return 24;
}

struct Lattice {
  int steps = 0;
  double dt = 0.0;
  std::vector<StateKind> factors;

  Lattice(int steps_, double horizon, std::vector<StateKind> kinds)
      : steps(steps_), dt(horizon / steps_), factors(std::move(kinds)) {
    double log2_states = 0.0;
    for (auto k : factors) log2_states += std::log2(static_cast<double>(state_count(k, steps)));
    const int cap = max_tree_exponent();
    if (log2_states > cap)
      throw ValidationError("lattice joint state space exceeds 2^" + std::to_string(cap) +
                            " (set GE_MAX_TREE to override)");
  }

  int F() const { return static_cast<int>(factors.size()); }
  double sqrt_dt() const { return std::sqrt(dt); }
  StateKind kind(int f) const { return factors[static_cast<size_t>(f)]; }

  static long state_count(StateKind k, int t) {
    switch (k) {
      case StateKind::Trivial: return 1;
      case StateKind::Sign: return t == 0 ? 1 : 2;
      case StateKind::UpCount: return t + 1;
      default: return 1L << t;
    }
  }
  // state after move m (0 = down, 1 = up)
  static long child_state(StateKind k, long s, int m) {
    switch (k) {
      case StateKind::Trivial: return 0;
      case StateKind::Sign: return m;
      case StateKind::UpCount: return s + m;
      default: return (s << 1) | m;
    }
  }
  // sign of the last increment encoded by state s at step t (0 at step 0)
  static int sign_of(StateKind k, int t, long s) {
    if (t == 0) return 0;
    switch (k) {
      case StateKind::Trivial: return 0;
      case StateKind::Sign: return s == 0 ? -1 : 1;
      case StateKind::UpCount:
        throw ValidationError("up-count state does not encode the last increment sign");
      default: return (s & 1) ? 1 : -1;
    }
  }
  static long up_count_of(StateKind k, int t, long s) {
    switch (k) {
      case StateKind::UpCount: return s;
      case StateKind::Path: {
        long c = 0;
        for (int b = 0; b < t; ++b) c += (s >> b) & 1;
        return c;
      }
      default:
        if (t == 0) return 0;
        throw ValidationError("state kind does not encode an up count");
    }
  }

  long joint_count(const std::vector<int>& subset, int t) const {
    long c = 1;
    for (int f : subset) c *= state_count(kind(f), t);
    return c;
  }
};

// Marginal distribution of one factor's state at step t.
inline std::vector<double> state_probs(StateKind k, int t) {
  const long n = Lattice::state_count(k, t);
  std::vector<double> p(static_cast<size_t>(n));
  switch (k) {
    case StateKind::Trivial: p[0] = 1.0; break;
    case StateKind::Sign:
      if (t == 0)
        p[0] = 1.0;
      else
        p[0] = p[1] = 0.5;
      break;
    case StateKind::UpCount: {
      double c = std::pow(0.5, t);
      for (long s = 0; s <= t; ++s) {
        p[static_cast<size_t>(s)] = c;
        c *= static_cast<double>(t - s) / static_cast<double>(s + 1);
      }
      break;
    }
    default: std::fill(p.begin(), p.end(), std::pow(0.5, t));
  }
  return p;
}

using StateVec = std::vector<long>;  // one state per lattice factor

// Advance the joint state of `subset` at step t (rightmost listed factor
// fastest); returns false after wrapping to all zeros.
inline bool next_state(const Lattice& lat, const std::vector<int>& subset, int t, StateVec& s) {
  for (auto it = subset.rbegin(); it != subset.rend(); ++it) {
    const int f = *it;
    if (++s[static_cast<size_t>(f)] < Lattice::state_count(lat.kind(f), t)) return true;
    s[static_cast<size_t>(f)] = 0;
  }
  return false;
}

struct AdaptedProcess {
  const Lattice* lat = nullptr;
  std::vector<int> factors;  // ascending subset this process may depend on
  int components = 1;
  std::vector<std::vector<double>> values;  // [t][sub_node * components + c]

  AdaptedProcess() = default;
  AdaptedProcess(const Lattice& l, std::vector<int> subset, int comps)
      : lat(&l), factors(std::move(subset)), components(comps) {
    values.resize(static_cast<size_t>(l.steps) + 1);
    for (int t = 0; t <= l.steps; ++t)
      values[static_cast<size_t>(t)].assign(
          static_cast<size_t>(l.joint_count(factors, t)) * components, 0.0);
  }

  long sub_index(int t, const StateVec& s) const {
    long idx = 0;
    for (int f : factors)
      idx = idx * Lattice::state_count(lat->kind(f), t) + s[static_cast<size_t>(f)];
    return idx;
  }
  double value(int t, const StateVec& s, int c = 0) const {
    return values[static_cast<size_t>(t)][static_cast<size_t>(sub_index(t, s) * components + c)];
  }
  double& value(int t, const StateVec& s, int c = 0) {
    return values[static_cast<size_t>(t)][static_cast<size_t>(sub_index(t, s) * components + c)];
  }

  // Fill from a node function; only the included factors' states vary.
  void fill(const std::function<void(int, const StateVec&, double*)>& fn) {
    std::vector<double> buf(static_cast<size_t>(components));
    for (int t = 0; t <= lat->steps; ++t) {
      StateVec s(static_cast<size_t>(lat->F()), 0);
      do {
        fn(t, s, buf.data());
        for (int c = 0; c < components; ++c) value(t, s, c) = buf[static_cast<size_t>(c)];
      } while (next_state(*lat, factors, t, s));
    }
  }
};

// Import full-lattice node data, enforcing the measurability tag: values that
// vary across factors outside `subset` are rejected.
inline AdaptedProcess make_adapted(const Lattice& lat, const std::vector<int>& subset,
                                   int components,
                                   const std::function<double(int, const StateVec&, int)>& full) {
  AdaptedProcess p(lat, subset, components);
  p.fill([&](int t, const StateVec& s, double* out) {
    for (int c = 0; c < components; ++c) out[c] = full(t, s, c);
  });
  std::vector<int> all(static_cast<size_t>(lat.F()));
  std::iota(all.begin(), all.end(), 0);
  for (int t = 0; t <= lat.steps; ++t) {
    StateVec s(static_cast<size_t>(lat.F()), 0);
    do {
      for (int c = 0; c < components; ++c)
        if (full(t, s, c) != p.value(t, s, c))
          throw ValidationError(
              "process values vary across factors outside the declared measurability set");
    } while (next_state(lat, all, t, s));
  }
  return p;
}

// E[proc_{t+1} | node at t]: equal-weight average over the included factors'
// child move combinations, move mask ascending.
inline void cond_expect(const AdaptedProcess& p, int t, const StateVec& node, double* out) {
  const int fi = static_cast<int>(p.factors.size());
  const long combos = 1L << fi;
  for (int c = 0; c < p.components; ++c) out[c] = 0.0;
  StateVec child = node;
  for (long m = 0; m < combos; ++m) {
    for (int k = 0; k < fi; ++k) {
      const int f = p.factors[static_cast<size_t>(k)];
      child[static_cast<size_t>(f)] = Lattice::child_state(
          p.lat->kind(f), node[static_cast<size_t>(f)], static_cast<int>((m >> k) & 1));
    }
    for (int c = 0; c < p.components; ++c) out[c] += p.value(t + 1, child, c);
  }
  const double w = 1.0 / static_cast<double>(combos);
  for (int c = 0; c < p.components; ++c) out[c] *= w;
}

inline double cond_expect1(const AdaptedProcess& p, int t, const StateVec& node) {
  double v;
  cond_expect(p, t, node, &v);
  return v;
}

// Exact martingale coefficients: Z_f = E_t[proc_{t+1} xi_f] / dt per included
// factor, so that proc_{t+1} - E_t[proc_{t+1}] - sum_f Z_f xi_f vanishes for
// one factor and leaves only cross products of distinct xi's otherwise.
inline std::vector<double> martingale_coeffs(const AdaptedProcess& p, int t, const StateVec& node,
                                             int c = 0) {
  const int fi = static_cast<int>(p.factors.size());
  const long combos = 1L << fi;
  std::vector<double> z(static_cast<size_t>(fi), 0.0);
  StateVec child = node;
  for (long m = 0; m < combos; ++m) {
    for (int k = 0; k < fi; ++k) {
      const int f = p.factors[static_cast<size_t>(k)];
      child[static_cast<size_t>(f)] = Lattice::child_state(
          p.lat->kind(f), node[static_cast<size_t>(f)], static_cast<int>((m >> k) & 1));
    }
    const double v = p.value(t + 1, child, c);
    for (int k = 0; k < fi; ++k) z[static_cast<size_t>(k)] += ((m >> k) & 1) ? v : -v;
  }
  const double w = 1.0 / (static_cast<double>(combos) * p.lat->sqrt_dt());
  for (auto& zv : z) zv *= w;
  return z;
}

// Brownian coordinate of one factor: W_t = (2 * upcount - t) sqrt(dt).
inline AdaptedProcess brownian(const Lattice& lat, int factor) {
  AdaptedProcess w(lat, {factor}, 1);
  w.fill([&](int t, const StateVec& s, double* out) {
    out[0] =
        (2.0 * Lattice::up_count_of(lat.kind(factor), t, s[static_cast<size_t>(factor)]) - t) *
        lat.sqrt_dt();
  });
  return w;
}

// Forward log-wealth under a strategy pi (components = d, adapted to the
// union of own and common factors):
//   X(t+1) = X(t) + (pi.mu - |Sigma^T pi|^2 / 2) dt + (Sigma^T pi) . xi
// using pi^T Sigma theta = pi^T mu (theta solves Sigma theta = mu exactly).
// Every loaded factor must carry Path states so forward accumulation is
// well defined.
inline AdaptedProcess simulate_log_wealth(const Lattice& lat, const AgentParams& a,
                                          bool common_noise, const AdaptedProcess& pi,
                                          const std::vector<int>& own_factors,
                                          int common_factor = -1) {
  std::vector<int> subset = pi.factors;
  for (int f : own_factors)
    if (std::find(subset.begin(), subset.end(), f) == subset.end()) subset.push_back(f);
  if (common_noise && common_factor >= 0 &&
      std::find(subset.begin(), subset.end(), common_factor) == subset.end())
    subset.push_back(common_factor);
  std::sort(subset.begin(), subset.end());
  for (int f : subset)
    if (lat.kind(f) != StateKind::Path)
      throw ValidationError("simulate_log_wealth requires Path states on all loaded factors");

  AdaptedProcess x(lat, subset, 1);
  StateVec zero(static_cast<size_t>(lat.F()), 0);
  x.value(0, zero) = std::log(a.x0);

  const int d = a.d();
  const int fi = static_cast<int>(subset.size());
  for (int t = 0; t < lat.steps; ++t) {
    StateVec s(static_cast<size_t>(lat.F()), 0);
    do {
      const int sgn =
          a.state_dependent() ? Lattice::sign_of(lat.kind(own_factors[0]), t,
                                                 s[static_cast<size_t>(own_factors[0])])
                              : 0;
      Vec piv(d);
      for (int c = 0; c < d; ++c) piv[c] = pi.value(t, s, c);
      const Mat S = stacked_sigma(a, t, sgn, common_noise);
      const Vec q = S.transpose() * piv;  // loadings: own d factors then common
      const double drift = piv.dot(a.mu.at(t, sgn)) - 0.5 * q.squaredNorm();
      const double xv = x.value(t, s);
      StateVec child = s;
      for (long m = 0; m < (1L << fi); ++m) {
        double dx = drift * lat.dt;
        for (int k = 0; k < fi; ++k) {
          const int f = subset[static_cast<size_t>(k)];
          child[static_cast<size_t>(f)] =
              Lattice::child_state(lat.kind(f), s[static_cast<size_t>(f)],
                                   static_cast<int>((m >> k) & 1));
        }
        for (int c = 0; c < d; ++c) {
          const int f = own_factors[static_cast<size_t>(c)];
          const auto k = std::find(subset.begin(), subset.end(), f) - subset.begin();
          dx += q[c] * (((m >> k) & 1) ? 1.0 : -1.0) * lat.sqrt_dt();
        }
        if (common_noise && common_factor >= 0) {
          const auto k =
              std::find(subset.begin(), subset.end(), common_factor) - subset.begin();
          dx += q[d] * (((m >> k) & 1) ? 1.0 : -1.0) * lat.sqrt_dt();
        }
        x.value(t + 1, child) = xv + dx;
      }
    } while (next_state(lat, subset, t, s));
  }
  return x;
}

// CSV dump, fixed column order: step,node_index,component,value
inline std::string to_csv(const AdaptedProcess& p) {
  std::string out = "step,node_index,component,value\n";
  char buf[64];
  for (int t = 0; t <= p.lat->steps; ++t) {
    const long count = p.lat->joint_count(p.factors, t);
    for (long node = 0; node < count; ++node)
      for (int c = 0; c < p.components; ++c) {
        std::snprintf(buf, sizeof buf, "%d,%ld,%d,%.17g\n", t, node, c,
                      p.values[static_cast<size_t>(t)]
                              [static_cast<size_t>(node * p.components + c)]);
        out += buf;
      }
  }
  return out;
}

}  // namespace relperf
