#pragma once
// Shared fixtures and independent oracles for the unit tests and the
// acceptance runner. The oracles re-derive expected values from first
// principles (a monolithic joint-tree recursion, direct expectation
// formulas), deliberately bypassing the library's per-factor sweep
// machinery so agreement is evidence, not tautology.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "relperf/model.hpp"

namespace testkit {

using relperf::AgentParams;
using relperf::GameSpec;
using relperf::Mat;
using relperf::MatField;
using relperf::Mode;
using relperf::Vec;
using relperf::VecField;

// -------------------------------------------------------------- fixtures --

inline AgentParams agent1(double gamma, double x0, double mu, double sigma) {
  AgentParams a;
  a.gamma = gamma;
  a.x0 = x0;
  Vec m(1);
  m << mu;
  Mat s(1, 1);
  s << sigma;
  a.mu = VecField::constant(m);
  a.sigma = MatField::constant(s);
  a.sigma_star = VecField::constant(Vec::Zero(1));
  return a;
}

// drift mu0 + amp * (sign of own last increment); sigma constant
inline AgentParams agent_sign(double gamma, double x0, double mu0, double amp, double sigma) {
  AgentParams a = agent1(gamma, x0, mu0, sigma);
  a.mu.sign_modulated = true;
  a.mu.amp = Vec(1);
  a.mu.amp << amp;
  return a;
}

// finite game, all off-diagonal sensitivities 1
inline GameSpec finite_spec(std::vector<AgentParams> agents, double rho, double horizon,
                            int steps) {
  GameSpec s;
  s.mode = Mode::Finite;
  s.rho = rho;
  s.horizon = horizon;
  s.steps = steps;
  const int n = static_cast<int>(agents.size());
  s.lambda.assign(static_cast<size_t>(n), std::vector<double>(static_cast<size_t>(n), 0.0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) s.lambda[static_cast<size_t>(i)][static_cast<size_t>(j)] = 1.0;
  s.agents = std::move(agents);
  return s;
}

// --------------------------------------------------- joint full-tree oracle --

// Monolithic coupled backward recursion on the product of per-agent binary
// path trees (one risky asset per agent, unconstrained, zero self-weights,
// no common factor). All agents' value components are advanced together so
// each agent's own martingale loading is available when the opponents'
// strategy arguments are formed. Joint node index: agent-0 digit most
// significant, each digit a path state in [0, 2^t).
struct JointOracle {
  int n = 0;
  int steps = 0;
  double dt = 0.0;
  // y[i][t][joint node]; terminal slice all zero
  std::vector<std::vector<std::vector<double>>> y;
  std::vector<double> y0;      // after removing the opponents' initial log-wealth
  std::vector<double> values;  // V_0 per agent

  long joint_count(int t) const { return 1L << (static_cast<long>(n) * t); }
  long digit(long node, int t, int i) const {
    const int shift = (n - 1 - i) * t;
    return (node >> shift) & ((1L << t) - 1);
  }
};

inline JointOracle joint_oracle(const GameSpec& spec) {
  const int n = spec.n();
  const int N = spec.steps;
  for (const auto& a : spec.agents)
    if (a.d() != 1) throw std::runtime_error("joint_oracle: one risky asset per agent");
  if (spec.common_noise) throw std::runtime_error("joint_oracle: no common factor");
  for (int i = 0; i < n; ++i)
    if (spec.lambda[static_cast<size_t>(i)][static_cast<size_t>(i)] != 0.0)
      throw std::runtime_error("joint_oracle: zero self-weights only");
  if (n * N > 24) throw std::runtime_error("joint_oracle: tree too large");

  JointOracle o;
  o.n = n;
  o.steps = N;
  o.dt = spec.horizon / N;
  const double sdt = std::sqrt(o.dt);

  // market price of risk of agent j given its own path digit (d = 1)
  auto theta_at = [&](int j, int t, long path) {
    const AgentParams& a = spec.agents[static_cast<size_t>(j)];
    const int sign = (t == 0) ? 0 : ((path & 1) ? 1 : -1);
    return a.mu.at(t, sign)(0) / a.sigma.at(t)(0, 0);
  };
  auto c_of = [&](int i, int j) {
    return spec.rho * spec.agents[static_cast<size_t>(i)].gamma *
           spec.lambda[static_cast<size_t>(i)][static_cast<size_t>(j)] /
           static_cast<double>(n - 1);
  };

  o.y.assign(static_cast<size_t>(n), std::vector<std::vector<double>>(static_cast<size_t>(N + 1)));
  for (int i = 0; i < n; ++i)
    o.y[static_cast<size_t>(i)][static_cast<size_t>(N)]
        .assign(static_cast<size_t>(o.joint_count(N)), 0.0);

  std::vector<double> e(static_cast<size_t>(n));
  std::vector<std::vector<double>> z(static_cast<size_t>(n),
                                     std::vector<double>(static_cast<size_t>(n)));
  std::vector<double> g(static_cast<size_t>(n)), th(static_cast<size_t>(n));
  for (int t = N - 1; t >= 0; --t) {
    const long total = o.joint_count(t);
    for (int i = 0; i < n; ++i)
      o.y[static_cast<size_t>(i)][static_cast<size_t>(t)].assign(static_cast<size_t>(total), 0.0);
    for (long node = 0; node < total; ++node) {
      // conditional means and per-factor loadings from the next slice
      for (int i = 0; i < n; ++i) {
        e[static_cast<size_t>(i)] = 0.0;
        for (int j = 0; j < n; ++j) z[static_cast<size_t>(i)][static_cast<size_t>(j)] = 0.0;
      }
      for (long mv = 0; mv < (1L << n); ++mv) {
        long child = 0;
        for (int j = 0; j < n; ++j) {
          const long sj = o.digit(node, t, j);
          const long m = (mv >> (n - 1 - j)) & 1;
          child = (child << (t + 1)) | ((sj << 1) | m);
        }
        for (int i = 0; i < n; ++i) {
          const double v =
              o.y[static_cast<size_t>(i)][static_cast<size_t>(t + 1)][static_cast<size_t>(child)];
          e[static_cast<size_t>(i)] += v;
          for (int j = 0; j < n; ++j)
            z[static_cast<size_t>(i)][static_cast<size_t>(j)] +=
                (((mv >> (n - 1 - j)) & 1) ? v : -v);
        }
      }
      const double combos = static_cast<double>(1L << n);
      for (int i = 0; i < n; ++i) {
        e[static_cast<size_t>(i)] /= combos;
        for (int j = 0; j < n; ++j)
          z[static_cast<size_t>(i)][static_cast<size_t>(j)] /= combos * sdt;
      }
      for (int j = 0; j < n; ++j) {
        th[static_cast<size_t>(j)] = theta_at(j, t, o.digit(node, t, j));
        g[static_cast<size_t>(j)] =
            (z[static_cast<size_t>(j)][static_cast<size_t>(j)] + th[static_cast<size_t>(j)]) /
            (1.0 - spec.agents[static_cast<size_t>(j)].gamma);
      }
      for (int i = 0; i < n; ++i) {
        const double gi = spec.agents[static_cast<size_t>(i)].gamma;
        const double zii = z[static_cast<size_t>(i)][static_cast<size_t>(i)];
        const double zth = zii + th[static_cast<size_t>(i)];
        double f = 0.5 * zii * zii + gi / (2.0 * (1.0 - gi)) * zth * zth;
        for (int j = 0; j < n; ++j) {
          if (j == i) continue;
          const double c = c_of(i, j);
          const double gj = g[static_cast<size_t>(j)];
          const double load = z[static_cast<size_t>(i)][static_cast<size_t>(j)] - c * gj;
          f += 0.5 * load * load - c * (th[static_cast<size_t>(j)] * gj - 0.5 * gj * gj);
        }
        o.y[static_cast<size_t>(i)][static_cast<size_t>(t)][static_cast<size_t>(node)] =
            e[static_cast<size_t>(i)] + f * o.dt;
      }
    }
  }

  o.y0.resize(static_cast<size_t>(n));
  o.values.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    double shift = 0.0;
    for (int j = 0; j < n; ++j)
      if (j != i) shift += c_of(i, j) * std::log(spec.agents[static_cast<size_t>(j)].x0);
    o.y0[static_cast<size_t>(i)] = o.y[static_cast<size_t>(i)][0][0] - shift;
    const AgentParams& a = spec.agents[static_cast<size_t>(i)];
    o.values[static_cast<size_t>(i)] =
        std::pow(a.x0, a.gamma) / a.gamma * std::exp(o.y0[static_cast<size_t>(i)]);
  }
  return o;
}

}  // namespace testkit
