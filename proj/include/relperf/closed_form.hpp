#pragma once
// Closed-form benchmarks: the deterministic single-asset equilibrium with a
// diagonal self-weight, its mean-field limit, the gap bound between them,
// and the classical single-agent value.

#include <cmath>
#include <vector>

#include "relperf/common.hpp"
#include "relperf/model.hpp"

namespace relperf {

namespace detail {
inline void require_deterministic(const AgentParams& a, const char* who) {
  if (a.state_dependent())
    throw ValidationError(std::string(who) + " requires deterministic coefficients");
}
}  // namespace detail

// Per-step market price of risk for deterministic coefficients.
inline std::vector<Vec> theta_path(const AgentParams& a, int steps, bool common_noise) {
  detail::require_deterministic(a, "theta_path");
  std::vector<Vec> th(static_cast<size_t>(steps));
  for (int t = 0; t < steps; ++t) th[static_cast<size_t>(t)] = compute_theta(a, t, 0, common_noise);
  return th;
}

// sigma^T pi = theta_t / (1 - gamma + rho gamma lambda^n_ii), per step.
// Deterministic coefficients, no common noise, unconstrained.
inline std::vector<Vec> prop_n_agent_strategy(const GameSpec& spec, int i) {
  const AgentParams& a = spec.agents[static_cast<size_t>(i)];
  detail::require_deterministic(a, "prop_n_agent_strategy");
  if (spec.common_noise)
    throw ValidationError("prop_n_agent_strategy: closed form holds without common noise");
  if (!std::holds_alternative<FullSpace>(a.constraint))
    throw ValidationError("prop_n_agent_strategy: closed form holds for unconstrained agents");
  const double den = 1.0 - a.gamma + spec.rho * a.gamma * spec.lambda_n(i, i);
  auto th = theta_path(a, spec.steps, false);
  for (auto& v : th) v /= den;
  return th;
}

// Mean-field counterpart: sigma^T pi = theta_t / (1 - gamma).
inline std::vector<Vec> prop_graphon_strategy(const AgentParams& a, int steps) {
  detail::require_deterministic(a, "prop_graphon_strategy");
  if (!std::holds_alternative<FullSpace>(a.constraint))
    throw ValidationError("prop_graphon_strategy: closed form holds for unconstrained agents");
  auto th = theta_path(a, steps, false);
  for (auto& v : th) v /= (1.0 - a.gamma);
  return th;
}

// Sup-over-time bound on |sigma pi^{i,n} - sigma pi^{limit}|:
//   rho gamma_tilde lambda^n_ii |theta| / |(1-gamma)(1-gamma+rho gamma lambda^n_ii)|.
inline double prop_gap_bound(const GameSpec& spec, int i) {
  const AgentParams& a = spec.agents[static_cast<size_t>(i)];
  detail::require_deterministic(a, "prop_gap_bound");
  const double gt = population_moduli(spec).gamma_tilde;
  const double lnii = spec.lambda_n(i, i);
  const double den =
      std::abs((1.0 - a.gamma) * (1.0 - a.gamma + spec.rho * a.gamma * lnii));
  double sup_theta = 0.0;
  for (const auto& th : theta_path(a, spec.steps, false))
    sup_theta = std::max(sup_theta, th.norm());
  return spec.rho * gt * lnii * sup_theta / den;
}

// Single-agent benchmark: Y_0 = sum_t gamma |theta_t|^2 / (2(1-gamma)) dt and
// V_0 = x0^gamma / gamma * exp(Y_0). Exact for piecewise-constant theta.
struct MertonResult {
  double y0 = 0.0;
  double value = 0.0;
};

inline MertonResult merton_benchmark(const AgentParams& a, int steps, double horizon,
                                     bool common_noise) {
  detail::require_deterministic(a, "merton_benchmark");
  const double dt = horizon / steps;
  MertonResult r;
  for (const auto& th : theta_path(a, steps, common_noise))
    r.y0 += a.gamma * th.squaredNorm() / (2.0 * (1.0 - a.gamma)) * dt;
  r.value = std::pow(a.x0, a.gamma) / a.gamma * std::exp(r.y0);
  return r;
}

}  // namespace relperf
