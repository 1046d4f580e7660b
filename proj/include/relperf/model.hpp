#pragma once
// Market and game primitives: per-agent coefficient fields, finite-population
// and graphon game specs, market-price-of-risk computation, validation, and
// the population moduli used by the contraction bounds.
//
// Coefficient fields are piecewise-constant in time; the drift may in
// addition be modulated by the sign of the agent's own last lattice increment
// (that keeps every coefficient predictable for the agent's own filtration).

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "relperf/common.hpp"
#include "relperf/graphon.hpp"
#include "relperf/projection.hpp"

namespace relperf {

// ---------------------------------------------------------------- fields --

struct VecField {
  std::vector<Vec> base;        // size 1 (constant) or one entry per step
  Vec amp;                      // own-last-sign modulation, empty if none
  bool sign_modulated = false;

  // sign: -1 down, +1 up, 0 at step 0 (no increment yet)
  Vec at(int step, int sign = 0) const {
    Vec v = base.size() == 1 ? base[0] : base[static_cast<size_t>(step)];
    if (sign_modulated && sign != 0) v += amp * static_cast<double>(sign);
    return v;
  }
  bool state_dependent() const { return sign_modulated; }
  static VecField constant(Vec v) { return {{std::move(v)}, {}, false}; }
};

struct MatField {
  std::vector<Mat> base;  // size 1 or one entry per step

  const Mat& at(int step) const {
    return base.size() == 1 ? base[0] : base[static_cast<size_t>(step)];
  }
  static MatField constant(Mat m) { return {{std::move(m)}}; }
};

// ---------------------------------------------------------------- agents --

struct AgentParams {
  double gamma = 0.5;  // in (-inf, 1) \ {0}
  double x0 = 1.0;
  VecField mu;          // d
  MatField sigma;       // d x d
  VecField sigma_star;  // d (per-asset loading on the common factor)
  ConstraintSet constraint = FullSpace{};

  int d() const { return static_cast<int>(mu.base[0].size()); }
  bool state_dependent() const { return mu.state_dependent() || sigma_star.state_dependent(); }
};

// Stacked volatility [sigma, sigma*] as a d x (d+1) matrix (with common
// noise) or plain sigma (without).
inline Mat stacked_sigma(const AgentParams& a, int step, int sign, bool common_noise) {
  const Mat& s = a.sigma.at(step);
  if (!common_noise) return s;
  Mat out(s.rows(), s.cols() + 1);
  out.leftCols(s.cols()) = s;
  out.col(s.cols()) = a.sigma_star.at(step, sign);
  return out;
}

// theta = Sigma^T (Sigma Sigma^T)^{-1} mu: the minimal-norm market price of
// risk, satisfying Sigma theta = mu exactly.
inline Vec compute_theta(const Mat& Sigma, const Vec& mu) {
  Eigen::LDLT<Mat> ldlt(Sigma * Sigma.transpose());
  return Sigma.transpose() * ldlt.solve(mu);
}

inline Vec compute_theta(const AgentParams& a, int step, int sign, bool common_noise) {
  return compute_theta(stacked_sigma(a, step, sign, common_noise), a.mu.at(step, sign));
}

// ------------------------------------------------------------------ spec --

enum class Mode { Finite, Graphon };

// Graphon-mode parameter family: evaluable at every type u in [0,1].
// gamma and x0 may drift linearly in u; the coefficient fields are shared.
struct TypeFamily {
  double gamma_base = 0.5, gamma_slope = 0.0;
  double x0_base = 1.0, x0_slope = 0.0;
  VecField mu;
  MatField sigma;
  VecField sigma_star;
  ConstraintSet constraint = FullSpace{};

  AgentParams at(double u) const {
    AgentParams a;
    a.gamma = gamma_base + gamma_slope * (u - 0.5);
    a.x0 = x0_base + x0_slope * (u - 0.5);
    a.mu = mu;
    a.sigma = sigma;
    a.sigma_star = sigma_star;
    a.constraint = constraint;
    return a;
  }
};

struct GameSpec {
  Mode mode = Mode::Finite;
  double rho = 0.0;       // competition weight, in [0,1]
  double horizon = 1.0;   // T
  int steps = 8;          // N
  bool common_noise = false;
  bool allow_self_weight = false;  // single-agent-variant diagonal weights
  uint64_t seed = 1;

  // finite mode
  std::vector<std::vector<double>> lambda;  // n x n, zero diagonal unless allow_self_weight
  std::vector<AgentParams> agents;

  // graphon mode
  Graphon graphon = constant_graphon(0.0);
  int types = 0;  // m
  std::optional<TypeFamily> family;
  std::vector<AgentParams> type_agents;  // explicit per-type params (midpoint grid)

  double dt() const { return horizon / steps; }
  int n() const { return static_cast<int>(agents.size()); }

  // normalized weights lambda^n_ij = lambda_ij / (n-1)
  double lambda_n(int i, int j) const {
    const int nn = n();
    return nn > 1 ? lambda[i][j] / (nn - 1) : (allow_self_weight ? lambda[i][j] : 0.0);
  }
};

// Type grid midpoints u_k = (2k-1)/(2m), k = 1..m.
inline std::vector<double> type_grid(int m) {
  std::vector<double> u(m);
  for (int k = 0; k < m; ++k) u[k] = (2.0 * k + 1.0) / (2.0 * m);
  return u;
}

inline AgentParams agent_at_type(const GameSpec& spec, double u) {
  if (spec.family) return spec.family->at(u);
  if (spec.type_agents.empty())
    throw ValidationError("graphon spec has neither a family nor explicit type agents");
  const int m = spec.types;
  int k = std::min(std::max(static_cast<int>(std::floor(u * m)), 0), m - 1);
  return spec.type_agents[static_cast<size_t>(k)];
}

inline std::vector<AgentParams> materialize_types(const GameSpec& spec) {
  if (!spec.type_agents.empty()) return spec.type_agents;
  std::vector<AgentParams> out;
  out.reserve(static_cast<size_t>(spec.types));
  for (double u : type_grid(spec.types)) out.push_back(agent_at_type(spec, u));
  return out;
}

// Finite-population sample of a graphon spec: n agents with parameters at
// types i/n and lambda_ij = G(i/n, j/n), zero diagonal.
inline GameSpec finite_from_graphon(const GameSpec& g, int n) {
  GameSpec f;
  f.mode = Mode::Finite;
  f.rho = g.rho;
  f.horizon = g.horizon;
  f.steps = g.steps;
  f.common_noise = g.common_noise;
  f.seed = g.seed;
  f.lambda.assign(static_cast<size_t>(n), std::vector<double>(static_cast<size_t>(n), 0.0));
  for (int i = 1; i <= n; ++i)
    for (int j = 1; j <= n; ++j)
      if (i != j)
        f.lambda[i - 1][j - 1] = g.graphon(static_cast<double>(i) / n, static_cast<double>(j) / n);
  f.agents.reserve(static_cast<size_t>(n));
  for (int i = 1; i <= n; ++i) f.agents.push_back(agent_at_type(g, static_cast<double>(i) / n));
  return f;
}

// ------------------------------------------------------------ validation --

struct ValidationIssue {
  std::string location;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool ok() const { return issues.empty(); }
  std::string joined() const {
    std::string s;
    for (const auto& i : issues) s += i.location + ": " + i.message + "\n";
    return s;
  }
};

namespace detail {

inline void validate_agent(const AgentParams& a, bool common_noise, int steps,
                           const std::string& loc, double eps, double cond_cap,
                           ValidationReport& rep) {
  auto issue = [&](const std::string& m) { rep.issues.push_back({loc, m}); };
  if (a.gamma == 0.0 || a.gamma >= 1.0) issue("gamma must lie in (-inf, 1) excluding 0");
  if (!(a.x0 > 0.0)) issue("x0 must be positive");
  const int d = a.d();
  if (d < 1) issue("mu must have at least one component");
  auto check_len = [&](size_t len, const std::string& what) {
    if (len != 1 && len != static_cast<size_t>(steps))
      issue(what + " must have 1 entry or one per step");
  };
  check_len(a.mu.base.size(), "mu");
  check_len(a.sigma.base.size(), "sigma");
  check_len(a.sigma_star.base.size(), "sigma_star");
  for (const auto& m : a.sigma.base)
    if (m.rows() != d || m.cols() != d) issue("sigma must be d x d");
  for (const auto& v : a.sigma_star.base)
    if (v.size() != d) issue("sigma_star must have d components");
  for (const auto& v : a.mu.base)
    if (v.size() != d) issue("mu entries must have d components");
  if (a.mu.sign_modulated && a.mu.amp.size() != d) issue("mu amp must have d components");
  if (a.state_dependent() && d != 1) issue("state-dependent coefficients require d == 1");
  if (!common_noise) {
    for (const auto& v : a.sigma_star.base)
      if (v.size() == d && v.norm() != 0.0) issue("sigma_star requires common_noise=true");
  }
  // ellipticity of Sigma Sigma^T at every (step, sign) coefficient state
  for (int t = 0; t < steps; ++t) {
    for (int sign : {-1, 0, 1}) {
      if (sign != 0 && !a.state_dependent() && t > 0) continue;
      const Mat S = stacked_sigma(a, t, sign, common_noise);
      if (S.rows() != d) continue;
      Eigen::SelfAdjointEigenSolver<Mat> es(S * S.transpose());
      const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
      if (lo < eps) {
        issue("Sigma Sigma^T violates ellipticity (min eigenvalue " + std::to_string(lo) + ")");
        break;
      }
      if (hi / lo > cond_cap) {
        issue("Sigma Sigma^T condition number exceeds cap");
        break;
      }
    }
  }
  // constraint shape
  if (const auto* box = std::get_if<Box>(&a.constraint)) {
    if (box->lower.size() != d || box->upper.size() != d)
      issue("box bounds must have d components");
    else
      for (int k = 0; k < d; ++k)
        if (!(box->lower[k] <= box->upper[k])) issue("box lower bound exceeds upper bound");
  } else if (const auto* ball = std::get_if<Ball>(&a.constraint)) {
    if (ball->center.size() != d) issue("ball center must have d components");
    if (!(ball->radius > 0.0)) issue("ball radius must be positive");
  } else if (const auto* hs = std::get_if<HalfSpace>(&a.constraint)) {
    if (hs->normal.size() != d)
      issue("half-space normal must have d components");
    else if (hs->normal.norm() == 0.0)
      issue("half-space normal must be nonzero");
  }
}

}  // namespace detail

inline ValidationReport validate_spec(const GameSpec& spec, double eps = 1e-8,
                                      double cond_cap = 1e10) {
  ValidationReport rep;
  auto issue = [&](const std::string& loc, const std::string& m) {
    rep.issues.push_back({loc, m});
  };
  if (spec.steps < 1) issue("steps", "must be >= 1");
  if (!(spec.horizon > 0.0)) issue("horizon", "must be positive");
  if (spec.rho < 0.0 || spec.rho > 1.0) issue("rho", "must lie in [0,1]");

  if (spec.mode == Mode::Finite) {
    const int n = spec.n();
    if (n < 1) issue("agents", "finite mode needs at least one agent");
    if (static_cast<int>(spec.lambda.size()) != n) issue("lambda", "must be n x n");
    for (int i = 0; i < static_cast<int>(spec.lambda.size()); ++i) {
      if (static_cast<int>(spec.lambda[i].size()) != n) {
        issue("lambda", "must be n x n");
        break;
      }
      for (int j = 0; j < n; ++j) {
        const double l = spec.lambda[i][j];
        if (l < 0.0 || l > 1.0) issue("lambda", "entries must lie in [0,1]");
        if (i == j && l != 0.0 && !spec.allow_self_weight)
          issue("lambda", "diagonal must be zero unless allow_self_weight");
      }
    }
    for (int i = 0; i < n; ++i)
      detail::validate_agent(spec.agents[static_cast<size_t>(i)], spec.common_noise, spec.steps,
                             "agents[" + std::to_string(i) + "]", eps, cond_cap, rep);
  } else {
    if (spec.types < 1) issue("types", "graphon mode needs types >= 1");
    if (spec.allow_self_weight) issue("allow_self_weight", "only available in finite mode");
    if (!spec.family && static_cast<int>(spec.type_agents.size()) != spec.types)
      issue("type_agents", "need a family or one AgentParams per type");
    // sampled kernel sanity: range and symmetry
    const int g = 17;
    for (int i = 0; i < g; ++i)
      for (int j = 0; j <= i; ++j) {
        const double u = (i + 0.5) / g, v = (j + 0.5) / g;
        const double a = spec.graphon(u, v), b = spec.graphon(v, u);
        if (a < 0.0 || a > 1.0) {
          issue("graphon", "kernel values must lie in [0,1]");
          i = g;
          break;
        }
        if (std::abs(a - b) > 1e-12) {
          issue("graphon", "kernel must be symmetric");
          i = g;
          break;
        }
      }
    if (rep.ok()) {
      const auto types = materialize_types(spec);
      for (int k = 0; k < static_cast<int>(types.size()); ++k)
        detail::validate_agent(types[static_cast<size_t>(k)], spec.common_noise, spec.steps,
                               "types[" + std::to_string(k) + "]", eps, cond_cap, rep);
    }
  }
  return rep;
}

inline void ensure_valid(const GameSpec& spec) {
  const auto rep = validate_spec(spec);
  if (!rep.ok()) throw ValidationError("invalid spec:\n" + rep.joined());
}

// ------------------------------------------------------- population moduli --

struct PopulationModuli {
  double gamma_tilde = 0.0;   // max |gamma|
  double gamma_bar = -kInf;   // max gamma
  double gamma_min_abs = kInf;
};

inline PopulationModuli population_moduli(const GameSpec& spec) {
  PopulationModuli m;
  auto absorb = [&](double g) {
    m.gamma_tilde = std::max(m.gamma_tilde, std::abs(g));
    m.gamma_bar = std::max(m.gamma_bar, g);
    m.gamma_min_abs = std::min(m.gamma_min_abs, std::abs(g));
  };
  if (spec.mode == Mode::Finite)
    for (const auto& a : spec.agents) absorb(a.gamma);
  else
    for (const auto& a : materialize_types(spec)) absorb(a.gamma);
  return m;
}

// The common-noise decoupling map contracts only for rho below this limit.
inline double g_map_rho_limit(const PopulationModuli& m) {
  return (1.0 - m.gamma_bar) / m.gamma_tilde;
}
inline double g_map_contraction_bound(const PopulationModuli& m, double rho) {
  return rho * m.gamma_tilde / (1.0 - m.gamma_bar);
}

}  // namespace relperf
