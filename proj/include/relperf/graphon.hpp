#pragma once
// Symmetric interaction kernels on [0,1]^2 ("graphons"): a small catalog,
// step-kernel sampling on the ceil grid, L2 distances by midpoint tensor
// quadrature, and the sampling moduli used by the convergence experiment.

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "relperf/common.hpp"

namespace relperf {

struct Graphon {
  std::function<double(double, double)> k;
  std::string name;
  double operator()(double u, double v) const { return k(u, v); }
};

inline Graphon constant_graphon(double p) {
  return {[p](double, double) { return p; }, "constant(" + std::to_string(p) + ")"};
}

inline Graphon uniform_attachment_graphon() {
  return {[](double u, double v) { return 1.0 - std::max(u, v); }, "uniform_attachment"};
}

inline Graphon min_graphon() {
  return {[](double u, double v) { return std::min(u, v); }, "min"};
}

inline Graphon product_graphon() {
  return {[](double u, double v) { return u * v; }, "product"};
}

// Block-constant kernel from an m x m symmetric matrix; block (i,j) covers
// ((i-1)/m, i/m] x ((j-1)/m, j/m].
inline Graphon step_graphon_from_matrix(const std::vector<std::vector<double>>& w) {
  const int m = static_cast<int>(w.size());
  if (m == 0) throw ValidationError("step graphon: empty matrix");
  for (int i = 0; i < m; ++i) {
    if (static_cast<int>(w[i].size()) != m)
      throw ValidationError("step graphon: matrix is not square");
    for (int j = 0; j < m; ++j) {
      if (w[i][j] < 0.0 || w[i][j] > 1.0)
        throw ValidationError("step graphon: entries must lie in [0,1]");
      if (w[i][j] != w[j][i]) throw ValidationError("step graphon: matrix is not symmetric");
    }
  }
  auto cell = [m](double u) {
    int i = static_cast<int>(std::ceil(u * m));
    return std::min(std::max(i, 1), m) - 1;
  };
  return {[w, cell](double u, double v) { return w[cell(u)][cell(v)]; },
          "step(" + std::to_string(m) + ")"};
}

// G_n(u,v) = G(ceil(n u)/n, ceil(n v)/n): the step kernel sampling G on the
// ceil grid, so lambda_ij = G_n(i/n, j/n) = G(i/n, j/n).
inline Graphon step_sample(const Graphon& g, int n) {
  if (n < 1) throw ValidationError("step_sample: n must be >= 1");
  auto snap = [n](double u) {
    double s = std::ceil(u * n) / n;
    return std::min(std::max(s, 1.0 / n), 1.0);
  };
  return {[g, snap](double u, double v) { return g(snap(u), snap(v)); },
          g.name + "@" + std::to_string(n)};
}

// ||G - H||_2 by the midpoint tensor rule with q^2 cells. Exact for two step
// kernels on grids that divide q.
inline double graphon_l2_distance(const Graphon& g, const Graphon& h, int q = 2048) {
  if (q < 1) throw ValidationError("graphon_l2_distance: q must be >= 1");
  double acc = 0.0;
  for (int i = 0; i < q; ++i) {
    const double u = (2.0 * i + 1.0) / (2.0 * q);
    for (int j = 0; j < q; ++j) {
      const double v = (2.0 * j + 1.0) / (2.0 * q);
      const double d = g(u, v) - h(u, v);
      acc += d * d;
    }
  }
  return std::sqrt(acc / (static_cast<double>(q) * q));
}

// Sampling moduli for a kernel at resolution n:
//   modulus_continuity = max_i sup_{u in ((i-1)/n, i/n]} Int |G(i/n,v) - G(u,v)|^2 dv
//   scaled_l2          = n * ||G_n - G||_2^2
// The sup over u is taken on a dense in-cell grid (u_res points strictly
// inside the half-open cell plus the right endpoint), the dv integral by
// midpoint quadrature.
struct SamplingModuli {
  double modulus_continuity = 0.0;
  double scaled_l2 = 0.0;
};

inline SamplingModuli condition_moduli(const Graphon& g, int n, int q = 512, int u_res = 64) {
  if (n < 1) throw ValidationError("condition_moduli: n must be >= 1");
  SamplingModuli m;
  for (int i = 1; i <= n; ++i) {
    const double ui = static_cast<double>(i) / n;
    for (int r = 0; r <= u_res; ++r) {
      const double u = (r == u_res)
                           ? ui
                           : (i - 1.0) / n + (r + 0.5) / (static_cast<double>(u_res) * n);
      double integ = 0.0;
      for (int jq = 0; jq < q; ++jq) {
        const double v = (2.0 * jq + 1.0) / (2.0 * q);
        const double d = g(ui, v) - g(u, v);
        integ += d * d;
      }
      m.modulus_continuity = std::max(m.modulus_continuity, integ / q);
    }
  }
  const double l2 = graphon_l2_distance(g, step_sample(g, n), q);
  m.scaled_l2 = n * l2 * l2;
  return m;
}

// max_i Int |G_n(i/n, v) - G(i/n, v)| dv: the L1 sampling gap bounded by the
// chain  lhs <= 2 n ||G_n - G||_2^2 + 2 * modulus_continuity.
inline double sampling_l1_gap(const Graphon& g, int n, int q = 2048) {
  const Graphon gn = step_sample(g, n);
  double worst = 0.0;
  for (int i = 1; i <= n; ++i) {
    const double ui = static_cast<double>(i) / n;
    double integ = 0.0;
    for (int jq = 0; jq < q; ++jq) {
      const double v = (2.0 * jq + 1.0) / (2.0 * q);
      integ += std::abs(gn(ui, v) - g(ui, v));
    }
    worst = std::max(worst, integ / q);
  }
  return worst;
}

}  // namespace relperf
