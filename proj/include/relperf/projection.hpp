#pragma once
// Euclidean projections onto admissible strategy sets, and onto their images
// under a transposed volatility map.
//
// project_transformed(M, A, z) projects z onto { M a : a in A } and is only
// available in closed form for the combinations below; anything else throws
// UnsupportedTransform rather than silently approximating:
//   (i)   d == 1 with any set variant (the image is a segment/ray/line),
//   (ii)  FullSpace with any d (column-space projection),
//   (iii) Ball centered at 0 with isotropic top block and zero extra rows,
//   (iv)  Box with diagonal top block and zero extra rows.

#include <Eigen/Dense>
#include <algorithm>
#include <limits>
#include <string>
#include <variant>

#include "relperf/common.hpp"

namespace relperf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct FullSpace {};
struct NonNegativeOrthant {};
struct Box {
  Vec lower, upper;  // entries may be +-inf
};
struct Ball {
  Vec center;
  double radius = 1.0;
};
struct HalfSpace {
  Vec normal;  // nonzero
  double offset = 0.0;  // { x : normal . x <= offset }
};

using ConstraintSet = std::variant<FullSpace, NonNegativeOrthant, Box, Ball, HalfSpace>;

inline std::string set_name(const ConstraintSet& A) {
  switch (A.index()) {
    case 0: return "full_space";
    case 1: return "non_negative_orthant";
    case 2: return "box";
    case 3: return "ball";
    default: return "half_space";
  }
}

inline Vec project(const ConstraintSet& A, const Vec& x) {
  if (std::holds_alternative<FullSpace>(A)) return x;
  if (std::holds_alternative<NonNegativeOrthant>(A)) return x.cwiseMax(0.0);
  if (const auto* box = std::get_if<Box>(&A)) {
    Vec y(x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k)
      y[k] = std::min(std::max(x[k], box->lower[k]), box->upper[k]);
    return y;
  }
  if (const auto* ball = std::get_if<Ball>(&A)) {
    Vec d = x - ball->center;
    const double n = d.norm();
    if (n <= ball->radius) return x;
    return ball->center + d * (ball->radius / n);
  }
  const auto& hs = std::get<HalfSpace>(A);
  const double slack = hs.normal.dot(x) - hs.offset;
  if (slack <= 0.0) return x;
  return x - hs.normal * (slack / hs.normal.squaredNorm());
}

inline bool contains(const ConstraintSet& A, const Vec& x, double tol = 1e-12) {
  return (project(A, x) - x).norm() <= tol;
}

// Closed interval [lo, hi] that a 1-dimensional set variant describes.
struct Interval {
  double lo = -kInf, hi = kInf;
};

inline Interval interval_of(const ConstraintSet& A) {
  if (std::holds_alternative<FullSpace>(A)) return {};
  if (std::holds_alternative<NonNegativeOrthant>(A)) return {0.0, kInf};
  if (const auto* box = std::get_if<Box>(&A)) {
    if (box->lower.size() != 1)
      throw UnsupportedTransform("interval_of: box is not 1-dimensional");
    return {box->lower[0], box->upper[0]};
  }
  if (const auto* ball = std::get_if<Ball>(&A)) {
    if (ball->center.size() != 1)
      throw UnsupportedTransform("interval_of: ball is not 1-dimensional");
    return {ball->center[0] - ball->radius, ball->center[0] + ball->radius};
  }
  const auto& hs = std::get<HalfSpace>(A);
  if (hs.normal.size() != 1 || hs.normal[0] == 0.0)
    throw UnsupportedTransform("interval_of: half-space is not 1-dimensional");
  const double b = hs.offset / hs.normal[0];
  return hs.normal[0] > 0.0 ? Interval{-kInf, b} : Interval{b, kInf};
}

namespace detail {

// M is [D; 0] with D diagonal and extra rows exactly zero?
inline bool is_diagonal_top_zero_rest(const Mat& M, Vec& diag_out) {
  const Eigen::Index d = M.cols();
  if (M.rows() < d) return false;
  diag_out.resize(d);
  for (Eigen::Index r = 0; r < M.rows(); ++r)
    for (Eigen::Index c = 0; c < d; ++c) {
      const double v = M(r, c);
      if (r == c) {
        diag_out[r] = v;
      } else if (v != 0.0) {
        return false;
      }
    }
  return true;
}

}  // namespace detail

// Projection of z onto { M a : a in A }, M of shape (ambient x d).
inline Vec project_transformed(const Mat& M, const ConstraintSet& A, const Vec& z) {
  const Eigen::Index d = M.cols();
  if (z.size() != M.rows())
    throw ValidationError("project_transformed: z dimension does not match M rows");

  if (std::holds_alternative<FullSpace>(A)) {
    // Column-space projection via normal equations; MtM = Sigma Sigma^T is
    // elliptic for every validated spec.
    Eigen::LDLT<Mat> ldlt(M.transpose() * M);
    return M * ldlt.solve(M.transpose() * z);
  }

  if (d == 1) {
    const Vec w = M.col(0);
    const double ww = w.squaredNorm();
    if (ww == 0.0) throw ValidationError("project_transformed: zero volatility column");
    const Interval J = interval_of(A);
    const double a = std::min(std::max(w.dot(z) / ww, J.lo), J.hi);
    return w * a;
  }

  Vec diag;
  if (detail::is_diagonal_top_zero_rest(M, diag)) {
    if (const auto* ball = std::get_if<Ball>(&A)) {
      const bool centered = ball->center.norm() == 0.0;
      const bool isotropic = (diag.array() == diag[0]).all() && diag[0] > 0.0;
      if (centered && isotropic) {
        Vec y = Vec::Zero(z.size());
        Vec zd = z.head(d);
        const double r = diag[0] * ball->radius;
        const double n = zd.norm();
        y.head(d) = (n <= r || n == 0.0) ? zd : Vec(zd * (r / n));
        return y;
      }
    }
    if (const auto* box = std::get_if<Box>(&A)) {
      Vec y = Vec::Zero(z.size());
      for (Eigen::Index k = 0; k < d; ++k) {
        double lo = diag[k] * box->lower[k], hi = diag[k] * box->upper[k];
        if (lo > hi) std::swap(lo, hi);
        y[k] = std::min(std::max(z[k], lo), hi);
      }
      return y;
    }
  }

  throw UnsupportedTransform(
      "project_transformed: no closed form for set variant '" + set_name(A) +
      "' with d=" + std::to_string(d) +
      " and this volatility shape (supported: d==1 any set; full space any d; "
      "centered ball with isotropic sigma and zero sigma*; box with diagonal "
      "sigma and zero sigma*)");
}

// Growth/admissibility certificate for the projected strategy map.
// c0 bounds |P(x)| - |x| from above over the ambient space; it is 0 exactly
// when 0 lies in the image set.
struct GrowthCertificate {
  bool zero_in_set = false;
  double c0 = 0.0;
};

inline GrowthCertificate growth_certificate(const ConstraintSet& A, const Mat& M, Rng& rng,
                                            int samples = 1000) {
  const Vec p0 = project_transformed(M, A, Vec::Zero(M.rows()));
  GrowthCertificate cert;
  cert.zero_in_set = p0.norm() <= 1e-12;
  if (cert.zero_in_set) return cert;
  double sup = p0.norm();  // 1-Lipschitz bound |P(x)| <= |x| + |P(0)|
  for (int s = 0; s < samples; ++s) {
    Vec z(M.rows());
    for (Eigen::Index k = 0; k < z.size(); ++k) z[k] = rng.uniform(-10.0, 10.0);
    const double gap = project_transformed(M, A, z).norm() - z.norm();
    sup = std::max(sup, gap);
  }
  cert.c0 = sup;
  return cert;
}

}  // namespace relperf
