#pragma once
// Restricted value-function extrema near an obstacle pair, and the sign/span
// conditions under which attractor-only value functions make progress.

#include "pearl/features.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace pearl {

// V_x(x) = x^2 + c / ((x - 1)^2 + d^2): goal at the origin, obstacles at (1, +-d).
struct RestrictedValueParams {
  double c = 0.0;
  double d = 0.0;
  void validate() const {
    if (!(c >= 0.0) || !std::isfinite(c)) throw DimensionError("c must be finite and non-negative");
    if (!(d >= 0.0) || !std::isfinite(d)) throw DimensionError("d must be finite and non-negative");
  }
};

inline double vx(double x, const RestrictedValueParams& p) {
  const double u = x - 1.0;
  return x * x + p.c / (u * u + p.d * p.d);
}

inline double dvx(double x, const RestrictedValueParams& p) {
  const double u = x - 1.0, D = u * u + p.d * p.d;
  return 2.0 * x - 2.0 * p.c * u / (D * D);
}

inline double d2vx(double x, const RestrictedValueParams& p) {
  const double u = x - 1.0, D = u * u + p.d * p.d;
  return 2.0 + 2.0 * p.c * (3.0 * u * u - p.d * p.d) / (D * D * D);
}

// Coefficients (ascending powers) of ((x-1)^2 + d^2)^2 * dV_x/dx / 2
//   = x ((x-1)^2 + d^2)^2 - c (x - 1).
inline std::vector<double> dvx_numerator(const RestrictedValueParams& p) {
  const double k = 1.0 + p.d * p.d;  // (x-1)^2 + d^2 = x^2 - 2x + k
  // (x^2 - 2x + k)^2 = x^4 - 4x^3 + (4 + 2k) x^2 - 4k x + k^2
  return {p.c, k * k - p.c, -4.0 * k, 4.0 + 2.0 * k, -4.0, 1.0};
}

namespace detail {

inline double poly_eval(const std::vector<double>& a, double x) {
  double r = 0.0;
  for (auto it = a.rbegin(); it != a.rend(); ++it) r = r * x + *it;
  return r;
}

inline std::vector<double> poly_derivative(const std::vector<double>& a) {
  std::vector<double> d;
  for (std::size_t i = 1; i < a.size(); ++i) d.push_back(static_cast<double>(i) * a[i]);
  return d;
}

inline double bisect(const std::vector<double>& a, double lo, double hi, double tol) {
  double flo = poly_eval(a, lo);
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi), fm = poly_eval(a, mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Real roots in [lo, hi]. Between consecutive roots of the derivative the
// polynomial is monotone, so each such piece holds at most one sign change.
inline std::vector<double> poly_roots(const std::vector<double>& a, double lo, double hi, double tol) {
  std::vector<double> coeffs = a;
  while (!coeffs.empty() && coeffs.back() == 0.0) coeffs.pop_back();
  if (coeffs.size() <= 1) return {};
  std::vector<double> knots{lo};
  for (double r : poly_roots(poly_derivative(coeffs), lo, hi, tol))
    if (r > lo && r < hi) knots.push_back(r);
  knots.push_back(hi);
  std::vector<double> roots;
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    const double a0 = knots[i], b0 = knots[i + 1];
    const double fa = poly_eval(coeffs, a0), fb = poly_eval(coeffs, b0);
    double r;
    if (fa == 0.0) r = a0;
    else if (fb == 0.0) r = b0;
    else if ((fa < 0.0) != (fb < 0.0)) r = bisect(coeffs, a0, b0, tol);
    else continue;
    if (roots.empty() || r - roots.back() > tol) roots.push_back(r);
  }
  return roots;
}

}  // namespace detail

enum class ExtremumKind { min, max, inflection };

inline const char* to_string(ExtremumKind k) {
  switch (k) {
    case ExtremumKind::min: return "min";
    case ExtremumKind::max: return "max";
    case ExtremumKind::inflection: return "inflection";
  }
  return "?";
}

struct CriticalPoint {
  double x;
  ExtremumKind kind;
  double curvature;            // d2V_x/dx2 at x
  bool outside_goal_gap;       // x < -1 or x > 0
  bool beyond_obstacle_width;  // |x - 1| > d
};

inline constexpr double kInflectionCurvature = 1e-8;

// Every root of dV_x/dx in [lo, hi], classified by the sign of the second
// derivative. With d = 0 the pole at x = 1 is not a critical point.
inline std::vector<CriticalPoint> critical_points(const RestrictedValueParams& p, double lo = -10.0, double hi = 10.0,
                                                  double tol = 1e-10) {
  p.validate();
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) throw DimensionError("search interval must be bounded and non-empty");
  std::vector<CriticalPoint> out;
  for (double x : detail::poly_roots(dvx_numerator(p), lo, hi, tol)) {
    if (p.d == 0.0 && std::abs(x - 1.0) <= tol) continue;
    const double k = d2vx(x, p);
    const ExtremumKind kind = std::abs(k) < kInflectionCurvature ? ExtremumKind::inflection
                              : k > 0.0                          ? ExtremumKind::min
                                                                 : ExtremumKind::max;
    out.push_back({x, kind, k, x < -1.0 || x > 0.0, std::abs(x - 1.0) > p.d});
  }
  return out;
}

inline std::vector<CriticalPoint> minima(const std::vector<CriticalPoint>& pts) {
  std::vector<CriticalPoint> m;
  std::copy_if(pts.begin(), pts.end(), std::back_inserter(m), [](const CriticalPoint& c) { return c.kind == ExtremumKind::min; });
  return m;
}

struct StabilityReport {
  bool holds = false;
  std::optional<int> offending_weight;   // first non-negative entry of theta
  std::vector<int> uncovered;            // state coordinates no attractor reads
  int rank = 0;                          // of the stacked selector rows
  std::string reason;
};

// Sign and span conditions: every weight negative, and the attractor
// selectors together constrain every state coordinate.
inline StabilityReport check_attractor_stability(const Vector& theta, const StateLayout& layout,
                                                 const std::vector<Preference>& prefs) {
  if (theta.size() != static_cast<Eigen::Index>(prefs.size()))
    throw DimensionError("theta has " + std::to_string(theta.size()) + " entries for " + std::to_string(prefs.size()) +
                         " preferences");
  for (const Preference& p : prefs)
    if (p.kind != PreferenceKind::attractor)
      throw DimensionError("stability check needs attractor-only preferences; '" + p.name + "' is a repeller");
  const int n = layout.state_dim();
  std::vector<Eigen::RowVectorXd> rows;
  auto coord = [&](const Preference& p, int body, int axis) {
    return p.space == Space::position ? layout.position_index(body, axis) : layout.velocity_index(body, axis);
  };
  for (const Preference& p : prefs) {
    std::vector<int> bodies;
    for (const auto& a : p.agents) bodies.push_back(layout.body(a));
    for (int axis : p.axes) {
      if (p.target == TargetKind::pairwise) {
        for (std::size_t i = 0; i < bodies.size(); ++i)
          for (std::size_t j = i + 1; j < bodies.size(); ++j) {
            Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(n);
            r[coord(p, bodies[i], axis)] += 1.0;
            r[coord(p, bodies[j], axis)] -= 1.0;
            rows.push_back(r);
          }
        continue;
      }
      for (int b : bodies) {
        Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(n);
        r[coord(p, b, axis)] += 1.0;
        if (p.target == TargetKind::relation) r[coord(p, layout.body(p.partner), axis)] -= 1.0;
        rows.push_back(r);
      }
    }
  }
  StabilityReport rep;
  Matrix M = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), n);
  for (std::size_t i = 0; i < rows.size(); ++i) M.row(static_cast<Eigen::Index>(i)) = rows[i];
  rep.rank = rows.empty() ? 0 : static_cast<int>(Eigen::FullPivLU<Matrix>(M).rank());
  for (int c = 0; c < n; ++c)
    if (rows.empty() || M.col(c).cwiseAbs().maxCoeff() == 0.0) rep.uncovered.push_back(c);
  for (Eigen::Index i = 0; i < theta.size(); ++i)
    if (!(theta[i] < 0.0)) {
      rep.offending_weight = static_cast<int>(i);
      break;
    }
  if (rep.offending_weight) {
    rep.reason = "weight " + std::to_string(*rep.offending_weight) + " ('" + prefs[*rep.offending_weight].name +
                 "') is not negative";
  } else if (!rep.uncovered.empty()) {
    rep.reason = "coordinates not covered by any attractor:";
    for (int c : rep.uncovered) rep.reason += " " + layout.coordinate_name(c);
  } else if (rep.rank < n) {
    rep.reason = "attractor selectors span rank " + std::to_string(rep.rank) + " of " + std::to_string(n);
  } else {
    rep.holds = true;
  }
  return rep;
}

}  // namespace pearl
