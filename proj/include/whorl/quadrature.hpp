#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "whorl/errors.hpp"

namespace whorl::quad {

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Newton iteration on P_n started from the Chebyshev-like initial guess;
/// converges to machine precision for any n used here (n <= 200).
inline GaussLegendreRule make_gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("Gauss-Legendre order must be >= 1");
  GaussLegendreRule rule;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * k - 1.0) * z * p2 - (k - 1.0) * p3) / k;
      }
      dp = n * (z * p1 - p2) / (z * z - 1.0);
      const double z1 = z;
      z = z1 - p1 / dp;
      if (std::abs(z - z1) < 1e-16) break;
    }
    // recompute the derivative at the converged node for the weight
    double p1 = 1.0, p2 = 0.0;
    for (int k = 1; k <= n; ++k) {
      const double p3 = p2;
      p2 = p1;
      p1 = ((2.0 * k - 1.0) * z * p2 - (k - 1.0) * p3) / k;
    }
    dp = n * (z * p1 - p2) / (z * z - 1.0);
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    rule.nodes[i] = -z;
    rule.nodes[n - 1 - i] = z;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

inline constexpr int kDefaultOrder = 20;

inline const GaussLegendreRule& default_rule() {
  static const GaussLegendreRule rule = make_gauss_legendre(kDefaultOrder);
  return rule;
}

template <class F>
double apply_rule(const GaussLegendreRule& rule, F&& f, double lo, double hi) {
  const double half = 0.5 * (hi - lo);
  const double mid = 0.5 * (hi + lo);
  double sum = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i)
    sum += rule.weights[i] * f(mid + half * rule.nodes[i]);
  return sum * half;
}

struct AdaptiveResult {
  double value = 0.0;
  double error = 0.0;  // sum of accepted |fine - coarse| differences
  int panels = 0;
};

/// Adaptive composite Gauss-Legendre integration.
///
/// [lo, hi] is first cut into `initial_panels` equal panels (callers size this
/// to the oscillation count of the integrand). Each panel is accepted when the
/// rule on the panel and on its two halves agree to within the panel's share
/// of `abs_tol`; otherwise it is bisected. Panels are processed left to right
/// so the floating-point summation order is deterministic.
template <class F>
AdaptiveResult integrate_adaptive(F&& f, double lo, double hi,
                                  int initial_panels, double abs_tol,
                                  int max_panels = 1 << 15) {
  const auto& rule = default_rule();
  AdaptiveResult out;
  if (hi == lo) return out;
  initial_panels = std::max(1, initial_panels);
  const double width = hi - lo;

  struct Panel {
    double a, b, coarse;
  };
  std::vector<Panel> stack;
  stack.reserve(64);
  for (int p = initial_panels - 1; p >= 0; --p) {
    const double a = lo + width * p / initial_panels;
    const double b = (p + 1 == initial_panels) ? hi : lo + width * (p + 1) / initial_panels;
    stack.push_back({a, b, apply_rule(rule, f, a, b)});
  }
  int live = initial_panels;
  while (!stack.empty()) {
    const Panel pan = stack.back();
    stack.pop_back();
    const double c = 0.5 * (pan.a + pan.b);
    const double left = apply_rule(rule, f, pan.a, c);
    const double right = apply_rule(rule, f, c, pan.b);
    const double fine = left + right;
    const double diff = std::abs(fine - pan.coarse);
    const double share = abs_tol * (pan.b - pan.a) / width;
    if (diff <= share || (pan.b - pan.a) < 1e-14 * width) {
      out.value += fine;
      out.error += diff;
      ++out.panels;
      continue;
    }
    if (++live > max_panels)
      throw QuadratureNotConverged("adaptive quadrature exceeded " +
                                   std::to_string(max_panels) + " panels");
    stack.push_back({c, pan.b, right});
    stack.push_back({pan.a, c, left});
  }
  return out;
}

}  // namespace whorl::quad
