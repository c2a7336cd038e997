#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/special_functions/bessel.hpp>

#include "whorl/errors.hpp"
#include "whorl/quadrature.hpp"

namespace whorl {

enum class BesselKind { J, Y };

inline constexpr int kMaxBesselOrder = 64;

namespace detail {

inline double bessel_raw(BesselKind kind, int n, double x) {
  double v;
  try {
    v = kind == BesselKind::J ? boost::math::cyl_bessel_j(n, x)
                              : boost::math::cyl_neumann(n, x);
  } catch (const std::overflow_error&) {
    throw BesselOverflow("Bessel " + std::string(kind == BesselKind::J ? "J" : "Y") +
                         "_" + std::to_string(n) + "(" + std::to_string(x) +
                         ") overflows");
  }
  if (!std::isfinite(v))
    throw BesselOverflow("Bessel " + std::string(kind == BesselKind::J ? "J" : "Y") +
                         "_" + std::to_string(n) + "(" + std::to_string(x) +
                         ") is not finite");
  return v;
}

inline void check_args(BesselKind kind, int n, double x) {
  if (n < 0 || n > kMaxBesselOrder)
    throw DomainError("Bessel order " + std::to_string(n) + " outside [0, 64]");
  if (!std::isfinite(x)) throw DomainError("Bessel argument is not finite");
  if (kind == BesselKind::Y ? x <= 0.0 : x < 0.0)
    throw DomainError("Bessel argument " + std::to_string(x) + " outside the domain");
}

}  // namespace detail

/// J_n(x) or Y_n(x) for integer order 0 <= n <= 64.
inline double bessel(BesselKind kind, int n, double x) {
  detail::check_args(kind, n, x);
  return detail::bessel_raw(kind, n, x);
}

/// Derivative in x via T_n' = (T_{n-1} - T_{n+1}) / 2, with T_0' = -T_1.
inline double bessel_deriv(BesselKind kind, int n, double x) {
  detail::check_args(kind, n, x);
  if (n == 0) return -detail::bessel_raw(kind, 1, x);
  return 0.5 * (detail::bessel_raw(kind, n - 1, x) - detail::bessel_raw(kind, n + 1, x));
}

/// J_n'(x delta) Y_n'(x) - J_n'(x) Y_n'(x delta). Its zeros are the square
/// roots of the Neumann eigenvalues of the annulus 1 <= r <= delta.
inline double cross_product(int n, double x, double delta) {
  if (!(delta > 1.0)) throw DomainError("delta must exceed 1");
  if (!(x > 0.0)) throw DomainError("cross product needs x > 0");
  using enum BesselKind;
  return bessel_deriv(J, n, x * delta) * bessel_deriv(Y, n, x) -
         bessel_deriv(J, n, x) * bessel_deriv(Y, n, x * delta);
}

struct RadialMode {
  int n = 0;
  int j = 1;
  double eig = 0.0;
  double norm = 1.0;  // c_{n,j}: pi c^2 int R^2 r dr = 1 (2 pi for n = 0)
};

/// Angular measure used by the stored normalization: pi for n >= 1, 2 pi for n = 0.
inline double angular_measure(int n) {
  return n == 0 ? 2.0 * std::numbers::pi : std::numbers::pi;
}

/// Evaluates c_{n,j} R_{n,j}(r) with the Bessel constants cached.
class RadialProfile {
 public:
  RadialProfile(const RadialMode& mode, double delta) : n_(mode.n), scale_(mode.norm) {
    (void)delta;
    if (mode.eig == 0.0) {
      constant_ = true;
      return;
    }
    k_ = std::sqrt(mode.eig);
    jp_ = bessel_deriv(BesselKind::J, n_, k_);
    yp_ = bessel_deriv(BesselKind::Y, n_, k_);
  }

  double operator()(double r) const {
    if (constant_) return scale_;
    const double x = k_ * r;
    return scale_ * (detail::bessel_raw(BesselKind::J, n_, x) * yp_ -
                     jp_ * detail::bessel_raw(BesselKind::Y, n_, x));
  }

  /// d/dr of the profile.
  double derivative(double r) const {
    if (constant_) return 0.0;
    const double x = k_ * r;
    return scale_ * k_ *
           (bessel_deriv(BesselKind::J, n_, x) * yp_ - jp_ * bessel_deriv(BesselKind::Y, n_, x));
  }

 private:
  int n_;
  double scale_;
  bool constant_ = false;
  double k_ = 0.0, jp_ = 0.0, yp_ = 0.0;
};

namespace detail {

// int_1^delta R^2 r dr for an unnormalized Neumann profile, from the Lommel
// integral with R'(1) = R'(delta) = 0.
inline double unnormalized_square_integral(int n, double eig, double delta) {
  if (eig == 0.0) return 0.5 * (delta * delta - 1.0);
  const RadialProfile raw({n, 1, eig, 1.0}, delta);
  const double r1 = raw(1.0);
  const double rd = raw(delta);
  const double nn = static_cast<double>(n) * n / eig;
  return 0.5 * ((delta * delta - nn) * rd * rd - (1.0 - nn) * r1 * r1);
}

inline double radial_norm(int n, double eig, double delta) {
  return 1.0 / std::sqrt(angular_measure(n) * unnormalized_square_integral(n, eig, delta));
}

inline double small_step(double delta) {
  return std::min(0.05, std::numbers::pi / (4.0 * (delta - 1.0)));
}

inline double large_step(double delta) {
  return std::clamp(std::numbers::pi / (8.0 * (delta - 1.0)), small_step(delta), 2.0);
}

// Scans x for sign changes of the cross product and bisects each bracket.
// Stops after max_count roots or when x passes x_stop.
inline std::vector<double> scan_roots(int n, double delta, double x_stop, int max_count) {
  std::vector<double> roots;
  const double x0 = std::max(0.5 * n / delta, 1e-4);
  double x_prev = x0;
  double f_prev = cross_product(n, x_prev, delta);
  const double h_small = small_step(delta);
  const double h_large = large_step(delta);
  const double switch_at = n * delta + 10.0;
  while (static_cast<int>(roots.size()) < max_count && x_prev < x_stop) {
    const double h = x_prev < switch_at ? h_small : h_large;
    const double x = std::min(x_prev + h, x_stop);
    const double f = cross_product(n, x, delta);
    if (f == 0.0) {
      roots.push_back(x);
    } else if ((f_prev < 0.0) != (f < 0.0) && f_prev != 0.0) {
      double lo = x_prev, hi = x, flo = f_prev;
      while (hi - lo > 2.5e-13 * hi) {
        const double mid = 0.5 * (lo + hi);
        const double fm = cross_product(n, mid, delta);
        if (fm == 0.0) {
          lo = hi = mid;
          break;
        }
        if ((fm < 0.0) == (flo < 0.0)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      roots.push_back(0.5 * (lo + hi));
    }
    x_prev = x;
    f_prev = f;
  }
  return roots;
}

inline void check_lemma(int n, double eig, double delta) {
  if (n == 0) return;
  const double lower = static_cast<double>(n) * n / (delta * delta);
  const double upper = static_cast<double>(n) * n;
  if (!(eig > lower))
    throw EigenvalueBoundViolation("lambda_{" + std::to_string(n) + ",1} = " +
                                   std::to_string(eig) + " is not above n^2/delta^2");
  if (delta <= 2.0 && !(eig < upper))
    throw EigenvalueBoundViolation("lambda_{" + std::to_string(n) + ",1} = " +
                                   std::to_string(eig) + " is not below n^2");
}

inline std::vector<RadialMode> to_modes(int n, double delta, const std::vector<double>& roots) {
  std::vector<RadialMode> modes;
  modes.reserve(roots.size() + 1);
  if (n == 0) modes.push_back({0, 1, 0.0, radial_norm(0, 0.0, delta)});
  for (double x : roots) {
    const double eig = x * x;
    const int j = static_cast<int>(modes.size()) + 1;
    if (j == 1) check_lemma(n, eig, delta);
    modes.push_back({n, j, eig, radial_norm(n, eig, delta)});
  }
  return modes;
}

inline void check_mode_args(int n, double delta) {
  if (n < 0 || n > kMaxBesselOrder)
    throw DomainError("angular index " + std::to_string(n) + " outside [0, 64]");
  if (!(delta > 1.0) || !std::isfinite(delta)) throw DomainError("delta must exceed 1");
}

}  // namespace detail

/// Upper end of the root scan for the first `count` roots of order n.
inline double scan_limit(int n, double delta, int count) {
  return (50.0 + std::numbers::pi * count) / (delta - 1.0) + 10.0 * n;
}

/// The first `count` Neumann eigenvalues lambda_{n,1} < lambda_{n,2} < ...
inline std::vector<RadialMode> radial_eigenvalues(int n, double delta, int count) {
  detail::check_mode_args(n, delta);
  if (count < 1 || count > 200) throw DomainError("count must lie in [1, 200]");
  const int want = n == 0 ? count - 1 : count;
  std::vector<double> roots;
  if (want > 0) {
    roots = detail::scan_roots(n, delta, scan_limit(n, delta, count), want);
    if (static_cast<int>(roots.size()) < want)
      throw BracketExhausted("found " + std::to_string(roots.size()) + " of " +
                             std::to_string(want) + " roots for n = " + std::to_string(n));
  }
  return detail::to_modes(n, delta, roots);
}

/// All eigenvalues of order n not exceeding eig_max.
inline std::vector<RadialMode> radial_eigenvalues_below(int n, double delta, double eig_max) {
  detail::check_mode_args(n, delta);
  if (eig_max < 0.0) return {};
  const double x_stop = std::sqrt(eig_max);
  std::vector<double> roots;
  if (n == 0 || static_cast<double>(n) / delta < x_stop)
    roots = detail::scan_roots(n, delta, x_stop, 1 << 20);
  return detail::to_modes(n, delta, roots);
}

/// c_{n,j} R_{n,j}(r).
inline double radial_eval(const RadialMode& mode, double delta, double r) {
  return RadialProfile(mode, delta)(r);
}

/// int_1^delta prod_i c_i R_i(r) r dr by adaptive Gauss-Legendre quadrature.
inline double radial_integral(std::span<const RadialMode> modes, double delta,
                              double abs_tol = 1e-12) {
  if (modes.empty() || modes.size() > 4) throw DomainError("radial_integral takes 1 to 4 modes");
  std::vector<RadialProfile> profiles;
  profiles.reserve(modes.size());
  double ksum = 0.0;
  for (const auto& m : modes) {
    profiles.emplace_back(m, delta);
    ksum += std::sqrt(m.eig);
  }
  // 20 nodes per panel, at least 8 nodes per oscillation period
  const double periods = (delta - 1.0) * ksum / (2.0 * std::numbers::pi);
  const int panels = std::max(2, static_cast<int>(std::ceil(periods * 8.0 / 20.0)) + 1);
  auto f = [&](double r) {
    double p = r;
    for (const auto& prof : profiles) p *= prof(r);
    return p;
  };
  return quad::integrate_adaptive(f, 1.0, delta, panels, abs_tol).value;
}

inline double radial_integral(std::initializer_list<RadialMode> modes, double delta,
                              double abs_tol = 1e-12) {
  return radial_integral(std::span<const RadialMode>(modes.begin(), modes.size()), delta, abs_tol);
}

/// Every Laplacian eigenvalue on the annulus up to a cutoff, sorted ascending.
struct ModeTable {
  double delta = 2.0;
  double cutoff = 0.0;
  std::vector<RadialMode> modes;
  /// Index pairs into `modes` whose eigenvalues coincide to 1e-9 relative
  /// across different n.
  std::vector<std::pair<std::size_t, std::size_t>> degenerate;
};

inline constexpr double kDegenerateTol = 1e-9;

inline ModeTable build_mode_table(double delta, double eig_cutoff) {
  ModeTable table;
  table.delta = delta;
  table.cutoff = eig_cutoff;
  for (int n = 0;; ++n) {
    // lambda_{n,1} increases with n, so an empty order ends the table
    if (n > 0 && static_cast<double>(n) * n / (delta * delta) >= eig_cutoff) break;
    auto modes = radial_eigenvalues_below(n, delta, eig_cutoff);
    if (modes.empty()) break;
    if (n == kMaxBesselOrder)
      throw DomainError("mode table cutoff " + std::to_string(eig_cutoff) +
                        " needs angular order above 64");
    table.modes.insert(table.modes.end(), modes.begin(), modes.end());
  }
  std::sort(table.modes.begin(), table.modes.end(), [](const RadialMode& x, const RadialMode& y) {
    if (x.eig != y.eig) return x.eig < y.eig;
    return x.n != y.n ? x.n < y.n : x.j < y.j;
  });
  for (std::size_t i = 0; i + 1 < table.modes.size(); ++i) {
    const auto& x = table.modes[i];
    for (std::size_t k = i + 1; k < table.modes.size(); ++k) {
      const auto& y = table.modes[k];
      if (y.eig - x.eig > kDegenerateTol * std::max(y.eig, 1e-300)) break;
      if (x.n != y.n) table.degenerate.emplace_back(i, k);
    }
  }
  return table;
}

}  // namespace whorl
