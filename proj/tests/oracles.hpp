#pragma once

// Reference computations used only by tests. Each one avoids the library code
// path it is compared against.

#include <cmath>
#include <array>
#include <complex>
#include <functional>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "whorl/linstab.hpp"
#include "whorl/specfun.hpp"

namespace oracle {

using cplx = std::complex<double>;

struct Table1Row {
  double delta, a, d, R;
  int n_c, j_c;
  double coeff;
};

inline const std::vector<Table1Row>& table1() {
  static const std::vector<Table1Row> rows = {
      {1.05, 0.2, 13, 4, 2, 1, 73.5557},    {1.05, 0.2, 15, 4, 2, 1, 147.17},
      {1.05, 0.2, 20, 4, 2, 1, 240.462},    {1.05, 0.2, 80, 4, 1, 1, 82.1464},
      {1.05, 0.4, 65, 4, 2, 1, 79.4266},    {1.05, 0.2, 13, 10, 5, 1, 459.715},
      {1.05, 0.4, 80, 10, 4, 1, 527.142},   {1.2, 0.2, 15, 4, 2, 1, 31.0966},
      {1.2, 0.2, 15, 20, 9, 1, 523.768},    {1.2, 0.4, 175, 4, 1, 1, -1.97781},
      {2.0, 0.2, 30, 4, 2, 1, 5.66053},     {2.0, 0.4, 60, 4, 3, 1, 2.0822},
      {2.0, 0.4, 100, 4, 2, 1, 2.479171},   {8.0, 0.4, 80, 10, 10, 5, 6.07011},
  };
  return rows;
}

inline whorl::ModelParams params_of(const Table1Row& r, double lambda = 0.5) {
  return {r.a, r.d, r.R, r.delta, lambda};
}

/// J_n(x) from its power series (adequate for x <= 12).
inline double bessel_j_series(int n, double x, int terms = 40) {
  const double h = 0.5 * x;
  double term = std::pow(h, n) / std::tgamma(n + 1.0);
  double sum = term;
  for (int k = 1; k < terms; ++k) {
    term *= -h * h / (static_cast<double>(k) * (k + n));
    sum += term;
  }
  return sum;
}

inline double bisect(const std::function<double(double)>& f, double lo, double hi,
                     double tol = 1e-14) {
  double flo = f(lo);
  for (int it = 0; it < 300 && hi - lo > tol * std::max(1.0, std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Sign changes of f on [lo, hi] at a fixed step, refined by bisection.
inline std::vector<double> dense_roots(const std::function<double(double)>& f, double lo,
                                       double hi, double step) {
  std::vector<double> roots;
  double x0 = lo, f0 = f(lo);
  while (x0 < hi) {
    const double x1 = std::min(hi, x0 + step);
    const double f1 = f(x1);
    if (f0 == 0.0) {
      roots.push_back(x0);
    } else if ((f0 < 0) != (f1 < 0) && f1 != 0.0) {
      roots.push_back(bisect(f, x0, x1));
    }
    x0 = x1;
    f0 = f1;
  }
  return roots;
}

/// Composite Simpson rule with an even number of intervals.
inline double simpson(const std::function<double(double)>& f, double lo, double hi,
                      int intervals) {
  if (intervals % 2) ++intervals;
  const double h = (hi - lo) / intervals;
  double s = f(lo) + f(hi);
  for (int i = 1; i < intervals; ++i) s += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

/// Annular Neumann eigenvalues of order n below eig_max by dense scan.
inline std::vector<double> scan_eigenvalues(int n, double delta, double eig_max,
                                            double step = 1e-4) {
  using whorl::BesselKind;
  auto f = [&](double x) {
    return whorl::bessel_deriv(BesselKind::J, n, x * delta) *
               whorl::bessel_deriv(BesselKind::Y, n, x) -
           whorl::bessel_deriv(BesselKind::J, n, x) *
               whorl::bessel_deriv(BesselKind::Y, n, x * delta);
  };
  const double lo = std::max(0.25 * n / delta, 1e-3);
  std::vector<double> out;
  for (double x : dense_roots(f, lo, std::sqrt(eig_max), step)) out.push_back(x * x);
  return out;
}

/// Radial profile of eigenvalue eig with pi-weighted unit norm, by quadrature.
struct Profile {
  int n;
  double k;
  double c = 1.0;
  double raw(double r) const {
    using whorl::BesselKind;
    if (k == 0.0) return 1.0;
    return whorl::bessel(BesselKind::J, n, k * r) * whorl::bessel_deriv(BesselKind::Y, n, k) -
           whorl::bessel_deriv(BesselKind::J, n, k) * whorl::bessel(BesselKind::Y, n, k * r);
  }
  double operator()(double r) const { return c * raw(r); }
};

inline Profile make_profile(int n, double eig, double delta, double weight, int pts = 20000) {
  Profile p{n, std::sqrt(eig)};
  const double s = simpson([&](double r) { return p.raw(r) * p.raw(r) * r; }, 1.0, delta, pts);
  p.c = 1.0 / std::sqrt(weight * s);
  if (p.raw(1.0) < 0) p.c = -p.c;
  return p;
}

/// Eigen-decomposition of the 2x2 linearization at Laplacian eigenvalue k:
/// betas sorted by real part, eigenvectors with unit norm and real u > 0.
struct Branch2 {
  cplx beta, u, v;
};

inline std::array<Branch2, 2> linear_modes(const whorl::ModelParams& p, double k) {
  const auto J = whorl::reaction_jacobian(p);
  Eigen::Matrix2d M;
  M << J.fu - k, J.fv, J.gu, J.gv - p.d * k;
  Eigen::EigenSolver<Eigen::Matrix2d> es(M);
  std::array<Branch2, 2> out;
  for (int i = 0; i < 2; ++i) {
    cplx u = es.eigenvectors()(0, i), v = es.eigenvectors()(1, i);
    const double nrm = std::sqrt(std::norm(u) + std::norm(v));
    const cplx ph = std::abs(u) > 0 ? std::conj(u) / std::abs(u) : cplx(1.0);
    out[i] = {es.eigenvalues()(i), u * ph / nrm, v * ph / nrm};
  }
  if (out[0].beta.real() > out[1].beta.real() ||
      (out[0].beta.real() == out[1].beta.real() && out[0].beta.imag() > out[1].beta.imag()))
    std::swap(out[0], out[1]);
  return out;
}

inline double max_growth(const whorl::ModelParams& p, double k) {
  const auto J = whorl::reaction_jacobian(p);
  Eigen::Matrix2d M;
  M << J.fu - k, J.fv, J.gu, J.gv - p.d * k;
  return M.eigenvalues().real().maxCoeff();
}

}  // namespace oracle
