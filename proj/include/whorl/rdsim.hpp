#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <mutex>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fftw3.h>

#include "whorl/errors.hpp"
#include "whorl/linstab.hpp"
#include "whorl/specfun.hpp"

namespace whorl {

struct Grid {
  int nr = 0;
  int nth = 0;
  double delta = 2.0;
  double dr = 0.0;
  std::vector<double> r;
  std::vector<double> theta;

  int nmodes() const { return nth / 2 + 1; }
  std::size_t size() const { return static_cast<std::size_t>(nr) * nth; }
  std::size_t at(int i, int k) const { return static_cast<std::size_t>(i) * nth + k; }
};

/// Deviation fields u, v stored row-major as [radial index][angular index].
struct Field {
  ModelParams params;
  Grid grid;
  std::vector<double> u;
  std::vector<double> v;
  double time = 0.0;
};

inline Grid make_polar_grid(double delta, int nr, int nth) {
  if (nr < 16) throw DomainError("N_r must be at least 16");
  if (nth < 32 || nth % 2 != 0) throw DomainError("N_theta must be even and at least 32");
  if (!(delta > 1.0)) throw DomainError("delta must exceed 1");
  Grid g;
  g.nr = nr;
  g.nth = nth;
  g.delta = delta;
  g.dr = (delta - 1.0) / (nr - 1);
  g.r.resize(nr);
  g.theta.resize(nth);
  for (int i = 0; i < nr; ++i) g.r[i] = (i == nr - 1) ? delta : 1.0 + i * g.dr;
  for (int k = 0; k < nth; ++k) g.theta[k] = 2.0 * std::numbers::pi * k / nth;
  return g;
}

inline Field make_grid(const ModelParams& params, int nr, int nth) {
  validate(params);
  Field f;
  f.params = params;
  f.grid = make_polar_grid(params.delta, nr, nth);
  f.u.assign(f.grid.size(), 0.0);
  f.v.assign(f.grid.size(), 0.0);
  return f;
}

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace detail

/// Batched real FFT along theta for every radial row.
class AngularFft {
 public:
  AngularFft(int nr, int nth) : nr_(nr), nth_(nth), nm_(nth / 2 + 1) {
    real_ = static_cast<double*>(fftw_malloc(sizeof(double) * nr_ * nth_));
    spec_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * nr_ * nm_));
    std::lock_guard lock(detail::fftw_planner_mutex());
    fwd_ = fftw_plan_many_dft_r2c(1, &nth_, nr_, real_, nullptr, 1, nth_, spec_, nullptr, 1, nm_,
                                  FFTW_ESTIMATE);
    inv_ = fftw_plan_many_dft_c2r(1, &nth_, nr_, spec_, nullptr, 1, nm_, real_, nullptr, 1, nth_,
                                  FFTW_ESTIMATE);
  }
  AngularFft(const AngularFft&) = delete;
  AngularFft& operator=(const AngularFft&) = delete;
  ~AngularFft() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
    fftw_free(real_);
    fftw_free(spec_);
  }

  /// Unnormalized forward transform; out has nr * (nth/2+1) entries.
  void forward(const std::vector<double>& in, std::vector<cplx>& out) {
    std::memcpy(real_, in.data(), sizeof(double) * in.size());
    fftw_execute(fwd_);
    out.resize(static_cast<std::size_t>(nr_) * nm_);
    std::memcpy(static_cast<void*>(out.data()), spec_, sizeof(fftw_complex) * out.size());
  }

  /// Inverse transform including the 1/nth normalization.
  void inverse(const std::vector<cplx>& in, std::vector<double>& out) {
    std::memcpy(spec_, in.data(), sizeof(fftw_complex) * in.size());
    fftw_execute(inv_);
    out.resize(static_cast<std::size_t>(nr_) * nth_);
    const double s = 1.0 / nth_;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = real_[i] * s;
  }

 private:
  int nr_, nth_, nm_;
  double* real_;
  fftw_complex* spec_;
  fftw_plan fwd_;
  fftw_plan inv_;
};

/// Tridiagonal radial Laplacian for angular wavenumber m with ghost-point
/// Neumann walls: sub[i], diag[i], sup[i].
struct RadialOperator {
  std::vector<double> sub, diag, sup;
};

inline RadialOperator radial_operator(const Grid& g, int m) {
  RadialOperator op;
  const int n = g.nr;
  op.sub.assign(n, 0.0);
  op.diag.assign(n, 0.0);
  op.sup.assign(n, 0.0);
  const double h2 = 1.0 / (g.dr * g.dr);
  const double mm = static_cast<double>(m) * m;
  for (int i = 0; i < n; ++i) {
    const double r = g.r[i];
    op.diag[i] = -2.0 * h2 - mm / (r * r);
    if (i == 0) {
      op.sup[i] = 2.0 * h2;
    } else if (i == n - 1) {
      op.sub[i] = 2.0 * h2;
    } else {
      const double c = 1.0 / (2.0 * r * g.dr);
      op.sub[i] = h2 - c;
      op.sup[i] = h2 + c;
    }
  }
  return op;
}

namespace detail {

// Polar Laplacian of one spectral column set, by differences so constants map to 0.
inline void spectral_laplacian(const Grid& g, const std::vector<cplx>& in, std::vector<cplx>& out) {
  const int nm = g.nmodes();
  out.assign(in.size(), cplx{});
  const double h2 = 1.0 / (g.dr * g.dr);
  for (int i = 0; i < g.nr; ++i) {
    const double r = g.r[i];
    const int ip = (i == g.nr - 1) ? g.nr - 2 : i + 1;
    const int im = (i == 0) ? 1 : i - 1;
    for (int m = 0; m < nm; ++m) {
      const cplx c = in[static_cast<std::size_t>(i) * nm + m];
      const cplx up = in[static_cast<std::size_t>(ip) * nm + m];
      const cplx dn = in[static_cast<std::size_t>(im) * nm + m];
      cplx val = ((up - c) - (c - dn)) * h2 - (static_cast<double>(m) * m / (r * r)) * c;
      if (i != 0 && i != g.nr - 1) val += (up - dn) / (2.0 * r * g.dr);
      out[static_cast<std::size_t>(i) * nm + m] = val;
    }
  }
}

inline double g_nonlinear(const Gammas& G, double u, double v) {
  return G.g2 * u * u + G.g12 * u * v + G.g3 * u * u * v;
}

}  // namespace detail

/// Right-hand side of the deviation system split into its parts.
struct OperatorParts {
  std::vector<double> diff_u, diff_v;          // Laplacian u, d Laplacian v
  std::vector<double> react_u, react_v;        // linear reaction
  std::vector<double> nonlin_u, nonlin_v;      // +g, -g
  std::vector<double> total_u, total_v;
};

inline OperatorParts apply_operator(const Field& f) {
  const auto& g = f.grid;
  AngularFft fft(g.nr, g.nth);
  std::vector<cplx> su, sv, lu, lv;
  OperatorParts out;
  fft.forward(f.u, su);
  fft.forward(f.v, sv);
  detail::spectral_laplacian(g, su, lu);
  detail::spectral_laplacian(g, sv, lv);
  fft.inverse(lu, out.diff_u);
  fft.inverse(lv, out.diff_v);
  const auto J = reaction_jacobian(f.params);
  const auto G = gamma_coeffs(f.params);
  const std::size_t n = g.size();
  out.react_u.resize(n);
  out.react_v.resize(n);
  out.nonlin_u.resize(n);
  out.nonlin_v.resize(n);
  out.total_u.resize(n);
  out.total_v.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.diff_v[i] *= f.params.d;
    out.react_u[i] = J.fu * f.u[i] + J.fv * f.v[i];
    out.react_v[i] = J.gu * f.u[i] + J.gv * f.v[i];
    const double nl = detail::g_nonlinear(G, f.u[i], f.v[i]);
    out.nonlin_u[i] = nl;
    out.nonlin_v[i] = -nl;
    out.total_u[i] = out.diff_u[i] + out.react_u[i] + nl;
    out.total_v[i] = out.diff_v[i] + out.react_v[i] - nl;
  }
  return out;
}

enum class Scheme { kImexEuler, kCnab2 };

inline constexpr double kBlowUpThreshold = 1e6;

/// Largest |eigenvalue| of the reaction Jacobian.
inline double reaction_spectral_radius(const ModelParams& p) {
  const auto J = reaction_jacobian(p);
  const double tr = J.fu + J.gv;
  const double det = J.fu * J.gv - J.fv * J.gu;
  const cplx sq = std::sqrt(cplx(tr * tr - 4.0 * det, 0.0));
  return std::max(std::abs(0.5 * (tr + sq)), std::abs(0.5 * (tr - sq)));
}

/// Fixed-step IMEX integrator: diffusion implicit, reaction explicit.
class ImexStepper {
 public:
  ImexStepper(const ModelParams& params, const Grid& grid, double dt,
              Scheme scheme = Scheme::kImexEuler)
      : params_(params), grid_(grid), dt_(dt), scheme_(scheme), fft_(grid.nr, grid.nth) {
    if (!(dt > 0.0)) throw DomainError("dt must be positive");
    if (dt * reaction_spectral_radius(params) >= 0.5)
      throw DomainError("dt too large for the explicit reaction step");
    jac_ = reaction_jacobian(params);
    gam_ = gamma_coeffs(params);
    const double theta = scheme == Scheme::kImexEuler ? 1.0 : 0.5;
    const int nm = grid.nmodes();
    fac_u_.resize(nm);
    fac_v_.resize(nm);
    for (int m = 0; m < nm; ++m) {
      const auto op = radial_operator(grid, m);
      fac_u_[m] = factor(op, theta * dt, 1.0);
      fac_v_[m] = factor(op, theta * dt, params.d);
    }
  }

  double dt() const { return dt_; }
  Scheme scheme() const { return scheme_; }

  /// Clears the multistep history (call after modifying the field externally).
  void reset() { have_prev_ = false; }

  void step(Field& f) {
    const auto& g = grid_;
    const std::size_t n = g.size();
    fu_.resize(n);
    fv_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double u = f.u[i], v = f.v[i];
      const double nl = detail::g_nonlinear(gam_, u, v);
      fu_[i] = jac_.fu * u + jac_.fv * v + nl;
      fv_[i] = jac_.gu * u + jac_.gv * v - nl;
    }
    fft_.forward(f.u, su_);
    fft_.forward(f.v, sv_);
    fft_.forward(fu_, sfu_);
    fft_.forward(fv_, sfv_);
    const bool ab2 = scheme_ == Scheme::kCnab2 && have_prev_;
    const std::size_t ns = su_.size();
    if (scheme_ == Scheme::kCnab2) {
      detail::spectral_laplacian(g, su_, lu_);
      detail::spectral_laplacian(g, sv_, lv_);
    }
    for (std::size_t i = 0; i < ns; ++i) {
      cplx ru, rv;
      if (scheme_ == Scheme::kImexEuler) {
        ru = su_[i] + dt_ * sfu_[i];
        rv = sv_[i] + dt_ * sfv_[i];
      } else {
        const cplx eu = ab2 ? 1.5 * sfu_[i] - 0.5 * pfu_[i] : sfu_[i];
        const cplx ev = ab2 ? 1.5 * sfv_[i] - 0.5 * pfv_[i] : sfv_[i];
        ru = su_[i] + 0.5 * dt_ * lu_[i] + dt_ * eu;
        rv = sv_[i] + 0.5 * dt_ * params_.d * lv_[i] + dt_ * ev;
      }
      su_[i] = ru;
      sv_[i] = rv;
    }
    solve_all(fac_u_, su_);
    solve_all(fac_v_, sv_);
    if (scheme_ == Scheme::kCnab2) {
      pfu_ = sfu_;
      pfv_ = sfv_;
      have_prev_ = true;
    }
    fft_.inverse(su_, f.u);
    fft_.inverse(sv_, f.v);
    f.time += dt_;
    double mx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = std::max(std::abs(f.u[i]), std::abs(f.v[i]));
      if (!(a <= mx)) mx = a;  // NaN propagates
    }
    if (!(mx <= kBlowUpThreshold)) throw BlowUp("field exceeded 1e6 at t = " +
                                                std::to_string(f.time), f.time);
  }

 private:
  struct Thomas {
    std::vector<double> sub, cprime, inv_denom;
  };

  // I - s D L for diffusion coefficient D
  Thomas factor(const RadialOperator& op, double s, double D) const {
    const int n = grid_.nr;
    Thomas t;
    t.sub.resize(n);
    t.cprime.resize(n);
    t.inv_denom.resize(n);
    for (int i = 0; i < n; ++i) {
      const double a = -s * D * op.sub[i];
      const double b = 1.0 - s * D * op.diag[i];
      const double c = -s * D * op.sup[i];
      const double denom = i == 0 ? b : b - a * t.cprime[i - 1];
      if (!(std::abs(denom) > 1e-300)) throw SolveFailed("radial implicit solve is singular");
      t.sub[i] = a;
      t.inv_denom[i] = 1.0 / denom;
      t.cprime[i] = c / denom;
    }
    return t;
  }

  void solve_all(const std::vector<Thomas>& fac, std::vector<cplx>& s) const {
    const int nm = grid_.nmodes();
    const int n = grid_.nr;
    std::vector<cplx> col(n);
    for (int m = 0; m < nm; ++m) {
      const auto& t = fac[m];
      for (int i = 0; i < n; ++i) {
        const cplx d = s[static_cast<std::size_t>(i) * nm + m];
        col[i] = (i == 0 ? d : d - t.sub[i] * col[i - 1]) * t.inv_denom[i];
      }
      for (int i = n - 2; i >= 0; --i) col[i] -= t.cprime[i] * col[i + 1];
      for (int i = 0; i < n; ++i) s[static_cast<std::size_t>(i) * nm + m] = col[i];
    }
  }

  ModelParams params_;
  Grid grid_;
  double dt_;
  Scheme scheme_;
  AngularFft fft_;
  ReactionJacobian jac_{};
  Gammas gam_{};
  std::vector<Thomas> fac_u_, fac_v_;
  std::vector<double> fu_, fv_;
  std::vector<cplx> su_, sv_, sfu_, sfv_, lu_, lv_, pfu_, pfv_;
  bool have_prev_ = false;
};

/// One IMEX step (builds the factorizations on every call).
inline Field step_imex(const Field& f, double dt, Scheme scheme = Scheme::kImexEuler) {
  ImexStepper st(f.params, f.grid, dt, scheme);
  Field out = f;
  st.step(out);
  return out;
}

/// Trapezoid weights in r for int (.) r dr.
inline std::vector<double> radial_weights(const Grid& g) {
  std::vector<double> w(g.nr);
  for (int i = 0; i < g.nr; ++i)
    w[i] = g.dr * g.r[i] * ((i == 0 || i == g.nr - 1) ? 0.5 : 1.0);
  return w;
}

/// Largest one-sided second-order estimate of dU/dr at either wall.
inline double wall_residual(const Field& f) {
  const auto& g = f.grid;
  double worst = 0.0;
  for (const auto* fld : {&f.u, &f.v}) {
    for (int k = 0; k < g.nth; ++k) {
      const auto& x = *fld;
      const double d0 = (-3.0 * x[g.at(0, k)] + 4.0 * x[g.at(1, k)] - x[g.at(2, k)]) / (2.0 * g.dr);
      const int n = g.nr - 1;
      const double d1 =
          (3.0 * x[g.at(n, k)] - 4.0 * x[g.at(n - 1, k)] + x[g.at(n - 2, k)]) / (2.0 * g.dr);
      worst = std::max({worst, std::abs(d0), std::abs(d1)});
    }
  }
  return worst;
}

/// sqrt(int (u^2 + v^2) r dr dtheta).
inline double l2_amplitude(const Field& f) {
  const auto& g = f.grid;
  const auto w = radial_weights(g);
  const double dth = 2.0 * std::numbers::pi / g.nth;
  double s = 0.0;
  for (int i = 0; i < g.nr; ++i)
    for (int k = 0; k < g.nth; ++k) {
      const auto idx = g.at(i, k);
      s += w[i] * dth * (f.u[idx] * f.u[idx] + f.v[idx] * f.v[idx]);
    }
  return std::sqrt(s);
}

inline double max_abs(const Field& f) {
  double m = 0.0;
  for (std::size_t i = 0; i < f.u.size(); ++i)
    m = std::max({m, std::abs(f.u[i]), std::abs(f.v[i])});
  return m;
}

/// Eigenpair of the discrete radial Laplacian for wavenumber m, scaled like
/// the continuum profile: pi sum w r e^2 = 1 (2 pi for m = 0) and e(1) > 0.
struct DiscreteRadialMode {
  int m = 0;
  int j = 1;
  double mu = 0.0;             // discrete Laplacian eigenvalue (>= 0)
  std::vector<double> shape;   // right eigenvector
  std::vector<double> left;    // left eigenvector with left . shape = 1
};

inline std::vector<DiscreteRadialMode> discrete_radial_modes(const Grid& g, int m, int count) {
  if (count < 1 || count > g.nr) throw DomainError("discrete mode count out of range");
  const auto op = radial_operator(g, m);
  const int n = g.nr;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    A(i, i) = op.diag[i];
    if (i > 0) A(i, i - 1) = op.sub[i];
    if (i + 1 < n) A(i, i + 1) = op.sup[i];
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(A);
  if (es.info() != Eigen::Success) throw SolveFailed("radial eigensolve failed");
  const Eigen::VectorXcd ev = es.eigenvalues();
  const Eigen::MatrixXcd V = es.eigenvectors();
  const Eigen::MatrixXcd Vinv = V.inverse();
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](int x, int y) { return ev[x].real() > ev[y].real(); });
  const auto w = radial_weights(g);
  const double ang = m == 0 ? 2.0 * std::numbers::pi : std::numbers::pi;
  std::vector<DiscreteRadialMode> out;
  for (int c = 0; c < count; ++c) {
    const int idx = order[c];
    DiscreteRadialMode dm;
    dm.m = m;
    dm.j = c + 1;
    dm.mu = std::max(0.0, -ev[idx].real());
    dm.shape.resize(n);
    dm.left.resize(n);
    for (int i = 0; i < n; ++i) dm.shape[i] = V(i, idx).real();
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += w[i] * dm.shape[i] * dm.shape[i];
    double scale = 1.0 / std::sqrt(ang * s);
    if (dm.shape[0] < 0.0) scale = -scale;
    for (int i = 0; i < n; ++i) dm.shape[i] *= scale;
    // row of V^{-1} pairs with the unscaled column
    for (int i = 0; i < n; ++i) dm.left[i] = Vinv(idx, i).real() / scale;
    out.push_back(std::move(dm));
  }
  return out;
}

/// Growth rate of the discrete operator for a discrete radial eigenvalue.
inline double discrete_beta(const ModelParams& p, double mu) {
  return dispersion(p, mu).beta2().real();
}

/// Projects a field onto the discrete critical eigenfield (u_m, v_m) e(r) cos/sin(m theta).
class ModeProjector {
 public:
  ModeProjector(const ModelParams& p, const Grid& g, const DiscreteRadialMode& mode)
      : grid_(g), mode_(mode) {
    const auto disp = dispersion(p, mode.mu);
    phi_u_ = disp.branch[1].u.real();
    phi_v_ = disp.branch[1].v.real();
    const auto J = reaction_jacobian(p);
    const double beta = disp.beta2().real();
    // left eigenvector of [[fu - mu, fv], [gu, gv - d mu]] for beta
    psi_u_ = -J.gu;
    psi_v_ = J.fu - mode.mu - beta;
    if (std::abs(psi_u_) + std::abs(psi_v_) == 0.0) {
      psi_u_ = J.gv - p.d * mode.mu - beta;
      psi_v_ = -J.fv;
    }
  }

  double phi_u() const { return phi_u_; }
  double phi_v() const { return phi_v_; }

  /// (cos amplitude, sin amplitude).
  std::pair<double, double> amplitude(const Field& f) const {
    const auto& g = grid_;
    const int m = mode_.m;
    const double norm = (m == 0 || 2 * m == g.nth) ? 1.0 / g.nth : 2.0 / g.nth;
    double cu = 0, cv = 0, su = 0, sv = 0;
    for (int i = 0; i < g.nr; ++i) {
      double acu = 0, acv = 0, asu = 0, asv = 0;
      for (int k = 0; k < g.nth; ++k) {
        const double c = std::cos(m * g.theta[k]), s = std::sin(m * g.theta[k]);
        const auto idx = g.at(i, k);
        acu += f.u[idx] * c;
        acv += f.v[idx] * c;
        asu += f.u[idx] * s;
        asv += f.v[idx] * s;
      }
      const double l = mode_.left[i] * norm;
      cu += l * acu;
      cv += l * acv;
      su += l * asu;
      sv += l * asv;
    }
    const double pp = psi_u_ * phi_u_ + psi_v_ * phi_v_;
    return {(psi_u_ * cu + psi_v_ * cv) / pp, (psi_u_ * su + psi_v_ * sv) / pp};
  }

  /// Writes amp * (phi_u, phi_v) e(r) cos(m theta) (or sin) into the field.
  void seed(Field& f, double amp, bool sine = false) const {
    const auto& g = grid_;
    for (int i = 0; i < g.nr; ++i)
      for (int k = 0; k < g.nth; ++k) {
        const double t = sine ? std::sin(mode_.m * g.theta[k]) : std::cos(mode_.m * g.theta[k]);
        const auto idx = g.at(i, k);
        f.u[idx] += amp * phi_u_ * mode_.shape[i] * t;
        f.v[idx] += amp * phi_v_ * mode_.shape[i] * t;
      }
  }

 private:
  Grid grid_;
  DiscreteRadialMode mode_;
  double phi_u_ = 0, phi_v_ = 0, psi_u_ = 0, psi_v_ = 0;
};

struct SimOptions {
  int nr = 33;
  int nth = 32;
  double dt = 0.005;
  Scheme scheme = Scheme::kCnab2;
};

struct GrowthMeasurement {
  double measured = 0.0;   // fitted slope of log amplitude
  double discrete = 0.0;   // beta of the discrete operator
  double continuum = 0.0;  // beta from the Bessel eigenvalue
  double mu = 0.0;
  int samples = 0;
};

inline constexpr double kContaminationLevel = 1e-2;

/// Seeds the discrete eigenfield of (n, j) and fits the log-amplitude slope.
inline GrowthMeasurement measure_growth(const ModelParams& p, int n, int j, double amplitude0,
                                        double horizon, const SimOptions& opt = {}) {
  if (!(amplitude0 > 0.0) || amplitude0 > 1e-4)
    throw DomainError("amplitude0 must lie in (0, 1e-4]");
  if (!(horizon > 0.0)) throw DomainError("horizon must be positive");
  auto f = make_grid(p, opt.nr, opt.nth);
  const auto modes = discrete_radial_modes(f.grid, n, j);
  const auto& dm = modes.back();
  ModeProjector proj(p, f.grid, dm);
  proj.seed(f, amplitude0);
  ImexStepper st(p, f.grid, opt.dt, opt.scheme);
  const int steps = static_cast<int>(std::ceil(horizon / opt.dt));
  std::vector<double> ts, ls;
  for (int s = 1; s <= steps; ++s) {
    st.step(f);
    if (max_abs(f) > kContaminationLevel)
      throw NonlinearContamination("amplitude left the linear regime at t = " +
                                   std::to_string(f.time));
    if (s >= steps / 4) {
      const auto [ac, as] = proj.amplitude(f);
      ts.push_back(f.time);
      ls.push_back(std::log(std::hypot(ac, as)));
    }
  }
  double mt = 0, ml = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    mt += ts[i];
    ml += ls[i];
  }
  mt /= ts.size();
  ml /= ts.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    sxy += (ts[i] - mt) * (ls[i] - ml);
    sxx += (ts[i] - mt) * (ts[i] - mt);
  }
  GrowthMeasurement gm;
  gm.measured = sxy / sxx;
  gm.mu = dm.mu;
  gm.discrete = discrete_beta(p, dm.mu);
  const auto cont = radial_eigenvalues(n, p.delta, j);
  gm.continuum = dispersion(p, cont.back().eig).beta2().real();
  gm.samples = static_cast<int>(ts.size());
  return gm;
}

enum class RunOutcome { kSaturated, kEscaped, kBlowUp, kUnsettled };

inline const char* to_string(RunOutcome o) {
  switch (o) {
    case RunOutcome::kSaturated: return "saturated";
    case RunOutcome::kEscaped: return "escaped";
    case RunOutcome::kBlowUp: return "blowup";
    case RunOutcome::kUnsettled: return "unsettled";
  }
  return "?";
}

struct AmplitudeOptions {
  SimOptions sim{17, 32, 0.02, Scheme::kCnab2};
  std::uint64_t seed = 1;
  double perturbation = 1e-3;   // uniform random amplitude per grid value
  double escape_fraction = 0.5;  // escape when max |deviation| > fraction * u0
  double settle_tol = 1e-3;     // relative amplitude change over a settle window
  double max_growth_times = 60.0;  // horizon in units of 1 / beta
};

struct AmplitudeResult {
  double offset = 0.0;
  double lambda = 0.0;
  double beta = 0.0;          // discrete growth rate of the critical mode
  double amplitude = 0.0;     // L2 amplitude of the deviation at the end
  double mode_amplitude = 0.0;  // projection on the critical eigenfield
  double max_deviation = 0.0;
  double time = 0.0;
  RunOutcome outcome = RunOutcome::kUnsettled;
};

namespace detail {

inline void random_perturbation(Field& f, std::uint64_t seed, double amp) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (auto& x : f.u) x = amp * U(rng);
  for (auto& x : f.v) x = amp * U(rng);
}

}  // namespace detail

/// Integrates one random start at lambda = lambda_c + offset until the
/// amplitude settles, escapes, or blows up.
inline AmplitudeResult run_to_settle(const ModelParams& base, const CriticalPoint& cp,
                                     double offset, const AmplitudeOptions& opt) {
  ModelParams p = base;
  p.lambda = cp.lambda_c + offset;
  auto f = make_grid(p, opt.sim.nr, opt.sim.nth);
  detail::random_perturbation(f, opt.seed, opt.perturbation);
  const auto modes = discrete_radial_modes(f.grid, cp.n_c, cp.j_c);
  ModeProjector proj(p, f.grid, modes.back());
  AmplitudeResult res;
  res.offset = offset;
  res.lambda = p.lambda;
  res.beta = discrete_beta(p, modes.back().mu);
  const double rate = std::max(std::abs(res.beta), 1e-3);
  const double t_max = opt.max_growth_times / rate;
  const double window = 2.0 / rate;
  const double escape = opt.escape_fraction * steady_state(p.a, p.lambda).u0;
  ImexStepper st(p, f.grid, opt.sim.dt, opt.sim.scheme);
  const int check = std::max(1, static_cast<int>(std::round(0.05 * window / opt.sim.dt)));
  const double initial_amp = l2_amplitude(f);
  double next_window = window;
  double last_window_amp = -1.0;
  int step = 0;
  try {
    while (f.time < t_max) {
      st.step(f);
      ++step;
      if (step % check != 0) continue;
      if (max_abs(f) > escape) {
        res.outcome = RunOutcome::kEscaped;
        break;
      }
      if (f.time >= next_window) {
        next_window += window;
        const double amp = l2_amplitude(f);
        if (last_window_amp > 0.0 && amp > 10.0 * initial_amp &&
            std::abs(amp - last_window_amp) <= opt.settle_tol * amp) {
          res.outcome = RunOutcome::kSaturated;
          break;
        }
        last_window_amp = amp;
      }
    }
  } catch (const BlowUp&) {
    res.outcome = RunOutcome::kBlowUp;
  }
  res.time = f.time;
  res.max_deviation = max_abs(f);
  if (res.outcome != RunOutcome::kBlowUp) {
    res.amplitude = l2_amplitude(f);
    const auto [ac, as] = proj.amplitude(f);
    res.mode_amplitude = std::hypot(ac, as);
  }
  return res;
}

/// Saturated amplitude for each offset above lambda_c.
inline std::vector<AmplitudeResult> bifurcation_amplitude(const ModelParams& base,
                                                          const CriticalPoint& cp,
                                                          const std::vector<double>& offsets,
                                                          const AmplitudeOptions& opt = {}) {
  std::vector<AmplitudeResult> out;
  out.reserve(offsets.size());
  for (double off : offsets) {
    if (!(off > 0.0)) throw DomainError("lambda offsets must be positive");
    out.push_back(run_to_settle(base, cp, off, opt));
  }
  return out;
}

}  // namespace whorl
