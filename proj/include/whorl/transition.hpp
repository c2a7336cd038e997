#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "whorl/errors.hpp"
#include "whorl/linstab.hpp"
#include "whorl/specfun.hpp"

namespace whorl {

/// Normalization and sign convention for q.
///
/// kReference normalizes every radial family by pi int R^2 r dr = 1 (n = 0
/// included) and enters the mode sum with a minus sign; this is the convention
/// that reproduces the published table of coefficients. kUnitNorm uses unit
/// L2 eigenfunctions (2 pi for n = 0) and the mode sum as written.
enum class QConvention { kReference, kUnitNorm };

/// Angular shape of the critical mode used as pivot.
enum class Pivot { kCos, kSin };

enum class TransitionType { ContinuousI, CatastrophicII, RandomIII, Indeterminate };

inline const char* to_string(TransitionType t) {
  switch (t) {
    case TransitionType::ContinuousI: return "ContinuousI";
    case TransitionType::CatastrophicII: return "CatastrophicII";
    case TransitionType::RandomIII: return "RandomIII";
    case TransitionType::Indeterminate: return "Indeterminate";
  }
  return "?";
}

inline const char* to_string(QConvention c) {
  return c == QConvention::kReference ? "reference" : "unit-norm";
}

/// Angular integrals int_0^{2 pi} of products of the pivot with cos/sin(m theta),
/// by the trapezoid rule, exact for the trigonometric degrees involved.
class AngularWeights {
 public:
  AngularWeights(int n_c, Pivot pivot) : n_c_(n_c), pivot_(pivot) {
    npts_ = 8 * (std::max(n_c, 1) + 1);
  }

  double pivot(double th) const {
    return pivot_ == Pivot::kCos ? std::cos(n_c_ * th) : std::sin(n_c_ * th);
  }

  /// int P^k Theta dtheta with Theta = cos(m theta) (sine = false) or sin(m theta).
  double integral(int power, int m, bool sine) const {
    const double h = 2.0 * std::numbers::pi / npts_;
    double s = 0.0;
    for (int i = 0; i < npts_; ++i) {
      const double th = h * i;
      const double t = sine ? std::sin(m * th) : std::cos(m * th);
      s += std::pow(pivot(th), power) * t;
    }
    return s * h;
  }

  /// Sum over the angular basis of wavenumber m of (int P^2 Theta)^2 / pi^2.
  double family_weight(int m) const {
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double w = std::pow(integral(2, m, false), 2);
    if (m > 0) w += std::pow(integral(2, m, true), 2);
    return w / pi2;
  }

  /// int P^4 dtheta.
  double quartic() const { return integral(4, 0, false); }

  /// int P^2 dtheta.
  double square() const { return integral(2, 0, false); }

  int n_c() const { return n_c_; }

 private:
  int n_c_;
  Pivot pivot_;
  int npts_;
};

/// Quantities of the critical mode shared by every mode-sum term.
struct CriticalModeData {
  ModelParams params;  // lambda = lambda_c
  RadialMode mode;
  double u = 0.0;  // standardized branch-2 amplitudes
  double v = 0.0;
  Gammas gammas{};
};

inline CriticalModeData make_critical_data(const CriticalPoint& cp, const ModelParams& base) {
  CriticalModeData c;
  c.params = base;
  c.params.lambda = cp.lambda_c;
  const double delta = base.delta;
  c.mode = {cp.n_c, cp.j_c, cp.eig_c, detail::radial_norm(cp.n_c, cp.eig_c, delta)};
  const auto disp = dispersion(c.params, cp.eig_c);
  c.u = disp.branch[1].u.real();
  c.v = disp.branch[1].v.real();
  c.gammas = gamma_coeffs(c.params);
  return c;
}

inline constexpr double kResonanceTol = 1e-6;

/// Radial scale applied to stored profiles of order n under a convention.
inline double convention_scale(int n, QConvention conv) {
  return (conv == QConvention::kReference && n == 0) ? std::numbers::sqrt2 : 1.0;
}

/// One B_{n j l} term of the mode sum (without family weight).
inline cplx b_coefficient(const RadialMode& nj, int branch, const CriticalModeData& crit,
                          QConvention conv = QConvention::kReference) {
  const int nc = crit.mode.n;
  if (nj.n != 0 && nj.n != 2 * nc)
    throw DomainError("wavenumber " + std::to_string(nj.n) +
                      " does not couple quadratically to the critical wavenumber " +
                      std::to_string(nc));
  if (branch != 1 && branch != 2) throw DomainError("branch must be 1 or 2");
  const double delta = crit.params.delta;
  const auto disp = dispersion(crit.params, nj.eig);
  const auto& br = disp.branch[branch - 1];
  if (std::abs(br.beta) < kResonanceTol)
    throw NearResonance("mode (" + std::to_string(nj.n) + "," + std::to_string(nj.j) +
                        ") has |beta| below 1e-6 at lambda_c");
  const double ov =
      convention_scale(nj.n, conv) * radial_integral({crit.mode, crit.mode, nj}, delta);
  const auto& g = crit.gammas;
  const double uc = crit.u, vc = crit.v;
  const double pi2 = std::numbers::pi * std::numbers::pi;
  return -pi2 / br.beta * (std::conj(br.u) - std::conj(br.v)) *
         (2.0 * g.g2 * uc * br.u + g.g12 * uc * br.v + g.g12 * vc * br.u) *
         (g.g2 * uc * uc + g.g12 * uc * vc) * ov * ov;
}

struct TransitionOptions {
  double tail_tol = 1e-8;
  QConvention convention = QConvention::kReference;
  Pivot pivot = Pivot::kCos;
  int min_terms = 6;
  int max_terms = 200;
};

struct FamilySum {
  int n = 0;
  double weight = 0.0;
  cplx sum{};
  int terms = 0;
  double tail = 0.0;
};

struct TransitionReport {
  CriticalPoint critical;
  QConvention convention = QConvention::kReference;
  double q_value = 0.0;
  double coeff_scaled = 0.0;
  TransitionType type = TransitionType::Indeterminate;
  int j_max_used = 0;
  double tail_estimate = 0.0;
  std::optional<double> vlambda_coeff;
  std::optional<double> quad_coeff;
  double imag_residue = 0.0;
  double max_abs_b = 0.0;
  double cubic_term = 0.0;
  std::vector<FamilySum> families;
  double u_c = 0.0;
  double v_c = 0.0;
  /// Cubic coefficient L of dA/dt = beta A + L A^3 for U = A (u_c, v_c) P(theta) R_c(r),
  /// from projection with the adjoint critical vector.
  double landau_coeff = 0.0;
  TransitionType landau_type = TransitionType::Indeterminate;
};

inline constexpr double kIndeterminateTol = 1e-4;

namespace detail {

// Geometric tail from the last three terms.
inline double geometric_tail(const std::vector<double>& mags) {
  const std::size_t k = mags.size();
  if (k < 3) return std::numeric_limits<double>::infinity();
  const double t0 = mags[k - 3], t2 = mags[k - 1];
  if (t2 == 0.0) return 0.0;
  if (t0 == 0.0) return std::numeric_limits<double>::infinity();
  const double rho = std::sqrt(t2 / t0);
  if (rho >= 1.0) return std::numeric_limits<double>::infinity();
  return t2 * rho / (1.0 - rho);
}

inline std::vector<RadialMode> family_modes(int n, double delta, int count) {
  return radial_eigenvalues(n, delta, std::min(count, 200));
}

// Runs over radial indices of wavenumber m until the tail converges.
// term(mode) returns the complex contribution of that radial index.
template <class Term>
FamilySum sum_family(int m, double weight, double delta, const TransitionOptions& opt,
                     Term&& term) {
  FamilySum fs;
  fs.n = m;
  fs.weight = weight;
  int have = 32;
  auto modes = family_modes(m, delta, have);
  std::vector<double> mags;
  for (int j = 1;; ++j) {
    if (j > opt.max_terms)
      throw TailNotConverged("mode sum over wavenumber " + std::to_string(m) +
                             " did not converge within " + std::to_string(opt.max_terms) +
                             " radial terms");
    if (j > have) {
      have = std::min(200, 2 * have);
      modes = family_modes(m, delta, have);
    }
    const RadialMode& md = modes[j - 1];
    const cplx t = weight * term(md);
    fs.sum += t;
    mags.push_back(std::abs(t));
    fs.terms = j;
    if (j >= opt.min_terms) {
      const double tail = geometric_tail(mags);
      if (tail <= opt.tail_tol * std::abs(fs.sum) || std::abs(fs.sum) == 0.0) {
        fs.tail = tail;
        break;
      }
    }
  }
  return fs;
}

inline TransitionType classify_by_sign(double value, double scale) {
  if (std::abs(value) < kIndeterminateTol * scale) return TransitionType::Indeterminate;
  return value < 0.0 ? TransitionType::ContinuousI : TransitionType::CatastrophicII;
}

struct Vec2 {
  double u, v;
};

inline Vec2 solve2(double m00, double m01, double m10, double m11, Vec2 b) {
  const double det = m00 * m11 - m01 * m10;
  if (det == 0.0) throw NearResonance("singular mode matrix in the slaved solve");
  return {(m11 * b.u - m01 * b.v) / det, (m00 * b.v - m10 * b.u) / det};
}

}  // namespace detail

/// Cubic coefficient of the amplitude equation by adjoint projection.
inline double landau_coeff(const CriticalModeData& crit, const TransitionOptions& opt = {}) {
  using detail::Vec2;
  const auto& P = crit.params;
  const double delta = P.delta;
  const auto& g = crit.gammas;
  const auto J = reaction_jacobian(P);
  const int nc = crit.mode.n;
  const AngularWeights ang(nc, opt.pivot);
  const Vec2 phi{crit.u, crit.v};
  // left null vector of the critical matrix
  const double m00 = J.fu - crit.mode.eig, m01 = J.fv;
  const Vec2 psi{-J.gu, m00};
  const double psi_phi = psi.u * phi.u + psi.v * phi.v;
  auto Q = [&](Vec2 x, Vec2 y) {
    const double s = g.g2 * x.u * y.u + 0.5 * g.g12 * (x.u * y.v + x.v * y.u);
    return Vec2{s, -s};
  };
  (void)m01;
  const Vec2 q0 = Q(phi, phi);
  const double rc2 = radial_integral({crit.mode, crit.mode}, delta);
  const double norm = psi_phi * ang.square() * rc2;

  auto family = [&](int m) {
    double total = 0.0;
    const std::array<bool, 2> kinds{false, true};
    for (bool sine : kinds) {
      if (m == 0 && sine) continue;
      const double ang_force = ang.integral(2, m, sine);
      if (ang_force == 0.0) continue;
      const double ang_theta2 = m == 0 ? 2.0 * std::numbers::pi : std::numbers::pi;
      TransitionOptions o = opt;
      o.min_terms = std::max(opt.min_terms, 3);
      const auto fs = detail::sum_family(m, 1.0, delta, o, [&](const RadialMode& md) {
        const double ov = radial_integral({crit.mode, crit.mode, md}, delta);
        const double rm2 = radial_integral({md, md}, delta);
        const double alpha = ang_force * ov / (ang_theta2 * rm2);
        const double e00 = J.fu - md.eig, e01 = J.fv, e10 = J.gu, e11 = J.gv - P.d * md.eig;
        const Vec2 w0 = detail::solve2(e00, e01, e10, e11, q0);
        const Vec2 w{-w0.u * alpha, -w0.v * alpha};
        const Vec2 c = Q(phi, w);
        return cplx(2.0 * (psi.u * c.u + psi.v * c.v) * ang_force * ov, 0.0);
      });
      total += fs.sum.real();
    }
    return total;
  };
  double L = family(0) + family(2 * nc);
  const double rc4 = radial_integral({crit.mode, crit.mode, crit.mode, crit.mode}, delta);
  const double cubic = g.g3 * phi.u * phi.u * phi.v * (psi.u - psi.v) * ang.quartic() * rc4;
  L += cubic;
  return L / norm;
}

/// q(lambda_c) from the mode sum over wavenumbers 0 and 2 n_c plus the cubic
/// self-interaction, with transition-type classification.
inline TransitionReport transition_number(const CriticalPoint& cp, const ModelParams& base,
                                          const TransitionOptions& opt = {}) {
  if (cp.n_c < 1) throw DomainError("transition_number needs a critical wavenumber n_c >= 1");
  if (!(opt.tail_tol > 0.0)) throw DomainError("tail_tol must be positive");
  const auto crit = make_critical_data(cp, base);
  const double delta = base.delta;
  const AngularWeights ang(cp.n_c, opt.pivot);

  TransitionReport rep;
  rep.critical = cp;
  rep.convention = opt.convention;
  rep.u_c = crit.u;
  rep.v_c = crit.v;

  double max_b = 0.0;
  const std::array<int, 2> fams{0, 2 * cp.n_c};
  cplx mode_sum{};
  for (int m : fams) {
    const double w = ang.family_weight(m);
    auto fs = detail::sum_family(m, w, delta, opt, [&](const RadialMode& md) {
      const auto disp = dispersion(crit.params, md.eig);
      const bool conj_pair = disp.beta1().imag() != 0.0;
      cplx t;
      if (conj_pair) {
        const cplx b = b_coefficient(md, 2, crit, opt.convention);
        max_b = std::max(max_b, std::abs(b));
        t = 2.0 * b.real();
      } else {
        const cplx b1 = b_coefficient(md, 1, crit, opt.convention);
        const cplx b2 = b_coefficient(md, 2, crit, opt.convention);
        max_b = std::max({max_b, std::abs(b1), std::abs(b2)});
        t = b1 + b2;
      }
      return t;
    });
    mode_sum += fs.sum;
    rep.j_max_used = std::max(rep.j_max_used, fs.terms);
    rep.tail_estimate += fs.tail;
    rep.families.push_back(fs);
  }
  const auto& g = crit.gammas;
  const double rc4 = radial_integral({crit.mode, crit.mode, crit.mode, crit.mode}, delta);
  rep.cubic_term = ang.quartic() * g.g3 * crit.u * crit.u * crit.v * rc4;
  const double sign = opt.convention == QConvention::kReference ? -1.0 : 1.0;
  const cplx q = sign * mode_sum + rep.cubic_term;
  rep.q_value = q.real();
  rep.imag_residue = std::abs(q.imag());
  rep.max_abs_b = max_b;
  rep.coeff_scaled = rep.q_value * (crit.u - crit.v);
  rep.type = detail::classify_by_sign(rep.q_value, std::max(max_b, std::abs(rep.cubic_term)));

  rep.landau_coeff = landau_coeff(crit, opt);
  rep.landau_type = detail::classify_by_sign(rep.landau_coeff, 0.0);
  return rep;
}

struct Type3Coefficients {
  double quad_coeff;
  double vlambda_coeff;
};

/// Quadratic coefficient of the one-dimensional reduced equation when n_c = 0.
inline Type3Coefficients type3_coefficients(const CriticalPoint& cp, const ModelParams& base) {
  if (cp.n_c != 0) throw DomainError("type3_coefficients needs n_c = 0");
  const auto crit = make_critical_data(cp, base);
  const auto& g = crit.gammas;
  const double rc3 = radial_integral({crit.mode, crit.mode, crit.mode}, base.delta);
  const double nondeg = (g.g2 * crit.u + g.g12 * crit.v) * rc3;
  if (std::abs(nondeg) < 1e-10)
    throw DegenerateQuadratic("quadratic coefficient vanishes at the critical point");
  const double quad = 2.0 * std::numbers::pi * (crit.u - crit.v) * crit.u * nondeg;
  return {quad, -1.0 / quad};
}

/// Transition analysis for either critical wavenumber class.
inline TransitionReport analyze_transition(const CriticalPoint& cp, const ModelParams& base,
                                           const TransitionOptions& opt = {}) {
  if (cp.n_c >= 1) return transition_number(cp, base, opt);
  TransitionReport rep;
  rep.critical = cp;
  rep.convention = opt.convention;
  const auto crit = make_critical_data(cp, base);
  rep.u_c = crit.u;
  rep.v_c = crit.v;
  const auto t3 = type3_coefficients(cp, base);
  rep.quad_coeff = t3.quad_coeff;
  rep.vlambda_coeff = t3.vlambda_coeff;
  rep.type = TransitionType::RandomIII;
  rep.landau_type = TransitionType::RandomIII;
  return rep;
}

/// Right-hand side of the cubic normal form on the critical plane.
inline std::pair<double, double> reduced_rhs(double y_c, double y_s, double beta, double q,
                                             double amp_gap) {
  const double r2 = y_c * y_c + y_s * y_s;
  const double k = beta + q * amp_gap * r2;
  return {k * y_c, k * y_s};
}

}  // namespace whorl
