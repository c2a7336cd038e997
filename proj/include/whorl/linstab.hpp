#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "whorl/errors.hpp"
#include "whorl/specfun.hpp"

namespace whorl {

using cplx = std::complex<double>;

struct ModelParams {
  double a = 0.2;
  double d = 13.0;
  double R = 4.0;
  double delta = 1.05;
  double lambda = 0.5;
};

inline void validate(const ModelParams& p) {
  auto pos = [](double x) { return std::isfinite(x) && x > 0.0; };
  if (!pos(p.a) || !pos(p.d) || !pos(p.R) || !pos(p.lambda))
    throw DomainError("a, d, R and lambda must be positive and finite");
  if (!(p.delta > 1.0) || !std::isfinite(p.delta)) throw DomainError("delta must exceed 1");
}

struct SteadyState {
  double u0;
  double v0;
};

inline SteadyState steady_state(double a, double lambda) {
  const double s = a + lambda;
  return {s, lambda / (s * s)};
}

struct Gammas {
  double g2;
  double g12;
  double g3;
};

/// Coefficients of the nonlinearity g = g2 u^2 + g12 u v + g3 u^2 v.
inline Gammas gamma_coeffs(const ModelParams& p) {
  const double s = p.a + p.lambda;
  const double R2 = p.R * p.R;
  return {R2 * p.lambda / (s * s), 2.0 * R2 * s, R2};
}

/// Reaction Jacobian at the steady state, row-major [[fu, fv], [gu, gv]].
struct ReactionJacobian {
  double fu, fv, gu, gv;
};

inline ReactionJacobian reaction_jacobian(const ModelParams& p) {
  const double s = p.a + p.lambda;
  const double R2 = p.R * p.R;
  return {R2 * (p.lambda - p.a) / s, R2 * s * s, -2.0 * R2 * p.lambda / s, -R2 * s * s};
}

struct DispersionBranch {
  cplx beta;
  cplx u;  // real, positive
  cplx v;  // Re v < 0
};

/// Growth rates of the Laplacian eigenmode with eigenvalue lap_eig.
/// branch[0] has the smaller real part.
struct DispersionPair {
  std::array<DispersionBranch, 2> branch;
  double trace_coeff;  // beta^2 + trace_coeff beta + det_coeff = 0
  double det_coeff;

  cplx beta1() const { return branch[0].beta; }
  cplx beta2() const { return branch[1].beta; }
};

inline double dispersion_det(const ModelParams& p, double lap_eig) {
  const double s = p.a + p.lambda;
  const double R2 = p.R * p.R;
  return p.d * lap_eig * lap_eig + R2 * (s * s - p.d * (p.lambda - p.a) / s) * lap_eig +
         R2 * R2 * s * s;
}

inline DispersionPair dispersion(const ModelParams& p, double lap_eig) {
  if (!(lap_eig >= 0.0)) throw DomainError("Laplacian eigenvalue must be >= 0");
  const double s = p.a + p.lambda;
  const double R2 = p.R * p.R;
  const auto J = reaction_jacobian(p);
  const double A = lap_eig * (p.d + 1.0) - R2 * ((p.lambda - p.a) / s - s * s);
  const double C = dispersion_det(p, lap_eig);
  const double disc = A * A - 4.0 * C;
  cplx b1, b2;
  if (disc >= 0.0) {
    const double sq = std::sqrt(disc);
    const double q = -0.5 * (A + std::copysign(sq, A));
    double r1 = q, r2 = q != 0.0 ? C / q : 0.0;
    if (r1 > r2) std::swap(r1, r2);
    b1 = r1;
    b2 = r2;
  } else {
    const double im = 0.5 * std::sqrt(-disc);
    b1 = cplx(-0.5 * A, -im);
    b2 = cplx(-0.5 * A, im);
  }
  DispersionPair out{};
  out.trace_coeff = A;
  out.det_coeff = C;
  const std::array<cplx, 2> betas{b1, b2};
  for (int l = 0; l < 2; ++l) {
    const cplx ratio = (betas[l] + lap_eig - J.fu) / J.fv;
    const double u = 1.0 / std::sqrt(1.0 + std::norm(ratio));
    out.branch[l] = {betas[l], cplx(u, 0.0), ratio * u};
  }
  return out;
}

enum class RegimeTag { ConstantUnstable, TuringWindow, Stable };

inline const char* to_string(RegimeTag t) {
  switch (t) {
    case RegimeTag::ConstantUnstable: return "ConstantUnstable";
    case RegimeTag::TuringWindow: return "TuringWindow";
    case RegimeTag::Stable: return "Stable";
  }
  return "?";
}

struct RegimeClass {
  RegimeTag tag = RegimeTag::Stable;
  std::optional<std::pair<double, double>> window;  // (kappa_minus, kappa_plus)
  bool boundary = false;
};

namespace detail {

// d (lambda - a) - (a + lambda)^3 - 2 sqrt(d) (a + lambda)^2; positive exactly
// inside the Turing band.
inline double band_function(double a, double d, double lambda) {
  const double s = a + lambda;
  return d * (lambda - a) - s * s * s - 2.0 * std::sqrt(d) * s * s;
}

inline double band_scale(double a, double d, double lambda) {
  const double s = a + lambda;
  return d * std::abs(lambda - a) + s * s * s + 2.0 * std::sqrt(d) * s * s;
}

inline constexpr double kBoundaryTol = 1e-12;

}  // namespace detail

/// Window (kappa_minus, kappa_plus) of destabilized Laplacian eigenvalues.
inline std::pair<double, double> instability_window(const ModelParams& p) {
  const double s = p.a + p.lambda;
  const double R2 = p.R * p.R;
  const double X = p.d * (p.lambda - p.a) / s - s * s;
  const double disc = std::max(0.0, X * X - 4.0 * p.d * s * s);
  const double sq = std::sqrt(disc);
  const double f = R2 / (2.0 * p.d);
  const double kplus = f * (X + sq);
  // kappa_minus kappa_plus = R^4 s^2 / d avoids cancellation in X - sq
  const double kminus = kplus > 0.0 ? R2 * R2 * s * s / (p.d * kplus) : f * (X - sq);
  return {kminus, kplus};
}

inline RegimeClass classify_regime(const ModelParams& p) {
  validate(p);
  RegimeClass out;
  const double s = p.a + p.lambda;
  const double c1 = (p.lambda - p.a) - s * s * s;
  const double c1_scale = std::abs(p.lambda - p.a) + s * s * s;
  if (std::abs(c1) <= detail::kBoundaryTol * c1_scale) {
    out.boundary = true;
    return out;
  }
  if (c1 > 0.0) {
    out.tag = RegimeTag::ConstantUnstable;
    return out;
  }
  const double f = detail::band_function(p.a, p.d, p.lambda);
  if (std::abs(f) <= detail::kBoundaryTol * detail::band_scale(p.a, p.d, p.lambda)) {
    out.boundary = true;
    return out;
  }
  if (f > 0.0) {
    out.tag = RegimeTag::TuringWindow;
    out.window = instability_window(p);
  }
  return out;
}

struct TuringBand {
  double lambda_min;
  double lambda_roof;
};

/// The lambda interval where the Turing window is open, if any.
inline std::optional<TuringBand> turing_band(double a, double d) {
  // with s = a + lambda the band function is d (s - 2a) - s^3 - 2 sqrt(d) s^2,
  // maximal at s_m
  const double sd = std::sqrt(d);
  const double s_m = sd * (std::sqrt(28.0) - 4.0) / 6.0;
  const double lam_m = s_m - a;
  if (lam_m <= 0.0 || detail::band_function(a, d, lam_m) <= 0.0) return std::nullopt;
  auto bisect = [&](double lo, double hi, bool rising) {
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
      const double mid = 0.5 * (lo + hi);
      const bool pos = detail::band_function(a, d, mid) > 0.0;
      if (pos == rising)
        hi = mid;
      else
        lo = mid;
    }
    return 0.5 * (lo + hi);
  };
  double hi = lam_m + 1.0;
  while (detail::band_function(a, d, hi) > 0.0) hi = lam_m + 2.0 * (hi - lam_m);
  return TuringBand{bisect(0.0, lam_m, true), bisect(lam_m, hi, false)};
}

/// Largest kappa_plus over the Turing band (0 when there is no band).
inline double max_kappa_plus(double a, double d, double R, double lo, double hi) {
  const auto band = turing_band(a, d);
  if (!band) return 0.0;
  lo = std::max(lo, band->lambda_min);
  hi = std::min(hi, band->lambda_roof);
  if (!(hi > lo)) return 0.0;
  constexpr int kSamples = 400;
  double best = 0.0;
  for (int i = 0; i <= kSamples; ++i) {
    const double lam = lo + (hi - lo) * i / kSamples;
    ModelParams p{a, d, R, 2.0, lam};
    if (detail::band_function(a, d, lam) > 0.0) best = std::max(best, instability_window(p).second);
  }
  return best;
}

/// Mode table cutoff: 1.5 times the largest kappa_plus over the band.
inline double mode_table_cutoff(double a, double d, double R) {
  return 1.5 * max_kappa_plus(a, d, R, 0.0, std::numeric_limits<double>::infinity());
}

/// Smallest lambda at which the Laplacian eigenvalue lap_eig destabilizes.
///
/// With s = a + lambda the determinant of the mode times s is the cubic
/// (R^4 + R^2 k) s^3 + (d k^2 - d R^2 k) s + 2 a d R^2 k, positive at s = a.
inline std::optional<double> entry_lambda(double a, double d, double R, double lap_eig) {
  if (!(lap_eig > 0.0)) return std::nullopt;
  const double R2 = R * R;
  const double k = lap_eig;
  const double c3 = R2 * R2 + R2 * k;
  const double c1 = d * k * k - d * R2 * k;
  const double c0 = 2.0 * a * d * R2 * k;
  if (c1 >= 0.0) return std::nullopt;
  auto P = [&](double s) { return (c3 * s * s + c1) * s + c0; };
  const double s_star = std::sqrt(-c1 / (3.0 * c3));
  if (s_star <= a || P(s_star) >= 0.0) return std::nullopt;
  double lo = a, hi = s_star;
  for (int it = 0; it < 200 && hi - lo > 4e-16 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (P(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi) - a;
}

struct CriticalPoint {
  double lambda_c = 0.0;
  int n_c = 0;
  int j_c = 1;
  double eig_c = 0.0;
  int multiplicity = 1;
  bool pes_verified = false;
  /// Entry lambda of the next distinct mode (infinity if none enters in range).
  double next_entry = std::numeric_limits<double>::infinity();
  int next_n = -1;
  int next_j = -1;
  std::vector<std::pair<std::size_t, std::size_t>> degenerate;
};

struct LambdaInterval {
  double lo;
  double hi;
};

inline constexpr double kPesEpsilon = 1e-4;
inline constexpr double kSimultaneousTol = 1e-9;

inline LambdaInterval default_search(double a, double d) {
  const auto band = turing_band(a, d);
  return {a + 1e-6, band ? band->lambda_roof : a + 1e-6};
}

inline void check_standing_assumption(double a) {
  if (!(a > 1.0 / (3.0 * std::sqrt(3.0))))
    throw DomainError("a must exceed 1/(3 sqrt 3) for the Turing analysis");
}

/// First lambda in `search` at which the instability window meets the spectrum.
inline CriticalPoint critical_lambda(const ModelParams& base, LambdaInterval search,
                                     const ModeTable& table) {
  ModelParams chk = base;
  chk.lambda = std::max(search.lo, 1e-12);
  validate(chk);
  check_standing_assumption(base.a);
  const double need = max_kappa_plus(base.a, base.d, base.R, search.lo, search.hi);
  if (table.cutoff < need)
    throw DomainError("mode table cutoff " + std::to_string(table.cutoff) +
                      " is below the largest window edge " + std::to_string(need));

  struct Entry {
    double lambda;
    std::size_t idx;
  };
  std::vector<Entry> entries;
  for (std::size_t i = 0; i < table.modes.size(); ++i) {
    const auto lam = entry_lambda(base.a, base.d, base.R, table.modes[i].eig);
    if (lam && *lam >= search.lo && *lam <= search.hi) entries.push_back({*lam, i});
  }
  if (entries.empty()) throw NoOnset("no Laplacian eigenvalue enters the instability window");
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& x, const Entry& y) { return x.lambda < y.lambda; });

  const auto& first = entries.front();
  const auto& m = table.modes[first.idx];
  CriticalPoint cp;
  cp.lambda_c = first.lambda;
  cp.n_c = m.n;
  cp.j_c = m.j;
  cp.eig_c = m.eig;
  cp.multiplicity = m.n == 0 ? 1 : 2;
  cp.degenerate = table.degenerate;

  if (entries.size() > 1) {
    const auto& second = entries[1];
    const auto& m2 = table.modes[second.idx];
    cp.next_entry = second.lambda;
    cp.next_n = m2.n;
    cp.next_j = m2.j;
    if (second.lambda - first.lambda <= kSimultaneousTol * std::max(1.0, first.lambda))
      throw SimultaneousEntry("modes (" + std::to_string(m.n) + "," + std::to_string(m.j) +
                                  ") and (" + std::to_string(m2.n) + "," + std::to_string(m2.j) +
                                  ") enter together",
                              m.n, m.j, m2.n, m2.j);
  }

  const auto band = turing_band(base.a, base.d);
  if (band && cp.lambda_c - band->lambda_min <= 1e-9 * std::max(1.0, cp.lambda_c)) {
    const double kstar = base.R * base.R * (base.a + band->lambda_min) / std::sqrt(base.d);
    if (std::abs(cp.eig_c - kstar) <= 1e-9 * kstar)
      throw EndpointEntry("critical eigenvalue sits at the window's opening point");
  }

  // every mode stable just below, only the critical family unstable just above
  bool ok = true;
  ModelParams below = base, above = base;
  below.lambda = cp.lambda_c - kPesEpsilon;
  above.lambda = cp.lambda_c + kPesEpsilon;
  for (std::size_t i = 0; i < table.modes.size() && ok; ++i) {
    const auto& mi = table.modes[i];
    if (below.lambda > 0.0 && dispersion(below, mi.eig).beta2().real() >= 0.0) ok = false;
    const bool unstable = dispersion(above, mi.eig).beta2().real() > 0.0;
    const bool is_crit = mi.n == cp.n_c && mi.j == cp.j_c;
    if (unstable != is_crit) ok = false;
  }
  cp.pes_verified = ok;
  return cp;
}

/// Builds the mode table for the band and locates the critical point.
inline CriticalPoint find_critical(const ModelParams& base) {
  check_standing_assumption(base.a);
  const auto search = default_search(base.a, base.d);
  if (!(search.hi > search.lo)) throw NoOnset("the Turing band is empty");
  const auto table = build_mode_table(base.delta, mode_table_cutoff(base.a, base.d, base.R));
  return critical_lambda(base, search, table);
}

}  // namespace whorl
