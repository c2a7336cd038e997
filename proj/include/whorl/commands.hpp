#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "whorl/errors.hpp"
#include "whorl/linstab.hpp"
#include "whorl/rdsim.hpp"
#include "whorl/specfun.hpp"
#include "whorl/transition.hpp"
#include "whorl/version.hpp"

namespace whorl {

using json = nlohmann::json;

/// Process exit status of a command.
enum ExitStatus : int { kExitOk = 0, kExitUsage = 1, kExitStable = 2, kExitNumerical = 3 };

inline std::string fmt_num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline json params_json(const ModelParams& p, bool with_lambda = true) {
  json j{{"a", p.a}, {"d", p.d}, {"R", p.R}, {"delta", p.delta}};
  if (with_lambda) j["lambda"] = p.lambda;
  return j;
}

/// Header object embedded in every output.
inline json provenance(const std::string& command, json extra = json::object()) {
  json h{{"tool", kToolName}, {"version", kVersion}, {"command", command}};
  for (auto& [k, v] : extra.items()) h[k] = v;
  return h;
}

/// Writes a provenance header as a leading "# {json}" line.
inline void write_header_line(std::ostream& os, const json& header) {
  os << "# " << header.dump() << "\n";
}

inline std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const SimultaneousEntry*>(&e)) return "SimultaneousEntry";
  if (dynamic_cast<const EndpointEntry*>(&e)) return "EndpointEntry";
  if (dynamic_cast<const NearResonance*>(&e)) return "NearResonance";
  if (dynamic_cast<const TailNotConverged*>(&e)) return "TailNotConverged";
  if (dynamic_cast<const DegenerateQuadratic*>(&e)) return "DegenerateQuadratic";
  if (dynamic_cast<const BracketExhausted*>(&e)) return "BracketExhausted";
  if (dynamic_cast<const BesselOverflow*>(&e)) return "BesselOverflow";
  if (dynamic_cast<const QuadratureNotConverged*>(&e)) return "QuadratureNotConverged";
  if (dynamic_cast<const EigenvalueBoundViolation*>(&e)) return "EigenvalueBoundViolation";
  if (dynamic_cast<const NonlinearContamination*>(&e)) return "NonlinearContamination";
  if (dynamic_cast<const SolveFailed*>(&e)) return "SolveFailed";
  if (dynamic_cast<const BlowUp*>(&e)) return "BlowUp";
  if (dynamic_cast<const DomainError*>(&e)) return "DomainError";
  if (dynamic_cast<const NoOnset*>(&e)) return "NoOnset";
  return "Error";
}

// ---------------------------------------------------------------- eigs

struct EigTable {
  double delta = 2.0;
  std::vector<std::vector<RadialMode>> rows;  // rows[n][j-1]
};

inline EigTable cmd_eigs(int n_max, int j_max, double delta) {
  if (n_max < 0 || j_max < 1) throw DomainError("need n_max >= 0 and j_max >= 1");
  EigTable t;
  t.delta = delta;
  for (int n = 0; n <= n_max; ++n) t.rows.push_back(radial_eigenvalues(n, delta, j_max));
  return t;
}

inline void write_eigs_csv(std::ostream& os, const EigTable& t) {
  write_header_line(os, provenance("eigs", {{"delta", t.delta}}));
  os << "n,j,eig,norm\n";
  for (const auto& row : t.rows)
    for (const auto& m : row)
      os << m.n << "," << m.j << "," << fmt_num(m.eig) << "," << fmt_num(m.norm) << "\n";
}

// ---------------------------------------------------------------- critical

struct CriticalOutcome {
  json report;
  int status = kExitOk;
};

inline json critical_json(const CriticalPoint& cp) {
  return {{"lambda_c", cp.lambda_c},
          {"n_c", cp.n_c},
          {"j_c", cp.j_c},
          {"eig_c", cp.eig_c},
          {"multiplicity", cp.multiplicity},
          {"pes_verified", cp.pes_verified},
          {"next_entry",
           std::isfinite(cp.next_entry) ? json(cp.next_entry) : json(nullptr)},
          {"next_mode", cp.next_n >= 0 ? json::array({cp.next_n, cp.next_j}) : json(nullptr)},
          {"degenerate_pairs", cp.degenerate.size()}};
}

inline json transition_json(const TransitionReport& r) {
  json j{{"convention", to_string(r.convention)},
         {"q_value", r.q_value},
         {"coeff_scaled", r.coeff_scaled},
         {"type", to_string(r.type)},
         {"j_max_used", r.j_max_used},
         {"tail_estimate", r.tail_estimate},
         {"imag_residue", r.imag_residue},
         {"max_abs_b", r.max_abs_b},
         {"cubic_term", r.cubic_term},
         {"u_c", r.u_c},
         {"v_c", r.v_c},
         {"landau_coeff", r.landau_coeff},
         {"landau_type", to_string(r.landau_type)}};
  j["vlambda_coeff"] = r.vlambda_coeff ? json(*r.vlambda_coeff) : json(nullptr);
  j["quad_coeff"] = r.quad_coeff ? json(*r.quad_coeff) : json(nullptr);
  json fams = json::array();
  for (const auto& f : r.families)
    fams.push_back({{"n", f.n}, {"weight", f.weight}, {"sum", f.sum.real()},
                    {"terms", f.terms}, {"tail", f.tail}});
  j["families"] = fams;
  return j;
}

/// Critical point and transition report for parameters (lambda ignored).
inline CriticalOutcome cmd_critical(const ModelParams& base, const TransitionOptions& opt = {}) {
  CriticalOutcome out;
  json rep = provenance("critical", {{"params", params_json(base, false)}});
  try {
    const auto cp = find_critical(base);
    rep["critical"] = critical_json(cp);
    rep["transition"] = transition_json(analyze_transition(cp, base, opt));
    rep["status"] = "onset";
  } catch (const NoOnset& e) {
    rep["status"] = "stable";
    rep["message"] = e.what();
    out.status = kExitStable;
  } catch (const DomainError& e) {
    rep["status"] = "invalid";
    rep["error"] = error_kind(e);
    rep["message"] = e.what();
    out.status = kExitUsage;
  } catch (const NumericalError& e) {
    rep["status"] = "error";
    rep["error"] = error_kind(e);
    rep["message"] = e.what();
    out.status = kExitNumerical;
  }
  out.report = std::move(rep);
  return out;
}

// ---------------------------------------------------------------- sweep

struct SweepSpec {
  double a_lo = 0.2, a_hi = 0.6;
  int a_count = 50;
  double d_lo = 10.0, d_hi = 200.0;
  int d_count = 50;
  double R = 4.0;
  double delta = 1.2;
  int threads = 0;  // 0: hardware concurrency
};

struct SweepResult {
  SweepSpec spec;
  std::vector<double> a;
  std::vector<double> d;
  std::vector<std::string> labels;  // row-major [d index][a index]
  double table_cutoff = 0.0;

  const std::string& at(int id, int ia) const {
    return labels[static_cast<std::size_t>(id) * a.size() + ia];
  }
};

inline std::vector<double> linspace(double lo, double hi, int count) {
  std::vector<double> v(count);
  for (int i = 0; i < count; ++i)
    v[i] = count == 1 ? lo : lo + (hi - lo) * i / (count - 1);
  return v;
}

/// n_c as a label: the integer, "stable", "boundary" or "error:<kind>".
inline std::string critical_label(const ModelParams& base, const ModeTable& table) {
  try {
    check_standing_assumption(base.a);
    const auto search = default_search(base.a, base.d);
    if (!(search.hi > search.lo)) return "stable";
    return std::to_string(critical_lambda(base, search, table).n_c);
  } catch (const NoOnset&) {
    return "stable";
  } catch (const SimultaneousEntry&) {
    return "boundary";
  } catch (const std::exception& e) {
    return "error:" + error_kind(e);
  }
}

template <class Fn>
void parallel_for(int count, int threads, Fn&& fn) {
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, std::max(count, 1));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) fn(i);
  };
  if (threads == 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

inline SweepResult cmd_sweep(const SweepSpec& spec) {
  if (spec.a_count < 2 || spec.d_count < 2) throw DomainError("grid counts must be >= 2");
  if (!(spec.a_lo > 0.0) || !(spec.a_hi > spec.a_lo) || !(spec.d_lo > 0.0) ||
      !(spec.d_hi > spec.d_lo))
    throw DomainError("sweep ranges must be positive and increasing");
  SweepResult res;
  res.spec = spec;
  res.a = linspace(spec.a_lo, spec.a_hi, spec.a_count);
  res.d = linspace(spec.d_lo, spec.d_hi, spec.d_count);
  double cutoff = 0.0;
  for (double a : res.a)
    for (double d : res.d) cutoff = std::max(cutoff, mode_table_cutoff(a, d, spec.R));
  res.table_cutoff = cutoff;
  const ModeTable table = build_mode_table(spec.delta, std::max(cutoff, 1.0));
  const int na = spec.a_count;
  res.labels.assign(static_cast<std::size_t>(na) * spec.d_count, "");
  parallel_for(na * spec.d_count, spec.threads, [&](int idx) {
    const int id = idx / na, ia = idx % na;
    ModelParams p{res.a[ia], res.d[id], spec.R, spec.delta, 1.0};
    res.labels[idx] = critical_label(p, table);
  });
  return res;
}

inline json sweep_metadata(const SweepResult& r) {
  const auto& s = r.spec;
  return provenance("sweep", {{"R", s.R},
                              {"delta", s.delta},
                              {"a_range", {s.a_lo, s.a_hi}},
                              {"a_count", s.a_count},
                              {"d_range", {s.d_lo, s.d_hi}},
                              {"d_count", s.d_count},
                              {"mode_table_cutoff", r.table_cutoff},
                              {"layout", "rows are d ascending, columns are a ascending"}});
}

inline void write_sweep_csv(std::ostream& os, const SweepResult& r) {
  write_header_line(os, sweep_metadata(r));
  os << "d\\a";
  for (double a : r.a) os << "," << fmt_num(a);
  os << "\n";
  for (std::size_t id = 0; id < r.d.size(); ++id) {
    os << fmt_num(r.d[id]);
    for (std::size_t ia = 0; ia < r.a.size(); ++ia) os << "," << r.at(id, ia);
    os << "\n";
  }
}

// ---------------------------------------------------------------- whorlcount

struct WhorlTerm {
  std::string label;
  double a_first;
  double a_last;
};

struct WhorlResult {
  double R = 16.0, delta = 2.0, d = 80.0;
  std::vector<double> a;
  std::vector<std::string> labels;
  std::vector<WhorlTerm> sequence;  // consecutive duplicates collapsed

  /// Integer terms of the collapsed sequence, non-numeric labels dropped
  /// before collapsing.
  std::vector<int> numeric_sequence() const {
    std::vector<int> out;
    for (const auto& l : labels) {
      if (l.empty() || !std::isdigit(static_cast<unsigned char>(l[0]))) continue;
      const int v = std::stoi(l);
      if (out.empty() || out.back() != v) out.push_back(v);
    }
    return out;
  }
};

inline WhorlResult cmd_whorlcount(double R, double delta, double d, double a_lo, double a_hi,
                                  int steps, int threads = 0) {
  if (steps < 2) throw DomainError("whorlcount needs at least 2 steps");
  WhorlResult w;
  w.R = R;
  w.delta = delta;
  w.d = d;
  w.a = linspace(a_lo, a_hi, steps);
  double cutoff = 0.0;
  for (double a : w.a) cutoff = std::max(cutoff, mode_table_cutoff(a, d, R));
  const ModeTable table = build_mode_table(delta, std::max(cutoff, 1.0));
  w.labels.assign(steps, "");
  parallel_for(steps, threads, [&](int i) {
    w.labels[i] = critical_label(ModelParams{w.a[i], d, R, delta, 1.0}, table);
  });
  for (int i = 0; i < steps; ++i) {
    if (!w.sequence.empty() && w.sequence.back().label == w.labels[i])
      w.sequence.back().a_last = w.a[i];
    else
      w.sequence.push_back({w.labels[i], w.a[i], w.a[i]});
  }
  return w;
}

inline void write_whorl_csv(std::ostream& os, const WhorlResult& w) {
  write_header_line(os, provenance("whorlcount", {{"R", w.R},
                                                  {"delta", w.delta},
                                                  {"d", w.d},
                                                  {"a_range", {w.a.front(), w.a.back()}},
                                                  {"steps", w.a.size()}}));
  os << "term,label,a_first,a_last\n";
  for (std::size_t i = 0; i < w.sequence.size(); ++i)
    os << i + 1 << "," << w.sequence[i].label << "," << fmt_num(w.sequence[i].a_first) << ","
       << fmt_num(w.sequence[i].a_last) << "\n";
}

// ---------------------------------------------------------------- modeplot

struct ModePlot {
  int n = 0, j = 1;
  double delta = 1.2;
  int nr = 0, nth = 0;
  std::vector<double> r, theta, value;  // value row-major [r][theta]
  int positive_patches = 0;
  int negative_patches = 0;
};

/// Connected components of cells with the given sign; 4-neighbour, periodic in theta.
inline int count_sign_patches(const std::vector<double>& val, int nr, int nth, bool positive) {
  std::vector<int> label(val.size(), -1);
  auto in_set = [&](std::size_t i) { return positive ? val[i] > 0.0 : val[i] < 0.0; };
  int count = 0;
  std::vector<std::size_t> stack;
  for (std::size_t s = 0; s < val.size(); ++s) {
    if (label[s] >= 0 || !in_set(s)) continue;
    label[s] = count;
    stack.push_back(s);
    while (!stack.empty()) {
      const std::size_t c = stack.back();
      stack.pop_back();
      const int i = static_cast<int>(c / nth), k = static_cast<int>(c % nth);
      const std::size_t nb[4] = {
          static_cast<std::size_t>(i) * nth + (k + 1) % nth,
          static_cast<std::size_t>(i) * nth + (k + nth - 1) % nth,
          i + 1 < nr ? static_cast<std::size_t>(i + 1) * nth + k : c,
          i > 0 ? static_cast<std::size_t>(i - 1) * nth + k : c};
      for (std::size_t q : nb)
        if (label[q] < 0 && in_set(q)) {
          label[q] = count;
          stack.push_back(q);
        }
    }
    ++count;
  }
  return count;
}

inline ModePlot cmd_modeplot(double delta, int n, int j, int nr, int nth) {
  if (nr < 4 || nth < 8) throw DomainError("modeplot grid too small");
  const auto modes = radial_eigenvalues(n, delta, j);
  const RadialProfile prof(modes.back(), delta);
  ModePlot mp;
  mp.n = n;
  mp.j = j;
  mp.delta = delta;
  mp.nr = nr;
  mp.nth = nth;
  for (int i = 0; i < nr; ++i) mp.r.push_back(1.0 + (i + 0.5) * (delta - 1.0) / nr);
  for (int k = 0; k < nth; ++k) mp.theta.push_back(2.0 * std::numbers::pi * (k + 0.5) / nth);
  mp.value.resize(static_cast<std::size_t>(nr) * nth);
  for (int i = 0; i < nr; ++i) {
    const double rv = prof(mp.r[i]);
    for (int k = 0; k < nth; ++k) mp.value[static_cast<std::size_t>(i) * nth + k] =
        std::cos(n * mp.theta[k]) * rv;
  }
  mp.positive_patches = count_sign_patches(mp.value, nr, nth, true);
  mp.negative_patches = count_sign_patches(mp.value, nr, nth, false);
  return mp;
}

inline json modeplot_json(const ModePlot& mp) {
  return provenance("modeplot", {{"delta", mp.delta},
                                 {"n", mp.n},
                                 {"j", mp.j},
                                 {"nr", mp.nr},
                                 {"ntheta", mp.nth},
                                 {"positive_patches", mp.positive_patches},
                                 {"negative_patches", mp.negative_patches}});
}

inline void write_modeplot_csv(std::ostream& os, const ModePlot& mp) {
  write_header_line(os, modeplot_json(mp));
  os << "r,theta,value\n";
  for (int i = 0; i < mp.nr; ++i)
    for (int k = 0; k < mp.nth; ++k)
      os << fmt_num(mp.r[i]) << "," << fmt_num(mp.theta[k]) << ","
         << fmt_num(mp.value[static_cast<std::size_t>(i) * mp.nth + k]) << "\n";
}

// ---------------------------------------------------------------- simulate

struct SeedSpec {
  enum class Kind { kZero, kRandom, kMode } kind = Kind::kZero;
  double amplitude = 0.0;
  int n = 0;
  int j = 1;
};

/// "zero", "random:AMP" or "mode:N,J,AMP".
inline SeedSpec parse_seed(const std::string& s) {
  SeedSpec sp;
  if (s == "zero") return sp;
  auto bad = [&] { return DomainError("bad seed spec '" + s + "'"); };
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw bad();
  const std::string kind = s.substr(0, colon), rest = s.substr(colon + 1);
  try {
    if (kind == "random") {
      sp.kind = SeedSpec::Kind::kRandom;
      sp.amplitude = std::stod(rest);
    } else if (kind == "mode") {
      sp.kind = SeedSpec::Kind::kMode;
      std::stringstream ss(rest);
      std::string a, b, c;
      if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c)) throw bad();
      sp.n = std::stoi(a);
      sp.j = std::stoi(b);
      sp.amplitude = std::stod(c);
    } else {
      throw bad();
    }
  } catch (const std::invalid_argument&) {
    throw bad();
  } catch (const std::out_of_range&) {
    throw bad();
  }
  return sp;
}

struct SimulateSpec {
  ModelParams params;  // lambda used unless offset is set
  std::optional<double> lambda_offset;
  std::string seed = "zero";
  double horizon = 10.0;
  double dt = 0.005;
  int nr = 33;
  int nth = 32;
  Scheme scheme = Scheme::kCnab2;
  std::uint64_t rng_seed = 1;
  double sample_every = 0.1;
  std::optional<std::pair<int, int>> track;  // mode for the modal amplitude
};

struct SimulateResult {
  json header;
  std::vector<std::array<double, 5>> series;  // t, cos amp, sin amp, l2, max
  Field final_field;
  int status = kExitOk;
  std::string message;
};

inline SimulateResult cmd_simulate(const SimulateSpec& spec) {
  SimulateResult out;
  ModelParams p = spec.params;
  std::optional<CriticalPoint> cp;
  if (spec.lambda_offset) {
    cp = find_critical(p);
    p.lambda = cp->lambda_c + *spec.lambda_offset;
  }
  const auto seed = parse_seed(spec.seed);
  std::pair<int, int> track{0, 1};
  if (spec.track) {
    track = *spec.track;
  } else if (seed.kind == SeedSpec::Kind::kMode) {
    track = {seed.n, seed.j};
  } else {
    try {
      if (!cp) cp = find_critical(p);
      track = {cp->n_c, cp->j_c};
    } catch (const std::exception&) {
    }
  }
  auto f = make_grid(p, spec.nr, spec.nth);
  const auto modes = discrete_radial_modes(f.grid, track.first, track.second);
  ModeProjector proj(p, f.grid, modes.back());
  if (seed.kind == SeedSpec::Kind::kRandom) {
    detail::random_perturbation(f, spec.rng_seed, seed.amplitude);
  } else if (seed.kind == SeedSpec::Kind::kMode) {
    const auto sm = discrete_radial_modes(f.grid, seed.n, seed.j);
    ModeProjector(p, f.grid, sm.back()).seed(f, seed.amplitude);
  }
  out.header = provenance(
      "simulate", {{"params", params_json(p)},
                   {"seed", spec.seed},
                   {"rng_seed", spec.rng_seed},
                   {"horizon", spec.horizon},
                   {"dt", spec.dt},
                   {"nr", spec.nr},
                   {"ntheta", spec.nth},
                   {"scheme", spec.scheme == Scheme::kCnab2 ? "cnab2" : "euler"},
                   {"track", {track.first, track.second}},
                   {"discrete_beta", discrete_beta(p, modes.back().mu)}});
  ImexStepper st(p, f.grid, spec.dt, spec.scheme);
  auto sample = [&](const Field& g) {
    const auto [ac, as] = proj.amplitude(g);
    out.series.push_back({g.time, ac, as, l2_amplitude(g), max_abs(g)});
  };
  sample(f);
  const int steps = static_cast<int>(std::ceil(spec.horizon / spec.dt - 1e-9));
  const int every = std::max(1, static_cast<int>(std::round(spec.sample_every / spec.dt)));
  Field last_good = f;
  try {
    for (int s = 1; s <= steps; ++s) {
      st.step(f);
      if (s % every == 0 || s == steps) {
        sample(f);
        last_good = f;
      }
    }
    out.final_field = f;
  } catch (const BlowUp& e) {
    out.final_field = last_good;
    out.status = kExitNumerical;
    out.message = e.what();
  }
  out.header["wall_residual"] = wall_residual(out.final_field);
  out.header["final_time"] = out.final_field.time;
  out.header["status"] = out.status == kExitOk ? "ok" : "blowup";
  return out;
}

inline void write_series_csv(std::ostream& os, const SimulateResult& r) {
  write_header_line(os, r.header);
  os << "t,amp_cos,amp_sin,l2,max_abs\n";
  for (const auto& row : r.series)
    os << fmt_num(row[0]) << "," << fmt_num(row[1]) << "," << fmt_num(row[2]) << ","
       << fmt_num(row[3]) << "," << fmt_num(row[4]) << "\n";
}

inline void write_snapshot_csv(std::ostream& os, const SimulateResult& r) {
  const auto& f = r.final_field;
  json h = r.header;
  h["time"] = f.time;
  write_header_line(os, h);
  os << "r,theta,u,v\n";
  for (int i = 0; i < f.grid.nr; ++i)
    for (int k = 0; k < f.grid.nth; ++k) {
      const auto idx = f.grid.at(i, k);
      os << fmt_num(f.grid.r[i]) << "," << fmt_num(f.grid.theta[k]) << "," << fmt_num(f.u[idx])
         << "," << fmt_num(f.v[idx]) << "\n";
    }
}

}  // namespace whorl
