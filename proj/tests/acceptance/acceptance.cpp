// Acceptance checks. Prints one PASS/FAIL line per criterion; exit status is
// nonzero when any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "../oracles.hpp"
#include "whorl/commands.hpp"

using namespace whorl;

namespace {

// Pinned tolerances.
constexpr double kRowTimeLimit = 10.0;         // s per row, mode identity
constexpr double kCoeffTimeLimit = 60.0;       // s per row, coefficient
constexpr double kCoeffRelTol = 0.05;
constexpr int kCoeffRowsRequired = 12;
constexpr double kThinRelTol = 5e-3;
constexpr double kResidualTol = 1e-9;
constexpr int kDispersionSamples = 10000;
constexpr int kRegimeSamples = 1000;
constexpr int kWhorlSteps = 3501;
constexpr double kWhorlTimeLimit = 300.0;
constexpr int kSweepCount = 50;
constexpr double kSweepTimeLimit = 900.0;
constexpr double kComponentShare = 0.9;        // largest component share per label
constexpr double kGrowthRelTol = 0.03;
constexpr double kOrderLo = 1.8, kOrderHi = 2.2;
constexpr double kScalingRelTol = 0.10;
constexpr int kEscapeSeeds = 10;
constexpr int kExpectedPatches = 18;
constexpr double kInvariantTimeLimit = 300.0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass;
  std::string summary;
};

void detail_line(const char* fmt, auto... args) {
  std::printf("    ");
  std::printf(fmt, args...);
  std::printf("\n");
  std::fflush(stdout);
}

// ------------------------------------------------------------------ 1, 2

Verdict ac1() {
  int ok = 0;
  double worst = 0.0;
  const auto& rows = oracle::table1();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const auto t0 = Clock::now();
    std::string got;
    bool match = false;
    try {
      const auto cp = find_critical(oracle::params_of(r));
      got = "(" + std::to_string(cp.n_c) + "," + std::to_string(cp.j_c) + ")";
      match = cp.n_c == r.n_c && cp.j_c == r.j_c;
    } catch (const std::exception& e) {
      got = std::string("error: ") + e.what();
    }
    const double t = seconds_since(t0);
    worst = std::max(worst, t);
    match = match && t < kRowTimeLimit;
    ok += match;
    detail_line("row %2zu expected (%d,%d) got %s  %.2fs %s", i + 1, r.n_c, r.j_c, got.c_str(), t,
                match ? "" : "<-- mismatch");
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d/%zu rows match, slowest %.2fs", ok, rows.size(), worst);
  return {ok == static_cast<int>(rows.size()), buf};
}

Verdict ac2() {
  int within = 0, sign_ok = 0;
  const auto& rows = oracle::table1();
  double worst = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const auto t0 = Clock::now();
    try {
      const auto base = oracle::params_of(r);
      const auto cp = find_critical(base);
      const auto rep = analyze_transition(cp, base);
      const double t = seconds_since(t0);
      worst = std::max(worst, t);
      const double c = rep.coeff_scaled;
      const bool sgn = std::signbit(c) == std::signbit(r.coeff) && t < kCoeffTimeLimit;
      const double rel = std::abs(c - r.coeff) / std::abs(r.coeff);
      const bool mag = rel <= kCoeffRelTol && t < kCoeffTimeLimit;
      sign_ok += sgn;
      within += mag;
      detail_line("row %2zu (%d,%d) coeff %12.6g table %10.6g rel.err %7.4f  %.2fs%s%s", i + 1, cp.n_c,
                  cp.j_c, c, r.coeff, rel, t, sgn ? "" : "  <-- sign", mag ? "" : "  <-- magnitude");
    } catch (const std::exception& e) {
      detail_line("row %2zu error: %s", i + 1, e.what());
    }
  }
  char buf[200];
  std::snprintf(buf, sizeof buf, "sign %d/%zu, within %.0f%% %d/%zu (need all signs, %d magnitudes), slowest %.2fs",
                sign_ok, rows.size(), 100 * kCoeffRelTol, within, rows.size(), kCoeffRowsRequired, worst);
  return {sign_ok == static_cast<int>(rows.size()) && within >= kCoeffRowsRequired, buf};
}

// ------------------------------------------------------------------ 3

Verdict ac3() {
  int bad = 0;
  double worst_thin = 0.0;
  const auto t0 = Clock::now();
  for (double delta : {1.001, 1.05, 1.2, 2.0})
    for (int n = 0; n <= 20; ++n) {
      const auto m = radial_eigenvalues(n, delta, n == 0 ? 2 : 1);
      const double e = m[0].eig;
      if (n == 0) {
        bad += e != 0.0;
        continue;
      }
      const double lo = n * n / (delta * delta), hi = static_cast<double>(n) * n;
      if (!(e > lo && e < hi)) {
        ++bad;
        detail_line("delta %.3f n %d: %.10g outside (%.10g, %.10g)", delta, n, e, lo, hi);
      }
      if (delta == 1.001) worst_thin = std::max(worst_thin, std::abs(e / hi - 1.0));
    }
  const bool pass = bad == 0 && worst_thin < kThinRelTol;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d bound violations, max |lambda_n1/n^2 - 1| at delta=1.001 is %.2e, %.2fs", bad,
                worst_thin, seconds_since(t0));
  return {pass, buf};
}

// ------------------------------------------------------------------ 4

ModelParams random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> A(0.05, 1.2), D(2.0, 250.0), R(1.0, 20.0), L(0.01, 3.0),
      Dl(1.01, 5.0);
  return {A(rng), D(rng), R(rng), Dl(rng), L(rng)};
}

Verdict ac4() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < kDispersionSamples; ++t) {
    const auto p = random_params(rng);
    const double k = std::pow(10.0, 5.0 * U(rng) - 2.0);
    const auto dp = dispersion(p, k);
    for (const auto& br : dp.branch) {
      const cplx b = br.beta;
      const double scale =
          std::abs(b) * std::abs(b) + std::abs(dp.trace_coeff * b) + std::abs(dp.det_coeff);
      worst = std::max(worst, std::abs(b * b + dp.trace_coeff * b + dp.det_coeff) / scale);
    }
  }
  int disagree = 0, boundary = 0;
  std::map<std::string, int> counts;
  for (int t = 0; t < kRegimeSamples; ++t) {
    const auto p = random_params(rng);
    const auto rc = classify_regime(p);
    if (rc.boundary) {
      ++boundary;
      continue;
    }
    // brute force: constant mode, then a dense log scan of k refined around the best sample
    const double at0 = oracle::max_growth(p, 0.0);
    double best = -1e300, best_k = 0.0;
    for (int i = 0; i <= 20000; ++i) {
      const double k = std::pow(10.0, -4.0 + 10.0 * i / 20000);
      const double g = oracle::max_growth(p, k);
      if (g > best) best = g, best_k = k;
    }
    for (int i = -200; i <= 200; ++i) best = std::max(best, oracle::max_growth(p, best_k * std::pow(10.0, i * 2.5e-6)));
    RegimeTag brute = at0 > 0 ? RegimeTag::ConstantUnstable : best > 0 ? RegimeTag::TuringWindow : RegimeTag::Stable;
    ++counts[to_string(rc.tag)];
    if (brute != rc.tag) {
      ++disagree;
      detail_line("disagree: a=%g d=%g R=%g lambda=%g classify=%s brute=%s", p.a, p.d, p.R, p.lambda,
                  to_string(rc.tag), to_string(brute));
    }
  }
  char buf[240];
  std::snprintf(buf, sizeof buf,
                "max relative residual %.2e over %d roots pairs; regime disagreements %d/%d "
                "(%d boundary skipped; %d window, %d stable, %d constant)",
                worst, kDispersionSamples, disagree, kRegimeSamples - boundary, boundary, counts["TuringWindow"],
                counts["Stable"], counts["ConstantUnstable"]);
  return {worst <= kResidualTol && disagree == 0, buf};
}

// ------------------------------------------------------------------ 5

Verdict ac5() {
  const std::vector<int> expected = {1, 2, 3, 4, 8, 5, 9, 6, 10, 7, 1, 11, 2, 3, 8, 12, 4, 5, 13};
  const auto t0 = Clock::now();
  const auto w = cmd_whorlcount(16.0, 2.0, 80.0, 0.2, 0.55, kWhorlSteps, 0);
  const double t = seconds_since(t0);
  const auto seq = w.numeric_sequence();
  std::string got, raw;
  for (int v : seq) got += (got.empty() ? "" : ",") + std::to_string(v);
  for (const auto& term : w.sequence) raw += (raw.empty() ? "" : ",") + term.label;
  std::string want;
  for (int v : expected) want += (want.empty() ? "" : ",") + std::to_string(v);
  detail_line("expected %s", want.c_str());
  detail_line("computed %s", got.c_str());
  detail_line("labels   %s", raw.c_str());
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu computed terms vs %zu expected, %d steps, %.1fs", seq.size(), expected.size(),
                kWhorlSteps, t);
  return {seq == expected && t < kWhorlTimeLimit, buf};
}

// ------------------------------------------------------------------ 6

// Sizes of the 4-connected components of cells carrying `label`.
std::vector<int> components(const SweepResult& r, const std::string& label) {
  const int na = static_cast<int>(r.a.size()), nd = static_cast<int>(r.d.size());
  std::vector<char> seen(r.labels.size(), 0);
  std::vector<int> sizes;
  for (int s = 0; s < na * nd; ++s) {
    if (seen[s] || r.labels[s] != label) continue;
    int size = 0;
    std::vector<int> stack{s};
    seen[s] = 1;
    while (!stack.empty()) {
      const int c = stack.back();
      stack.pop_back();
      ++size;
      const int id = c / na, ia = c % na;
      const int nb[4][2] = {{id - 1, ia}, {id + 1, ia}, {id, ia - 1}, {id, ia + 1}};
      for (const auto& q : nb) {
        if (q[0] < 0 || q[0] >= nd || q[1] < 0 || q[1] >= na) continue;
        const int x = q[0] * na + q[1];
        if (!seen[x] && r.labels[x] == label) {
          seen[x] = 1;
          stack.push_back(x);
        }
      }
    }
    sizes.push_back(size);
  }
  std::sort(sizes.rbegin(), sizes.rend());
  return sizes;
}

Verdict ac6() {
  struct Panel {
    double R, delta;
    std::vector<std::string> labels;
  };
  const std::vector<Panel> panels = {{8, 2, {"3", "4", "5"}},
                                     {8, 1.2, {"2", "3", "4"}},
                                     {4, 2, {"1", "2", "3"}},
                                     {4, 1.2, {"1", "2"}}};
  const auto t0 = Clock::now();
  int ok = 0;
  for (const auto& pnl : panels) {
    SweepSpec s;
    s.R = pnl.R;
    s.delta = pnl.delta;
    s.a_count = s.d_count = kSweepCount;
    const auto res = cmd_sweep(s);
    std::map<std::string, int> census;
    for (const auto& l : res.labels) ++census[l];
    std::string cs;
    for (const auto& [l, c] : census) cs += " " + l + ":" + std::to_string(c);
    bool panel_ok = true;
    auto need = pnl.labels;
    need.push_back("stable");
    std::string verdicts;
    for (const auto& l : need) {
      const auto comp = components(res, l);
      int total = 0;
      for (int c : comp) total += c;
      const bool good = total > 0 && comp.front() >= kComponentShare * total;
      panel_ok = panel_ok && good;
      verdicts += " " + l + (total == 0 ? "[absent]" : good ? "[ok]" : "[fragmented]");
    }
    ok += panel_ok;
    detail_line("R=%g delta=%g census:%s", pnl.R, pnl.delta, cs.c_str());
    detail_line("    required:%s", verdicts.c_str());
  }
  const double t = seconds_since(t0);
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d/%zu panels contain contiguous required regions, %dx%d grids, %.1fs", ok,
                panels.size(), kSweepCount, kSweepCount, t);
  return {ok == static_cast<int>(panels.size()) && t < kSweepTimeLimit, buf};
}

// ------------------------------------------------------------------ 7

Verdict ac7() {
  const auto& r = oracle::table1()[0];
  const auto base = oracle::params_of(r);
  const auto cp = find_critical(base);
  ModelParams p = base;
  p.lambda = cp.lambda_c + 0.01;
  bool pass = true;
  std::vector<double> err;
  double worst_rel = 0.0, cont = 0.0;
  for (int nr : {33, 65, 129}) {
    SimOptions opt;
    opt.nr = nr;
    const auto gm = measure_growth(p, cp.n_c, cp.j_c, 1e-6, 40.0, opt);
    const double rel = std::abs(gm.measured - gm.discrete) / std::abs(gm.discrete);
    worst_rel = std::max(worst_rel, rel);
    err.push_back(std::abs(gm.discrete - gm.continuum));
    cont = gm.continuum;
    detail_line("N_r=%3d measured %.9f discrete %.9f continuum %.9f rel %.2e", nr, gm.measured, gm.discrete,
                gm.continuum, rel);
  }
  const double o1 = std::log2(err[0] / err[1]), o2 = std::log2(err[1] / err[2]);
  pass = worst_rel <= kGrowthRelTol && o1 >= kOrderLo && o1 <= kOrderHi && o2 >= kOrderLo && o2 <= kOrderHi;
  char buf[200];
  std::snprintf(buf, sizeof buf, "max growth-rate error %.2e (tol %.0f%%), observed orders %.3f %.3f, beta %.6f", worst_rel,
                100 * kGrowthRelTol, o1, o2, cont);
  return {pass, buf};
}

// ------------------------------------------------------------------ 8

Verdict ac8() {
  const auto t0 = Clock::now();
  const std::vector<double> offsets = {1e-3, 2e-3, 5e-3, 1e-2};
  // part 1: square-root scaling on row 10
  const auto& r10 = oracle::table1()[9];
  const auto b10 = oracle::params_of(r10);
  const auto cp10 = find_critical(b10);
  const auto res = bifurcation_amplitude(b10, cp10, offsets);
  bool scaling = true;
  std::vector<double> ratios;
  for (const auto& a : res) {
    detail_line("row 10 offset %.0e: %s amplitude %.4g (mode %.4g) max dev %.3g t=%.0f", a.offset,
                to_string(a.outcome), a.amplitude, a.mode_amplitude, a.max_deviation, a.time);
    if (a.outcome != RunOutcome::kSaturated) scaling = false;
    ratios.push_back(a.mode_amplitude / std::sqrt(a.offset));
  }
  if (scaling) {
    const double mean = [&] {
      double s = 0;
      for (double x : ratios) s += x;
      return s / ratios.size();
    }();
    for (double x : ratios) scaling = scaling && std::abs(x / mean - 1.0) <= kScalingRelTol;
  }
  // part 2: escape census on a row with positive coefficient
  const auto& r4 = oracle::table1()[3];
  const auto b4 = oracle::params_of(r4);
  const auto cp4 = find_critical(b4);
  const auto rep4 = analyze_transition(cp4, b4);
  int escaped = 0;
  for (int s = 1; s <= kEscapeSeeds; ++s) {
    AmplitudeOptions opt;
    opt.seed = static_cast<std::uint64_t>(s);
    const auto a = run_to_settle(b4, cp4, 1e-2, opt);
    escaped += a.outcome == RunOutcome::kEscaped || a.outcome == RunOutcome::kBlowUp;
    detail_line("row 4 seed %2d: %s max dev %.3g t=%.0f", s, to_string(a.outcome), a.max_deviation, a.time);
  }
  detail_line("row 4 coeff %.4g (q > 0: %s)", rep4.coeff_scaled, rep4.q_value > 0 ? "yes" : "no");
  const bool census = escaped == kEscapeSeeds && rep4.q_value > 0;
  char buf[200];
  std::snprintf(buf, sizeof buf, "row-10 sqrt scaling %s; row-4 escapes %d/%d; %.1fs", scaling ? "holds" : "fails",
                escaped, kEscapeSeeds, seconds_since(t0));
  return {scaling && census, buf};
}

// ------------------------------------------------------------------ 9

Verdict ac9() {
  const auto mp = cmd_modeplot(1.2, 6, 3, 240, 720);
  char buf[120];
  std::snprintf(buf, sizeof buf, "%d positive and %d negative patches (expected %d)", mp.positive_patches,
                mp.negative_patches, kExpectedPatches);
  return {mp.positive_patches == kExpectedPatches, buf};
}

// ------------------------------------------------------------------ 10

Verdict ac10() {
  const auto t0 = Clock::now();
  std::vector<std::pair<std::string, bool>> checks;
  // orthogonality and standardization of radial modes
  {
    bool ok = true;
    for (double delta : {1.05, 2.0})
      for (int n : {0, 3}) {
        const auto m = radial_eigenvalues(n, delta, 5);
        for (std::size_t i = 0; i < m.size(); ++i) {
          ok = ok && radial_eval(m[i], delta, 1.0) > 0.0;
          ok = ok && std::abs(angular_measure(n) * radial_integral({m[i], m[i]}, delta) - 1.0) < 1e-10;
          for (std::size_t k = i + 1; k < m.size(); ++k)
            ok = ok && std::abs(radial_integral({m[i], m[k]}, delta)) < 1e-10;
        }
      }
    checks.emplace_back("radial orthonormality", ok);
  }
  {
    std::mt19937_64 rng(99);
    bool ok = true;
    for (int t = 0; t < 2000; ++t) {
      auto p = random_params(rng);
      p.d = std::max(p.d, 1.0);
      p.lambda += p.a;
      const double k = std::uniform_real_distribution<double>(0.0, 300.0)(rng);
      for (const auto& br : dispersion(p, k).branch)
        ok = ok && br.u.real() > 0 && br.u.imag() == 0 && br.v.real() < 0 &&
             std::abs(std::norm(br.u) + std::norm(br.v) - 1.0) < 1e-10;
    }
    checks.emplace_back("amplitude standardization signs", ok);
  }
  {
    bool real_ok = true, o2_ok = true;
    for (std::size_t i : {0u, 4u, 9u, 11u}) {
      const auto base = oracle::params_of(oracle::table1()[i]);
      const auto cp = find_critical(base);
      TransitionOptions sopt;
      sopt.pivot = Pivot::kSin;
      const auto a = transition_number(cp, base), b = transition_number(cp, base, sopt);
      real_ok = real_ok && a.imag_residue <= 1e-8 * std::max(1.0, a.max_abs_b) && a.u_c - a.v_c > 0;
      o2_ok = o2_ok && std::abs(a.q_value - b.q_value) <= 1e-10 * std::max(1.0, std::abs(a.q_value));
    }
    checks.emplace_back("q realness", real_ok);
    checks.emplace_back("O(2) pivot equivariance", o2_ok);
  }
  {
    const ModelParams p{0.2, 13.0, 4.0, 1.05, 0.6};
    auto f = make_grid(p, 33, 32);
    const auto parts = apply_operator(f);
    bool ok = *std::max_element(parts.total_u.begin(), parts.total_u.end()) == 0.0 &&
              *std::min_element(parts.total_u.begin(), parts.total_u.end()) == 0.0;
    ImexStepper st(p, f.grid, 0.005);
    for (int s = 0; s < 50; ++s) st.step(f);
    ok = ok && max_abs(f) == 0.0;
    checks.emplace_back("zero fixed point", ok);
    detail::random_perturbation(f, 5, 1e-2);
    const auto nl = apply_operator(f);
    bool anti = true;
    for (std::size_t i = 0; i < f.u.size(); ++i) anti = anti && nl.nonlin_u[i] + nl.nonlin_v[i] == 0.0;
    checks.emplace_back("nonlinear antisymmetry", anti);
    Field rot = f;
    const auto& g = f.grid;
    for (int i = 0; i < g.nr; ++i)
      for (int k = 0; k < g.nth; ++k) {
        rot.u[g.at(i, (k + 7) % g.nth)] = f.u[g.at(i, k)];
        rot.v[g.at(i, (k + 7) % g.nth)] = f.v[g.at(i, k)];
      }
    const auto a = step_imex(f, 0.005), b = step_imex(rot, 0.005);
    double dev = 0.0;
    for (int i = 0; i < g.nr; ++i)
      for (int k = 0; k < g.nth; ++k) {
        dev = std::max(dev, std::abs(a.u[g.at(i, k)] - b.u[g.at(i, (k + 7) % g.nth)]));
        dev = std::max(dev, std::abs(a.v[g.at(i, k)] - b.v[g.at(i, (k + 7) % g.nth)]));
      }
    checks.emplace_back("rotational equivariance", dev <= 1e-12);
  }
  {
    SweepSpec s;
    s.a_count = s.d_count = 8;
    s.threads = 1;
    const auto a = cmd_sweep(s);
    s.threads = 4;
    const auto b = cmd_sweep(s);
    std::ostringstream x, y;
    write_sweep_csv(x, a);
    write_sweep_csv(y, b);
    SimulateSpec sim;
    sim.seed = "random:1e-3";
    sim.horizon = 1.0;
    std::ostringstream u, v;
    write_series_csv(u, cmd_simulate(sim));
    write_series_csv(v, cmd_simulate(sim));
    checks.emplace_back("determinism", x.str() == y.str() && u.str() == v.str());
  }
  int ok = 0;
  std::string failed;
  for (const auto& [name, good] : checks) {
    detail_line("%-32s %s", name.c_str(), good ? "ok" : "FAILED");
    ok += good;
    if (!good) failed += " " + name;
  }
  const double t = seconds_since(t0);
  char buf[200];
  std::snprintf(buf, sizeof buf, "%d/%zu invariant checks hold, %.1fs%s", ok, checks.size(), t,
                failed.empty() ? "" : (";" + failed + " failed").c_str());
  return {ok == static_cast<int>(checks.size()) && t < kInvariantTimeLimit, buf};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::vector<int> only;
  app.add_option("--only", only, "criterion numbers to run (default all)")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"Table-1 mode identity", ac1},   {"Table-1 coefficient", ac2},
      {"first radial eigenvalue bounds", ac3}, {"dispersion residual and regimes", ac4},
      {"whorl-count sequence", ac5},    {"phase-diagram regions", ac6},
      {"linear growth validation", ac7}, {"transition dichotomy", ac8},
      {"eigenvector sign patches", ac9}, {"invariant suites", ac10},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    std::printf("AC%d %s\n", id, criteria[i].first);
    std::fflush(stdout);
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s AC%d %s: %s\n", v.pass ? "PASS" : "FAIL", id, criteria[i].first, v.summary.c_str());
    std::fflush(stdout);
    failures += !v.pass;
  }
  return failures == 0 ? 0 : 1;
}
