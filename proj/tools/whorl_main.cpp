#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "whorl/commands.hpp"

namespace {

using whorl::json;

const std::vector<std::string> kSubcommands = {"eigs",     "critical", "sweep",
                                               "whorlcount", "modeplot", "simulate"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Config file entries as "--key=value" arguments. Accepts a flat JSON object
// or "key = value" lines ('#' and ';' start comments, [sections] are ignored).
std::vector<std::string> config_arguments(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  std::vector<std::string> args;
  if (trim(text).rfind('{', 0) == 0) {
    const json j = json::parse(text);
    if (!j.is_object()) throw std::runtime_error("JSON config must be an object");
    for (const auto& [k, v] : j.items()) {
      std::string val;
      if (v.is_string())
        val = v.get<std::string>();
      else if (v.is_boolean())
        val = v.get<bool>() ? "true" : "false";
      else if (v.is_number())
        val = v.dump();
      else
        throw std::runtime_error("config value for '" + k + "' must be a scalar");
      args.push_back("--" + k + "=" + val);
    }
    return args;
  }
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';' || line[0] == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("config line without '=': " + line);
    std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
    if (val.size() >= 2 && val.front() == '"' && val.back() == '"') val = val.substr(1, val.size() - 2);
    args.push_back("--" + key + "=" + val);
  }
  return args;
}

// Splices config entries in front of the command-line options so the later
// (command-line) occurrence wins.
std::vector<std::string> merge_config(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  std::string cfg;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) cfg = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) cfg = args[i].substr(9);
  }
  if (cfg.empty()) return args;
  std::size_t sub = args.size();
  for (std::size_t i = 1; i < args.size(); ++i)
    if (std::find(kSubcommands.begin(), kSubcommands.end(), args[i]) != kSubcommands.end()) {
      sub = i;
      break;
    }
  if (sub == args.size()) return args;
  const auto extra = config_arguments(cfg);
  args.insert(args.begin() + static_cast<long>(sub) + 1, extra.begin(), extra.end());
  return args;
}

std::ostream& open_out(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw std::runtime_error("cannot write " + path);
  return file;
}

void add_params(CLI::App* app, whorl::ModelParams& p, bool with_lambda) {
  app->add_option("--a", p.a, "production rate a")->capture_default_str();
  app->add_option("--d", p.d, "diffusivity ratio d")->capture_default_str();
  app->add_option("--R", p.R, "domain scale R")->capture_default_str();
  app->add_option("--delta", p.delta, "outer/inner radius ratio")->capture_default_str();
  if (with_lambda) app->add_option("--lambda", p.lambda, "bifurcation parameter")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Turing onset and transition analysis on an annulus"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(whorl::kToolName) + " " + whorl::kVersion);
  std::string config_path;

  auto with_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value or JSON config; flags override it");
  };

  // eigs
  int n_max = 10, j_max = 3;
  double eig_delta = 1.2;
  std::string out_path;
  auto* eigs = app.add_subcommand("eigs", "table of annular Neumann eigenvalues");
  eigs->add_option("--n-max", n_max)->capture_default_str();
  eigs->add_option("--j-max", j_max)->capture_default_str();
  eigs->add_option("--delta", eig_delta)->capture_default_str();
  eigs->add_option("--out", out_path, "output CSV (default stdout)");
  with_config(eigs);

  // critical
  whorl::ModelParams cp_params{0.2, 13.0, 4.0, 1.05, 1.0};
  std::string convention = "reference", pivot = "cos";
  double tail_tol = 1e-8;
  auto* crit = app.add_subcommand("critical", "critical point and transition report (JSON)");
  add_params(crit, cp_params, false);
  crit->add_option("--convention", convention, "reference | unit-norm")
      ->check(CLI::IsMember({"reference", "unit-norm"}))
      ->capture_default_str();
  crit->add_option("--pivot", pivot, "cos | sin")->check(CLI::IsMember({"cos", "sin"}))->capture_default_str();
  crit->add_option("--tail-tol", tail_tol)->capture_default_str();
  crit->add_option("--out", out_path, "output JSON (default stdout)");
  with_config(crit);

  // sweep
  whorl::SweepSpec sw;
  auto* sweep = app.add_subcommand("sweep", "critical wavenumber over an (a, d) grid");
  sweep->add_option("--R", sw.R)->capture_default_str();
  sweep->add_option("--delta", sw.delta)->capture_default_str();
  sweep->add_option("--a-lo", sw.a_lo)->capture_default_str();
  sweep->add_option("--a-hi", sw.a_hi)->capture_default_str();
  sweep->add_option("--a-count", sw.a_count)->capture_default_str();
  sweep->add_option("--d-lo", sw.d_lo)->capture_default_str();
  sweep->add_option("--d-hi", sw.d_hi)->capture_default_str();
  sweep->add_option("--d-count", sw.d_count)->capture_default_str();
  sweep->add_option("--threads", sw.threads, "worker threads (0: all cores)")->capture_default_str();
  sweep->add_option("--out", out_path, "output CSV; metadata goes to <out>.json")->required();
  with_config(sweep);

  // whorlcount
  double wc_R = 16.0, wc_delta = 2.0, wc_d = 80.0, wc_alo = 0.2, wc_ahi = 0.55;
  int wc_steps = 701, wc_threads = 0;
  auto* whorl = app.add_subcommand("whorlcount", "sequence of n_c as a increases");
  whorl->add_option("--R", wc_R)->capture_default_str();
  whorl->add_option("--delta", wc_delta)->capture_default_str();
  whorl->add_option("--d", wc_d)->capture_default_str();
  whorl->add_option("--a-lo", wc_alo)->capture_default_str();
  whorl->add_option("--a-hi", wc_ahi)->capture_default_str();
  whorl->add_option("--steps", wc_steps)->capture_default_str();
  whorl->add_option("--threads", wc_threads)->capture_default_str();
  whorl->add_option("--out", out_path, "output CSV (default stdout)");
  with_config(whorl);

  // modeplot
  double mp_delta = 1.2;
  int mp_n = 6, mp_j = 3, mp_nr = 240, mp_nth = 720;
  auto* mplot = app.add_subcommand("modeplot", "sample cos(n theta) R_nj(r) and count sign patches");
  mplot->add_option("--delta", mp_delta)->capture_default_str();
  mplot->add_option("--n", mp_n)->capture_default_str();
  mplot->add_option("--j", mp_j)->capture_default_str();
  mplot->add_option("--nr", mp_nr)->capture_default_str();
  mplot->add_option("--ntheta", mp_nth)->capture_default_str();
  mplot->add_option("--out", out_path, "field CSV; summary JSON goes to stdout");
  with_config(mplot);

  // simulate
  whorl::SimulateSpec sim;
  sim.params = {0.2, 13.0, 4.0, 1.05, 0.5};
  double offset = 0.0;
  std::string scheme = "cnab2", track, prefix = "run";
  auto* simc = app.add_subcommand("simulate", "time integration of the deviation system");
  add_params(simc, sim.params, true);
  auto* off_opt = simc->add_option("--offset", offset, "lambda - lambda_c (overrides --lambda)");
  simc->add_option("--seed", sim.seed, "zero | random:AMP | mode:N,J,AMP")->capture_default_str();
  simc->add_option("--horizon", sim.horizon)->capture_default_str();
  simc->add_option("--dt", sim.dt)->capture_default_str();
  simc->add_option("--nr", sim.nr)->capture_default_str();
  simc->add_option("--ntheta", sim.nth)->capture_default_str();
  simc->add_option("--scheme", scheme, "euler | cnab2")->check(CLI::IsMember({"euler", "cnab2"}))->capture_default_str();
  simc->add_option("--rng-seed", sim.rng_seed)->capture_default_str();
  simc->add_option("--sample-every", sim.sample_every)->capture_default_str();
  simc->add_option("--track", track, "N,J of the tracked mode");
  simc->add_option("--out-prefix", prefix, "writes <prefix>_series.csv and <prefix>_snapshot.csv")
      ->capture_default_str();
  with_config(simc);

  std::vector<std::string> merged;
  try {
    merged = merge_config(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return whorl::kExitUsage;
  }
  std::vector<char*> cargs;
  for (auto& s : merged) cargs.push_back(s.data());
  try {
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    std::ofstream file;
    if (eigs->parsed()) {
      const auto t = whorl::cmd_eigs(n_max, j_max, eig_delta);
      whorl::write_eigs_csv(open_out(out_path, file), t);
      return whorl::kExitOk;
    }
    if (crit->parsed()) {
      whorl::TransitionOptions opt;
      opt.tail_tol = tail_tol;
      opt.convention = convention == "unit-norm" ? whorl::QConvention::kUnitNorm
                                                 : whorl::QConvention::kReference;
      opt.pivot = pivot == "sin" ? whorl::Pivot::kSin : whorl::Pivot::kCos;
      const auto res = whorl::cmd_critical(cp_params, opt);
      open_out(out_path, file) << res.report.dump(2) << "\n";
      return res.status;
    }
    if (sweep->parsed()) {
      const auto res = whorl::cmd_sweep(sw);
      whorl::write_sweep_csv(open_out(out_path, file), res);
      std::ofstream meta(out_path + ".json");
      meta << whorl::sweep_metadata(res).dump(2) << "\n";
      return whorl::kExitOk;
    }
    if (whorl->parsed()) {
      const auto res = whorl::cmd_whorlcount(wc_R, wc_delta, wc_d, wc_alo, wc_ahi, wc_steps, wc_threads);
      whorl::write_whorl_csv(open_out(out_path, file), res);
      return whorl::kExitOk;
    }
    if (mplot->parsed()) {
      const auto mp = whorl::cmd_modeplot(mp_delta, mp_n, mp_j, mp_nr, mp_nth);
      if (!out_path.empty()) {
        std::ofstream f(out_path);
        whorl::write_modeplot_csv(f, mp);
      }
      std::cout << whorl::modeplot_json(mp).dump(2) << "\n";
      return whorl::kExitOk;
    }
    if (simc->parsed()) {
      if (off_opt->count() > 0) sim.lambda_offset = offset;
      sim.scheme = scheme == "euler" ? whorl::Scheme::kImexEuler : whorl::Scheme::kCnab2;
      if (!track.empty()) {
        const auto comma = track.find(',');
        if (comma == std::string::npos) throw whorl::DomainError("--track expects N,J");
        sim.track = std::make_pair(std::stoi(track.substr(0, comma)), std::stoi(track.substr(comma + 1)));
      }
      const auto res = whorl::cmd_simulate(sim);
      std::ofstream series(prefix + "_series.csv"), snap(prefix + "_snapshot.csv");
      whorl::write_series_csv(series, res);
      whorl::write_snapshot_csv(snap, res);
      if (res.status != whorl::kExitOk) std::cerr << "blow-up: " << res.message << "\n";
      return res.status;
    }
  } catch (const whorl::NoOnset& e) {
    std::cerr << "stable: " << e.what() << "\n";
    return whorl::kExitStable;
  } catch (const whorl::DomainError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return whorl::kExitUsage;
  } catch (const whorl::NumericalError& e) {
    std::cerr << "numerical failure (" << whorl::error_kind(e) << "): " << e.what() << "\n";
    return whorl::kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return whorl::kExitUsage;
  }
  return whorl::kExitUsage;
}
