#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mfaoa/exact.hpp"
#include "mfaoa/fluctuation.hpp"
#include "mfaoa/io.hpp"
#include "mfaoa/stats.hpp"

using namespace mfaoa;

namespace {

constexpr int config_schema_version = 1;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string key_of(const std::string& flag) {
  std::string k = flag.substr(flag.find_first_not_of('-'));
  for (char& c : k)
    if (c == '-') c = '_';
  return k;
}

/// Options registered on a subcommand together with their JSON config keys.
class Flags {
 public:
  explicit Flags(CLI::App* app) : app_(app) {}

  template <class T>
  CLI::Option* option(const std::string& flag, T& var, const std::string& desc, bool provenance = true) {
    CLI::Option* opt = app_->add_option(flag, var, desc)->capture_default_str();
    items_.push_back({key_of(flag), opt, [&var](const json& j) { var = j.get<T>(); }, [&var] { return json(var); }, provenance});
    return opt;
  }

  CLI::Option* flag(const std::string& flag, bool& var, const std::string& desc) {
    CLI::Option* opt = app_->add_flag(flag, var, desc);
    items_.push_back({key_of(flag), opt, [&var](const json& j) { var = j.get<bool>(); }, [&var] { return json(var); }, true});
    return opt;
  }

  /// Values from the config document fill every option not given on the command line.
  void merge(const json& config) {
    for (const auto& [key, value] : config.items()) {
      if (key == "schema_version" || key == "command" || key == "full" || key == "description") continue;
      auto it = std::find_if(items_.begin(), items_.end(), [&](const Item& i) { return i.key == key; });
      if (it == items_.end()) throw UsageError("unknown config key '" + key + "' for " + app_->get_name());
      if (it->opt->count() > 0) continue;
      try {
        it->load(value);
      } catch (const json::exception&) {
        throw UsageError("config key '" + key + "' has the wrong type");
      }
    }
  }

  json effective() const {
    json out;
    out["schema_version"] = config_schema_version;
    out["command"] = app_->get_name();
    for (const auto& i : items_)
      if (i.provenance) out[i.key] = i.save();
    return out;
  }

 private:
  struct Item {
    std::string key;
    CLI::Option* opt;
    std::function<void(const json&)> load;
    std::function<json()> save;
    bool provenance;
  };
  CLI::App* app_;
  std::vector<Item> items_;
};

struct Common {
  std::string config;
  bool full = false;
  unsigned threads = 0;
  bool timing = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "JSON config file; command-line flags take precedence");
  sub->add_flag("--full", c.full, "apply the config's larger-scale overrides (its \"full\" object)");
  sub->add_option("--threads", c.threads, "worker threads (default: MFAOA_THREADS, else all cores)");
  sub->add_flag("--timing", c.timing, "record wallclock times in the outputs");
}

void load_config(const Common& c, const std::string& command, Flags& flags) {
  if (c.config.empty()) {
    if (c.full) throw UsageError("--full needs --config");
    return;
  }
  json doc;
  try {
    doc = read_json_file(c.config);
  } catch (const error& e) {
    throw UsageError(e.what());
  }
  if (!doc.is_object()) throw UsageError("config must be a JSON object");
  if (doc.value("schema_version", config_schema_version) != config_schema_version)
    throw UsageError("unsupported config schema_version");
  if (doc.contains("command") && doc.at("command") != command)
    throw UsageError("config is for '" + doc.at("command").get<std::string>() + "', not '" + command + "'");
  if (c.full && doc.contains("full"))
    for (const auto& [key, value] : doc.at("full").items()) doc[key] = value;
  flags.merge(doc);
}

class Output {
 public:
  void warn(const std::string& message) {
    std::cerr << "warning: " << message << "\n";
    warnings_.push_back(message);
  }
  json warnings() const { return warnings_; }

 private:
  json warnings_ = json::array();
};

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
  } else {
    write_text_file(path, text);
  }
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

json fit_json(const FitReport& r) {
  json params = json::object();
  for (const auto& [name, p] : r.parameters) params[name] = {{"value", p.value}, {"stderr", p.stderr_}};
  return {{"model", r.model}, {"parameters", params}, {"goodness", r.goodness}, {"converged", r.converged}};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

IsingProblem prepare(const IsingProblem& full, bool break_sym) { return break_sym ? break_symmetry(full) : full; }

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  try {
    if (text.find(':') != std::string::npos) {
      std::stringstream ss(text);
      std::string a, b, c;
      std::getline(ss, a, ':');
      std::getline(ss, b, ':');
      std::getline(ss, c);
      const double lo = std::stod(a), hi = std::stod(b);
      const int count = std::stoi(c);
      if (count < 2) throw UsageError("grid needs at least 2 points");
      for (int i = 0; i < count; ++i) out.push_back(lo + (hi - lo) * i / (count - 1));
    } else {
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    }
  } catch (const std::logic_error&) {
    throw UsageError("cannot parse grid '" + text + "' (use start:stop:count or a comma list)");
  }
  return out;
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  try {
    while (std::getline(ss, item, ',')) out.push_back(static_cast<std::size_t>(std::stoul(item)));
  } catch (const std::logic_error&) {
    throw UsageError("cannot parse size list '" + text + "'");
  }
  if (out.empty()) throw UsageError("empty size list");
  return out;
}

// --- gen --------------------------------------------------------------------

struct GenArgs {
  std::string kind = "sk";
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::string out;
};

int run_gen(const GenArgs& a) {
  const ProblemKind kind = parse_kind(a.kind);
  if (kind == ProblemKind::custom) throw error(errc::invalid_instance, "gen supports sk and partition");
  if (a.n == 0) throw UsageError("--n is required");
  emit(a.out, dump(instance_to_json(make_instance(kind, a.n, a.seed)), 2) + "\n");
  return 0;
}

// --- solve ------------------------------------------------------------------

struct SolveArgs {
  std::string instance;
  double tau = 0.5;
  long long p = 1000;
  bool refine = false;
  int max_rounds = 8;
  bool two_flip = false;
  bool break_symmetry = false;
  long long record_trajectory = 0;
  std::string trajectory = "trajectory.jsonl";
  std::string out;
};

int run_solve(const SolveArgs& a, const Common& c, const json& config) {
  const auto t0 = std::chrono::steady_clock::now();
  Output out;
  const IsingProblem full = read_instance(a.instance);
  const IsingProblem problem = prepare(full, a.break_symmetry);

  Bitstring sigma;
  Schedule schedule = linear_schedule(a.p, a.tau);
  json result;
  std::optional<Trajectory> trajectory;
  if (a.refine) {
    const RefineResult r = refine(problem, a.tau, a.p, a.max_rounds);
    if (!r.converged) out.warn("refinement did not stabilize within " + std::to_string(a.max_rounds) + " rounds");
    sigma = r.sigma;
    schedule = r.schedule;
    result["rounds"] = r.rounds;
    result["converged"] = r.converged;
  }
  EvolveOptions ev;
  ev.record_stride = a.record_trajectory;
  ev.track_smoothness = true;
  const EvolveResult run = evolve(problem, schedule, ev);
  if (!a.refine) sigma = round_solution(run.final_config);
  if (run.max_step_angle >= smooth_angle_limit)
    out.warn("trajectory not smooth: max step angle " + num(run.max_step_angle) + " rad");
  if (a.two_flip) sigma = two_flip_refine(problem, sigma);
  const Bitstring sigma_full = a.break_symmetry ? restore_fixed_spin(sigma) : sigma;
  const double e = energy(full, sigma_full);

  result["n"] = full.n();
  result["tau"] = schedule.tau;
  result["p"] = schedule.p();
  result["sigma_star"] = bits_to_string(sigma_full);
  result["e_star"] = e;
  result["e_star_density"] = e / static_cast<double>(full.n());
  result["max_step_angle"] = run.max_step_angle;
  if (a.record_trajectory > 0) {
    write_text_file(a.trajectory, trajectory_to_jsonl(*run.trajectory));
    result["trajectory"] = a.trajectory;
  }
  json doc{{"config", config}, {"result", result}, {"warnings", out.warnings()}};
  if (c.timing) doc["timing"] = {{"seconds", seconds_since(t0)}};
  emit(a.out, dump(doc, 2) + "\n");
  return 0;
}

// --- fluct ------------------------------------------------------------------

struct FluctArgs {
  std::string instance;
  std::string trajectory;
  double tau = 0.5;
  long long p = 1000;
  long long slices = 2000;
  bool break_symmetry = false;
  std::string out;
  std::string report;
};

int run_fluct(const FluctArgs& a, const Common& c, const json& config) {
  const auto t0 = std::chrono::steady_clock::now();
  Output out;
  const IsingProblem full = read_instance(a.instance);
  const IsingProblem problem = prepare(full, a.break_symmetry);
  FluctuationOptions opt;
  opt.slices = a.slices;
  const FluctuationAnalysis fa = a.trajectory.empty()
                                     ? analyse_fluctuations(problem, linear_schedule(a.p, a.tau), opt)
                                     : analyse_trajectory(problem, trajectory_from_jsonl(a.trajectory), opt);
  const std::size_t n = problem.n();
  if (!fa.trace.skipped.empty())
    out.warn(std::to_string(fa.trace.skipped.size()) + " slices skipped at a projection pole");
  if (!fa.trace.unstable.empty())
    out.warn(std::to_string(fa.trace.unstable.size()) + " slices with complex magnon frequencies");

  if (!a.out.empty()) {
    std::string csv = "s";
    for (std::size_t l = 0; l < n; ++l) csv += ",omega_" + std::to_string(l);
    for (std::size_t l = 0; l < n; ++l) csv += ",lambda_" + std::to_string(l);
    csv += "\n";
    for (std::size_t k = 0; k < fa.trace.times.size(); ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      csv += num(fa.trace.times[k]);
      for (std::size_t l = 0; l < n; ++l)
        csv += "," + (fa.trace.omegas.rows() > kk ? num(fa.trace.omegas(kk, static_cast<Eigen::Index>(l))) : std::string("nan"));
      for (std::size_t l = 0; l < n; ++l) csv += "," + num(fa.trace.lambdas(kk, static_cast<Eigen::Index>(l)));
      csv += "\n";
    }
    write_text_file(a.out, csv);
  }

  const HardnessReport h = hardness_report(fa.trace, n + (a.break_symmetry ? 1 : 0));
  json peaks = json::array();
  for (const auto& pk : h.peaks) peaks.push_back({{"s", pk.s}, {"height", pk.height}, {"prominence", pk.prominence}});
  const Bitstring sigma_full = a.break_symmetry ? restore_fixed_spin(fa.sigma_star) : fa.sigma_star;
  json report{{"max_lambda0", h.max_lambda0}, {"s_at_max", h.s_at_max}, {"threshold", h.threshold},
              {"ratio", h.ratio},           {"final_max_lambda", h.final_max_lambda}, {"reflectionless", h.reflectionless},
              {"late_swings", h.late_swings}, {"oscillations", h.oscillations}, {"peaks", peaks}};
  json doc{{"config", config},
           {"result",
            {{"n", full.n()},
             {"stride", fa.stride},
             {"slices", fa.trace.times.size()},
             {"sigma_star", bits_to_string(sigma_full)},
             {"e_star", energy(full, sigma_full)},
             {"hardness", report},
             {"skipped", fa.trace.skipped},
             {"unstable", fa.trace.unstable}}},
           {"warnings", out.warnings()}};
  if (c.timing) doc["timing"] = {{"seconds", seconds_since(t0)}};
  emit(a.report, dump(doc, 2) + "\n");
  return 0;
}

// --- exact ------------------------------------------------------------------

struct ExactArgs {
  std::string instance;
  std::string mode = "ground";
  std::string s_grid = "0:1:101";
  int k = 4;
  long long p = 8;
  double tau = 0.5;
  bool optimize = false;
  bool break_symmetry = false;
  std::string out;
  std::string report;
};

int run_exact(const ExactArgs& a, const Common& c, const json& config) {
  const auto t0 = std::chrono::steady_clock::now();
  Output out;
  const IsingProblem full = read_instance(a.instance);
  const IsingProblem problem = prepare(full, a.break_symmetry);
  json result;
  if (a.mode == "ground") {
    const GroundState g = brute_force_ground(problem);
    const Bitstring sigma = a.break_symmetry ? restore_fixed_spin(g.sigma) : g.sigma;
    result = {{"n", full.n()}, {"e_zero", g.energy}, {"e_zero_density", g.energy / static_cast<double>(full.n())},
              {"sigma", bits_to_string(sigma)}};
  } else if (a.mode == "spectrum") {
    const auto spec = adiabatic_spectrum(problem, parse_grid(a.s_grid), a.k);
    std::size_t levels = static_cast<std::size_t>(a.k);
    for (const auto& sl : spec) levels = std::min(levels, sl.lowest.size());
    if (levels < static_cast<std::size_t>(a.k)) out.warn("degenerate levels merged; " + std::to_string(levels) + " columns written");
    std::string csv = "s";
    for (std::size_t l = 0; l < levels; ++l) csv += ",E_" + std::to_string(l);
    csv += "\n";
    for (const auto& sl : spec) {
      csv += num(sl.s);
      for (std::size_t l = 0; l < levels; ++l) csv += "," + num(sl.lowest[l]);
      csv += "\n";
    }
    emit(a.out, csv);
    json features = json::array();
    for (const auto& f : spectral_features(spec))
      features.push_back({{"s", f.s}, {"level", f.level}, {"gap", f.gap}, {"closing", f.closing}});
    result = {{"n", problem.n()}, {"points", spec.size()}, {"levels", levels}, {"features", features}};
    json doc{{"config", config}, {"result", result}, {"warnings", out.warnings()}};
    if (c.timing) doc["timing"] = {{"seconds", seconds_since(t0)}};
    if (!a.report.empty()) emit(a.report, dump(doc, 2) + "\n");
    return 0;
  } else if (a.mode == "qaoa") {
    Schedule schedule = linear_schedule(a.p, a.tau);
    json extra;
    if (a.optimize) {
      const QaoaOptimum opt = optimize_qaoa(problem, schedule);
      schedule = opt.schedule;
      extra["evaluations"] = opt.evaluations;
    }
    const Vector diag = problem_diagonal(problem);
    json layers = json::array();
    const QaoaResult q = qaoa_statevector(problem, schedule, [&](std::size_t k, const Statevector& psi) {
      layers.push_back({{"k", k}, {"energy", psi.cwiseAbs2().dot(diag)}});
    });
    result = {{"n", problem.n()},        {"p", schedule.p()},     {"gammas", schedule.gammas}, {"betas", schedule.betas},
              {"expectation", q.expectation}, {"layers", layers}};
    if (full.kind() == ProblemKind::partition) result["cost"] = std::sqrt(std::max(0.0, q.expectation));
    for (const auto& [key, value] : extra.items()) result[key] = value;
  } else {
    throw UsageError("--mode must be ground, spectrum or qaoa");
  }
  json doc{{"config", config}, {"result", result}, {"warnings", out.warnings()}};
  if (c.timing) doc["timing"] = {{"seconds", seconds_since(t0)}};
  emit(a.out, dump(doc, 2) + "\n");
  return 0;
}

// --- bench ------------------------------------------------------------------

struct BenchArgs {
  std::string kind = "sk";
  std::string n_list = "20";
  std::size_t count = 100;
  double tau = 0.5;
  long long p = 1000;
  bool two_flip = false;
  bool exact = false;
  std::uint64_t seed0 = 0;
  int gumbel_m = 6;
  long long qaoa_p = 0;
  double qaoa_tau = 0.5;
  int qaoa_evals = 500;
  std::string out_dir = "bench";
};

int run_bench(const BenchArgs& a, const Common& c, const json& config) {
  const auto t0 = std::chrono::steady_clock::now();
  Output out;
  const ProblemKind kind = parse_kind(a.kind);
  if (kind == ProblemKind::custom) throw error(errc::invalid_instance, "bench supports sk and partition");
  const std::vector<std::size_t> sizes = parse_sizes(a.n_list);
  std::filesystem::create_directories(a.out_dir);
  const std::filesystem::path dir(a.out_dir);

  std::string summary = "# " + dump(config) + "\n";
  summary += "n,count,mean_e_star,mean_e_star_density,sd_e_star_density,mean_sqrt_e_star,mean_e_zero,fraction_optimal,mean_qaoa_cost\n";
  std::vector<std::pair<double, double>> scaling_points, qaoa_points;
  json gumbel = json::object(), tails = json::object();
  for (std::size_t n : sizes) {
    EnsembleSettings s;
    s.kind = kind;
    s.n = n;
    s.count = a.count;
    s.tau = a.tau;
    s.p = a.p;
    s.two_flip = a.two_flip;
    s.with_exact = a.exact;
    s.seed0 = a.seed0;
    s.threads = c.threads;
    const EnsembleResult ens = run_ensemble(s);

    // QAOA from a linear ramp, angles refined by coordinate descent; cost sqrt(<H_P>) for partition
    std::vector<double> qaoa(ens.records.size(), 0.0);
    if (a.qaoa_p > 0)
      parallel_for(ens.records.size(), resolve_threads(c.threads), [&](std::size_t i) {
        const IsingProblem red = break_symmetry(make_instance(kind, n, ens.records[i].seed));
        qaoa[i] = optimize_qaoa(red, linear_schedule(a.qaoa_p, a.qaoa_tau), 0.1, 1e-3, a.qaoa_evals).expectation;
      });
    double sum_qaoa = 0.0;
    for (double q : qaoa) sum_qaoa += kind == ProblemKind::partition ? std::sqrt(std::max(0.0, q)) : q;

    std::string lines = dump(json{{"config", config}, {"n", n}}) + "\n";
    double sum = 0.0, sum2 = 0.0, sum_sqrt = 0.0, sum_zero = 0.0;
    std::size_t optimal = 0;
    std::vector<double> density;
    for (const auto& r : ens.records) {
      json rec{{"seed", r.seed}, {"n", r.n}, {"e_star", r.e_star}};
      if (r.e_zero) {
        rec["e_zero"] = *r.e_zero;
        sum_zero += *r.e_zero;
        if (r.e_star <= *r.e_zero + 1e-9) ++optimal;
      }
      rec["sigma_star"] = bits_to_string(r.sigma_star);
      if (a.qaoa_p > 0) rec["qaoa_expectation"] = qaoa[static_cast<std::size_t>(&r - ens.records.data())];
      if (c.timing) rec["wallclock"] = r.wallclock;
      lines += dump(rec) + "\n";
      const double d = r.e_star / static_cast<double>(n);
      density.push_back(d);
      sum += d;
      sum2 += d * d;
      sum_sqrt += std::sqrt(std::max(0.0, r.e_star));
    }
    write_text_file((dir / ("records_n" + std::to_string(n) + ".jsonl")).string(), lines);
    const double cnt = static_cast<double>(ens.records.size());
    const double mean = sum / cnt;
    const double sd = std::sqrt(std::max(0.0, sum2 / cnt - mean * mean));
    summary += std::to_string(n) + "," + std::to_string(ens.records.size()) + "," + num(mean * static_cast<double>(n)) + "," +
               num(mean) + "," + num(sd) + "," + (kind == ProblemKind::partition ? num(sum_sqrt / cnt) : std::string("")) + "," + (a.exact ? num(sum_zero / cnt) : std::string("")) +
               "," + (a.exact ? num(static_cast<double>(optimal) / cnt) : std::string("")) + "," +
               (a.qaoa_p > 0 ? num(sum_qaoa / cnt) : std::string("")) + "\n";
    if (a.qaoa_p > 0) qaoa_points.emplace_back(static_cast<double>(n), sum_qaoa / cnt);
    scaling_points.emplace_back(static_cast<double>(n), kind == ProblemKind::sk ? mean : sum_sqrt / cnt);

    const std::string key = std::to_string(n);
    if (density.size() >= 100) {
      try {
        const FitReport g = fit_gumbel(density, a.gumbel_m);
        if (!g.converged) out.warn("Gumbel fit did not converge at n=" + key);
        gumbel[key] = fit_json(g);
      } catch (const error& e) {
        out.warn("Gumbel fit skipped at n=" + key + ": " + e.what());
      }
    }
    if (a.exact) {
      const TailResult t = tail_probability(ens, tail_thresholds(ens));
      json pts = json::array();
      for (auto [eps, pf] : t.points) pts.push_back({eps, pf});
      json tail{{"points", pts}};
      if (std::count_if(t.points.begin(), t.points.end(), [](const auto& q) { return q.second > 0.0; }) >= 2) {
        tail["slope"] = t.fit.slope;
        tail["slope_stderr"] = t.fit.slope_se;
      } else {
        out.warn("tail fit skipped at n=" + key + ": too few suboptimal records");
      }
      tail["reference_slope"] = -2.0 * std::numbers::pi * std::sqrt(static_cast<double>(n));
      tail["mean_e_zero"] = t.mean_e_zero;
      tails[key] = tail;
    }
  }
  write_text_file((dir / "summary.csv").string(), summary);

  json fits{{"config", config}};
  if (scaling_points.size() >= 4) {
    try {
      fits["scaling"] = fit_json(fit_scaling(scaling_points, kind == ProblemKind::sk ? ScalingModel::sk_asymptote
                                                                                     : ScalingModel::power_decay));
    } catch (const error& e) {
      out.warn(std::string("scaling fit failed: ") + e.what());
    }
  } else {
    out.warn("scaling fit needs at least 4 sizes");
  }
  if (a.qaoa_p > 0 && kind == ProblemKind::partition && qaoa_points.size() >= 4) {
    try {
      fits["qaoa_scaling"] = fit_json(fit_scaling(qaoa_points, ScalingModel::power_growth));
    } catch (const error& e) {
      out.warn(std::string("QAOA scaling fit failed: ") + e.what());
    }
  }
  fits["gumbel"] = gumbel;
  if (a.exact) fits["tail"] = tails;
  fits["warnings"] = out.warnings();
  if (c.timing) fits["timing"] = {{"seconds", seconds_since(t0)}};
  write_text_file((dir / "fits.json").string(), dump(fits, 2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-field approximate optimization: instances, solver, fluctuation diagnostics, exact references, benchmarks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "mfaoa 1.0");

  Common common;
  GenArgs gen;
  SolveArgs solve;
  FluctArgs fluct;
  ExactArgs exact;
  BenchArgs bench;

  CLI::App* g = app.add_subcommand("gen", "generate a seeded sk or partition instance");
  Flags gf(g);
  add_common(g, common);
  gf.option("--kind", gen.kind, "sk | partition")->check(CLI::IsMember({"sk", "partition"}));
  gf.option("--n", gen.n, "number of spins");
  gf.option("--seed", gen.seed, "instance seed");
  gf.option("--out", gen.out, "output file (default stdout)", false);

  CLI::App* s = app.add_subcommand("solve", "mean-field evolution, rounding and optional refinement");
  Flags sf(s);
  add_common(s, common);
  sf.option("--instance", solve.instance, "instance JSON file");
  sf.option("--tau", solve.tau, "time step");
  sf.option("--p", solve.p, "number of layers");
  sf.flag("--refine", solve.refine, "double p until the rounded string repeats");
  sf.option("--max-rounds", solve.max_rounds, "refinement round limit");
  sf.flag("--two-flip", solve.two_flip, "steepest-descent pass over single and pair flips");
  sf.flag("--break-symmetry", solve.break_symmetry, "fix the last spin to +1 first");
  sf.option("--record-trajectory", solve.record_trajectory, "record every k-th layer (0: off)");
  sf.option("--trajectory", solve.trajectory, "trajectory output file (JSON lines)");
  sf.option("--out", solve.out, "result file (default stdout)", false);

  CLI::App* f = app.add_subcommand("fluct", "Lyapunov exponents and magnon spectrum along a trajectory");
  Flags ff(f);
  add_common(f, common);
  ff.option("--instance", fluct.instance, "instance JSON file");
  ff.option("--trajectory", fluct.trajectory, "recorded trajectory (default: regenerate from --tau/--p)");
  ff.option("--tau", fluct.tau, "time step");
  ff.option("--p", fluct.p, "number of layers");
  ff.option("--slices", fluct.slices, "target number of analysis slices");
  ff.flag("--break-symmetry", fluct.break_symmetry, "fix the last spin to +1 first");
  ff.option("--out", fluct.out, "CSV trace file (s, omega_l, lambda_l)", false);
  ff.option("--report", fluct.report, "hardness report file (default stdout)", false);

  CLI::App* e = app.add_subcommand("exact", "brute force, adiabatic spectrum or statevector QAOA");
  Flags ef(e);
  add_common(e, common);
  ef.option("--instance", exact.instance, "instance JSON file");
  ef.option("--mode", exact.mode, "ground | spectrum | qaoa")->check(CLI::IsMember({"ground", "spectrum", "qaoa"}));
  ef.option("--s-grid", exact.s_grid, "start:stop:count or comma list");
  ef.option("--k", exact.k, "levels per grid point");
  ef.option("--p", exact.p, "QAOA layers");
  ef.option("--tau", exact.tau, "QAOA linear-ramp time step");
  ef.flag("--optimize", exact.optimize, "coordinate-descent QAOA angle optimization");
  ef.flag("--break-symmetry", exact.break_symmetry, "fix the last spin to +1 first");
  ef.option("--out", exact.out, "output file (default stdout)", false);
  ef.option("--report", exact.report, "spectrum features file", false);

  CLI::App* b = app.add_subcommand("bench", "seeded ensembles, summaries and fits");
  Flags bf(b);
  add_common(b, common);
  bf.option("--kind", bench.kind, "sk | partition")->check(CLI::IsMember({"sk", "partition"}));
  bf.option("--n-list", bench.n_list, "comma-separated sizes");
  bf.option("--count", bench.count, "instances per size");
  bf.option("--tau", bench.tau, "time step");
  bf.option("--p", bench.p, "number of layers");
  bf.flag("--two-flip", bench.two_flip, "two-flip post-processing");
  bf.flag("--exact", bench.exact, "brute-force ground energies (n <= 26)");
  bf.option("--seed0", bench.seed0, "first instance seed");
  bf.option("--gumbel-m", bench.gumbel_m, "order of the Gumbel law fitted to E*/n");
  bf.option("--qaoa-p", bench.qaoa_p, "also run statevector QAOA with this many layers (0: off, n <= 21)");
  bf.option("--qaoa-tau", bench.qaoa_tau, "time step of the QAOA starting ramp");
  bf.option("--qaoa-evals", bench.qaoa_evals, "QAOA angle optimization budget per instance");
  bf.option("--out-dir", bench.out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    if (err.get_exit_code() == 0) return app.exit(err);
    const auto used = app.get_subcommands();
    std::cerr << "usage error: " << err.what() << "\n\n" << (used.empty() ? app.help() : used.front()->help());
    return 2;
  }

  try {
    if (g->parsed()) {
      load_config(common, "gen", gf);
      return run_gen(gen);
    }
    if (s->parsed()) {
      load_config(common, "solve", sf);
      if (solve.instance.empty()) throw UsageError("--instance is required");
      return run_solve(solve, common, sf.effective());
    }
    if (f->parsed()) {
      load_config(common, "fluct", ff);
      if (fluct.instance.empty()) throw UsageError("--instance is required");
      return run_fluct(fluct, common, ff.effective());
    }
    if (e->parsed()) {
      load_config(common, "exact", ef);
      if (exact.instance.empty()) throw UsageError("--instance is required");
      return run_exact(exact, common, ef.effective());
    }
    load_config(common, "bench", bf);
    return run_bench(bench, common, bf.effective());
  } catch (const UsageError& err) {
    const auto used = app.get_subcommands();
    std::cerr << "usage error: " << err.what() << "\n\n" << (used.empty() ? app.help() : used.front()->help());
    return 2;
  } catch (const mfaoa::error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
}
