#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mfaoa/dynamics.hpp"
#include "mfaoa/error.hpp"
#include "mfaoa/exact.hpp"
#include "mfaoa/parallel.hpp"
#include "mfaoa/problem.hpp"
#include "mfaoa/rng.hpp"

namespace mfaoa {

/// Ground-state energy density of the SK model for n -> infinity.
inline constexpr double parisi_energy = -0.763;

struct EnsembleSettings {
  ProblemKind kind = ProblemKind::sk;
  std::size_t n = 0;
  std::size_t count = 1;
  double tau = 0.5;
  long long p = 1000;
  bool two_flip = false;
  bool with_exact = false;
  std::uint64_t seed0 = 0;
  unsigned threads = 0;
};

struct EnsembleRecord {
  std::uint64_t seed = 0;
  std::size_t n = 0;
  double e_star = 0.0;
  std::optional<double> e_zero;
  Bitstring sigma_star;  ///< full n-spin string, last spin fixed at +1
  double wallclock = 0.0;
};

struct EnsembleResult {
  EnsembleSettings settings;
  std::vector<EnsembleRecord> records;  ///< sorted by seed
};

inline IsingProblem make_instance(ProblemKind kind, std::size_t n, std::uint64_t seed) {
  switch (kind) {
    case ProblemKind::sk: return sk_instance(n, seed);
    case ProblemKind::partition: return partition_instance(n, seed).problem;
    case ProblemKind::custom: break;
  }
  throw error(errc::invalid_instance, "ensembles need kind sk or partition");
}

/// Mean-field pipeline on one instance: break symmetry, evolve, round,
/// optional two-flip pass; energies are evaluated on the full problem.
inline EnsembleRecord solve_instance(const IsingProblem& full, const EnsembleSettings& settings) {
  const auto start = std::chrono::steady_clock::now();
  EnsembleRecord rec;
  rec.seed = full.seed().value_or(0);
  rec.n = full.n();
  const IsingProblem reduced = break_symmetry(full);
  const EvolveResult run = evolve(reduced, linear_schedule(settings.p, settings.tau));
  Bitstring sigma = round_solution(run.final_config);
  if (settings.two_flip) sigma = two_flip_refine(reduced, sigma);
  rec.sigma_star = restore_fixed_spin(sigma);
  rec.e_star = energy(full, rec.sigma_star);
  if (settings.with_exact) rec.e_zero = brute_force_ground(full).energy;
  rec.wallclock = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

/// Instance i uses seed seed0 + i.
inline EnsembleResult run_ensemble(const EnsembleSettings& settings) {
  if (settings.count < 1) throw error(errc::invalid_instance, "ensemble count must be >= 1");
  if (settings.with_exact && settings.n > brute_force_limit)
    throw error(errc::budget_exceeded, "exact ground states limited to n <= 26");
  EnsembleResult result{settings, std::vector<EnsembleRecord>(settings.count)};
  parallel_for(settings.count, resolve_threads(settings.threads), [&](std::size_t i) {
    const IsingProblem full = make_instance(settings.kind, settings.n, settings.seed0 + i);
    result.records[i] = solve_instance(full, settings);
  });
  std::sort(result.records.begin(), result.records.end(),
            [](const EnsembleRecord& a, const EnsembleRecord& b) { return a.seed < b.seed; });
  return result;
}

struct FitParameter {
  double value = 0.0;
  double stderr_ = 0.0;
};

struct FitReport {
  std::string model;
  std::map<std::string, FitParameter> parameters;
  double goodness = 0.0;   ///< model-specific: R^2 (regressions) or KS distance (Gumbel)
  bool converged = true;

  double operator[](const std::string& name) const { return parameters.at(name).value; }
  double stderr_of(const std::string& name) const { return parameters.at(name).stderr_; }
};

struct LineFit {
  double intercept = 0.0, slope = 0.0;
  double intercept_se = 0.0, slope_se = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares y = intercept + slope x with equal weights.
inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 2) throw error(errc::degenerate_data, "line fit needs >= 2 paired points");
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0) || !std::isfinite(sxx) || !std::isfinite(sxy))
    throw error(errc::degenerate_data, "abscissae are all equal or non-finite");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - f.intercept - f.slope * x[i];
    rss += r * r;
  }
  const double sigma2 = n > 2 ? rss / static_cast<double>(n - 2) : 0.0;
  f.slope_se = std::sqrt(sigma2 / sxx);
  f.intercept_se = std::sqrt(sigma2 * (1.0 / static_cast<double>(n) + mx * mx / sxx));
  f.r_squared = syy > 0.0 ? 1.0 - rss / syy : 1.0;
  return f;
}

enum class ScalingModel {
  sk_asymptote,  ///< y = parisi + c n^-omega
  power_decay,   ///< y = A n^-omega
  power_growth,  ///< y = A n^omega'
};

/// Log-space least squares of a scaling law. Parameters: c or A (prefactor) and
/// omega (or omega_prime for growth), with linearized standard errors.
inline FitReport fit_scaling(const std::vector<std::pair<double, double>>& points, ScalingModel model) {
  if (points.size() < 4) throw error(errc::degenerate_data, "scaling fit needs >= 4 points");
  std::vector<double> lx, ly;
  for (const auto& [n, y] : points) {
    const double shifted = model == ScalingModel::sk_asymptote ? y - parisi_energy : y;
    if (!(n > 0.0) || !(shifted > 0.0))
      throw error(errc::degenerate_data, "scaling fit needs positive n and positive (shifted) values");
    lx.push_back(std::log(n));
    ly.push_back(std::log(shifted));
  }
  const LineFit line = fit_line(lx, ly);
  FitReport r;
  const double pref = std::exp(line.intercept);
  switch (model) {
    case ScalingModel::sk_asymptote:
      r.model = "sk_asymptote";
      r.parameters["c"] = {pref, pref * line.intercept_se};
      r.parameters["omega"] = {-line.slope, line.slope_se};
      r.parameters["eps_p"] = {parisi_energy, 0.0};
      break;
    case ScalingModel::power_decay:
      r.model = "power_decay";
      r.parameters["A"] = {pref, pref * line.intercept_se};
      r.parameters["omega"] = {-line.slope, line.slope_se};
      break;
    case ScalingModel::power_growth:
      r.model = "power_growth";
      r.parameters["A"] = {pref, pref * line.intercept_se};
      r.parameters["omega_prime"] = {line.slope, line.slope_se};
      break;
  }
  r.goodness = line.r_squared;
  return r;
}

// --- Gumbel law of the m-th smallest value ---------------------------------

/// g_m(x) = w exp[m y - m e^y], y = (x - u) / v, w = m^m / (v Gamma(m)).
inline double gumbel_normalization(int m, double v) {
  return std::exp(m * std::log(static_cast<double>(m)) - std::lgamma(static_cast<double>(m))) / v;
}

inline double gumbel_pdf(double x, int m, double u, double v) {
  const double y = (x - u) / v;
  return gumbel_normalization(m, v) * std::exp(m * y - m * std::exp(y));
}

/// CDF = P(m, m e^y), the regularized lower incomplete gamma at integer m.
inline double gumbel_cdf(double x, int m, double u, double v) {
  const double t = m * std::exp((x - u) / v);
  if (t > 700.0) return 1.0;
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < m; ++k) {
    term *= t / k;
    sum += term;
  }
  return std::clamp(1.0 - std::exp(-t) * sum, 0.0, 1.0);
}

/// x = u + v ln(T / m), T ~ Gamma(m, 1) as a sum of m unit exponentials.
inline double sample_gumbel(Rng& rng, int m, double u, double v) {
  double t = 0.0;
  for (int k = 0; k < m; ++k) t -= std::log(rng.uniform());
  return u + v * std::log(t / m);
}

namespace detail {

inline double gumbel_loglik(const std::vector<double>& x, int m, double u, double v) {
  double sum = 0.0;
  for (double xi : x) {
    const double y = (xi - u) / v;
    sum += m * y - m * std::exp(y);
  }
  return static_cast<double>(x.size()) * std::log(gumbel_normalization(m, v)) + sum;
}

// Location maximizing the likelihood at fixed scale: u = v ln mean(e^{x/v}).
inline double gumbel_location(const std::vector<double>& x, double v) {
  double top = -std::numeric_limits<double>::infinity();
  for (double xi : x) top = std::max(top, xi / v);
  double acc = 0.0;
  for (double xi : x) acc += std::exp(xi / v - top);
  return v * (top + std::log(acc / static_cast<double>(x.size())));
}

}  // namespace detail

inline double ks_distance(std::vector<double> values, int m, double u, double v) {
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  double d = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double F = gumbel_cdf(values[i], m, u, v);
    d = std::max({d, std::abs(F - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - F)});
  }
  return d;
}

/// Maximum-likelihood fit of g_m at fixed m. Parameters u, v, w; goodness is the KS distance.
inline FitReport fit_gumbel(const std::vector<double>& values, int m) {
  if (values.size() < 100) throw error(errc::degenerate_data, "Gumbel fit needs >= 100 samples");
  if (m < 1) throw error(errc::degenerate_data, "m must be >= 1");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double x : values) var += (x - mean) * (x - mean);
  var /= n;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*lo == *hi || !(var > 0.0) || !std::isfinite(var)) throw error(errc::degenerate_data, "samples are constant");
  const double sd = std::sqrt(var);

  auto profile = [&](double log_v) {
    const double v = std::exp(log_v);
    return detail::gumbel_loglik(values, m, detail::gumbel_location(values, v), v);
  };
  // golden-section search on ln v; the scale of g_m is v * sqrt(trigamma(m)) ~ v / sqrt(m)
  double a = std::log(sd * 1e-2), b = std::log(sd * 1e3);
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = profile(c), fd = profile(d);
  int iterations = 0;
  while (b - a > 1e-12 && iterations < 500) {
    if (fc > fd) {
      b = d; d = c; fd = fc;
      c = b - phi * (b - a); fc = profile(c);
    } else {
      a = c; c = d; fc = fd;
      d = a + phi * (b - a); fd = profile(d);
    }
    ++iterations;
  }
  const double log_v = 0.5 * (a + b);
  const double v = std::exp(log_v);
  const double u = detail::gumbel_location(values, v);

  FitReport r;
  r.model = "gumbel_m" + std::to_string(m);
  const bool at_edge = log_v < std::log(sd * 1e-2) + 1e-6 || log_v > std::log(sd * 1e3) - 1e-6;
  r.converged = iterations < 500 && !at_edge && std::isfinite(u);

  // observed information via central differences
  const double hu = 1e-4 * v, hv = 1e-4 * v;
  auto L = [&](double uu, double vv) { return detail::gumbel_loglik(values, m, uu, vv); };
  const double luu = (L(u + hu, v) - 2 * L(u, v) + L(u - hu, v)) / (hu * hu);
  const double lvv = (L(u, v + hv) - 2 * L(u, v) + L(u, v - hv)) / (hv * hv);
  const double luv = (L(u + hu, v + hv) - L(u + hu, v - hv) - L(u - hu, v + hv) + L(u - hu, v - hv)) / (4 * hu * hv);
  Eigen::Matrix2d info;
  info << -luu, -luv, -luv, -lvv;
  const Eigen::Matrix2d cov = info.inverse();
  if (!(cov(0, 0) > 0.0 && cov(1, 1) > 0.0)) r.converged = false;
  r.parameters["u"] = {u, std::sqrt(std::max(0.0, cov(0, 0)))};
  r.parameters["v"] = {v, std::sqrt(std::max(0.0, cov(1, 1)))};
  r.parameters["w"] = {gumbel_normalization(m, v), 0.0};
  r.parameters["m"] = {static_cast<double>(m), 0.0};
  r.goodness = ks_distance(values, m, u, v);
  return r;
}

// --- tail statistics ---------------------------------------------------------

struct TailResult {
  std::vector<std::pair<double, double>> points;  ///< (epsilon, P_f)
  LineFit fit;                                    ///< ln P_f vs epsilon over points with P_f > 0
  double mean_e_zero = 0.0;
};

/// Relative excess energies eps* = (E* - E0) / |<E0>|.
inline std::vector<double> relative_errors(const EnsembleResult& ensemble) {
  double mean = 0.0;
  for (const auto& r : ensemble.records) {
    if (!r.e_zero) throw error(errc::oracle_required, "tail statistics need exact ground energies");
    mean += *r.e_zero;
  }
  mean /= static_cast<double>(ensemble.records.size());
  if (mean == 0.0) throw error(errc::degenerate_data, "mean ground energy is zero");
  std::vector<double> eps;
  eps.reserve(ensemble.records.size());
  for (const auto& r : ensemble.records) eps.push_back((r.e_star - *r.e_zero) / std::abs(mean));
  return eps;
}

inline TailResult tail_probability(const EnsembleResult& ensemble, const std::vector<double>& thresholds) {
  if (ensemble.records.empty()) throw error(errc::degenerate_data, "empty ensemble");
  const std::vector<double> eps = relative_errors(ensemble);
  TailResult out;
  for (const auto& r : ensemble.records) out.mean_e_zero += *r.e_zero;
  out.mean_e_zero /= static_cast<double>(ensemble.records.size());
  std::vector<double> fx, fy;
  for (double t : thresholds) {
    const auto above = std::count_if(eps.begin(), eps.end(), [t](double e) { return e > t; });
    const double pf = static_cast<double>(above) / static_cast<double>(eps.size());
    out.points.emplace_back(t, pf);
    if (pf > 0.0) {
      fx.push_back(t);
      fy.push_back(std::log(pf));
    }
  }
  if (fx.size() >= 2) out.fit = fit_line(fx, fy);
  return out;
}

/// Evenly spaced thresholds on (0, eps_max], where eps_max leaves `min_exceed`
/// records strictly above it.
inline std::vector<double> tail_thresholds(const EnsembleResult& ensemble, std::size_t points = 20,
                                           std::size_t min_exceed = 10) {
  std::vector<double> eps = relative_errors(ensemble);
  std::sort(eps.begin(), eps.end());
  if (eps.size() <= min_exceed) return {};
  const double eps_max = eps[eps.size() - 1 - min_exceed];
  std::vector<double> t;
  if (!(eps_max > 0.0)) return t;
  for (std::size_t j = 1; j <= points; ++j) t.push_back(eps_max * static_cast<double>(j) / static_cast<double>(points));
  return t;
}

struct Histogram {
  std::vector<double> edges;
  std::vector<std::size_t> counts;
};

/// Freedman-Diaconis binning: width 2 IQR n^{-1/3}.
inline Histogram histogram(std::vector<double> values) {
  Histogram h;
  if (values.empty()) return h;
  std::sort(values.begin(), values.end());
  const auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  const double lo = values.front(), hi = values.back();
  double width = 2.0 * (quantile(0.75) - quantile(0.25)) * std::cbrt(1.0 / static_cast<double>(values.size()));
  if (!(width > 0.0)) width = hi > lo ? (hi - lo) : 1.0;
  const auto bins = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((hi - lo) / width)));
  for (std::size_t b = 0; b <= bins; ++b) h.edges.push_back(lo + static_cast<double>(b) * width);
  h.counts.assign(bins, 0);
  for (double x : values) {
    auto b = static_cast<std::size_t>((x - lo) / width);
    if (b >= bins) b = bins - 1;
    ++h.counts[b];
  }
  return h;
}

}  // namespace mfaoa
