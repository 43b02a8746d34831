#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "mfaoa/error.hpp"
#include "mfaoa/problem.hpp"

namespace mfaoa {

/// Row i holds the Bloch vector n_i = (x, y, z). Column-major so that the
/// z column is contiguous for the magnetization product.
using SpinConfiguration = Eigen::Matrix<double, Eigen::Dynamic, 3>;

/// All spins along +x: the classical image of |+>^N.
inline SpinConfiguration initial_configuration(std::size_t n) {
  SpinConfiguration config = SpinConfiguration::Zero(static_cast<Eigen::Index>(n), 3);
  config.col(0).setOnes();
  return config;
}

inline double max_norm_deviation(const SpinConfiguration& config) {
  if (config.rows() == 0) return 0.0;
  return (config.rowwise().norm().array() - 1.0).abs().maxCoeff();
}

struct Schedule {
  double tau = 0.0;
  std::vector<double> gammas;
  std::vector<double> betas;

  Schedule() = default;
  Schedule(double step, std::vector<double> g, std::vector<double> b)
      : tau(step), gammas(std::move(g)), betas(std::move(b)) {
    if (gammas.size() != betas.size()) throw error(errc::invalid_schedule, "gamma/beta lengths differ");
  }
  std::size_t p() const noexcept { return gammas.size(); }
};

/// gamma_k = tau k / p, beta_k = tau (1 - (k-1)/p) for k = 1..p.
inline Schedule linear_schedule(long long p, double tau) {
  if (p < 1) throw error(errc::invalid_schedule, "step count must be >= 1");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw error(errc::invalid_schedule, "step size must be > 0");
  std::vector<double> g(static_cast<std::size_t>(p)), b(static_cast<std::size_t>(p));
  const double pd = static_cast<double>(p);
  for (long long k = 1; k <= p; ++k) {
    const double kd = static_cast<double>(k);
    g[static_cast<std::size_t>(k - 1)] = tau * kd / pd;
    b[static_cast<std::size_t>(k - 1)] = tau * (1.0 - (kd - 1.0) / pd);
  }
  return Schedule(tau, std::move(g), std::move(b));
}

/// m_i = h_i + sum_j J_ij n_j^z over all j.
inline Vector magnetization(const IsingProblem& problem, const SpinConfiguration& config) {
  if (static_cast<std::size_t>(config.rows()) != problem.n())
    throw error(errc::dimension_mismatch, "configuration size differs from spin count");
  return problem.fields() + problem.couplings() * config.col(2);
}

namespace detail {

// Rotation about z by 2 m_i gamma (V^P, with m from the input state), then about
// x by 2 delta_i beta (V^D). Signs follow the 3x3 matrices acting on column vectors.
inline void apply_layer(const IsingProblem& problem, SpinConfiguration& config, Vector& m,
                        double gamma, double beta) {
  m.noalias() = problem.couplings() * config.col(2);
  m += problem.fields();
  const auto& delta = problem.driver();
  const Eigen::Index n = config.rows();
  double* x = config.col(0).data();
  double* y = config.col(1).data();
  double* z = config.col(2).data();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double theta = 2.0 * m(i) * gamma;
    const double cp = std::cos(theta), sp = std::sin(theta);
    const double x1 = cp * x[i] + sp * y[i];
    const double y1 = -sp * x[i] + cp * y[i];
    const double phi = 2.0 * delta(i) * beta;
    const double cd = std::cos(phi), sd = std::sin(phi);
    x[i] = x1;
    y[i] = cd * y1 + sd * z[i];
    z[i] = -sd * y1 + cd * z[i];
  }
}

inline void check_config(const IsingProblem& problem, const SpinConfiguration& config) {
  if (static_cast<std::size_t>(config.rows()) != problem.n())
    throw error(errc::dimension_mismatch, "configuration size differs from spin count");
  if (!config.allFinite()) throw error(errc::numeric_contamination, "non-finite spin components");
  if (max_norm_deviation(config) > 1e-9) throw error(errc::invalid_instance, "spin vectors must be unit length");
}

}  // namespace detail

/// One layer V^D(k) V^P(k) applied to every spin.
inline SpinConfiguration step(const IsingProblem& problem, const SpinConfiguration& config,
                              double gamma_k, double beta_k) {
  detail::check_config(problem, config);
  if (!std::isfinite(gamma_k) || !std::isfinite(beta_k))
    throw error(errc::numeric_contamination, "non-finite schedule angles");
  SpinConfiguration out = config;
  Vector m(config.rows());
  detail::apply_layer(problem, out, m, gamma_k, beta_k);
  return out;
}

struct TrajectorySlice {
  long long k = 0;
  double t = 0.0;
  SpinConfiguration spins;
  Vector magnetization;
};

struct Trajectory {
  std::size_t n = 0;
  long long p = 0;
  double tau = 0.0;
  long long stride = 1;
  std::vector<TrajectorySlice> slices;
};

struct EvolveOptions {
  long long record_stride = 0;  ///< 0 disables recording; the final slice is always kept when recording.
  bool track_smoothness = false;
  std::optional<SpinConfiguration> initial;  ///< defaults to all spins along +x
};

struct EvolveResult {
  SpinConfiguration final_config;
  std::optional<Trajectory> trajectory;
  /// Largest angle (rad) any spin turned within one layer; NaN unless tracked.
  double max_step_angle = std::numeric_limits<double>::quiet_NaN();
};

inline EvolveResult evolve(const IsingProblem& problem, const Schedule& schedule, const EvolveOptions& options = {}) {
  if (problem.is_z2_symmetric())
    throw error(errc::symmetric_input,
                "all fields are zero; the spins would stay in the initial state (break the symmetry first)");
  if (schedule.p() == 0) throw error(errc::invalid_schedule, "empty schedule");

  SpinConfiguration config = options.initial ? *options.initial : initial_configuration(problem.n());
  detail::check_config(problem, config);
  const Eigen::Index n = config.rows();
  Vector m(n);

  EvolveResult result;
  const bool record = options.record_stride > 0;
  auto push_slice = [&](long long k) {
    result.trajectory->slices.push_back(
        TrajectorySlice{k, static_cast<double>(k) * schedule.tau, config, magnetization(problem, config)});
  };
  if (record) {
    result.trajectory = Trajectory{problem.n(), static_cast<long long>(schedule.p()), schedule.tau,
                                   options.record_stride, {}};
    push_slice(0);
  }

  double min_cos = 1.0;
  SpinConfiguration previous;
  const long long p = static_cast<long long>(schedule.p());
  for (long long k = 1; k <= p; ++k) {
    if (options.track_smoothness) previous = config;
    detail::apply_layer(problem, config, m, schedule.gammas[static_cast<std::size_t>(k - 1)],
                        schedule.betas[static_cast<std::size_t>(k - 1)]);
    if (options.track_smoothness) {
      const double c = (previous.array() * config.array()).rowwise().sum().minCoeff();
      min_cos = std::min(min_cos, c);
    }
    if (record && (k % options.record_stride == 0 || k == p)) push_slice(k);
  }
  if (!config.allFinite()) throw error(errc::numeric_contamination, "evolution produced non-finite spins");
  if (options.track_smoothness) result.max_step_angle = std::acos(std::clamp(min_cos, -1.0, 1.0));
  result.final_config = std::move(config);
  return result;
}

/// sigma_i = sign(n_i^z), with sign(0) = +1.
inline Bitstring round_solution(const SpinConfiguration& config) {
  std::vector<int> bits(static_cast<std::size_t>(config.rows()));
  for (Eigen::Index i = 0; i < config.rows(); ++i) bits[static_cast<std::size_t>(i)] = config(i, 2) < 0.0 ? -1 : 1;
  return Bitstring(std::move(bits));
}

/// Maximum per-layer rotation angle still considered a smooth trajectory.
inline constexpr double smooth_angle_limit = 0.1;

struct RefineResult {
  Bitstring sigma;
  Schedule schedule;
  SpinConfiguration final_config;
  int rounds = 0;
  bool converged = false;
};

/// Re-runs the evolution with p doubled each round (tau halved whenever the
/// previous run was not smooth) until the rounded string repeats.
inline RefineResult refine(const IsingProblem& problem, double tau0, long long p0, int max_rounds) {
  if (!(tau0 > 0.0)) throw error(errc::invalid_schedule, "tau0 must be > 0");
  if (p0 < 1) throw error(errc::invalid_schedule, "p0 must be >= 1");
  if (max_rounds < 1) throw error(errc::invalid_schedule, "max_rounds must be >= 1");

  double tau = tau0;
  long long p = p0;
  RefineResult result;
  std::optional<Bitstring> previous;
  EvolveOptions options;
  options.track_smoothness = true;
  for (int round = 1; round <= max_rounds; ++round) {
    Schedule schedule = linear_schedule(p, tau);
    EvolveResult run = evolve(problem, schedule, options);
    Bitstring sigma = round_solution(run.final_config);
    result.rounds = round;
    result.schedule = std::move(schedule);
    result.final_config = std::move(run.final_config);
    result.sigma = sigma;
    if (previous && *previous == sigma) {
      result.converged = true;
      return result;
    }
    previous = std::move(sigma);
    if (!(run.max_step_angle < smooth_angle_limit)) tau *= 0.5;
    p *= 2;
  }
  return result;
}

/// One steepest-descent pass over all simultaneous pair flips (i < j).
inline Bitstring two_flip_refine(const IsingProblem& problem, const Bitstring& sigma) {
  const std::size_t n = problem.n();
  if (sigma.size() != n) throw error(errc::dimension_mismatch, "bitstring length differs from spin count");
  if (n < 2) return sigma;
  const auto& J = problem.couplings();
  Vector s(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) s(static_cast<Eigen::Index>(i)) = sigma[i];
  const Vector local = problem.fields() + J * s;  // J_ii = 0
  double best = 0.0;
  std::size_t bi = 0, bj = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const double di = 2.0 * s(ii) * local(ii);
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      const double delta = di + 2.0 * s(jj) * local(jj) - 4.0 * J(ii, jj) * s(ii) * s(jj);
      if (delta < best) {
        best = delta;
        bi = i;
        bj = j;
      }
    }
  }
  if (best >= 0.0) return sigma;
  Bitstring candidate = sigma;
  candidate.flip(bi);
  candidate.flip(bj);
  return energy(problem, candidate) < energy(problem, sigma) ? candidate : sigma;
}

}  // namespace mfaoa
