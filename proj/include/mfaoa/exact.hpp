#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "mfaoa/dynamics.hpp"
#include "mfaoa/error.hpp"
#include "mfaoa/problem.hpp"
#include "mfaoa/rng.hpp"

namespace mfaoa {

inline constexpr std::size_t brute_force_limit = 26;
inline constexpr std::size_t spectrum_limit = 14;
inline constexpr std::size_t statevector_limit = 20;

struct GroundState {
  double energy = 0.0;
  Bitstring sigma;
};

/// Exhaustive minimum of `energy` over all 2^n strings (Gray-code walk with
/// incremental local fields). Ties go to the smallest basis index.
inline GroundState brute_force_ground(const IsingProblem& problem) {
  const std::size_t n = problem.n();
  if (n > brute_force_limit) throw error(errc::budget_exceeded, "brute force limited to n <= 26");
  const auto& J = problem.couplings();
  const std::uint64_t count = std::uint64_t{1} << n;

  // Walk starts at index 0 (all +1). Bit b of the Gray code belongs to spin n-1-b.
  std::vector<double> sigma(n, 1.0);
  Vector local = problem.fields() + J * Vector::Ones(static_cast<Eigen::Index>(n));
  double e = energy(problem, Bitstring::all_up(n));
  const double tol = 1e-9 * (1.0 + J.cwiseAbs().sum() + problem.fields().cwiseAbs().sum());

  double best = e;
  std::vector<std::uint64_t> candidates{0};
  std::uint64_t gray = 0;
  for (std::uint64_t step = 1; step < count; ++step) {
    const int bit = std::countr_zero(step);
    gray ^= std::uint64_t{1} << bit;
    const std::size_t spin = n - 1 - static_cast<std::size_t>(bit);
    const auto si = static_cast<Eigen::Index>(spin);
    e += 2.0 * sigma[spin] * local(si);
    const double change = -2.0 * sigma[spin];
    sigma[spin] = -sigma[spin];
    const double* row = J.row(si).data();
    for (std::size_t k = 0; k < n; ++k) local(static_cast<Eigen::Index>(k)) += row[k] * change;
    if (e < best - tol) {
      best = e;
      candidates.clear();
      candidates.push_back(gray);
    } else if (e <= best + tol) {
      best = std::min(best, e);
      candidates.push_back(gray);
    }
  }

  GroundState result{std::numeric_limits<double>::infinity(), {}};
  std::uint64_t best_index = 0;
  for (std::uint64_t index : candidates) {
    Bitstring s = Bitstring::from_index(index, n);
    const double exact = energy(problem, s);
    if (exact < result.energy || (exact == result.energy && index < best_index)) {
      result.energy = exact;
      result.sigma = std::move(s);
      best_index = index;
    }
  }
  return result;
}

/// Diagonal of H_P in the computational basis (offset included).
inline Vector problem_diagonal(const IsingProblem& problem) {
  const std::size_t n = problem.n();
  const std::uint64_t dim = std::uint64_t{1} << n;
  Vector diag(static_cast<Eigen::Index>(dim));
  for (std::uint64_t x = 0; x < dim; ++x) diag(static_cast<Eigen::Index>(x)) = energy(problem, Bitstring::from_index(x, n));
  return diag;
}

struct SpectrumSlice {
  double s = 0.0;
  std::vector<double> lowest;
};

namespace detail {

// y = H(s) x with H(s) = (1-s) H_D + s H_P, H_D = -sum_i delta_i X_i.
inline void apply_adiabatic(const Vector& diag, const Vector& delta, std::size_t n, double s, const Vector& x, Vector& y) {
  y = s * diag.cwiseProduct(x);
  const Eigen::Index dim = x.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t mask = std::uint64_t{1} << (n - 1 - i);
    const double c = -(1.0 - s) * delta(static_cast<Eigen::Index>(i));
    for (Eigen::Index a = 0; a < dim; ++a) y(a) += c * x(static_cast<Eigen::Index>(static_cast<std::uint64_t>(a) ^ mask));
  }
}

// Lanczos with full reorthogonalization. Returns the lowest k distinct Ritz values;
// exactly degenerate levels appear once.
inline std::vector<double> lanczos_lowest(const Vector& diag, const Vector& delta, std::size_t n, double s, int k) {
  const Eigen::Index dim = diag.size();
  const Eigen::Index krylov = std::min<Eigen::Index>(dim, std::max(4 * k + 60, 160));
  Eigen::MatrixXd basis(dim, krylov);
  Rng rng(0x5eedULL);
  Vector v(dim);
  for (Eigen::Index a = 0; a < dim; ++a) v(a) = rng.uniform() - 0.5;
  v.normalize();
  std::vector<double> alpha, beta;
  Vector w(dim);
  Eigen::Index used = 0;
  for (Eigen::Index j = 0; j < krylov; ++j) {
    basis.col(j) = v;
    used = j + 1;
    apply_adiabatic(diag, delta, n, s, v, w);
    const double a = v.dot(w);
    alpha.push_back(a);
    for (int pass = 0; pass < 2; ++pass) w -= basis.leftCols(used) * (basis.leftCols(used).transpose() * w);
    const double b = w.norm();
    if (b < 1e-12 || j + 1 == krylov) break;
    beta.push_back(b);
    v = w / b;
  }
  const Eigen::Index m = static_cast<Eigen::Index>(alpha.size());
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    T(j, j) = alpha[static_cast<std::size_t>(j)];
    if (j + 1 < m) T(j, j + 1) = T(j + 1, j) = beta[static_cast<std::size_t>(j)];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(T, Eigen::EigenvaluesOnly);
  std::vector<double> values(solver.eigenvalues().data(), solver.eigenvalues().data() + m);
  values.resize(std::min<std::size_t>(values.size(), static_cast<std::size_t>(k)));
  return values;
}

}  // namespace detail

/// Lowest k eigenvalues of H(s) = (1-s) H_D + s H_P on each grid point.
/// Dense diagonalization up to n = 8; Lanczos (distinct levels) above.
inline std::vector<SpectrumSlice> adiabatic_spectrum(const IsingProblem& problem, const std::vector<double>& s_grid, int k) {
  const std::size_t n = problem.n();
  if (n > spectrum_limit) throw error(errc::budget_exceeded, "exact spectrum limited to n <= 14");
  const Eigen::Index dim = Eigen::Index{1} << n;
  if (k < 1 || k > dim) throw error(errc::budget_exceeded, "k must lie in [1, 2^n]");
  const Vector diag = problem_diagonal(problem);
  const Vector& delta = problem.driver();

  std::vector<SpectrumSlice> out;
  out.reserve(s_grid.size());
  for (double s : s_grid) {
    SpectrumSlice slice{s, {}};
    if (n <= 8) {
      Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
      H.diagonal() = s * diag;
      for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t mask = std::uint64_t{1} << (n - 1 - i);
        const double c = -(1.0 - s) * delta(static_cast<Eigen::Index>(i));
        for (Eigen::Index a = 0; a < dim; ++a) H(a, static_cast<Eigen::Index>(static_cast<std::uint64_t>(a) ^ mask)) += c;
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(H, Eigen::EigenvaluesOnly);
      slice.lowest.assign(solver.eigenvalues().data(), solver.eigenvalues().data() + k);
    } else {
      slice.lowest = detail::lanczos_lowest(diag, delta, n, s, k);
    }
    out.push_back(std::move(slice));
  }
  return out;
}

struct SpectralFeature {
  double s = 0.0;
  int level = 0;         ///< gap E_{level+1} - E_level
  double gap = 0.0;
  bool closing = false;  ///< onset of the E1 - E0 closing rather than a local minimum
};

/// Interior local minima of every adjacent gap E_{l+1} - E_l for s >= s_min, plus the
/// first grid point where E1 - E0 falls below `closing_fraction` of its value at the
/// first grid point. Sorted by s.
inline std::vector<SpectralFeature> spectral_features(const std::vector<SpectrumSlice>& spec, double s_min = 0.05,
                                                      double closing_fraction = 0.1) {
  std::vector<SpectralFeature> out;
  if (spec.size() < 3) return out;
  std::size_t levels = spec.front().lowest.size();
  for (const auto& slice : spec) levels = std::min(levels, slice.lowest.size());
  auto gap = [&](std::size_t k, std::size_t l) { return spec[k].lowest[l + 1] - spec[k].lowest[l]; };
  for (std::size_t l = 0; l + 1 < levels; ++l)
    for (std::size_t k = 1; k + 1 < spec.size(); ++k)
      if (spec[k].s >= s_min && gap(k, l) < gap(k - 1, l) && gap(k, l) <= gap(k + 1, l))
        out.push_back({spec[k].s, static_cast<int>(l), gap(k, l), false});
  if (levels >= 2) {
    const double reference = gap(0, 0);
    for (std::size_t k = 1; k < spec.size(); ++k)
      if (gap(k, 0) < closing_fraction * reference) {
        out.push_back({spec[k].s, 0, gap(k, 0), true});
        break;
      }
  }
  std::stable_sort(out.begin(), out.end(), [](const SpectralFeature& a, const SpectralFeature& b) { return a.s < b.s; });
  return out;
}

using Complex = std::complex<double>;
using Statevector = Eigen::VectorXcd;

struct QaoaResult {
  Statevector state;
  double expectation = 0.0;  ///< <H_P>, offset included
};

/// Bloch vector (<X_i>, <Y_i>, <Z_i>) of spin i.
inline std::array<double, 3> bloch_vector(const Statevector& psi, std::size_t n, std::size_t i) {
  const std::uint64_t mask = std::uint64_t{1} << (n - 1 - i);
  double x = 0.0, y = 0.0, z = 0.0;
  for (Eigen::Index a = 0; a < psi.size(); ++a) {
    const auto ua = static_cast<std::uint64_t>(a);
    const Complex amp = psi(a);
    const Complex partner = psi(static_cast<Eigen::Index>(ua ^ mask));
    const bool down = (ua & mask) != 0;
    z += std::norm(amp) * (down ? -1.0 : 1.0);
    x += (std::conj(amp) * partner).real();
    // Y|0> = i|1>, Y|1> = -i|0>
    y += (std::conj(amp) * (down ? Complex(0, 1) : Complex(0, -1)) * partner).real();
  }
  return {x, y, z};
}

/// prod_k exp(-i beta_k H_D) exp(-i gamma_k H_P) applied to |+>^n. The observer,
/// when set, sees the state after every layer k = 1..p.
inline QaoaResult qaoa_statevector(const IsingProblem& problem, const Schedule& schedule,
                                   const std::function<void(std::size_t, const Statevector&)>& observer = {}) {
  const std::size_t n = problem.n();
  if (n > statevector_limit) throw error(errc::budget_exceeded, "statevector simulation limited to n <= 20");
  const Eigen::Index dim = Eigen::Index{1} << n;
  const Vector diag = problem_diagonal(problem);
  const Vector& delta = problem.driver();
  Statevector psi = Statevector::Constant(dim, Complex(1.0 / std::sqrt(static_cast<double>(dim)), 0.0));

  for (std::size_t k = 0; k < schedule.p(); ++k) {
    const double gamma = schedule.gammas[k];
    const double beta = schedule.betas[k];
    for (Eigen::Index a = 0; a < dim; ++a) psi(a) *= std::polar(1.0, -gamma * diag(a));
    for (std::size_t i = 0; i < n; ++i) {
      // exp(-i beta H_D) on qubit i = cos(beta delta) + i sin(beta delta) X
      const double angle = beta * delta(static_cast<Eigen::Index>(i));
      const double c = std::cos(angle);
      const Complex is(0.0, std::sin(angle));
      const std::uint64_t mask = std::uint64_t{1} << (n - 1 - i);
      for (Eigen::Index a = 0; a < dim; ++a) {
        const auto ua = static_cast<std::uint64_t>(a);
        if (ua & mask) continue;
        const auto b = static_cast<Eigen::Index>(ua | mask);
        const Complex pa = psi(a), pb = psi(b);
        psi(a) = c * pa + is * pb;
        psi(b) = c * pb + is * pa;
      }
    }
    if (observer) observer(k + 1, psi);
  }
  QaoaResult result;
  result.expectation = psi.cwiseAbs2().dot(diag);
  result.state = std::move(psi);
  return result;
}

struct QaoaOptimum {
  Schedule schedule;
  double expectation = 0.0;
  int evaluations = 0;
};

/// Derivative-free coordinate descent on (gamma_k, beta_k), starting from `start`:
/// each coordinate tries +-step, accepted moves keep the step, and the step halves
/// after a sweep without improvement.
inline QaoaOptimum optimize_qaoa(const IsingProblem& problem, const Schedule& start, double initial_step = 0.1,
                                 double min_step = 1e-3, int max_evaluations = 2000) {
  QaoaOptimum best{start, qaoa_statevector(problem, start).expectation, 1};
  double step = initial_step;
  while (step >= min_step && best.evaluations < max_evaluations) {
    bool improved = false;
    for (std::size_t c = 0; c < 2 * start.p() && best.evaluations < max_evaluations; ++c) {
      for (double sign : {1.0, -1.0}) {
        Schedule trial = best.schedule;
        double& v = c < start.p() ? trial.gammas[c] : trial.betas[c - start.p()];
        v += sign * step;
        const double value = qaoa_statevector(problem, trial).expectation;
        ++best.evaluations;
        if (value < best.expectation) {
          best.schedule = std::move(trial);
          best.expectation = value;
          improved = true;
          break;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  return best;
}

/// Mean-field product probability prod_i (1 + sigma_i n_i^z) / 2.
inline double factorized_probability(const SpinConfiguration& config, const Bitstring& sigma) {
  if (static_cast<std::size_t>(config.rows()) != sigma.size())
    throw error(errc::dimension_mismatch, "bitstring length differs from configuration size");
  double prob = 1.0;
  for (std::size_t i = 0; i < sigma.size(); ++i) prob *= 0.5 * (1.0 + sigma[i] * config(static_cast<Eigen::Index>(i), 2));
  return prob;
}

}  // namespace mfaoa
