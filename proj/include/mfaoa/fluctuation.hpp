#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numeric>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include "mfaoa/dynamics.hpp"
#include "mfaoa/error.hpp"
#include "mfaoa/problem.hpp"

namespace mfaoa {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// Block sign matrix diag(1, -1) of size 2n.
inline CMatrix tau3(std::size_t n) {
  const auto m = static_cast<Eigen::Index>(n);
  CMatrix t = CMatrix::Zero(2 * m, 2 * m);
  t.diagonal().head(m).setOnes();
  t.diagonal().tail(m).setConstant(-1.0);
  return t;
}

/// Gaussian-fluctuation (paramagnon) operator H = [[A, B], [B^H, conj(A)]] at one time slice.
struct FluctuationOperator {
  double s = 0.0;
  CMatrix A;  ///< Hermitian
  CMatrix B;  ///< complex symmetric

  std::size_t n() const noexcept { return static_cast<std::size_t>(A.rows()); }

  CMatrix assembled() const {
    const Eigen::Index m = A.rows();
    CMatrix H(2 * m, 2 * m);
    H.topLeftCorner(m, m) = A;
    H.topRightCorner(m, m) = B;
    H.bottomLeftCorner(m, m) = B.adjoint();
    H.bottomRightCorner(m, m) = A.conjugate();
    return H;
  }

  /// L = tau3 H.
  CMatrix generator() const {
    CMatrix L = assembled();
    L.bottomRows(A.rows()) *= -1.0;
    return L;
  }
};

inline constexpr double pole_tolerance = 1e-6;

/// Fluctuation operator for spins projected from the poles (0, 0, -sigma*_i), so
/// each final orientation sits at the origin of its stereographic chart.
inline FluctuationOperator build_fluctuation_operator(const IsingProblem& problem, const SpinConfiguration& config,
                                                      const Bitstring& sigma_star, double s) {
  const std::size_t n = problem.n();
  if (static_cast<std::size_t>(config.rows()) != n || sigma_star.size() != n)
    throw error(errc::dimension_mismatch, "configuration, bitstring and problem sizes disagree");
  if (!(s >= 0.0 && s <= 1.0)) throw error(errc::invalid_schedule, "s must lie in [0, 1]");
  if (max_norm_deviation(config) > 1e-9) throw error(errc::invalid_instance, "spin vectors must be unit length");

  const Vector m = magnetization(problem, config);
  const auto& J = problem.couplings();
  const auto& delta = problem.driver();
  const auto dim = static_cast<Eigen::Index>(n);

  CVector plus(dim), minus(dim);
  FluctuationOperator op{s, CMatrix::Zero(dim, dim), CMatrix::Zero(dim, dim)};
  for (Eigen::Index i = 0; i < dim; ++i) {
    const double sig = sigma_star[static_cast<std::size_t>(i)];
    const double denom = 1.0 + sig * config(i, 2);
    if (denom < pole_tolerance)
      throw error(errc::pole_singularity, "spin " + std::to_string(i) + " sits at its projection pole");
    op.A(i, i) = 2.0 * (1.0 - s) * delta(i) * config(i, 0) / denom + 2.0 * s * sig * m(i);
    plus(i) = {sig * config(i, 0), config(i, 1)};
    minus(i) = {sig * config(i, 0), -config(i, 1)};
  }
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) {
      if (i == j) continue;
      op.A(i, j) = -s * J(i, j) * plus(i) * minus(j);
      op.B(i, j) = -s * J(i, j) * plus(i) * plus(j);
    }
  }
  return op;
}

struct MagnonSpectrum {
  Vector omegas;          ///< n values, ascending; omegas(0) is the minigap proxy
  double max_imag = 0.0;  ///< largest |Im| among the eigenvalues of tau3 H
  bool unstable = false;  ///< max_imag > 1e-8
  Vector all;             ///< real parts of all 2n eigenvalues, ascending
};

inline MagnonSpectrum magnon_spectrum(const FluctuationOperator& op) {
  Eigen::ComplexEigenSolver<CMatrix> solver(op.generator(), false);
  if (solver.info() != Eigen::Success) throw error(errc::numeric_contamination, "eigen solver failed");
  const CVector& ev = solver.eigenvalues();
  const auto m = static_cast<Eigen::Index>(op.n());
  std::vector<double> re(static_cast<std::size_t>(ev.size()));
  MagnonSpectrum out;
  for (Eigen::Index k = 0; k < ev.size(); ++k) {
    re[static_cast<std::size_t>(k)] = ev(k).real();
    out.max_imag = std::max(out.max_imag, std::abs(ev(k).imag()));
  }
  std::sort(re.begin(), re.end());
  out.all = Eigen::Map<Vector>(re.data(), static_cast<Eigen::Index>(re.size()));
  out.omegas = out.all.tail(m);
  out.unstable = out.max_imag > 1e-8;
  return out;
}

/// M = U diag(exp(log_scale)) V; used once exp(lambda) leaves the safe range of doubles.
struct FactoredTransfer {
  CMatrix U;
  Vector log_scale;
  CMatrix V;
};

struct TransferMatrix {
  double t = 0.0;
  CMatrix M;                                ///< empty when `factored` holds the value
  std::optional<FactoredTransfer> factored;

  bool is_dense() const noexcept { return !factored.has_value(); }
};

/// Exponent above which the dense product is replaced by the factored form.
inline constexpr double overflow_lambda = 300.0 * std::numbers::ln10 / 2.0;

namespace detail {

// Folds a new left factor E in: E U D V = (E U D~) e^top V with D~ = D e^-top;
// pivoted QR gives E U D~ = Q diag(r) Rn P^T, so U' = Q, log D' = log r + top and
// V' = Rn P^T V (rows renormalized into the scales).
inline FactoredTransfer absorb(const CMatrix& E, const FactoredTransfer& f) {
  const double top = f.log_scale.maxCoeff();
  CMatrix X = E * f.U;
  for (Eigen::Index j = 0; j < X.cols(); ++j) X.col(j) *= std::exp(f.log_scale(j) - top);
  Eigen::ColPivHouseholderQR<CMatrix> qr(X);
  CMatrix R = qr.matrixR().template triangularView<Eigen::Upper>();
  const Eigen::Index dim = X.cols();
  FactoredTransfer out;
  out.U = qr.householderQ();
  out.log_scale.resize(dim);
  for (Eigen::Index j = 0; j < dim; ++j) {
    double mag = std::abs(R(j, j));
    if (!(mag > 0.0)) mag = std::numeric_limits<double>::min();
    out.log_scale(j) = std::log(mag) + top;
    R.row(j) /= mag;
  }
  out.V = R * qr.colsPermutation().transpose() * f.V;
  for (Eigen::Index j = 0; j < dim; ++j) {
    const double rn = out.V.row(j).norm();
    if (rn > 0.0) {
      out.V.row(j) /= rn;
      out.log_scale(j) += std::log(rn);
    }
  }
  return out;
}

inline FactoredTransfer factor(const CMatrix& M) {
  Eigen::JacobiSVD<CMatrix> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  FactoredTransfer f;
  f.U = svd.matrixU();
  f.log_scale = svd.singularValues().array().log();
  // directions far below the rounding floor carry no information; keep them finite
  const double floor = f.log_scale(0) - 700.0;
  for (Eigen::Index j = 0; j < f.log_scale.size(); ++j) f.log_scale(j) = std::max(f.log_scale(j), floor);
  f.V = svd.matrixV().adjoint();
  return f;
}

// log singular values of M, descending. For the factored form the rows of V are
// sorted by scale and V = L Q (LQ); D L is then strongly graded, so each cluster of
// nearby scales contributes the singular values of its own diagonal block.
inline Vector log_singular_values(const TransferMatrix& tm) {
  if (tm.is_dense()) {
    // eigenvalues of M^H M resolve sigma_j to eps e^{2(lambda_0 - lambda_j)}: ample
    // for small exponents, otherwise the one-sided Jacobi SVD takes over
    Eigen::SelfAdjointEigenSolver<CMatrix> es(tm.M.adjoint() * tm.M, Eigen::EigenvaluesOnly);
    const Eigen::Index dim = tm.M.cols();
    Vector out(dim);
    for (Eigen::Index j = 0; j < dim; ++j)
      out(j) = 0.5 * std::log(std::max(es.eigenvalues()(dim - 1 - j), std::numeric_limits<double>::min()));
    if (out(0) < 4.0) return out;
    Eigen::JacobiSVD<CMatrix> svd(tm.M);
    return svd.singularValues().array().log();
  }
  const FactoredTransfer& f = *tm.factored;
  const Eigen::Index dim = f.log_scale.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(dim));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return f.log_scale(a) > f.log_scale(b); });
  CMatrix sorted(dim, f.V.cols());
  Vector ls(dim);
  for (Eigen::Index j = 0; j < dim; ++j) {
    sorted.row(j) = f.V.row(order[static_cast<std::size_t>(j)]);
    ls(j) = f.log_scale(order[static_cast<std::size_t>(j)]);
  }
  Eigen::HouseholderQR<CMatrix> qr(sorted.adjoint());
  const CMatrix L = CMatrix(qr.matrixQR().template triangularView<Eigen::Upper>()).adjoint();

  constexpr double cluster_gap = 30.0, cluster_span = 600.0;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(dim));
  Eigen::Index start = 0;
  for (Eigen::Index j = 1; j <= dim; ++j) {
    if (j < dim && ls(j - 1) - ls(j) < cluster_gap && ls(start) - ls(j) < cluster_span) continue;
    const Eigen::Index len = j - start;
    CMatrix block = L.block(start, start, len, len);
    for (Eigen::Index r = 0; r < len; ++r) block.row(r) *= std::exp(ls(start + r) - ls(start));
    Eigen::JacobiSVD<CMatrix> svd(block);
    for (Eigen::Index r = 0; r < len; ++r) {
      const double sv = svd.singularValues()(r);
      out.push_back((sv > 0.0 ? std::log(sv) : -std::numeric_limits<double>::infinity()) + ls(start));
    }
    start = j;
  }
  std::sort(out.begin(), out.end(), std::greater<>());
  return Eigen::Map<Vector>(out.data(), dim);
}

}  // namespace detail

/// Lyapunov exponents lambda_l = ln of the top-n singular values of M,
/// descending and clamped at zero.
inline Vector lyapunov_spectrum(const TransferMatrix& tm) {
  const Vector logs = detail::log_singular_values(tm);
  const Eigen::Index dim = logs.size();
  const Eigen::Index m = dim / 2;
  if (tm.is_dense() && logs(0) < 4.0) {
    // pairing sigma_j sigma_{2n-1-j} = 1, resolvable only while eps e^{4 lambda_0} stays small
    for (Eigen::Index j = 0; j < m; ++j) {
      const double product = std::exp(logs(j) + logs(dim - 1 - j));
      if (std::abs(product - 1.0) > 1e-6)
        throw error(errc::canonical_form, "singular values are not paired; flux conservation broken");
    }
  }
  Vector lambdas(m);
  for (Eigen::Index j = 0; j < m; ++j) lambdas(j) = std::max(0.0, logs(j));
  return lambdas;
}

/// Accumulates M(t_k) = exp(-i L(t_k) dt_k) ... exp(-i L(t_1) dt_1).
class TransferPropagator {
 public:
  explicit TransferPropagator(std::size_t n) {
    const auto dim = static_cast<Eigen::Index>(2 * n);
    current_.M = CMatrix::Identity(dim, dim);
  }

  void push(const FluctuationOperator& op, double dt) { push_factor(step_factor(op, dt), dt); }

  void push_factor(const CMatrix& factor, double dt) {
    current_.t += dt;
    if (current_.is_dense()) {
      CMatrix next = factor * current_.M;
      if (!next.allFinite()) {
        current_.factored = detail::absorb(factor, detail::factor(current_.M));
        current_.M.resize(0, 0);
        return;
      }
      current_.M = std::move(next);
      if (std::log(current_.M.norm()) > overflow_lambda) {
        current_.factored = detail::factor(current_.M);
        current_.M.resize(0, 0);
      }
    } else {
      current_.factored = detail::absorb(factor, *current_.factored);
    }
  }

  static CMatrix step_factor(const FluctuationOperator& op, double dt) {
    const CMatrix X = (std::complex<double>(0.0, -dt) * op.generator()).eval();
    return X.exp();
  }

  const TransferMatrix& current() const noexcept { return current_; }

 private:
  TransferMatrix current_;
};

/// Time series of transfer matrices for uniformly spaced slices; element 0 is M(0) = 1.
inline std::vector<TransferMatrix> propagate_transfer(const std::vector<FluctuationOperator>& ops, double tau) {
  if (!(tau > 0.0)) throw error(errc::invalid_schedule, "tau must be > 0");
  const std::size_t n = ops.empty() ? 0 : ops.front().n();
  TransferPropagator prop(n);
  std::vector<TransferMatrix> out;
  out.reserve(ops.size() + 1);
  out.push_back(prop.current());
  for (const auto& op : ops) {
    if (op.n() != n) throw error(errc::dimension_mismatch, "operators of different sizes");
    prop.push(op, tau);
    out.push_back(prop.current());
  }
  return out;
}

struct EqualTimeCorrelator {
  CMatrix g;
  double fluctuation_size = 0.0;  ///< sum_i <|eta_i|^2> = Tr(M M^H) / 2
};

/// g(t) = M tau3 M^{-1} under the reflectionless boundary solution g(0) = tau3.
inline std::vector<EqualTimeCorrelator> equal_time_correlator(const std::vector<TransferMatrix>& series) {
  std::vector<EqualTimeCorrelator> out;
  out.reserve(series.size());
  for (const auto& tm : series) {
    if (!tm.is_dense()) throw error(errc::singular_transfer, "transfer matrix beyond double range");
    const std::size_t n = static_cast<std::size_t>(tm.M.rows() / 2);
    Eigen::FullPivLU<CMatrix> lu(tm.M);
    if (!lu.isInvertible() || lu.rcond() < 1e-300) throw error(errc::singular_transfer, "transfer matrix is singular");
    EqualTimeCorrelator c;
    c.g = tm.M * tau3(n) * lu.inverse();
    c.fluctuation_size = 0.5 * tm.M.squaredNorm();
    out.push_back(std::move(c));
  }
  return out;
}

struct LyapunovTrace {
  std::vector<double> times;  ///< s = t / T
  Eigen::MatrixXd lambdas;    ///< K x n, rows descending
  Eigen::MatrixXd omegas;     ///< K x n, rows ascending (empty if not computed)
  std::vector<double> skipped;       ///< s values dropped at a projection pole
  std::vector<double> unstable;      ///< s values where tau3 H had complex eigenvalues
};

/// Centred running mean of lambda_0 over a window of width `width` in s.
inline std::vector<double> smoothed_lambda0(const LyapunovTrace& trace, double width = 0.01) {
  const std::size_t K = trace.times.size();
  std::vector<double> out(K, 0.0);
  if (K == 0 || trace.lambdas.cols() == 0) return out;
  std::vector<double> prefix(K + 1, 0.0);
  for (std::size_t k = 0; k < K; ++k) prefix[k + 1] = prefix[k] + trace.lambdas(static_cast<Eigen::Index>(k), 0);
  std::size_t lo = 0, hi = 0;
  for (std::size_t k = 0; k < K; ++k) {
    while (trace.times[lo] < trace.times[k] - width / 2) ++lo;
    while (hi < K && trace.times[hi] <= trace.times[k] + width / 2) ++hi;
    out[k] = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
  }
  return out;
}

struct LambdaPeak {
  double s = 0.0;
  double height = 0.0;
  double prominence = 0.0;
};

/// Interior local maxima of the smoothed lambda_0 whose topographic prominence is at
/// least `min_fraction` of the largest smoothed value.
inline std::vector<LambdaPeak> lambda0_peaks(const LyapunovTrace& trace, double width = 0.01, double min_fraction = 0.05) {
  const std::vector<double> y = smoothed_lambda0(trace, width);
  std::vector<LambdaPeak> out;
  if (y.size() < 3) return out;
  const double top = *std::max_element(y.begin(), y.end());
  for (std::size_t i = 1; i + 1 < y.size(); ++i) {
    if (!(y[i] > y[i - 1] && y[i] >= y[i + 1])) continue;
    double left = y[i], right = y[i];
    std::size_t j = i;
    while (j > 0 && y[j - 1] <= y[i]) left = std::min(left, y[--j]);
    const bool left_open = j == 0;
    j = i;
    while (j + 1 < y.size() && y[j + 1] <= y[i]) right = std::min(right, y[++j]);
    const bool right_open = j + 1 == y.size();
    double base;
    if (left_open && right_open) base = std::min(left, right);
    else if (left_open) base = right;
    else if (right_open) base = left;
    else base = std::max(left, right);
    const double prominence = y[i] - base;
    if (prominence >= min_fraction * top && prominence > 0.0) out.push_back({trace.times[i], y[i], prominence});
  }
  return out;
}

/// Direction reversals of a series that move at least `amplitude` away from the running extremum.
inline int count_swings(const std::vector<double>& y, double amplitude) {
  if (y.empty()) return 0;
  int swings = 0, direction = 0;
  double hi = y[0], lo = y[0];
  for (double v : y) {
    if (direction >= 0) {
      hi = std::max(hi, v);
      if (hi - v >= amplitude) {
        if (direction > 0) ++swings;
        direction = -1;
        lo = v;
      }
    }
    if (direction <= 0) {
      lo = std::min(lo, v);
      if (v - lo >= amplitude) {
        if (direction < 0) ++swings;
        direction = 1;
        hi = v;
      }
    }
  }
  return swings;
}

struct HardnessReport {
  double max_lambda0 = 0.0;
  double s_at_max = 0.0;
  double threshold = 0.0;  ///< ln sqrt(n)
  double ratio = 0.0;
  double final_max_lambda = 0.0;
  bool reflectionless = true;
  int late_swings = 0;
  bool oscillations = false;
  std::vector<LambdaPeak> peaks;
};

/// Summary diagnostics of a trace; `n` is the spin count used for the ln sqrt(n) threshold.
/// Late oscillations: at least three reversals of the smoothed lambda_0 over the last 20%
/// of the protocol, each of amplitude at least 5% of max lambda_0.
inline HardnessReport hardness_report(const LyapunovTrace& trace, std::size_t n) {
  const auto K = static_cast<std::size_t>(trace.lambdas.rows());
  if (K == 0 || trace.times.size() != K) throw error(errc::dimension_mismatch, "empty or inconsistent trace");
  HardnessReport r;
  r.threshold = std::log(std::sqrt(static_cast<double>(n)));
  for (std::size_t k = 0; k < K; ++k) {
    const double l0 = trace.lambdas.cols() > 0 ? trace.lambdas(static_cast<Eigen::Index>(k), 0) : 0.0;
    if (l0 > r.max_lambda0) {
      r.max_lambda0 = l0;
      r.s_at_max = trace.times[k];
    }
  }
  r.ratio = r.threshold > 0.0 ? r.max_lambda0 / r.threshold : 0.0;
  if (trace.lambdas.cols() > 0) r.final_max_lambda = trace.lambdas.row(static_cast<Eigen::Index>(K - 1)).maxCoeff();
  r.reflectionless = r.final_max_lambda < 1e-3;

  const std::vector<double> smooth = smoothed_lambda0(trace);
  const double cut = trace.times.back() - 0.2 * (trace.times.back() - trace.times.front());
  std::vector<double> late;
  for (std::size_t k = 0; k < K; ++k)
    if (trace.times[k] >= cut) late.push_back(smooth[k]);
  r.late_swings = count_swings(late, std::max(1e-3, 0.05 * r.max_lambda0));
  r.oscillations = r.late_swings >= 3;
  r.peaks = lambda0_peaks(trace);
  return r;
}

struct FluctuationOptions {
  long long slices = 2000;   ///< target number of slices; stride = ceil(p / slices)
  bool spectra = true;
  bool keep_series = false;  ///< keep operators and transfer matrices (memory heavy)
};

struct FluctuationAnalysis {
  Bitstring sigma_star;
  SpinConfiguration final_config;
  long long stride = 1;
  LyapunovTrace trace;
  std::vector<FluctuationOperator> operators;  ///< filled with keep_series; operators[j] belongs to trace row j
  std::vector<TransferMatrix> transfers;       ///< filled with keep_series; transfers[j] belongs to trace row j
};

/// Builds the fluctuation operator on every recorded slice of a trajectory
/// (s = k / p) and propagates the transfer matrix along them; the Trotter step of
/// each factor is the slice interval. sigma* is the rounding of the last slice.
inline FluctuationAnalysis analyse_trajectory(const IsingProblem& problem, const Trajectory& trajectory,
                                              const FluctuationOptions& options = {}) {
  if (trajectory.slices.empty()) throw error(errc::dimension_mismatch, "trajectory has no slices");
  if (trajectory.n != problem.n()) throw error(errc::dimension_mismatch, "trajectory and problem sizes differ");
  const long long p = trajectory.p;
  FluctuationAnalysis out;
  out.stride = trajectory.stride;
  out.final_config = trajectory.slices.back().spins;
  out.sigma_star = round_solution(out.final_config);

  const std::size_t n = problem.n();
  TransferPropagator prop(n);
  std::vector<Eigen::VectorXd> lambda_rows, omega_rows;
  long long previous_k = 0;
  for (const auto& slice : trajectory.slices) {
    const double s = static_cast<double>(slice.k) / static_cast<double>(p);
    const double dt = static_cast<double>(slice.k - previous_k) * trajectory.tau;
    previous_k = slice.k;
    std::optional<FluctuationOperator> op;
    try {
      op = build_fluctuation_operator(problem, slice.spins, out.sigma_star, s);
    } catch (const error& e) {
      if (e.code() != errc::pole_singularity) throw;
      out.trace.skipped.push_back(s);
      continue;
    }
    if (dt > 0.0) prop.push(*op, dt);
    out.trace.times.push_back(s);
    lambda_rows.push_back(lyapunov_spectrum(prop.current()));
    if (options.spectra) {
      MagnonSpectrum spec = magnon_spectrum(*op);
      if (spec.unstable) out.trace.unstable.push_back(s);
      omega_rows.push_back(spec.omegas);
    }
    if (options.keep_series) {
      out.operators.push_back(*op);
      out.transfers.push_back(prop.current());
    }
  }
  const auto K = static_cast<Eigen::Index>(lambda_rows.size());
  const auto m = static_cast<Eigen::Index>(n);
  out.trace.lambdas.resize(K, m);
  for (Eigen::Index k = 0; k < K; ++k) out.trace.lambdas.row(k) = lambda_rows[static_cast<std::size_t>(k)].transpose();
  if (!omega_rows.empty()) {
    out.trace.omegas.resize(K, m);
    for (Eigen::Index k = 0; k < K; ++k) out.trace.omegas.row(k) = omega_rows[static_cast<std::size_t>(k)].transpose();
  }
  return out;
}

/// Evolves with slice stride ceil(p / slices), then analyses the recorded trajectory.
inline FluctuationAnalysis analyse_fluctuations(const IsingProblem& problem, const Schedule& schedule,
                                                const FluctuationOptions& options = {}) {
  const auto p = static_cast<long long>(schedule.p());
  const long long slices = std::max<long long>(1, options.slices);
  EvolveOptions ev;
  ev.record_stride = (p + slices - 1) / slices;
  EvolveResult run = evolve(problem, schedule, ev);
  return analyse_trajectory(problem, *run.trajectory, options);
}

}  // namespace mfaoa
