#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mfaoa/error.hpp"
#include "mfaoa/rng.hpp"

namespace mfaoa {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class ProblemKind { sk, partition, custom };

inline const char* to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::sk: return "sk";
    case ProblemKind::partition: return "partition";
    case ProblemKind::custom: return "custom";
  }
  return "custom";
}

inline ProblemKind parse_kind(const std::string& s) {
  if (s == "sk") return ProblemKind::sk;
  if (s == "partition") return ProblemKind::partition;
  if (s == "custom") return ProblemKind::custom;
  throw error(errc::invalid_instance, "unknown problem kind '" + s + "'");
}

/// A string of spin values, each +1 or -1.
class Bitstring {
 public:
  Bitstring() = default;
  explicit Bitstring(std::vector<int> bits) : bits_(std::move(bits)) {
    for (int b : bits_) {
      if (b != 1 && b != -1) throw error(errc::invalid_instance, "bit values must be +1 or -1");
    }
  }
  static Bitstring all_up(std::size_t n) { return Bitstring(std::vector<int>(n, 1)); }

  /// Decodes a basis index: spin 0 is the most significant bit, bit 0 <-> +1.
  static Bitstring from_index(std::uint64_t index, std::size_t n) {
    std::vector<int> bits(n);
    for (std::size_t i = 0; i < n; ++i) bits[i] = ((index >> (n - 1 - i)) & 1u) ? -1 : 1;
    return Bitstring(std::move(bits));
  }
  std::uint64_t to_index() const {
    std::uint64_t index = 0;
    for (int b : bits_) index = (index << 1) | (b < 0 ? 1u : 0u);
    return index;
  }

  std::size_t size() const noexcept { return bits_.size(); }
  int operator[](std::size_t i) const { return bits_[i]; }
  void flip(std::size_t i) { bits_[i] = -bits_[i]; }
  std::span<const int> bits() const noexcept { return bits_; }

  friend bool operator==(const Bitstring&, const Bitstring&) = default;

 private:
  std::vector<int> bits_;
};

/// Ising optimization instance
///   H_P = offset - sum_i [h_i + sum_{j>i} J_ij s_j] s_i,   H_D = -sum_i delta_i X_i.
/// Immutable after construction; the constructor enforces J = J^T, J_ii = 0, delta > 0.
class IsingProblem {
 public:
  IsingProblem(RowMatrix couplings, Vector fields, Vector driver, double energy_offset = 0.0,
               ProblemKind kind = ProblemKind::custom, std::optional<std::uint64_t> seed = {})
      : J_(std::move(couplings)),
        h_(std::move(fields)),
        delta_(std::move(driver)),
        offset_(energy_offset),
        kind_(kind),
        seed_(seed) {
    const auto n = h_.size();
    if (n < 1) throw error(errc::invalid_instance, "problem needs at least one spin");
    if (J_.rows() != n || J_.cols() != n || delta_.size() != n)
      throw error(errc::dimension_mismatch, "couplings, fields and driver sizes disagree");
    for (Eigen::Index i = 0; i < n; ++i) {
      if (J_(i, i) != 0.0) throw error(errc::invalid_instance, "coupling diagonal must be zero");
      if (!(delta_(i) > 0.0)) throw error(errc::invalid_instance, "driver amplitudes must be > 0");
      for (Eigen::Index j = i + 1; j < n; ++j) {
        if (J_(i, j) != J_(j, i)) throw error(errc::invalid_instance, "couplings must be symmetric");
      }
    }
    if (!J_.allFinite() || !h_.allFinite() || !delta_.allFinite() || !std::isfinite(offset_))
      throw error(errc::numeric_contamination, "non-finite problem data");
  }

  /// Problem with unit driver amplitudes and no offset.
  static IsingProblem from_couplings(RowMatrix couplings, Vector fields) {
    const auto n = fields.size();
    return IsingProblem(std::move(couplings), std::move(fields), Vector::Ones(n));
  }

  std::size_t n() const noexcept { return static_cast<std::size_t>(h_.size()); }
  const RowMatrix& couplings() const noexcept { return J_; }
  const Vector& fields() const noexcept { return h_; }
  const Vector& driver() const noexcept { return delta_; }
  double energy_offset() const noexcept { return offset_; }
  ProblemKind kind() const noexcept { return kind_; }
  std::optional<std::uint64_t> seed() const noexcept { return seed_; }

  bool is_z2_symmetric() const { return (h_.array() == 0.0).all(); }

 private:
  RowMatrix J_;
  Vector h_;
  Vector delta_;
  double offset_;
  ProblemKind kind_;
  std::optional<std::uint64_t> seed_;
};

/// Sherrington-Kirkpatrick instance: J_ij = g_ij / sqrt(n), g_ij standard normal,
/// drawn in row-major order over i < j.
inline IsingProblem sk_instance(std::size_t n, std::uint64_t seed) {
  if (n < 2) throw error(errc::invalid_instance, "SK instance needs n >= 2");
  Rng rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  const auto m = static_cast<Eigen::Index>(n);
  RowMatrix J = RowMatrix::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      J(i, j) = rng.normal() * scale;
      J(j, i) = J(i, j);
    }
  }
  return IsingProblem(std::move(J), Vector::Zero(m), Vector::Ones(m), 0.0, ProblemKind::sk, seed);
}

/// Number-partitioning instance; H_P = (sum_i a_i s_i)^2.
struct PartitionInstance {
  Vector weights;
  IsingProblem problem;
};

inline PartitionInstance partition_from_weights(const Vector& a, std::optional<std::uint64_t> seed = {}) {
  const auto m = a.size();
  if (m < 1) throw error(errc::invalid_instance, "partition needs at least one weight");
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!(a(i) > 0.0 && a(i) <= 1.0)) throw error(errc::invalid_instance, "weights must lie in (0, 1]");
  }
  RowMatrix J = RowMatrix::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      J(i, j) = -2.0 * a(i) * a(j);
      J(j, i) = J(i, j);
    }
  }
  IsingProblem problem(std::move(J), Vector::Zero(m), Vector::Ones(m), a.squaredNorm(),
                       ProblemKind::partition, seed);
  return PartitionInstance{a, std::move(problem)};
}

inline PartitionInstance partition_instance(std::size_t n, std::uint64_t seed) {
  if (n < 2) throw error(errc::invalid_instance, "partition instance needs n >= 2");
  Rng rng(seed);
  Vector a(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = rng.uniform();
  return partition_from_weights(a, seed);
}

/// Fixes the last spin to +1; its couplings become local fields h_i = J_iN.
inline IsingProblem break_symmetry(const IsingProblem& problem) {
  if (problem.n() < 2) throw error(errc::invalid_instance, "symmetry breaking needs n >= 2");
  if (!problem.is_z2_symmetric())
    throw error(errc::symmetry_already_broken, "problem has non-zero fields");
  const auto m = static_cast<Eigen::Index>(problem.n()) - 1;
  RowMatrix J = problem.couplings().topLeftCorner(m, m);
  Vector h = problem.couplings().col(m).head(m);
  Vector delta = problem.driver().head(m);
  return IsingProblem(std::move(J), std::move(h), std::move(delta), problem.energy_offset(),
                      problem.kind(), problem.seed());
}

/// Inverse of break_symmetry on bitstrings: appends the fixed spin (+1).
inline Bitstring restore_fixed_spin(const Bitstring& reduced) {
  std::vector<int> bits(reduced.bits().begin(), reduced.bits().end());
  bits.push_back(1);
  return Bitstring(std::move(bits));
}

inline double energy(const IsingProblem& problem, const Bitstring& sigma) {
  const std::size_t n = problem.n();
  if (sigma.size() != n) throw error(errc::dimension_mismatch, "bitstring length differs from spin count");
  const auto& J = problem.couplings();
  const auto& h = problem.fields();
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double local = h(static_cast<Eigen::Index>(i));
    const double* row = J.row(static_cast<Eigen::Index>(i)).data();
    for (std::size_t j = i + 1; j < n; ++j) local += row[j] * sigma[j];
    sum += local * sigma[i];
  }
  return problem.energy_offset() - sum;
}

}  // namespace mfaoa
