#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace mfaoa {

/// Reproducible random stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// C++ standard. The library distributions (std::normal_distribution etc.)
/// are implementation-defined, so the transforms are written out here:
///
///  - uniform():  one engine draw x, returns ((x >> 11) + 1) * 2^-53, in (0, 1].
///  - normal():   Box-Muller on two uniforms u1, u2 (in that order);
///                returns r cos(2 pi u2) and caches r sin(2 pi u2) for the next call.
///
/// Same seed gives the same doubles on every IEEE-754 platform with a
/// correctly rounded libm for log/sqrt/cos/sin.
class Rng {
 public:
  using seed_type = std::uint64_t;

  explicit Rng(seed_type seed) : engine_(seed) {}

  double uniform() {
    constexpr double scale = 1.0 / 9007199254740992.0;  // 2^-53
    return static_cast<double>((engine_() >> 11) + 1) * scale;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(phi);
    has_spare_ = true;
    return r * std::cos(phi);
  }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace mfaoa
