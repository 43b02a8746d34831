// Mean-field runs on a few small SK instances, checked against brute force.
//   sk_demo [n] [count] [p]

#include <cstdio>
#include <cstdlib>

#include "mfaoa/exact.hpp"
#include "mfaoa/fluctuation.hpp"
#include "mfaoa/io.hpp"

using namespace mfaoa;

int main(int argc, char** argv) {
  const std::size_t n = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 14;
  const int count = argc > 2 ? std::atoi(argv[2]) : 8;
  const long long p = argc > 3 ? std::atoll(argv[3]) : 2000;

  std::printf("SK n=%zu, tau=0.5, p=%lld\n\n", n, p);
  std::printf("%4s  %-*s  %10s  %10s  %9s  %s\n", "seed", static_cast<int>(n), "sigma*", "E*", "E0", "max l0", "");
  int solved = 0;
  for (int seed = 0; seed < count; ++seed) {
    const IsingProblem full = sk_instance(n, seed);
    const IsingProblem reduced = break_symmetry(full);

    FluctuationOptions opt;
    opt.slices = 400;
    const FluctuationAnalysis a = analyse_fluctuations(reduced, linear_schedule(p, 0.5), opt);
    const HardnessReport h = hardness_report(a.trace, n);

    const Bitstring sigma = restore_fixed_spin(a.sigma_star);
    const double e_star = energy(full, sigma);
    const double e_zero = brute_force_ground(full).energy;
    const bool ok = e_star <= e_zero + 1e-9;
    solved += ok;
    std::printf("%4d  %s  %10.5f  %10.5f  %9.3f  %s\n", seed, bits_to_string(sigma).c_str(), e_star, e_zero, h.max_lambda0,
                ok ? "ground state" : "excited");
  }
  std::printf("\nground state found in %d of %d instances (threshold ln sqrt(n) = %.3f)\n", solved, count,
              0.5 * std::log(static_cast<double>(n)));
}
