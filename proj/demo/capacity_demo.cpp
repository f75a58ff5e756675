// Prints how the capacity of the switched channel changes with the switching
// correlation s, for the most distinct pair of sub-channels at each average.

#include <cstdio>

#include "hmqc/hmqc.hpp"

int main() {
  using namespace hmqc;
  std::printf("%6s %6s %8s %8s %8s\n", "a", "d", "s=0", "s=0.5", "s=0.9");
  for (double a : {0.4, 0.5, 2.0 / 3.0, 0.8, 0.95}) {
    const double d = DRule::max_for(a);
    std::printf("%6.3f %6.3f", a, d);
    for (double s : {0.0, 0.5, 0.9}) std::printf(" %8.5f", capacity(SymmetricParams{a, d, s}).capacity);
    std::printf("\n");
  }

  // The exact block bounds close in on the fixed-point value.
  const auto m = build_traced_matrices(SymmetricParams{2.0 / 3.0, 1.0 / 3.0, 0.9});
  const auto fp = entropy_rate_fixed_point(m);
  std::printf("\nrate at a=2/3, d=1/3, s=0.9: fixed point %.9f (%ld iterations)\n", fp.rate, fp.iterations);
  for (int n : {4, 8, 12, 16}) {
    const auto b = entropy_rate_bounds(m, n);
    std::printf("  n=%2d  lower %.9f  upper %.9f\n", n, b.lower, b.upper);
  }
  return 0;
}
