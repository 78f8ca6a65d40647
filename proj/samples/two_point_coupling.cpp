// Balanced entropic coupling of two uniform 2-point measures on {0, 1}.
#include <iostream>

#include "otmatch/otmatch.hpp"

int main() {
  using namespace otmatch;
  Matrix pts(2, 1);
  pts << 0.0, 1.0;
  const std::vector<DiscreteMeasure> ms = {DiscreteMeasure::empirical(pts), DiscreteMeasure::empirical(pts)};
  const auto cost = build_cost(ms);
  SinkhornConfig cfg;
  cfg.epsilon = 1.0;
  const auto sol = solve(ms, cost, {Divergence::balanced(), Divergence::balanced()}, cfg);
  std::cout << "sweeps " << sol.ipfp.iterations << ", residual " << sol.residual << "\n";
  for (std::size_t i = 0; i < 2; ++i) {
    std::cout << sol.coupling.values(i, 0) << " " << sol.coupling.values(i, 1) << "\n";
  }
}
