#pragma once

#include <cstdint>
#include <vector>

#include "otmatch/otmatch.hpp"

namespace testutil {

using namespace otmatch;

inline Matrix column(std::initializer_list<double> v) {
  Matrix m(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

inline Matrix random_points(std::size_t n, std::size_t d, std::uint64_t seed, double scale = 1.0) {
  CounterRng rng(seed);
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index k = 0; k < m.cols(); ++k) m(i, k) = scale * rng.normal();
  }
  return m;
}

// Two uniform point clouds of sizes drawn from [2, max_n].
inline std::vector<DiscreteMeasure> random_pair(std::uint64_t seed, std::size_t max_n = 12, std::size_t d = 2) {
  CounterRng rng(child_seed(seed, 99));
  const auto n = 2 + rng.below(max_n - 1), m = 2 + rng.below(max_n - 1);
  return {DiscreteMeasure::empirical(random_points(n, d, child_seed(seed, 0))),
          DiscreteMeasure::empirical(random_points(m, d, child_seed(seed, 1)))};
}

inline Dataset make_dataset(const Matrix& x, std::vector<int> t, std::vector<double> y) {
  Dataset d;
  d.covariates = x;
  d.treatment = std::move(t);
  d.outcome = std::move(y);
  for (Eigen::Index c = 0; c < x.cols(); ++c) d.columns.push_back("x" + std::to_string(c));
  return d;
}

inline std::vector<Divergence> both(const Divergence& d) { return {d, d}; }

}  // namespace testutil
