#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "otmatch/error.hpp"
#include "otmatch/measures.hpp"
#include "otmatch/parallel.hpp"
#include "otmatch/rng.hpp"

namespace otmatch {

enum class BootstrapMode { stratified, pooled };

inline BootstrapMode parse_bootstrap_mode(const std::string& s) {
  if (s == "stratified") return BootstrapMode::stratified;
  if (s == "pooled") return BootstrapMode::pooled;
  throw usage_error("unknown bootstrap mode '" + s + "' (expected stratified or pooled)");
}

struct BootstrapOptions {
  std::size_t replicates = 100;
  std::uint64_t seed = 0;
  double alpha = 0.05;
  BootstrapMode mode = BootstrapMode::stratified;
  unsigned threads = 1;
  double max_failure_rate = 0.2;
};

struct BootstrapSummary {
  double point = 0.0;
  // Successful replicates in replicate-index order; failed ones are skipped.
  std::vector<double> replicates;
  std::vector<std::size_t> failed;
  double sd = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::uint64_t seed = 0;
  std::size_t B = 0;
  // Per replicate, the fraction of rows in each arm.
  std::vector<std::vector<double>> arm_fractions;
};

// Linear-interpolation quantile of sorted data (type 7).
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Rows of replicate b: stratified draws N_j rows with replacement inside every
/// arm (arms in label order); pooled draws N rows from the whole dataset.
inline std::vector<std::size_t> resample_rows(const Dataset& data, std::uint64_t seed, std::size_t b,
                                              BootstrapMode mode) {
  CounterRng rng(child_seed(seed, b));
  std::vector<std::size_t> rows;
  rows.reserve(data.size());
  if (mode == BootstrapMode::pooled) {
    for (std::size_t i = 0; i < data.size(); ++i) rows.push_back(static_cast<std::size_t>(rng.below(data.size())));
    return rows;
  }
  const int arms = data.arms();
  std::vector<std::vector<std::size_t>> by_arm(static_cast<std::size_t>(arms));
  for (std::size_t i = 0; i < data.size(); ++i) by_arm[static_cast<std::size_t>(data.treatment[i])].push_back(i);
  for (const auto& members : by_arm) {
    for (std::size_t r = 0; r < members.size(); ++r) rows.push_back(members[rng.below(members.size())]);
  }
  return rows;
}

/// Nonparametric bootstrap of a vector-valued estimator; one summary per
/// component, all computed from the same resamples. Estimator errors of type
/// otmatch::Error mark the replicate failed; more than max_failure_rate
/// failures is an error.
inline std::vector<BootstrapSummary> bootstrap_multi(
    const Dataset& data, const std::function<std::vector<double>(const Dataset&)>& estimator,
    const BootstrapOptions& opt) {
  if (opt.replicates < 2) throw usage_error("bootstrap needs at least two replicates");
  if (!(opt.alpha > 0.0 && opt.alpha < 1.0)) throw usage_error("alpha must lie in (0, 1)");
  data.validate();
  const auto point = estimator(data);
  const std::size_t K = point.size();

  const auto arms = static_cast<std::size_t>(data.arms());
  std::vector<std::vector<double>> values(opt.replicates);
  std::vector<char> ok(opt.replicates, 0);
  std::vector<std::vector<double>> fractions(opt.replicates, std::vector<double>(arms, 0.0));
  parallel_for(opt.replicates, opt.threads, [&](std::size_t b) {
    const auto rows = resample_rows(data, opt.seed, b, opt.mode);
    const Dataset sample = data.subset(rows);
    for (int t : sample.treatment) fractions[b][static_cast<std::size_t>(t)] += 1.0 / static_cast<double>(rows.size());
    try {
      values[b] = estimator(sample);
      ok[b] = values[b].size() == K &&
              std::all_of(values[b].begin(), values[b].end(), [](double v) { return std::isfinite(v); });
    } catch (const Error&) {
      ok[b] = 0;
    }
  });
  std::vector<BootstrapSummary> out(K);
  std::vector<std::size_t> failed;
  for (std::size_t b = 0; b < opt.replicates; ++b) {
    if (!ok[b]) failed.push_back(b);
  }
  if (static_cast<double>(failed.size()) > opt.max_failure_rate * static_cast<double>(opt.replicates)) {
    throw numeric_error("bootstrap: " + std::to_string(failed.size()) + " of " + std::to_string(opt.replicates) +
                        " replicates failed");
  }
  if (opt.replicates - failed.size() < 2) throw numeric_error("bootstrap: fewer than two successful replicates");
  for (std::size_t k = 0; k < K; ++k) {
    auto& s = out[k];
    s.point = point[k];
    s.seed = opt.seed;
    s.B = opt.replicates;
    s.failed = failed;
    s.arm_fractions = fractions;
    for (std::size_t b = 0; b < opt.replicates; ++b) {
      if (ok[b]) s.replicates.push_back(values[b][k]);
    }
    s.sd = mean_sd(s.replicates).second;
    std::vector<double> sorted = s.replicates;
    std::sort(sorted.begin(), sorted.end());
    s.lower = quantile_sorted(sorted, opt.alpha / 2.0);
    s.upper = quantile_sorted(sorted, 1.0 - opt.alpha / 2.0);
  }
  return out;
}

inline BootstrapSummary bootstrap(const Dataset& data, const std::function<double(const Dataset&)>& estimator,
                                  const BootstrapOptions& opt) {
  return bootstrap_multi(data, [&](const Dataset& d) { return std::vector<double>{estimator(d)}; }, opt).front();
}

}  // namespace otmatch
