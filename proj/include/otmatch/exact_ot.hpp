#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <vector>

#include "otmatch/error.hpp"
#include "otmatch/measures.hpp"

namespace otmatch {

struct ExactOt {
  double value = 0.0;
  Matrix coupling;
};

// Exact balanced two-marginal OT by successive shortest paths on the
// transportation network. Each augmentation saturates a supply, a demand or a
// reverse arc, so the number of augmentations is finite; Bellman-Ford keeps
// it robust to the negative reduced costs of reverse arcs.
inline ExactOt exact_ot_bruteforce(const std::vector<DiscreteMeasure>& measures, const CostTensor& cost,
                                   std::size_t max_entries = 10'000) {
  if (measures.size() != 2 || cost.order() != 2) throw usage_error("exact solver handles two marginals only");
  const std::size_t n = measures[0].size(), m = measures[1].size();
  if (cost.shape()[0] != n || cost.shape()[1] != m) throw usage_error("cost shape does not match the measures");
  if (n * m > max_entries) throw usage_error("exact solver limited to " + std::to_string(max_entries) + " cells");
  std::vector<double> supply = measures[0].weights();
  std::vector<double> demand = measures[1].weights();
  const double ms = measures[0].total_mass(), md = measures[1].total_mass();
  if (std::abs(ms - md) > 1e-12 * std::max(1.0, ms)) throw usage_error("exact solver needs equal total masses");

  Matrix flow = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  const double tiny = 1e-15 * std::max(1.0, ms);
  // nodes: 0..n-1 sources, n..n+m-1 sinks
  const std::size_t V = n + m;
  constexpr double inf = std::numeric_limits<double>::infinity();

  for (std::size_t guard = 0; guard < 4 * (n + m) * (n + m) + 16; ++guard) {
    double remaining = 0.0;
    for (double s : supply) remaining += s;
    if (remaining <= tiny * static_cast<double>(n)) break;

    std::vector<double> dist(V, inf);
    std::vector<std::ptrdiff_t> pred(V, -1);
    std::vector<bool> queued(V, false);
    std::deque<std::size_t> queue;
    for (std::size_t i = 0; i < n; ++i) {
      if (supply[i] > tiny) {
        dist[i] = 0.0;
        queue.push_back(i);
        queued[i] = true;
      }
    }
    while (!queue.empty()) {
      const std::size_t u = queue.front();
      queue.pop_front();
      queued[u] = false;
      if (u < n) {
        for (std::size_t k = 0; k < m; ++k) {  // forward arcs, unbounded
          const double nd = dist[u] + cost(u, k);
          if (nd < dist[n + k] - 1e-14) {
            dist[n + k] = nd;
            pred[n + k] = static_cast<std::ptrdiff_t>(u);
            if (!queued[n + k]) {
              queue.push_back(n + k);
              queued[n + k] = true;
            }
          }
        }
      } else {
        const std::size_t k = u - n;
        for (std::size_t i = 0; i < n; ++i) {  // reverse arcs carry existing flow
          if (flow(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) <= tiny) continue;
          const double nd = dist[u] - cost(i, k);
          if (nd < dist[i] - 1e-14) {
            dist[i] = nd;
            pred[i] = static_cast<std::ptrdiff_t>(u);
            if (!queued[i]) {
              queue.push_back(i);
              queued[i] = true;
            }
          }
        }
      }
    }
    std::size_t sink = V;
    for (std::size_t k = 0; k < m; ++k) {
      if (demand[k] > tiny && dist[n + k] < inf && (sink == V || dist[n + k] < dist[sink])) sink = n + k;
    }
    if (sink == V) throw numeric_error("exact solver found no augmenting path");

    // bottleneck along the path
    double amount = demand[sink - n];
    std::size_t v = sink;
    while (pred[v] >= 0) {
      const auto u = static_cast<std::size_t>(pred[v]);
      if (u >= n) amount = std::min(amount, flow(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(u - n)));
      v = u;
    }
    amount = std::min(amount, supply[v]);
    const std::size_t root = v;
    v = sink;
    while (pred[v] >= 0) {
      const auto u = static_cast<std::size_t>(pred[v]);
      if (u < n) {
        flow(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v - n)) += amount;
      } else {
        flow(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(u - n)) -= amount;
      }
      v = u;
    }
    supply[root] -= amount;
    demand[sink - n] -= amount;
  }

  ExactOt out;
  out.coupling = flow.cwiseMax(0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < m; ++k) {
      out.value += out.coupling(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) * cost(i, k);
    }
  }
  return out;
}

}  // namespace otmatch
