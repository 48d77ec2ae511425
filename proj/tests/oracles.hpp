#pragma once

// Independent reference implementations used only by tests. Nothing here
// calls into the code paths it checks.

#include "vknng/core.hpp"

#include <algorithm>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <tuple>
#include <vector>

namespace vknng::oracle {

/// Explicit double loop of dot products.
inline Matrix covariance(const Matrix& x) {
  Matrix s(x.rows(), x.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.rows(); ++j) {
      double acc = 0.0;
      for (Index c = 0; c < x.cols(); ++c) acc += x(i, c) * x(j, c);
      s(i, j) = acc;
    }
  }
  return s;
}

/// ||x_i - x_j||^2 by direct differences.
inline Matrix pairwise_sq_distances(const Matrix& x) {
  Matrix z(x.rows(), x.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.rows(); ++j) {
      double acc = 0.0;
      for (Index c = 0; c < x.cols(); ++c) {
        const double d = x(i, c) - x(j, c);
        acc += d * d;
      }
      z(i, j) = acc;
    }
  }
  return z;
}

struct BudgetSolution {
  Index cardinality = 0;
  double sum = 0.0;
  std::vector<Index> selected;  ///< positions in the input list, ascending
};

/// Exhaustive search over all subsets with size in [k_min, k_max]: maximize
/// the size subject to sum <= beta, then minimize the sum; the k_min clamp
/// applies when no subset of size >= k_min fits. Ties on sum resolve to the
/// lexicographically smallest positions. Lists longer than 20 are refused.
inline BudgetSolution brute_force_node_budget(const std::vector<double>& d, Index k_min, Index k_max,
                                              double beta) {
  const auto n = static_cast<Index>(d.size());
  if (n > 20) throw std::invalid_argument("brute_force_node_budget: list too long");
  BudgetSolution best;
  bool found = false;
  BudgetSolution cheapest_min;  // best subset of size k_min regardless of budget
  bool have_min = false;

  const auto better = [](const BudgetSolution& a, const BudgetSolution& b) {
    if (a.sum != b.sum) return a.sum < b.sum;
    return a.selected < b.selected;
  };

  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    BudgetSolution cand;
    for (Index j = 0; j < n; ++j) {
      if (mask & (1u << j)) {
        cand.selected.push_back(j);
        cand.sum += d[static_cast<std::size_t>(j)];
      }
    }
    cand.cardinality = static_cast<Index>(cand.selected.size());
    if (cand.cardinality < k_min || cand.cardinality > k_max) continue;
    if (cand.cardinality == k_min && (!have_min || better(cand, cheapest_min))) {
      cheapest_min = cand;
      have_min = true;
    }
    if (cand.sum > beta) continue;
    if (!found || cand.cardinality > best.cardinality ||
        (cand.cardinality == best.cardinality && better(cand, best))) {
      best = cand;
      found = true;
    }
  }
  return found ? best : cheapest_min;
}

/// Deterministic random helpers shared by property tests.
class Random {
 public:
  explicit Random(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(rng_);
  }
  Index integer(Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(rng_); }

  Matrix matrix(Index rows, Index cols, double lo = -1.0, double hi = 1.0) {
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
      for (Index j = 0; j < cols; ++j) m(i, j) = uniform(lo, hi);
    }
    return m;
  }

  /// Random undirected graph with edge probability p and weights in (0, 1].
  UndirectedGraph graph(Index n, double p) {
    std::vector<std::tuple<Index, Index, double>> edges;
    for (Index i = 0; i < n; ++i) {
      for (Index j = i + 1; j < n; ++j) {
        if (uniform() < p) edges.emplace_back(i, j, uniform(0.05, 1.0));
      }
    }
    return UndirectedGraph(n, edges);
  }

  /// Random connected graph: a random spanning path plus extra edges.
  UndirectedGraph connected_graph(Index n, double p) {
    std::vector<Index> perm(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng_);
    std::vector<std::vector<bool>> used(static_cast<std::size_t>(n), std::vector<bool>(n, false));
    std::vector<std::tuple<Index, Index, double>> edges;
    const auto add = [&](Index a, Index b) {
      if (a == b || used[a][b]) return;
      used[a][b] = used[b][a] = true;
      edges.emplace_back(std::min(a, b), std::max(a, b), uniform(0.05, 1.0));
    };
    for (Index i = 1; i < n; ++i) add(perm[i - 1], perm[i]);
    for (Index i = 0; i < n; ++i) {
      for (Index j = i + 1; j < n; ++j) {
        if (uniform() < p) add(i, j);
      }
    }
    return UndirectedGraph(n, edges);
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

}  // namespace vknng::oracle
