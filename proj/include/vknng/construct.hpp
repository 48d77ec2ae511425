#pragma once

// Neighbor graph constructors: fixed k, epsilon ball, and variable k chosen
// per node by a distance budget (or, equivalently, a distance threshold).

#include "vknng/core.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace vknng {

/// Every node's other nodes sorted by distance, ties by ascending index.
class NeighborOrder {
 public:
  NeighborOrder(Index n, std::vector<Index> indices, std::vector<double> distances)
      : n_(n), indices_(std::move(indices)), distances_(std::move(distances)) {}

  Index nodes() const noexcept { return n_; }
  Index width() const noexcept { return n_ - 1; }

  std::span<const Index> indices(Index i) const {
    return {indices_.data() + i * width(), static_cast<std::size_t>(width())};
  }
  std::span<const double> distances(Index i) const {
    return {distances_.data() + i * width(), static_cast<std::size_t>(width())};
  }

 private:
  Index n_;
  std::vector<Index> indices_;
  std::vector<double> distances_;
};

namespace detail {

struct Candidate {
  double distance;
  Index index;

  friend bool operator<(const Candidate& a, const Candidate& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
  }
};

inline std::vector<Candidate> candidates(const DistanceMatrix& z, Index i) {
  std::vector<Candidate> out;
  out.reserve(static_cast<std::size_t>(z.size() - 1));
  for (Index j = 0; j < z.size(); ++j) {
    if (j != i) out.push_back({z(i, j), j});
  }
  return out;
}

/// The `count` nearest candidates of node i in order; O(N + count log count).
inline std::vector<Candidate> nearest(const DistanceMatrix& z, Index i, Index count) {
  auto c = candidates(z, i);
  const auto mid = c.begin() + count;
  if (mid != c.end()) std::nth_element(c.begin(), mid, c.end());
  std::sort(c.begin(), mid);
  c.erase(mid, c.end());
  return c;
}

inline std::vector<Edge> binary_edges(std::span<const Candidate> chosen) {
  std::vector<Edge> out;
  out.reserve(chosen.size());
  for (const Candidate& c : chosen) out.push_back({c.index, 1.0});
  return out;
}

}  // namespace detail

inline NeighborOrder sort_neighbors(const DistanceMatrix& z) {
  const Index n = z.size();
  detail::require(n >= 2, "sort_neighbors needs at least two nodes");
  std::vector<Index> idx;
  std::vector<double> dist;
  idx.reserve(static_cast<std::size_t>(n * (n - 1)));
  dist.reserve(idx.capacity());
  for (Index i = 0; i < n; ++i) {
    auto c = detail::candidates(z, i);
    std::sort(c.begin(), c.end());
    for (const auto& [d, j] : c) {
      idx.push_back(j);
      dist.push_back(d);
    }
  }
  return NeighborOrder(n, std::move(idx), std::move(dist));
}

/// Each node links to its k nearest.
inline DirectedNeighborGraph build_fixed_knn(const NeighborOrder& order, Index k) {
  const Index n = order.nodes();
  detail::require(k >= 1 && k <= n - 1, detail::concat("k must be in [1, ", n - 1, "], got ", k));
  std::vector<std::vector<Edge>> out(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const auto targets = order.indices(i).first(static_cast<std::size_t>(k));
    for (Index j : targets) out[i].push_back({j, 1.0});
  }
  return DirectedNeighborGraph(std::move(out));
}

/// Same result as build_fixed_knn(sort_neighbors(z), k) via partial selection.
inline DirectedNeighborGraph build_fixed_knn(const DistanceMatrix& z, Index k) {
  const Index n = z.size();
  detail::require(n >= 2, "fixed kNN needs at least two nodes");
  detail::require(k >= 1 && k <= n - 1, detail::concat("k must be in [1, ", n - 1, "], got ", k));
  std::vector<std::vector<Edge>> out(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) out[i] = detail::binary_edges(detail::nearest(z, i, k));
  return DirectedNeighborGraph(std::move(out));
}

/// Links i to every j != i with z(i, j) < epsilon. Isolated nodes are allowed.
inline DirectedNeighborGraph build_epsilon_nn(const DistanceMatrix& z, double epsilon) {
  detail::require(epsilon > 0.0, "epsilon must be positive");
  const Index n = z.size();
  std::vector<std::vector<Edge>> out(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (j != i && z(i, j) < epsilon) out[i].push_back({j, 1.0});
    }
  }
  return DirectedNeighborGraph(std::move(out));
}

struct NodeSelection {
  Index k = 0;
  double cum_distance = 0.0;

  friend bool operator==(const NodeSelection&, const NodeSelection&) = default;
};

namespace detail {

inline void check_sorted_input(std::span<const double> sorted_d, Index k_min, Index k_max) {
  require(k_min >= 1 && k_min <= k_max, concat("need 1 <= k_min <= k_max, got k_min=", k_min,
                                               " k_max=", k_max));
  require(static_cast<Index>(sorted_d.size()) >= k_max,
          concat("distance list has ", sorted_d.size(), " entries, fewer than k_max=", k_max));
  for (std::size_t j = 0; j < sorted_d.size(); ++j) {
    require(std::isfinite(sorted_d[j]) && sorted_d[j] >= 0.0,
            "distances must be finite and non-negative");
    require(j == 0 || sorted_d[j - 1] <= sorted_d[j],
            concat("distance list is not non-decreasing at position ", j));
  }
}

inline double prefix_sum(std::span<const double> d, Index k) {
  double s = 0.0;
  for (Index j = 0; j < k; ++j) s += d[static_cast<std::size_t>(j)];
  return s;
}

}  // namespace detail

/// Largest k in [k_min, k_max] whose k smallest distances sum to at most
/// beta. The k_min nearest are always taken, even when they exceed beta.
inline NodeSelection solve_node_budget(std::span<const double> sorted_d, Index k_min, Index k_max,
                                       double beta) {
  detail::check_sorted_input(sorted_d, k_min, k_max);
  detail::require(beta >= 0.0, "beta must be non-negative");  // +inf allowed, NaN rejected

  Index k = k_min;
  double used = detail::prefix_sum(sorted_d, k_min);
  while (k < k_max) {
    const double next = used + sorted_d[static_cast<std::size_t>(k)];
    if (next > beta) break;
    used = next;
    ++k;
  }
  return {k, used};
}

/// Minimizes sum over selected (z_j - alpha): every neighbor strictly closer
/// than alpha is selected, then the count is clamped to [k_min, k_max].
inline NodeSelection solve_node_lagrangian(std::span<const double> sorted_d, Index k_min, Index k_max,
                                           double alpha) {
  detail::check_sorted_input(sorted_d, k_min, k_max);
  detail::require(alpha > 0.0, "alpha must be positive");
  const auto below = std::lower_bound(sorted_d.begin(), sorted_d.end(), alpha) - sorted_d.begin();
  const Index k = std::clamp<Index>(below, k_min, k_max);
  return {k, detail::prefix_sum(sorted_d, k)};
}

/// beta_i = scale * mean_j z(i, j), the mean including the zero diagonal.
inline std::vector<double> select_beta(const DistanceMatrix& z, double scale) {
  detail::require(scale >= 0.0 && std::isfinite(scale), "beta scale must be finite and non-negative");
  const Index n = z.size();
  std::vector<double> beta(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) beta[i] = scale * z.row(i).sum() / static_cast<double>(n);
  return beta;
}

struct VknnParams {
  Index k_min = 1;
  Index k_max = 1;
  std::vector<double> beta;

  void validate(Index n) const {
    detail::require(k_min >= 1 && k_min <= k_max && k_max <= n - 1,
                    detail::concat("need 1 <= k_min <= k_max <= N-1 = ", n - 1, ", got k_min=", k_min,
                                   " k_max=", k_max));
    detail::require(static_cast<Index>(beta.size()) == n,
                    detail::concat("beta has ", beta.size(), " entries for ", n, " nodes"));
    for (double b : beta) detail::require(b >= 0.0, "beta entries must be non-negative");
  }
};

namespace detail {

/// The `width` nearest candidates of every node, sorted with index tie-break.
class NearestTable {
 public:
  NearestTable(const DistanceMatrix& z, Index width) : n_(z.size()), width_(width) {
    require(width >= 1 && width <= n_ - 1, concat("neighbor count must be in [1, ", n_ - 1, "]"));
    cands_.reserve(static_cast<std::size_t>(n_ * width_));
    dists_.reserve(cands_.capacity());
    for (Index i = 0; i < n_; ++i) {
      for (const Candidate& c : nearest(z, i, width_)) {
        cands_.push_back(c);
        dists_.push_back(c.distance);
      }
    }
  }

  Index nodes() const noexcept { return n_; }
  Index width() const noexcept { return width_; }
  std::span<const Candidate> row(Index i) const {
    return {cands_.data() + i * width_, static_cast<std::size_t>(width_)};
  }
  std::span<const double> distances(Index i) const {
    return {dists_.data() + i * width_, static_cast<std::size_t>(width_)};
  }

 private:
  Index n_;
  Index width_;
  std::vector<Candidate> cands_;
  std::vector<double> dists_;
};

inline DirectedNeighborGraph vknn_from_table(const NearestTable& table, const VknnParams& params) {
  std::vector<std::vector<Edge>> out(static_cast<std::size_t>(table.nodes()));
  for (Index i = 0; i < table.nodes(); ++i) {
    const NodeSelection sel =
        solve_node_budget(table.distances(i).first(static_cast<std::size_t>(params.k_max)),
                          params.k_min, params.k_max, params.beta[i]);
    out[i] = binary_edges(table.row(i).first(static_cast<std::size_t>(sel.k)));
  }
  return DirectedNeighborGraph(std::move(out));
}

/// Average degree of symmetrize(g, rule) without building it. Weights are
/// positive, so max and mean keep the union of directions and min keeps the
/// mutual pairs.
inline double symmetrized_average_degree(const DirectedNeighborGraph& g, SymmetrizeRule rule) {
  const Index n = g.nodes();
  if (n == 0) return 0.0;
  std::vector<std::vector<Index>> sorted(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    for (const Edge& e : g.neighbors(i)) sorted[i].push_back(e.target);
    std::sort(sorted[i].begin(), sorted[i].end());
  }
  std::size_t directed = 0;
  std::size_t mutual = 0;  // ordered pairs present in both directions
  for (Index i = 0; i < n; ++i) {
    directed += sorted[i].size();
    for (Index j : sorted[i]) {
      if (std::binary_search(sorted[j].begin(), sorted[j].end(), i)) ++mutual;
    }
  }
  const std::size_t undirected = rule == SymmetrizeRule::min ? mutual / 2 : directed - mutual / 2;
  return 2.0 * static_cast<double>(undirected) / static_cast<double>(n);
}

inline DirectedNeighborGraph knn_from_table(const NearestTable& table, Index k) {
  std::vector<std::vector<Edge>> out(static_cast<std::size_t>(table.nodes()));
  for (Index i = 0; i < table.nodes(); ++i) {
    out[i] = binary_edges(table.row(i).first(static_cast<std::size_t>(k)));
  }
  return DirectedNeighborGraph(std::move(out));
}

}  // namespace detail

/// Per-node selections of the budget rule; only the k_max nearest are examined.
inline std::vector<NodeSelection> select_degrees(const DistanceMatrix& z, const VknnParams& params) {
  params.validate(z.size());
  const detail::NearestTable table(z, params.k_max);
  std::vector<NodeSelection> out(static_cast<std::size_t>(z.size()));
  for (Index i = 0; i < z.size(); ++i) {
    out[i] = solve_node_budget(table.distances(i), params.k_min, params.k_max, params.beta[i]);
  }
  return out;
}

/// Variable-k nearest neighbor graph: node i links to its k_i nearest where
/// k_i solves the budget problem with beta_i. O(N^2 + N k_max log k_max)
/// given the distance matrix.
inline DirectedNeighborGraph build_vknn(const DistanceMatrix& z, const VknnParams& params) {
  params.validate(z.size());
  return detail::vknn_from_table(detail::NearestTable(z, params.k_max), params);
}

// --- degree calibration ------------------------------------------------------

enum class CalibrationStatus { converged, closest, unreachable };

struct Calibration {
  double parameter = 0.0;  ///< beta scale, k or epsilon depending on the method
  double degree = 0.0;     ///< symmetrized average degree at `parameter`
  CalibrationStatus status = CalibrationStatus::unreachable;
  double min_degree = 0.0;  ///< achievable range
  double max_degree = 0.0;
};

inline constexpr double kCalibrationTolerance = 0.5;
inline constexpr int kCalibrationSteps = 40;

namespace detail {

/// Bisection for the smallest parameter in [lo, hi] whose degree reaches
/// target - tol, assuming degree(param) is non-decreasing.
inline Calibration bisect_degree(const std::function<double(double)>& degree, double lo, double hi,
                                 double target) {
  const double tol = kCalibrationTolerance;
  Calibration out;
  out.min_degree = degree(lo);
  out.max_degree = degree(hi);
  if (target < out.min_degree - tol || target > out.max_degree + tol) {
    const bool below = target < out.min_degree;
    out.parameter = below ? lo : hi;
    out.degree = below ? out.min_degree : out.max_degree;
    out.status = CalibrationStatus::unreachable;
    return out;
  }
  if (out.min_degree >= target - tol) {
    out.parameter = lo;
    out.degree = out.min_degree;
  } else {
    double lo_deg = out.min_degree;
    double hi_deg = out.max_degree;
    for (int step = 0; step < kCalibrationSteps; ++step) {
      const double mid = 0.5 * (lo + hi);
      const double d = degree(mid);
      if (d >= target - tol) {
        hi = mid;
        hi_deg = d;
      } else {
        lo = mid;
        lo_deg = d;
      }
    }
    const bool hi_closer = std::abs(hi_deg - target) <= std::abs(lo_deg - target);
    out.parameter = hi_closer ? hi : lo;
    out.degree = hi_closer ? hi_deg : lo_deg;
  }
  out.status = std::abs(out.degree - target) <= tol ? CalibrationStatus::converged
                                                    : CalibrationStatus::closest;
  return out;
}

}  // namespace detail

/// Average degree after symmetrization of build_vknn with beta = scale * row means.
inline double vknn_degree(const DistanceMatrix& z, double scale, Index k_min, Index k_max,
                          SymmetrizeRule rule) {
  const VknnParams params{k_min, k_max, select_beta(z, scale)};
  return average_degree(symmetrize(build_vknn(z, params), rule));
}

/// Finds the beta scale whose symmetrized vkNN graph has average degree
/// within 0.5 of `target_degree`.
inline Calibration calibrate_beta_scale(const DistanceMatrix& z, double target_degree, Index k_min,
                                        Index k_max, SymmetrizeRule rule = SymmetrizeRule::max) {
  const Index n = z.size();
  VknnParams params{k_min, k_max, std::vector<double>(static_cast<std::size_t>(n), 0.0)};
  params.validate(n);
  // Graphs for every trial scale come from the same k_max-nearest lists.
  const detail::NearestTable table(z, k_max);

  // Smallest scale at which every node's budget admits k_max neighbors.
  const auto means = select_beta(z, 1.0);
  double scale_hi = 0.0;
  for (Index i = 0; i < n; ++i) {
    if (means[i] <= 0.0) continue;
    const auto d = table.distances(i);
    scale_hi = std::max(scale_hi, std::accumulate(d.begin(), d.end(), 0.0) / means[i]);
  }
  scale_hi = std::nextafter(scale_hi * (1.0 + 1e-12), std::numeric_limits<double>::infinity());

  const auto degree = [&](double scale) {
    for (Index i = 0; i < n; ++i) params.beta[i] = scale * means[i];
    return detail::symmetrized_average_degree(detail::vknn_from_table(table, params), rule);
  };
  return detail::bisect_degree(degree, 0.0, scale_hi, target_degree);
}

/// Smallest k whose symmetrized kNN degree is within 0.5 of target, else the closest k.
inline Calibration calibrate_knn_k(const DistanceMatrix& z, double target_degree,
                                   SymmetrizeRule rule = SymmetrizeRule::max) {
  const Index n = z.size();
  detail::require(n >= 2, "calibration needs at least two nodes");
  const double tol = kCalibrationTolerance;
  // With the max rule every node keeps at least its own k edges, so k never
  // needs to exceed target + tol; other rules may need the full range.
  const Index k_cap =
      rule == SymmetrizeRule::max
          ? std::clamp<Index>(static_cast<Index>(std::ceil(target_degree + tol)) + 1, 1, n - 1)
          : n - 1;
  const detail::NearestTable table(z, k_cap);
  const auto degree = [&](Index k) {
    return detail::symmetrized_average_degree(detail::knn_from_table(table, k), rule);
  };

  Calibration out;
  out.min_degree = degree(1);
  // k = N - 1 is the complete graph under every rule.
  out.max_degree = static_cast<double>(n - 1);
  if (target_degree < out.min_degree - tol || target_degree > out.max_degree + tol) {
    const bool below = target_degree < out.min_degree;
    out.parameter = below ? 1.0 : static_cast<double>(n - 1);
    out.degree = below ? out.min_degree : out.max_degree;
    out.status = CalibrationStatus::unreachable;
    return out;
  }
  // Degree is non-decreasing in k: binary search the first k reaching target - tol.
  Index lo = 1;
  Index hi = k_cap;
  while (lo < hi) {
    const Index mid = lo + (hi - lo) / 2;
    if (degree(mid) >= target_degree - tol) hi = mid;
    else lo = mid + 1;
  }
  double best_k = static_cast<double>(lo);
  double best_deg = degree(lo);
  if (lo > 1) {
    const double prev = degree(lo - 1);
    if (std::abs(prev - target_degree) < std::abs(best_deg - target_degree)) {
      best_k = static_cast<double>(lo - 1);
      best_deg = prev;
    }
  }
  out.parameter = best_k;
  out.degree = best_deg;
  out.status = std::abs(best_deg - target_degree) <= tol ? CalibrationStatus::converged
                                                         : CalibrationStatus::closest;
  return out;
}

/// Epsilon (squared-distance threshold) for a target average degree. Z is
/// symmetric, so the epsilon graph is already undirected under every rule and
/// its degree is 2 #{i < j : z_ij < eps} / N; the smallest epsilon reaching
/// target - 0.5 is read off the sorted pair distances.
inline Calibration calibrate_epsilon(const DistanceMatrix& z, double target_degree,
                                     SymmetrizeRule rule = SymmetrizeRule::max) {
  const Index n = z.size();
  std::vector<double> pairs;
  pairs.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) pairs.push_back(z(i, j));
  }
  detail::require(!pairs.empty() && *std::max_element(pairs.begin(), pairs.end()) > 0.0,
                  "epsilon calibration needs at least two distinct points");
  std::sort(pairs.begin(), pairs.end());
  const double inf = std::numeric_limits<double>::infinity();
  const auto degree_at = [&](double eps) {
    const auto below = std::lower_bound(pairs.begin(), pairs.end(), eps) - pairs.begin();
    return 2.0 * static_cast<double>(below) / static_cast<double>(n);
  };
  // Positive epsilon just above the m-th smallest pair distance.
  const auto eps_for_pairs = [&](std::size_t m) {
    return m == 0 ? std::numeric_limits<double>::min()
                  : std::max(std::nextafter(pairs[m - 1], inf), std::numeric_limits<double>::min());
  };

  const double tol = kCalibrationTolerance;
  Calibration out;
  out.min_degree = degree_at(eps_for_pairs(0));
  out.max_degree = 2.0 * static_cast<double>(pairs.size()) / static_cast<double>(n);
  if (target_degree < out.min_degree - tol || target_degree > out.max_degree + tol) {
    const bool below = target_degree < out.min_degree;
    out.parameter = eps_for_pairs(below ? 0 : pairs.size());
    out.degree = below ? out.min_degree : out.max_degree;
    out.status = CalibrationStatus::unreachable;
    return out;
  }
  const double needed = std::max(0.0, (target_degree - tol) * static_cast<double>(n) / 2.0);
  const auto m = std::min(pairs.size(), static_cast<std::size_t>(std::ceil(needed)));
  double eps = eps_for_pairs(m);
  double deg = degree_at(eps);
  if (m > 0 && std::abs(deg - target_degree) > tol) {
    // Ties can jump past the band; fall back to the closer side.
    const double below_eps = std::max(pairs[m - 1], std::numeric_limits<double>::min());
    const double below_deg = degree_at(below_eps);
    if (std::abs(below_deg - target_degree) < std::abs(deg - target_degree)) {
      eps = below_eps;
      deg = below_deg;
    }
  }
  out.parameter = eps;
  out.degree = average_degree(symmetrize(build_epsilon_nn(z, eps), rule));
  out.status = std::abs(out.degree - target_degree) <= tol ? CalibrationStatus::converged
                                                           : CalibrationStatus::closest;
  return out;
}

}  // namespace vknng
