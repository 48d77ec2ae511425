#pragma once

// Shared dense computations and graph containers: feature matrices, squared
// Euclidean distance matrices, directed neighbor lists and symmetric weighted
// graphs with a matrix-free Laplacian.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace vknng {

using Index = std::ptrdiff_t;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Invalid argument or malformed input data.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// File system or stream failure.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

template <typename... Parts>
std::string concat(Parts&&... parts) {
  std::ostringstream oss;
  (oss << ... << std::forward<Parts>(parts));
  return oss.str();
}

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

}  // namespace detail

/// N observations (rows = nodes) by D features.
class FeatureMatrix {
 public:
  explicit FeatureMatrix(Matrix data) : data_(std::move(data)) {
    detail::require(data_.rows() >= 1 && data_.cols() >= 1,
                    "feature matrix must have at least one row and one column");
    detail::require(data_.allFinite(), "feature matrix contains non-finite entries");
  }

  const Matrix& data() const noexcept { return data_; }
  Index nodes() const noexcept { return data_.rows(); }
  Index dims() const noexcept { return data_.cols(); }

 private:
  Matrix data_;
};

/// N x N squared Euclidean distances; exactly symmetric with a zero diagonal.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;

  /// Takes ownership of `z` after checking shape, symmetry and sign.
  explicit DistanceMatrix(Matrix z) : z_(std::move(z)) {
    detail::require(z_.rows() == z_.cols() && z_.rows() >= 1, "distance matrix must be square");
    detail::require(z_.allFinite(), "distance matrix contains non-finite entries");
    const Index n = z_.rows();
    for (Index i = 0; i < n; ++i) {
      detail::require(z_(i, i) == 0.0, "distance matrix diagonal must be zero");
      for (Index j = i + 1; j < n; ++j) {
        const double a = z_(i, j);
        const double b = z_(j, i);
        detail::require(a >= 0.0 && b >= 0.0, "distance matrix entries must be non-negative");
        detail::require(std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)}),
                        "distance matrix must be symmetric");
      }
    }
  }

  Index size() const noexcept { return z_.rows(); }
  double operator()(Index i, Index j) const { return z_(i, j); }
  const Matrix& matrix() const noexcept { return z_; }
  auto row(Index i) const { return z_.row(i); }

 private:
  Matrix z_;
};

/// Row Gram matrix X X^T (rows = nodes).
inline Matrix compute_covariance(const FeatureMatrix& x) {
  const Matrix& d = x.data();
  Matrix sigma = d * d.transpose();
  // The product is symmetric up to rounding; copy the upper triangle down.
  sigma.triangularView<Eigen::StrictlyLower>() = sigma.transpose();
  return sigma;
}

/// Squared distances from the Gram matrix: z = diag(S) 1^T + 1 diag(S)^T - 2 S.
/// Rounding negatives are clamped to zero and the result is averaged with its
/// transpose so the invariants hold exactly.
inline DistanceMatrix compute_distance_matrix(const FeatureMatrix& x) {
  const Matrix sigma = compute_covariance(x);
  const Index n = sigma.rows();
  const Vector sq = sigma.diagonal();
  Matrix z(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      z(i, j) = std::max(0.0, sq[i] + sq[j] - 2.0 * sigma(i, j));
    }
  }
  Matrix sym = 0.5 * (z + z.transpose());
  sym.diagonal().setZero();
  return DistanceMatrix(std::move(sym));
}

/// Elementwise square root, i.e. plain Euclidean distances. Used for the
/// "sum of radii" reading of the distance budget.
inline DistanceMatrix euclidean_from_squared(const DistanceMatrix& z) {
  return DistanceMatrix(z.matrix().cwiseSqrt());
}

enum class RbfMode { squared_distance, euclidean_distance };

/// exp(-gamma * z) for squared distance z (or exp(-gamma * sqrt(z))).
inline double rbf_weight(double z, double gamma, RbfMode mode = RbfMode::squared_distance) {
  detail::require(z >= 0.0, "rbf_weight: distance must be non-negative");
  detail::require(gamma > 0.0, "rbf_weight: gamma must be positive");
  const double arg = mode == RbfMode::squared_distance ? z : std::sqrt(z);
  return std::exp(-gamma * arg);
}

struct Edge {
  Index target;
  double weight;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Per-node out-edge lists before symmetrization.
class DirectedNeighborGraph {
 public:
  explicit DirectedNeighborGraph(Index n = 0) : out_(static_cast<std::size_t>(n)) {}

  explicit DirectedNeighborGraph(std::vector<std::vector<Edge>> out) : out_(std::move(out)) {
    const Index n = nodes();
    for (Index i = 0; i < n; ++i) {
      auto targets = std::vector<Index>();
      for (const Edge& e : out_[i]) {
        detail::require(e.target >= 0 && e.target < n, "edge target out of range");
        detail::require(e.target != i, "self-loops are not allowed");
        detail::require(e.weight > 0.0 && e.weight <= 1.0, "edge weight must lie in (0, 1]");
        targets.push_back(e.target);
      }
      std::sort(targets.begin(), targets.end());
      detail::require(std::adjacent_find(targets.begin(), targets.end()) == targets.end(),
                      "duplicate edge targets");
    }
  }

  Index nodes() const noexcept { return static_cast<Index>(out_.size()); }
  const std::vector<Edge>& neighbors(Index i) const { return out_[static_cast<std::size_t>(i)]; }
  Index out_degree(Index i) const { return static_cast<Index>(neighbors(i).size()); }

  std::size_t edge_count() const noexcept {
    std::size_t total = 0;
    for (const auto& list : out_) total += list.size();
    return total;
  }

  friend bool operator==(const DirectedNeighborGraph&, const DirectedNeighborGraph&) = default;

 private:
  std::vector<std::vector<Edge>> out_;
};

/// Replaces every edge weight by the RBF of its squared distance.
inline DirectedNeighborGraph apply_rbf_weights(const DirectedNeighborGraph& g, const DistanceMatrix& z,
                                               double gamma, RbfMode mode = RbfMode::squared_distance) {
  detail::require(g.nodes() == z.size(), "graph and distance matrix sizes differ");
  std::vector<std::vector<Edge>> out(static_cast<std::size_t>(g.nodes()));
  for (Index i = 0; i < g.nodes(); ++i) {
    for (const Edge& e : g.neighbors(i)) {
      const double w = rbf_weight(z(i, e.target), gamma, mode);
      // exp underflows to zero for very distant pairs; keep the edge with the
      // smallest positive weight so the topology is unchanged.
      out[i].push_back({e.target, std::max(w, std::numeric_limits<double>::min())});
    }
  }
  return DirectedNeighborGraph(std::move(out));
}

/// Symmetric weighted graph stored in compressed rows, neighbors sorted by index.
class UndirectedGraph {
 public:
  UndirectedGraph() = default;

  /// Builds from a list of (i, j, w) with i != j; each unordered pair at most once.
  UndirectedGraph(Index n, const std::vector<std::tuple<Index, Index, double>>& edges) {
    detail::require(n >= 0, "negative node count");
    std::vector<std::vector<Edge>> rows(static_cast<std::size_t>(n));
    for (const auto& [i, j, w] : edges) {
      detail::require(i >= 0 && i < n && j >= 0 && j < n, "edge endpoint out of range");
      detail::require(i != j, "self-loops are not allowed");
      detail::require(w > 0.0 && std::isfinite(w), "undirected edge weights must be positive");
      rows[i].push_back({j, w});
      rows[j].push_back({i, w});
    }
    offsets_.assign(static_cast<std::size_t>(n) + 1, 0);
    degrees_ = Vector::Zero(n);
    for (Index i = 0; i < n; ++i) {
      auto& r = rows[i];
      std::sort(r.begin(), r.end(), [](const Edge& a, const Edge& b) { return a.target < b.target; });
      for (std::size_t k = 1; k < r.size(); ++k) {
        detail::require(r[k].target != r[k - 1].target, "duplicate undirected edge");
      }
      offsets_[i + 1] = offsets_[i] + r.size();
      for (const Edge& e : r) {
        targets_.push_back(e.target);
        weights_.push_back(e.weight);
        degrees_[i] += e.weight;
      }
    }
  }

  Index nodes() const noexcept { return degrees_.size(); }
  std::size_t edge_count() const noexcept { return targets_.size() / 2; }
  const Vector& degrees() const noexcept { return degrees_; }

  /// Number of incident edges (unweighted).
  Index edge_degree(Index i) const {
    return static_cast<Index>(offsets_[i + 1] - offsets_[i]);
  }

  template <typename Fn>
  void for_each_neighbor(Index i, Fn&& fn) const {
    for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) fn(targets_[k], weights_[k]);
  }

  /// Weight of edge (i, j), zero if absent.
  double weight(Index i, Index j) const {
    const auto first = targets_.begin() + static_cast<std::ptrdiff_t>(offsets_[i]);
    const auto last = targets_.begin() + static_cast<std::ptrdiff_t>(offsets_[i + 1]);
    const auto it = std::lower_bound(first, last, j);
    if (it == last || *it != j) return 0.0;
    return weights_[static_cast<std::size_t>(it - targets_.begin())];
  }

  /// Edges with i < j in row-major order.
  std::vector<std::tuple<Index, Index, double>> edges() const {
    std::vector<std::tuple<Index, Index, double>> out;
    out.reserve(edge_count());
    for (Index i = 0; i < nodes(); ++i) {
      for_each_neighbor(i, [&](Index j, double w) {
        if (i < j) out.emplace_back(i, j, w);
      });
    }
    return out;
  }

 private:
  std::vector<std::size_t> offsets_{0};
  std::vector<Index> targets_;
  std::vector<double> weights_;
  Vector degrees_;
};

enum class SymmetrizeRule { max, min, mean };

/// Absent reverse edges count as weight 0 for max and mean; min drops one-sided edges.
inline UndirectedGraph symmetrize(const DirectedNeighborGraph& g, SymmetrizeRule rule = SymmetrizeRule::max) {
  const Index n = g.nodes();
  std::vector<std::vector<Edge>> sorted(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    sorted[i] = g.neighbors(i);
    std::sort(sorted[i].begin(), sorted[i].end(),
              [](const Edge& a, const Edge& b) { return a.target < b.target; });
  }
  const auto lookup = [&](Index i, Index j) {
    const auto& r = sorted[i];
    const auto it = std::lower_bound(r.begin(), r.end(), j,
                                     [](const Edge& e, Index t) { return e.target < t; });
    return (it != r.end() && it->target == j) ? it->weight : 0.0;
  };

  std::vector<std::tuple<Index, Index, double>> edges;
  for (Index i = 0; i < n; ++i) {
    for (const Edge& e : sorted[i]) {
      const Index j = e.target;
      const double wij = e.weight;
      const double wji = lookup(j, i);
      // Visit each unordered pair once: from the smaller index, or from the
      // only side that has the edge.
      if (wji > 0.0 && j < i) continue;
      double w = 0.0;
      switch (rule) {
        case SymmetrizeRule::max: w = std::max(wij, wji); break;
        case SymmetrizeRule::min: w = std::min(wij, wji); break;
        case SymmetrizeRule::mean: w = 0.5 * (wij + wji); break;
      }
      if (w > 0.0) edges.emplace_back(std::min(i, j), std::max(i, j), w);
    }
  }
  return UndirectedGraph(n, edges);
}

/// (D - W) * signal without forming L.
inline Matrix laplacian_apply(const UndirectedGraph& g, const Matrix& signal) {
  detail::require(signal.rows() == g.nodes(),
                  detail::concat("laplacian_apply: signal has ", signal.rows(), " rows, graph has ",
                                 g.nodes(), " nodes"));
  Matrix out(signal.rows(), signal.cols());
  for (Index i = 0; i < g.nodes(); ++i) {
    auto row = out.row(i);
    row.setZero();
    g.for_each_neighbor(i, [&](Index j, double w) { row += w * (signal.row(i) - signal.row(j)); });
  }
  return out;
}

/// 2 |E| / N, counting edges rather than weight.
inline double average_degree(const UndirectedGraph& g) {
  if (g.nodes() == 0) return 0.0;
  return 2.0 * static_cast<double>(g.edge_count()) / static_cast<double>(g.nodes());
}

// Edge-list text format: "i j w" per line, 0-based, i < j for undirected graphs.

inline void write_edge_list(std::ostream& os, const UndirectedGraph& g) {
  os << std::setprecision(17);
  for (const auto& [i, j, w] : g.edges()) os << i << ' ' << j << ' ' << w << '\n';
}

inline void write_edge_list(std::ostream& os, const DirectedNeighborGraph& g) {
  os << std::setprecision(17);
  for (Index i = 0; i < g.nodes(); ++i) {
    for (const Edge& e : g.neighbors(i)) os << i << ' ' << e.target << ' ' << e.weight << '\n';
  }
}

template <typename Graph>
void write_edge_list(const std::string& path, const Graph& g) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path + " for writing");
  write_edge_list(os, g);
  if (!os) throw IoError("failed writing " + path);
}

/// Parses an undirected edge list; `n` is the node count.
inline UndirectedGraph read_edge_list(std::istream& is, Index n) {
  std::vector<std::tuple<Index, Index, double>> edges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    Index i = 0;
    Index j = 0;
    double w = 0.0;
    if (!(ls >> i >> j >> w)) {
      throw ValidationError(detail::concat("edge list line ", line_no, ": expected 'i j w'"));
    }
    detail::require(i < j, detail::concat("edge list line ", line_no, ": expected i < j"));
    edges.emplace_back(i, j, w);
  }
  return UndirectedGraph(n, edges);
}

}  // namespace vknng
