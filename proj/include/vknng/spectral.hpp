#pragma once

// Combinatorial Laplacian L = D - W and the heat-kernel low-pass filter
// h(lambda) = exp(-tau * lambda), applied exactly through a dense
// eigendecomposition or approximately through a Chebyshev expansion.
//
// With `Spectrum::normalized` the response is exp(-tau * lambda / lambda_max),
// the convention of common GSP toolboxes; tau then no longer depends on the
// scale of the edge weights.

#include "vknng/core.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace vknng {

inline constexpr Index kDefaultDenseCap = 4096;

enum class FilterMethod { exact, chebyshev };

enum class Spectrum { raw, normalized };

struct FilterSpec {
  double tau = 50.0;
  FilterMethod method = FilterMethod::exact;
  int cheb_order = 60;
  Index dense_cap = kDefaultDenseCap;
  Spectrum spectrum = Spectrum::raw;

  void validate() const {
    detail::require(tau > 0.0 && std::isfinite(tau), "tau must be positive");
    detail::require(method != FilterMethod::chebyshev || cheb_order >= 1,
                    "Chebyshev order must be at least 1");
  }
};

inline Matrix build_dense_laplacian(const UndirectedGraph& g, Index dense_cap = kDefaultDenseCap) {
  const Index n = g.nodes();
  detail::require(n <= dense_cap,
                  detail::concat("graph has ", n, " nodes, above the dense cap of ", dense_cap));
  Matrix l = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    l(i, i) = g.degrees()[i];
    g.for_each_neighbor(i, [&](Index j, double w) { l(i, j) = -w; });
  }
  return l;
}

/// U diag(exp(-tau * lambda)) U^T * signals.
inline Matrix filter_exact(const UndirectedGraph& g, const Matrix& signals, const FilterSpec& spec) {
  spec.validate();
  detail::require(signals.rows() == g.nodes(),
                  detail::concat("signal has ", signals.rows(), " rows, graph has ", g.nodes(), " nodes"));
  detail::require(signals.allFinite(), "signal contains non-finite entries");
  if (g.edge_count() == 0) return signals;

  const Eigen::MatrixXd l = build_dense_laplacian(g, spec.dense_cap);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(l);
  if (eig.info() != Eigen::Success) throw std::runtime_error("Laplacian eigendecomposition failed");

  // Eigenvalues of a PSD matrix can come out as tiny negatives.
  Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(0.0);
  if (spec.spectrum == Spectrum::normalized) lambda /= lambda.maxCoeff();
  const Eigen::VectorXd response = (-spec.tau * lambda).array().exp().matrix();
  const Eigen::MatrixXd& u = eig.eigenvectors();
  const Eigen::MatrixXd spectral = response.asDiagonal() * (u.transpose() * signals);
  return u * spectral;
}

/// Upper bound on the largest Laplacian eigenvalue: power iteration padded by
/// 1%, capped by the Gershgorin bound 2 * max weighted degree.
inline double estimate_lambda_max(const UndirectedGraph& g, int max_iterations = 1000) {
  const Index n = g.nodes();
  if (n == 0 || g.edge_count() == 0) return 0.0;
  const double gershgorin = 2.0 * g.degrees().maxCoeff();

  // Fixed pseudo-random start so results do not depend on global RNG state.
  Matrix v(n, 1);
  std::uint64_t state = 0x9E3779B97F4A7C15ull;
  for (Index i = 0; i < n; ++i) {
    state = state * 6364136223846793005ull + 1442695040888963407ull;
    v(i, 0) = static_cast<double>(state >> 11) * 0x1.0p-53 - 0.5;
  }
  v /= v.norm();

  double estimate = 0.0;
  for (int it = 0; it < max_iterations; ++it) {
    Matrix lv = laplacian_apply(g, v);
    const double rayleigh = v.col(0).dot(lv.col(0));
    const double norm = lv.norm();
    if (norm == 0.0) break;
    v = lv / norm;
    if (it > 10 && std::abs(rayleigh - estimate) <= 1e-12 * std::abs(rayleigh)) {
      estimate = rayleigh;
      break;
    }
    estimate = rayleigh;
  }
  return std::min(estimate * 1.01, gershgorin);
}

/// Chebyshev coefficients of exp(-tau * lambda) on [0, lambda_max], with the
/// constant term already halved.
inline std::vector<double> heat_chebyshev_coefficients(double tau, double lambda_max, int order) {
  const int nodes = 4 * (order + 1);
  std::vector<double> c(static_cast<std::size_t>(order) + 1, 0.0);
  for (int j = 0; j < nodes; ++j) {
    const double theta = std::numbers::pi * (j + 0.5) / nodes;
    const double lambda = 0.5 * lambda_max * (std::cos(theta) + 1.0);
    const double f = std::exp(-tau * lambda);
    for (int k = 0; k <= order; ++k) c[k] += f * std::cos(k * theta);
  }
  for (double& ck : c) ck *= 2.0 / nodes;
  c[0] *= 0.5;
  return c;
}

/// Polynomial approximation of the heat kernel using only Laplacian products.
inline Matrix filter_chebyshev(const UndirectedGraph& g, const Matrix& signals, const FilterSpec& spec,
                               double lambda_max) {
  spec.validate();
  detail::require(spec.cheb_order >= 1, "Chebyshev order must be at least 1");
  detail::require(signals.rows() == g.nodes(),
                  detail::concat("signal has ", signals.rows(), " rows, graph has ", g.nodes(), " nodes"));
  detail::require(lambda_max >= 0.0, "lambda_max must be non-negative");
  if (lambda_max == 0.0 || g.edge_count() == 0) return signals;

  // In normalized mode the bound stands in for the true largest eigenvalue.
  const double tau = spec.spectrum == Spectrum::normalized ? spec.tau / lambda_max : spec.tau;
  const auto c = heat_chebyshev_coefficients(tau, lambda_max, spec.cheb_order);
  // Shifted operator L~ = (2 / lambda_max) L - I maps the spectrum into [-1, 1].
  const auto shifted = [&](const Matrix& x) -> Matrix {
    return (2.0 / lambda_max) * laplacian_apply(g, x) - x;
  };

  Matrix t_prev = signals;
  Matrix t_cur = shifted(signals);
  Matrix out = c[0] * t_prev + c[1] * t_cur;
  for (int k = 2; k <= spec.cheb_order; ++k) {
    Matrix t_next = 2.0 * shifted(t_cur) - t_prev;
    out += c[k] * t_next;
    t_prev = std::move(t_cur);
    t_cur = std::move(t_next);
  }
  return out;
}

inline Matrix filter_chebyshev(const UndirectedGraph& g, const Matrix& signals, const FilterSpec& spec) {
  return filter_chebyshev(g, signals, spec, estimate_lambda_max(g));
}

/// Dispatches on spec.method.
inline Matrix heat_filter(const UndirectedGraph& g, const Matrix& signals, const FilterSpec& spec) {
  return spec.method == FilterMethod::exact ? filter_exact(g, signals, spec)
                                            : filter_chebyshev(g, signals, spec);
}

}  // namespace vknng
