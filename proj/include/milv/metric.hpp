#pragma once

#include "milv/binary_io.hpp"
#include "milv/core.hpp"
#include "milv/parallel.hpp"
#include "milv/pca.hpp"

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <span>
#include <vector>

namespace milv::metric {

/// Linear map W (d_out x d_in); distances are ||W (a - b)||^2.
struct MetricProjection {
  Matrix W;

  Index input_dim() const { return W.cols(); }
  Index output_dim() const { return W.rows(); }

  bool operator==(const MetricProjection&) const = default;
};

/// eta[i] lists the target neighbors of point i, nearest first.
struct TargetNeighborSet {
  std::vector<std::vector<Index>> eta;
  int khat = 0;

  std::size_t num_pairs() const {
    std::size_t total = 0;
    for (const auto& e : eta) total += e.size();
    return total;
  }
};

struct LmnnConfig {
  double alpha = 1.0;
  int khat = 10;
  Index d_out = 16;
  /// First step length as a fraction of ||W||; adapted by backtracking afterwards.
  double learning_rate = 0.1;
  int epochs = 200;
  /// Recorded for reproducibility; full-batch training draws no random numbers.
  std::uint64_t seed = 0;
  int patience = 20;
  double min_improvement = 1e-9;
};

struct LmnnResult {
  MetricProjection projection;
  /// Loss of the initial W, then of W after every epoch.
  std::vector<double> trace;
  std::size_t best_epoch = 0;
};

namespace internal {

inline void check_inputs(const Eigen::Ref<const Matrix>& points, std::span<const std::uint32_t> classes) {
  detail::require(points.rows() == static_cast<Index>(classes.size()), "lmnn: points/classes length mismatch");
  detail::require_finite(points, "lmnn: points");
}

inline double squared_distance(const Eigen::Ref<const Matrix>& p, Index a, Index b) {
  double acc = 0.0;
  for (Index d = 0; d < p.cols(); ++d) {
    const double diff = p(a, d) - p(b, d);
    acc += diff * diff;
  }
  return acc;
}

}  // namespace internal

/// For each point, the khat nearest same-class points by Euclidean distance in
/// the given space, ties broken by lower index. Singleton classes get no targets.
inline TargetNeighborSet select_target_neighbors(const Eigen::Ref<const Matrix>& points,
                                                 std::span<const std::uint32_t> classes, int khat) {
  internal::check_inputs(points, classes);
  detail::require(khat >= 1, "lmnn: khat must be >= 1");
  const auto n = static_cast<Index>(classes.size());
  TargetNeighborSet out{std::vector<std::vector<Index>>(static_cast<std::size_t>(n)), khat};
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t ii) {
    const auto i = static_cast<Index>(ii);
    std::vector<std::pair<double, Index>> same;
    for (Index j = 0; j < n; ++j)
      if (j != i && classes[static_cast<std::size_t>(j)] == classes[ii])
        same.emplace_back(internal::squared_distance(points, i, j), j);
    const auto take = std::min<std::size_t>(static_cast<std::size_t>(khat), same.size());
    std::partial_sort(same.begin(), same.begin() + static_cast<std::ptrdiff_t>(take), same.end());
    auto& eta = out.eta[ii];
    for (std::size_t t = 0; t < take; ++t) eta.push_back(same[t].second);
  });
  return out;
}

inline Matrix project(const MetricProjection& m, const Eigen::Ref<const Matrix>& points) {
  detail::require(points.cols() == m.input_dim(), "metric: point dimension " + std::to_string(points.cols()) +
                                                      " does not match projection input " +
                                                      std::to_string(m.input_dim()));
  Matrix out(points.rows(), m.output_dim());
  // Fixed-order dot products: a row projects to the same bits alone or in a batch.
  parallel_for(static_cast<std::size_t>(points.rows()), [&](std::size_t i) {
    const auto r = static_cast<Index>(i);
    for (Index o = 0; o < m.output_dim(); ++o) {
      double acc = 0.0;
      for (Index d = 0; d < m.input_dim(); ++d) acc += m.W(o, d) * points(r, d);
      out(r, o) = acc;
    }
  }, 256);
  return out;
}

namespace internal {

struct Evaluation {
  double loss = 0.0;
  Matrix gradient;
};

// Loss = sum_{i, j in eta(i)} D_ij + alpha * sum_{i, j in eta(i), l: class differs} [1 + D_ij - D_il]_+.
//
// The gradient is 2 W X^T (diag(r + c) - A - A^T) X where A_il collects the
// coefficient of the outer product (x_i - x_l)(x_i - x_l)^T and r, c are its
// row and column sums. Each row of A depends only on point i.
inline Evaluation evaluate(const MetricProjection& m, const Eigen::Ref<const Matrix>& points,
                           std::span<const std::uint32_t> classes, const TargetNeighborSet& targets, double alpha,
                           bool with_gradient) {
  check_inputs(points, classes);
  detail::require(points.cols() == m.input_dim(), "lmnn: W input dimension does not match points");
  detail::require(targets.eta.size() == classes.size(), "lmnn: target neighbor set size mismatch");
  detail::require(alpha >= 0.0, "lmnn: alpha must be >= 0");

  const auto n = static_cast<Index>(classes.size());
  const Matrix projected = project(m, points);
  std::vector<double> partial(static_cast<std::size_t>(n), 0.0);
  Matrix coef;
  if (with_gradient) coef = Matrix::Zero(n, n);

  parallel_for(static_cast<std::size_t>(n), [&](std::size_t ii) {
    const auto i = static_cast<Index>(ii);
    const auto& eta = targets.eta[ii];
    if (eta.empty()) return;
    std::vector<double> dist(static_cast<std::size_t>(n));
    for (Index l = 0; l < n; ++l) dist[static_cast<std::size_t>(l)] = squared_distance(projected, i, l);

    double loss = 0.0;
    for (Index j : eta) {
      const double dij = dist[static_cast<std::size_t>(j)];
      loss += dij;
      if (with_gradient) coef(i, j) += 1.0;
      if (alpha == 0.0) continue;
      double active = 0.0;
      for (Index l = 0; l < n; ++l) {
        if (classes[static_cast<std::size_t>(l)] == classes[ii]) continue;
        const double hinge = 1.0 + dij - dist[static_cast<std::size_t>(l)];
        if (hinge > 0.0) {
          loss += alpha * hinge;
          if (with_gradient) {
            active += 1.0;
            coef(i, l) -= alpha;
          }
        }
      }
      if (with_gradient) coef(i, j) += alpha * active;
    }
    partial[ii] = loss;
  }, 8);

  Evaluation out;
  for (double v : partial) out.loss += v;
  if (with_gradient) {
    const Vector degree = coef.rowwise().sum() + coef.colwise().sum().transpose();
    Matrix laplacian = -(coef + coef.transpose());
    laplacian.diagonal() += degree;
    const Matrix inner = points.transpose() * laplacian * points;
    out.gradient = 2.0 * m.W * inner;
  }
  return out;
}

}  // namespace internal

inline double lmnn_loss(const MetricProjection& m, const Eigen::Ref<const Matrix>& points,
                        std::span<const std::uint32_t> classes, const TargetNeighborSet& targets, double alpha) {
  return internal::evaluate(m, points, classes, targets, alpha, false).loss;
}

/// Subgradient of lmnn_loss with respect to W; hinge arguments of exactly zero contribute nothing.
inline Matrix lmnn_gradient(const MetricProjection& m, const Eigen::Ref<const Matrix>& points,
                            std::span<const std::uint32_t> classes, const TargetNeighborSet& targets,
                            double alpha) {
  return internal::evaluate(m, points, classes, targets, alpha, true).gradient;
}

/// Top principal axes of the points as a d_out x d_in starting projection.
inline MetricProjection initial_projection(const Eigen::Ref<const Matrix>& points, Index d_out) {
  detail::require(d_out >= 1 && d_out <= points.cols(), "lmnn: d_out must be in [1, d_in]");
  return MetricProjection{pca::spectrum(points).axes.topRows(d_out)};
}

/// Full-batch gradient descent from the PCA initialization with target
/// neighbors fixed up front. Stops after `patience` epochs without a relative
/// improvement above `min_improvement` and returns the best W seen.
inline LmnnResult train(const Eigen::Ref<const Matrix>& points, std::span<const std::uint32_t> classes,
                        const LmnnConfig& cfg) {
  internal::check_inputs(points, classes);
  detail::require(cfg.alpha >= 0.0, "lmnn: alpha must be >= 0");
  detail::require(cfg.learning_rate > 0.0, "lmnn: learning rate must be > 0");
  detail::require(cfg.epochs >= 0, "lmnn: epochs must be >= 0");
  std::vector<std::uint32_t> distinct(classes.begin(), classes.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  detail::require(distinct.size() >= 2, "lmnn: training needs at least 2 classes");

  const TargetNeighborSet targets = select_target_neighbors(points, classes, cfg.khat);

  LmnnResult result;
  MetricProjection current = initial_projection(points, cfg.d_out);
  auto eval = internal::evaluate(current, points, classes, targets, cfg.alpha, true);
  result.projection = current;
  result.trace.push_back(eval.loss);

  // Backtracking step: the first step moves W by learning_rate * ||W||; a step
  // that raises the loss is rejected and halved, an accepted one grows 5%.
  const double grad_norm = eval.gradient.norm();
  double step = grad_norm > 0.0 ? cfg.learning_rate * current.W.norm() / grad_norm : 0.0;
  int stale = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (eval.loss == 0.0 || step == 0.0) break;
    MetricProjection trial{current.W - step * eval.gradient};
    auto trial_eval = internal::evaluate(trial, points, classes, targets, cfg.alpha, true);
    bool improved = false;
    if (trial_eval.loss < eval.loss) {
      improved = trial_eval.loss < eval.loss - cfg.min_improvement * std::abs(eval.loss);
      current = std::move(trial);
      eval = std::move(trial_eval);
      result.projection = current;
      result.best_epoch = static_cast<std::size_t>(epoch);
      step *= 1.05;
    } else {
      step *= 0.5;
    }
    result.trace.push_back(eval.loss);
    if (improved) {
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// "MILW" u32 version=1, u32 d_out, u32 d_in, W row-major float64.

inline std::string encode(const MetricProjection& m) {
  detail::require_finite(m.W, "metric: W");
  io::ByteWriter w;
  w.magic("MILW", 1);
  w.u32(io::checked_u32(m.output_dim(), "d_out"));
  w.u32(io::checked_u32(m.input_dim(), "d_in"));
  w.f64_block(m.W);
  return w.buffer();
}

inline MetricProjection decode(std::string bytes) {
  io::ByteReader r(std::move(bytes));
  r.magic("MILW", 1);
  const auto d_out = r.u32("d_out");
  const auto d_in = r.u32("d_in");
  if (d_out == 0 || d_in == 0) r.fail("malformed header: dimensions must be positive");
  MetricProjection m{Matrix(d_out, d_in)};
  r.f64_block(m.W, "W");
  r.expect_end();
  return m;
}

inline void save(const MetricProjection& m, const std::filesystem::path& path) { io::write_file(path, encode(m)); }
inline MetricProjection load(const std::filesystem::path& path) { return decode(io::read_file(path)); }

}  // namespace milv::metric
