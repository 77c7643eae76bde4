#pragma once

#include "milv/binary_io.hpp"
#include "milv/core.hpp"
#include "milv/parallel.hpp"
#include "milv/random.hpp"

#include <algorithm>
#include <filesystem>
#include <limits>
#include <vector>

namespace milv::gmm {

/// Diagonal-covariance Gaussian mixture.
struct GmmModel {
  Vector weights;  // K
  Matrix means;    // K x D
  Matrix stds;     // K x D

  Index num_components() const { return weights.size(); }
  Index dim() const { return means.cols(); }

  void validate() const {
    const Index K = weights.size();
    detail::require(K >= 1, "gmm: model has no components");
    detail::require(means.rows() == K && stds.rows() == K && means.cols() == stds.cols() && means.cols() > 0,
                    "gmm: inconsistent parameter shapes");
    detail::require(weights.allFinite() && means.allFinite() && stds.allFinite(), "gmm: non-finite parameter");
    detail::require((weights.array() > 0.0).all(), "gmm: weights must be positive");
    detail::require(std::abs(weights.sum() - 1.0) <= 1e-12 * static_cast<double>(K) + 1e-12,
                    "gmm: weights must sum to 1");
    detail::require((stds.array() > 0.0).all(), "gmm: standard deviations must be positive");
  }

  bool operator==(const GmmModel& o) const {
    return weights == o.weights && means == o.means && stds == o.stds;
  }
};

struct EmConfig {
  int max_iter = 100;
  /// Stop once the relative log-likelihood gain drops below tol; tol <= 0 runs max_iter.
  double tol = 1e-6;
  std::uint64_t seed = 0;
  double sigma_floor = 1e-4;
};

struct EmResult {
  GmmModel model;
  /// Log-likelihood of the initial model and of the model after every M-step.
  std::vector<double> trace;
};

namespace internal {

inline constexpr std::size_t kRowChunk = 256;

inline void check_points(const GmmModel& model, const Eigen::Ref<const Matrix>& points) {
  detail::require(points.cols() == model.dim(), "gmm: point dimension " + std::to_string(points.cols()) +
                                                    " does not match model dimension " + std::to_string(model.dim()));
  detail::require_finite(points, "gmm: points");
}

/// log(w_k) + log N(x_j; mu_k, sigma_k^2) for every point and component.
inline Matrix log_joint(const GmmModel& model, const Eigen::Ref<const Matrix>& points) {
  const Index n = points.rows();
  const Index K = model.num_components();
  const Index D = model.dim();
  Matrix inv_std = model.stds.cwiseInverse();
  Vector constant(K);
  for (Index k = 0; k < K; ++k)
    constant(k) = std::log(model.weights(k)) - model.stds.row(k).array().log().sum() - 0.5 * static_cast<double>(D) * kLog2Pi;

  const Matrix dense_points = points;  // contiguous row-major copy
  Matrix out(n, K);
  parallel_chunks(static_cast<std::size_t>(n), kRowChunk, [&](std::size_t begin, std::size_t end) {
    for (auto i = static_cast<Index>(begin); i < static_cast<Index>(end); ++i) {
      const double* x = dense_points.row(i).data();
      for (Index k = 0; k < K; ++k) {
        const double* mu = model.means.row(k).data();
        const double* inv = inv_std.row(k).data();
        double acc = 0.0;
        for (Index d = 0; d < D; ++d) {
          const double z = (x[d] - mu[d]) * inv[d];
          acc += z * z;
        }
        out(i, k) = constant(k) - 0.5 * acc;
      }
    }
  });
  return out;
}

/// exp(log_joint - log_norm) row-wise in place. Posteriors below exp(-700)
/// (~1e-304) are set to zero so later sums never touch subnormal numbers.
inline void normalize_rows(Matrix& joint, const Vector& norm) {
  for (Index i = 0; i < joint.rows(); ++i)
    for (Index k = 0; k < joint.cols(); ++k) {
      const double log_post = joint(i, k) - norm(i);
      joint(i, k) = log_post < -700.0 ? 0.0 : std::exp(log_post);
    }
}

/// Row-wise log-sum-exp.
inline Vector log_sum_exp_rows(const Matrix& m) {
  Vector out(m.rows());
  for (Index i = 0; i < m.rows(); ++i) {
    const double peak = m.row(i).maxCoeff();
    out(i) = peak + std::log((m.row(i).array() - peak).exp().sum());
  }
  return out;
}

}  // namespace internal

/// Posterior component probabilities, one row per point, via log-sum-exp.
inline Matrix soft_assign(const GmmModel& model, const Eigen::Ref<const Matrix>& points) {
  internal::check_points(model, points);
  Matrix joint = internal::log_joint(model, points);
  const Vector norm = internal::log_sum_exp_rows(joint);
  internal::normalize_rows(joint, norm);
  return joint;
}

inline double log_likelihood(const GmmModel& model, const Eigen::Ref<const Matrix>& points) {
  internal::check_points(model, points);
  return internal::log_sum_exp_rows(internal::log_joint(model, points)).sum();
}

namespace internal {

/// k-means++ seeding: first center uniform, then proportional to squared
/// distance from the nearest chosen center.
inline Matrix seed_means(const Eigen::Ref<const Matrix>& points, Index K, Rng& rng) {
  const Index n = points.rows();
  Matrix centers(K, points.cols());
  Vector nearest = Vector::Constant(n, std::numeric_limits<double>::infinity());
  Index chosen = static_cast<Index>(rng.uniform_int(0, n - 1));
  for (Index k = 0; k < K; ++k) {
    centers.row(k) = points.row(chosen);
    nearest = nearest.cwiseMin((points.rowwise() - centers.row(k)).rowwise().squaredNorm());
    if (k + 1 == K) break;
    const double total = nearest.sum();
    if (total <= 0.0) {
      chosen = static_cast<Index>(rng.uniform_int(0, n - 1));
      continue;
    }
    const double target = rng.uniform() * total;
    double acc = 0.0;
    chosen = n - 1;
    for (Index i = 0; i < n; ++i) {
      acc += nearest(i);
      if (acc > target && nearest(i) > 0.0) {
        chosen = i;
        break;
      }
    }
  }
  return centers;
}

}  // namespace internal

/// Maximum-likelihood fit by expectation-maximization.
inline EmResult fit_em(const Eigen::Ref<const Matrix>& points, Index K, const EmConfig& cfg = {}) {
  const Index n = points.rows();
  const Index D = points.cols();
  detail::require(K >= 1, "gmm: K must be >= 1");
  detail::require(D >= 1, "gmm: points have no dimensions");
  detail::require(n >= K, "gmm: need at least K points (n=" + std::to_string(n) + ", K=" + std::to_string(K) + ")");
  detail::require(cfg.sigma_floor > 0.0, "gmm: sigma floor must be > 0");
  detail::require(cfg.max_iter >= 0, "gmm: max_iter must be >= 0");
  detail::require_finite(points, "gmm: points");

  const RowVector mean = points.colwise().mean();
  const RowVector global_std =
      ((points.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(n)).sqrt().matrix();
  if (K > 1 && (global_std.array() == 0.0).all())
    throw InvalidArgument("gmm: all points are identical; cannot separate " + std::to_string(K) + " components");

  const Matrix dense = points;
  Rng rng(cfg.seed);
  GmmModel model;
  model.weights = Vector::Constant(K, 1.0 / static_cast<double>(K));
  model.means = internal::seed_means(points, K, rng);
  model.stds = global_std.cwiseMax(cfg.sigma_floor).replicate(K, 1);

  EmResult result;
  // Smallest responsibility mass a component may keep; avoids log(0) weights.
  const double min_mass = 1e-10;

  Matrix joint = internal::log_joint(model, points);
  Vector norm = internal::log_sum_exp_rows(joint);
  result.trace.push_back(norm.sum());

  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    // E-step: responsibilities from the current log-joint.
    internal::normalize_rows(joint, norm);
    const Matrix& gamma = joint;

    // M-step: closed-form weighted moments. Eigen products reduce in a fixed
    // order, so the result does not depend on the worker count.
    Vector mass = gamma.colwise().sum().transpose();
    const Matrix first = gamma.transpose() * points;
    GmmModel next;
    next.means.resize(K, D);
    next.stds.resize(K, D);
    for (Index k = 0; k < K; ++k) {
      if (mass(k) < min_mass) {
        next.means.row(k) = model.means.row(k);
        next.stds.row(k) = model.stds.row(k);
        continue;
      }
      next.means.row(k) = first.row(k) / mass(k);
    }
    // Centered second moments accumulated directly (no E[x^2] - mu^2
    // cancellation), rows visited in order.
    Matrix second = Matrix::Zero(K, D);
    for (Index i = 0; i < n; ++i) {
      const double* x = dense.row(i).data();
      for (Index k = 0; k < K; ++k) {
        const double g = gamma(i, k);
        if (g == 0.0) continue;
        const double* mu = next.means.row(k).data();
        double* acc = second.row(k).data();
        for (Index d = 0; d < D; ++d) {
          const double diff = x[d] - mu[d];
          acc[d] += g * diff * diff;
        }
      }
    }
    for (Index k = 0; k < K; ++k) {
      if (mass(k) < min_mass) continue;
      next.stds.row(k) = (second.row(k) / mass(k)).cwiseSqrt().cwiseMax(cfg.sigma_floor);
    }
    mass = mass.cwiseMax(min_mass);
    next.weights = mass / mass.sum();
    model = std::move(next);

    joint = internal::log_joint(model, points);
    norm = internal::log_sum_exp_rows(joint);
    const double ll = norm.sum();
    const double prev = result.trace.back();
    result.trace.push_back(ll);
    if (cfg.tol > 0.0 && (ll - prev) < cfg.tol * std::abs(prev)) break;
  }
  result.model = std::move(model);
  return result;
}

// ---------------------------------------------------------------------------
// "MILG" u32 version=1, u32 K, u32 D, weights, means, stds (float64 LE).

inline std::string encode(const GmmModel& m) {
  m.validate();
  io::ByteWriter w;
  w.magic("MILG", 1);
  w.u32(io::checked_u32(m.num_components(), "K"));
  w.u32(io::checked_u32(m.dim(), "D"));
  w.f64_block(m.weights.transpose());
  w.f64_block(m.means);
  w.f64_block(m.stds);
  return w.buffer();
}

inline GmmModel decode(std::string bytes) {
  io::ByteReader r(std::move(bytes));
  r.magic("MILG", 1);
  const auto K = r.u32("K");
  const auto D = r.u32("D");
  if (K == 0 || D == 0) r.fail("malformed header: K and D must be positive");
  r.expect_payload(static_cast<std::uint64_t>(K) * (1 + 2ull * D), 8, "mixture parameters");
  GmmModel m{Vector(K), Matrix(K, D), Matrix(K, D)};
  r.f64_block(m.weights, "weights");
  r.f64_block(m.means, "means");
  r.f64_block(m.stds, "stds");
  r.expect_end();
  try {
    m.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(e.what(), r.offset());
  }
  return m;
}

inline void save(const GmmModel& m, const std::filesystem::path& path) { io::write_file(path, encode(m)); }
inline GmmModel load(const std::filesystem::path& path) { return decode(io::read_file(path)); }

}  // namespace milv::gmm
