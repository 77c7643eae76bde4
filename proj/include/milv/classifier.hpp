#pragma once

#include "milv/binary_io.hpp"
#include "milv/core.hpp"
#include "milv/parallel.hpp"
#include "milv/random.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace milv::classifier {

enum class Loss : std::uint32_t { hinge = 0, square = 1 };

inline std::string to_string(Loss loss) { return loss == Loss::hinge ? "hinge" : "square"; }

inline Loss parse_loss(const std::string& name) {
  if (name == "hinge") return Loss::hinge;
  if (name == "square") return Loss::square;
  throw InvalidArgument("unknown classifier loss '" + name + "' (expected hinge or square)");
}

/// One affine scorer per class: score = w_c . x + b_c.
struct LinearClassifierSet {
  Matrix weights;  // C x F
  Vector biases;   // C
  Loss trained_loss = Loss::hinge;

  Index num_classes() const { return weights.rows(); }
  Index feature_dim() const { return weights.cols(); }

  bool operator==(const LinearClassifierSet& o) const {
    return weights == o.weights && biases == o.biases && trained_loss == o.trained_loss;
  }
};

struct TrainConfig {
  Loss loss = Loss::hinge;
  double reg = 1e-4;
  double learning_rate = 0.1;
  int epochs = 200;
  std::uint64_t seed = 0;
};

struct TrainResult {
  LinearClassifierSet model;
  /// Total regularized objective (summed over classes) per epoch, starting at the initial weights.
  std::vector<double> trace;
  /// Classes lacking positives or negatives; their scorer is the constant -1 or +1.
  std::vector<std::size_t> constant_classes;
};

/// Mean over rows of the squared error between probability rows:
/// (1/n) sum_i sum_j (p_ij - phat_ij)^2.
inline double square_loss(const Eigen::Ref<const Matrix>& predicted, const Eigen::Ref<const Matrix>& targets) {
  detail::require(predicted.rows() == targets.rows() && predicted.cols() == targets.cols(),
                  "square_loss: shape mismatch " + detail::shape(predicted.rows(), predicted.cols()) + " vs " +
                      detail::shape(targets.rows(), targets.cols()));
  detail::require(predicted.rows() >= 1, "square_loss: no rows");
  return (predicted - targets).squaredNorm() / static_cast<double>(predicted.rows());
}

/// d square_loss / d predicted = 2 (phat - p) / n.
inline Matrix square_loss_gradient(const Eigen::Ref<const Matrix>& predicted, const Eigen::Ref<const Matrix>& targets) {
  detail::require(predicted.rows() == targets.rows() && predicted.cols() == targets.cols(),
                  "square_loss: shape mismatch");
  return 2.0 * (predicted - targets) / static_cast<double>(predicted.rows());
}

/// p_i = y_i / ||y_i||_1; every row must carry at least one positive.
inline Matrix probability_targets(const Eigen::Ref<const Matrix>& labels) {
  Matrix out(labels.rows(), labels.cols());
  for (Index i = 0; i < labels.rows(); ++i) {
    const double total = labels.row(i).sum();
    detail::require(total > 0.0, "probability target undefined for an all-zero label row " + std::to_string(i));
    out.row(i) = labels.row(i) / total;
  }
  return out;
}

/// Raw affine scores, n x C.
inline Matrix predict(const LinearClassifierSet& model, const Eigen::Ref<const Matrix>& features) {
  detail::require(features.cols() == model.feature_dim(), "classifier: feature dimension " +
                                                              std::to_string(features.cols()) + " does not match model " +
                                                              std::to_string(model.feature_dim()));
  Matrix scores(features.rows(), model.num_classes());
  // Fixed-order dot products: a row scores the same bits alone or in a batch.
  parallel_for(static_cast<std::size_t>(features.rows()), [&](std::size_t i) {
    const auto r = static_cast<Index>(i);
    for (Index c = 0; c < model.num_classes(); ++c) {
      double acc = 0.0;
      for (Index f = 0; f < model.feature_dim(); ++f) acc += model.weights(c, f) * features(r, f);
      scores(r, c) = acc + model.biases(c);
    }
  }, 16);
  return scores;
}

namespace internal {

/// Training-time scores through one matrix product.
inline Matrix batch_scores(const LinearClassifierSet& model, const Eigen::Ref<const Matrix>& features) {
  Matrix scores = features * model.weights.transpose();
  scores.rowwise() += model.biases.transpose();
  return scores;
}

}  // namespace internal

/// One-vs-all training by full-batch gradient descent on
///   hinge:  (1/n) sum_i max(0, 1 - t_ic s_ic) + reg/2 ||w_c||^2, t = +/-1
///   square: (1/n) sum_i (p_ic - s_ic)^2     + reg/2 ||w_c||^2, p = y / ||y||_1
/// with s_ic = w_c . x_i + b_c. Classes are independent; they are stepped
/// together so each epoch is one matrix product. Weights start from a small
/// seeded Gaussian; the lowest-objective iterate per class is returned.
inline TrainResult train_ova(const Eigen::Ref<const Matrix>& features, const Eigen::Ref<const Matrix>& labels,
                             const TrainConfig& cfg) {
  const Index n = features.rows();
  const Index F = features.cols();
  const Index C = labels.cols();
  detail::require(n >= 2, "classifier: need at least 2 training rows");
  detail::require(F >= 1 && C >= 1, "classifier: degenerate shapes");
  detail::require(labels.rows() == n, "classifier: features/labels row mismatch");
  detail::require_finite(features, "classifier: features");
  detail::require(cfg.reg >= 0.0 && cfg.learning_rate > 0.0 && cfg.epochs >= 0, "classifier: invalid config");
  for (Index i = 0; i < n; ++i)
    for (Index c = 0; c < C; ++c)
      detail::require(labels(i, c) == 0.0 || labels(i, c) == 1.0, "classifier: labels must be 0/1");

  const Matrix targets = cfg.loss == Loss::hinge ? Matrix((2.0 * labels.array() - 1.0).matrix())
                                                 : probability_targets(labels);
  const double inv_n = 1.0 / static_cast<double>(n);

  TrainResult result;
  std::vector<bool> active(static_cast<std::size_t>(C), true);
  for (Index c = 0; c < C; ++c) {
    const double positives = labels.col(c).sum();
    if (positives == 0.0 || positives == static_cast<double>(n)) {
      active[static_cast<std::size_t>(c)] = false;
      result.constant_classes.push_back(static_cast<std::size_t>(c));
    }
  }

  Rng rng(cfg.seed);
  LinearClassifierSet current{Matrix(C, F), Vector::Zero(C), cfg.loss};
  for (Index c = 0; c < C; ++c)
    for (Index f = 0; f < F; ++f) current.weights(c, f) = 1e-3 * rng.normal();

  // Per-class objective and gradient with respect to the scores.
  auto objective = [&](const Matrix& scores, Vector& per_class, Matrix& score_grad) {
    score_grad.resize(n, C);
    for (Index c = 0; c < C; ++c) {
      double total = 0.0;
      for (Index i = 0; i < n; ++i) {
        const double s = scores(i, c);
        const double t = targets(i, c);
        if (cfg.loss == Loss::hinge) {
          const double margin = 1.0 - t * s;
          total += std::max(0.0, margin);
          score_grad(i, c) = margin > 0.0 ? -t * inv_n : 0.0;
        } else {
          total += (t - s) * (t - s);
          score_grad(i, c) = 2.0 * (s - t) * inv_n;
        }
      }
      per_class(c) = total * inv_n + 0.5 * cfg.reg * current.weights.row(c).squaredNorm();
    }
  };

  Vector per_class(C);
  Matrix score_grad;
  objective(internal::batch_scores(current, features), per_class, score_grad);
  LinearClassifierSet best = current;
  Vector best_obj = per_class;
  result.trace.push_back(per_class.sum());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const Matrix weight_grad = score_grad.transpose() * features + cfg.reg * current.weights;
    const Vector bias_grad = score_grad.colwise().sum().transpose();
    current.weights -= cfg.learning_rate * weight_grad;
    current.biases -= cfg.learning_rate * bias_grad;
    objective(internal::batch_scores(current, features), per_class, score_grad);
    result.trace.push_back(per_class.sum());
    for (Index c = 0; c < C; ++c)
      if (per_class(c) < best_obj(c)) {
        best_obj(c) = per_class(c);
        best.weights.row(c) = current.weights.row(c);
        best.biases(c) = current.biases(c);
      }
  }

  for (Index c = 0; c < C; ++c) {
    if (active[static_cast<std::size_t>(c)]) continue;
    best.weights.row(c).setZero();
    best.biases(c) = labels.col(c).sum() == 0.0 ? -1.0 : 1.0;
  }
  result.model = std::move(best);
  return result;
}

// ---------------------------------------------------------------------------
// "MILC" u32 version=1, u32 C, u32 F, weights (C x F), biases (C), u32 loss tag.

inline std::string encode(const LinearClassifierSet& m) {
  detail::require(m.biases.size() == m.num_classes(), "classifier: bias count mismatch");
  detail::require(m.weights.allFinite() && m.biases.allFinite(), "classifier: non-finite parameter");
  io::ByteWriter w;
  w.magic("MILC", 1);
  w.u32(io::checked_u32(m.num_classes(), "C"));
  w.u32(io::checked_u32(m.feature_dim(), "F"));
  w.f64_block(m.weights);
  w.f64_block(m.biases.transpose());
  w.u32(static_cast<std::uint32_t>(m.trained_loss));
  return w.buffer();
}

inline LinearClassifierSet decode(std::string bytes) {
  io::ByteReader r(std::move(bytes));
  r.magic("MILC", 1);
  const auto C = r.u32("C");
  const auto F = r.u32("F");
  if (C == 0 || F == 0) r.fail("malformed header: C and F must be positive");
  r.expect_payload(static_cast<std::uint64_t>(C) * (F + 1), 8, "classifier parameters");
  LinearClassifierSet m{Matrix(C, F), Vector(C), Loss::hinge};
  r.f64_block(m.weights, "weights");
  r.f64_block(m.biases, "biases");
  const auto at = r.offset();
  const auto tag = r.u32("loss tag");
  if (tag > 1) throw FormatError("unknown loss tag " + std::to_string(tag), at);
  m.trained_loss = static_cast<Loss>(tag);
  r.expect_end();
  return m;
}

inline void save(const LinearClassifierSet& m, const std::filesystem::path& path) { io::write_file(path, encode(m)); }
inline LinearClassifierSet load(const std::filesystem::path& path) { return decode(io::read_file(path)); }

}  // namespace milv::classifier
