#pragma once

#include "milv/core.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace milv::eval {

enum class ApMode { all_points, eleven_point };

inline ApMode parse_mode(const std::string& name) {
  if (name == "all" || name == "all-points") return ApMode::all_points;
  if (name == "11" || name == "11-point") return ApMode::eleven_point;
  throw InvalidArgument("unknown AP mode '" + name + "' (expected all or 11)");
}

/// Precision/recall after each rank, plus the summary AP.
struct PrCurve {
  std::vector<double> recall;
  std::vector<double> precision;
  double ap = 0.0;
  ApMode mode = ApMode::all_points;
};

/// Ranks by descending score (equal scores keep their original order) and
/// summarizes the precision/recall curve. All-points mode integrates the
/// monotone precision envelope over recall; 11-point mode averages the
/// envelope at recall 0, 0.1, ..., 1.
inline PrCurve average_precision(std::span<const double> scores, std::span<const std::uint8_t> positives,
                                 ApMode mode = ApMode::all_points) {
  detail::require(scores.size() == positives.size(), "average_precision: scores/labels length mismatch");
  const auto total_pos =
      static_cast<std::size_t>(std::count_if(positives.begin(), positives.end(), [](auto v) { return v != 0; }));
  detail::require(total_pos > 0, "average_precision: no positives, AP undefined");
  for (double s : scores) detail::require(std::isfinite(s), "average_precision: non-finite score");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  PrCurve curve;
  curve.mode = mode;
  const std::size_t n = order.size();
  curve.recall.resize(n);
  curve.precision.resize(n);
  std::vector<std::size_t> true_pos(n);
  std::size_t tp = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (positives[order[r]]) ++tp;
    true_pos[r] = tp;
    curve.recall[r] = static_cast<double>(tp) / static_cast<double>(total_pos);
    curve.precision[r] = static_cast<double>(tp) / static_cast<double>(r + 1);
  }

  std::vector<double> envelope(curve.precision);
  for (std::size_t r = n - 1; r-- > 0;) envelope[r] = std::max(envelope[r], envelope[r + 1]);

  if (mode == ApMode::all_points) {
    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      if (curve.recall[r] != prev_recall) {
        ap += (curve.recall[r] - prev_recall) * envelope[r];
        prev_recall = curve.recall[r];
      }
    }
    curve.ap = ap;
  } else {
    double ap = 0.0;
    std::size_t r = 0;
    for (std::size_t t = 0; t <= 10; ++t) {
      // First rank with recall >= t/10, compared in integers: 10*tp >= t*P.
      while (r < n && 10 * true_pos[r] < t * total_pos) ++r;
      ap += r < n ? envelope[r] : 0.0;
    }
    curve.ap = ap / 11.0;
  }
  return curve;
}

struct MapResult {
  /// Empty entries mark classes without positives (excluded from the mean).
  std::vector<std::optional<double>> per_class;
  double map = 0.0;
  std::vector<std::size_t> excluded;
};

/// Per-class AP over the columns of a score matrix and their unweighted mean.
inline MapResult mean_average_precision(const Eigen::Ref<const Matrix>& scores, const Eigen::Ref<const Matrix>& labels,
                                        ApMode mode = ApMode::all_points) {
  detail::require(scores.rows() == labels.rows() && scores.cols() == labels.cols(),
                  "mean_average_precision: score/label shape mismatch");
  MapResult out;
  double total = 0.0;
  std::size_t included = 0;
  std::vector<double> column(static_cast<std::size_t>(scores.rows()));
  std::vector<std::uint8_t> truth(static_cast<std::size_t>(scores.rows()));
  for (Index c = 0; c < scores.cols(); ++c) {
    bool any = false;
    for (Index i = 0; i < scores.rows(); ++i) {
      column[static_cast<std::size_t>(i)] = scores(i, c);
      truth[static_cast<std::size_t>(i)] = labels(i, c) != 0.0;
      any = any || labels(i, c) != 0.0;
    }
    if (!any) {
      out.per_class.emplace_back();
      out.excluded.push_back(static_cast<std::size_t>(c));
      continue;
    }
    const double ap = average_precision(column, truth, mode).ap;
    out.per_class.emplace_back(ap);
    total += ap;
    ++included;
  }
  detail::require(included > 0, "mean_average_precision: no class has a positive example");
  out.map = total / static_cast<double>(included);
  return out;
}

}  // namespace milv::eval
