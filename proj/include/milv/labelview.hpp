#pragma once

#include "milv/binary_io.hpp"
#include "milv/datamodel.hpp"
#include "milv/metric.hpp"
#include "milv/parallel.hpp"
#include "milv/pca.hpp"

#include <algorithm>
#include <filesystem>
#include <set>
#include <vector>

namespace milv::labelview {

/// Strong-label exemplars in the learned metric space.
struct CandidatePool {
  Matrix features;                    // m x d_out
  std::vector<std::uint32_t> classes;  // m, one class per exemplar
  std::size_t num_classes = 0;

  Index size() const { return features.rows(); }
  Index dim() const { return features.cols(); }

  std::set<std::uint32_t> class_coverage() const { return {classes.begin(), classes.end()}; }

  bool operator==(const CandidatePool&) const = default;
};

struct Neighbor {
  Index index = 0;
  double distance = 0.0;

  bool operator==(const Neighbor&) const = default;
};

inline CandidatePool build_pool(const ExemplarSet& exemplars, const metric::MetricProjection& W) {
  detail::require(exemplars.size() >= 1, "labelview: exemplar list is empty");
  exemplars.validate();
  detail::require(exemplars.features.cols() == W.input_dim(),
                  "labelview: exemplar dimension " + std::to_string(exemplars.features.cols()) +
                      " does not match projection input " + std::to_string(W.input_dim()));
  return CandidatePool{metric::project(W, exemplars.features), exemplars.classes, exemplars.num_classes};
}

/// Exact k nearest pool entries by Euclidean distance, ascending, ties broken
/// by lower pool index.
inline std::vector<Neighbor> knn(const CandidatePool& pool, const Eigen::Ref<const RowVector>& query, Index k) {
  detail::require(query.size() == pool.dim(), "labelview: query dimension " + std::to_string(query.size()) +
                                                  " does not match pool dimension " + std::to_string(pool.dim()));
  detail::require(k >= 1, "labelview: k must be >= 1");
  detail::require(k <= pool.size(), "labelview: k=" + std::to_string(k) + " exceeds pool size " +
                                        std::to_string(pool.size()));
  std::vector<std::pair<double, Index>> dist(static_cast<std::size_t>(pool.size()));
  for (Index i = 0; i < pool.size(); ++i) {
    double acc = 0.0;
    for (Index d = 0; d < pool.dim(); ++d) {
      const double diff = query(d) - pool.features(i, d);
      acc += diff * diff;
    }
    dist[static_cast<std::size_t>(i)] = {acc, i};
  }
  // (squared distance, index) pairs compare lexicographically: exactly the tie-break we want.
  std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
  std::vector<Neighbor> out;
  out.reserve(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; ++i) {
    const auto& [sq, idx] = dist[static_cast<std::size_t>(i)];
    out.push_back({idx, std::sqrt(sq)});
  }
  return out;
}

/// Concatenated one-hot labels of the k nearest pool entries (k*C values).
inline Vector encode_label_view(const CandidatePool& pool, const Eigen::Ref<const RowVector>& query, Index k) {
  const auto C = static_cast<Index>(pool.num_classes);
  Vector out = Vector::Zero(k * C);
  const auto neighbors = knn(pool, query, k);
  for (Index t = 0; t < k; ++t)
    out(t * C + pool.classes[static_cast<std::size_t>(neighbors[static_cast<std::size_t>(t)].index)]) = 1.0;
  return out;
}

/// [feature_view, lambda * label_view].
inline Vector fuse(const Eigen::Ref<const Vector>& feature_view, const Eigen::Ref<const Vector>& label_view,
                   double lambda) {
  detail::require(lambda > 0.0 && std::isfinite(lambda), "labelview: lambda must be > 0");
  Vector out(feature_view.size() + label_view.size());
  out << feature_view, lambda * label_view;
  return out;
}

/// Label-view settings shared by fitting and encoding.
struct LabelViewSetup {
  const metric::MetricProjection* projection = nullptr;
  const CandidatePool* pool = nullptr;
  Index k = 50;
  double lambda = 1.0;
};

/// Per-proposal fused rows: PCA-projected raw feature, then lambda times the
/// label view of the W-projected raw feature. Without a label-view setup the
/// rows are the feature view alone.
inline Matrix encode_bag_views(const Eigen::Ref<const Matrix>& instances, const pca::PcaModel& feature_pca,
                               const LabelViewSetup* lv) {
  const Matrix feature_view = pca::project(feature_pca, instances);
  if (lv == nullptr) return feature_view;
  detail::require(lv->projection != nullptr && lv->pool != nullptr, "labelview: incomplete label-view setup");
  detail::require(lv->projection->output_dim() == lv->pool->dim(),
                  "labelview: projection output does not match pool dimension");
  detail::require(lv->lambda > 0.0 && std::isfinite(lv->lambda), "labelview: lambda must be > 0");
  const Matrix metric_view = metric::project(*lv->projection, instances);
  const Index C = static_cast<Index>(lv->pool->num_classes);
  Matrix out(instances.rows(), feature_view.cols() + lv->k * C);
  for (Index j = 0; j < instances.rows(); ++j)
    out.row(j) = fuse(feature_view.row(j).transpose(), encode_label_view(*lv->pool, metric_view.row(j), lv->k),
                      lv->lambda)
                     .transpose();
  return out;
}

// ---------------------------------------------------------------------------
// "MILQ" u32 version=1, u32 m, u32 d_out, u32 C, features (m x d_out float64),
// m u32 class indices.

inline std::string encode(const CandidatePool& p) {
  detail::require(p.size() >= 1, "labelview: empty pool");
  detail::require(static_cast<Index>(p.classes.size()) == p.size(), "labelview: pool label count mismatch");
  detail::require_finite(p.features, "labelview: pool features");
  io::ByteWriter w;
  w.magic("MILQ", 1);
  w.u32(io::checked_u32(p.size(), "m"));
  w.u32(io::checked_u32(p.dim(), "d_out"));
  w.u32(io::checked_u32(static_cast<Index>(p.num_classes), "C"));
  w.f64_block(p.features);
  for (auto c : p.classes) {
    detail::require(c < p.num_classes, "labelview: pool class out of range");
    w.u32(c);
  }
  return w.buffer();
}

inline CandidatePool decode(std::string bytes) {
  io::ByteReader r(std::move(bytes));
  r.magic("MILQ", 1);
  const auto m = r.u32("m");
  const auto d = r.u32("d_out");
  const auto C = r.u32("C");
  if (m == 0 || d == 0 || C < 2) r.fail("malformed header: need m > 0, d_out > 0, C >= 2");
  r.expect_payload(static_cast<std::uint64_t>(m) * d, 8, "pool features");
  CandidatePool p{Matrix(m, d), std::vector<std::uint32_t>(m), C};
  r.f64_block(p.features, "pool features");
  r.expect_payload(m, 4, "pool labels");
  for (std::uint32_t i = 0; i < m; ++i) {
    const auto at = r.offset();
    p.classes[i] = r.u32("pool label");
    if (p.classes[i] >= C) throw FormatError("pool label out of range", at);
  }
  r.expect_end();
  return p;
}

inline void save(const CandidatePool& p, const std::filesystem::path& path) { io::write_file(path, encode(p)); }
inline CandidatePool load(const std::filesystem::path& path) { return decode(io::read_file(path)); }

}  // namespace milv::labelview
