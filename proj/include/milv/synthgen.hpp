#pragma once

#include "milv/datamodel.hpp"
#include "milv/random.hpp"

#include <algorithm>
#include <cstdio>
#include <utility>

namespace milv::synth {

struct SynthConfig {
  std::uint64_t seed = 0;
  std::size_t num_classes = 6;
  Index feature_dim = 32;
  std::size_t num_bags = 100;
  std::size_t instances_min = 20;
  std::size_t instances_max = 60;
  /// Scale of the class layout: class centers sit at 10 * spread from the origin.
  double class_cluster_spread = 1.0;
  /// Per-coordinate standard deviation of class instances, in units of spread.
  double noise_scale = 1.0;
  double background_fraction = 0.5;
  std::size_t labels_min = 1;
  std::size_t labels_max = 2;
  std::size_t exemplars_per_class = 60;
  /// Classes that receive exemplars; empty means every class.
  std::vector<std::uint32_t> pool_classes;
  std::string id_prefix = "bag";

  void validate() const {
    detail::require(num_classes >= 2, "synth: need at least 2 classes");
    detail::require(feature_dim > 0, "synth: feature dimension must be positive");
    detail::require(num_classes <= 2 * static_cast<std::size_t>(feature_dim),
                    "synth: at most 2*D classes can be placed on distinct axis directions");
    detail::require(num_bags >= 1, "synth: need at least one bag");
    detail::require(instances_min >= 1 && instances_min <= instances_max, "synth: invalid instances-per-bag range");
    detail::require(class_cluster_spread > 0.0 && std::isfinite(class_cluster_spread), "synth: spread must be > 0");
    detail::require(noise_scale > 0.0 && std::isfinite(noise_scale), "synth: noise scale must be > 0");
    detail::require(background_fraction >= 0.0 && background_fraction < 1.0,
                    "synth: background fraction must be in [0, 1)");
    detail::require(labels_min >= 1 && labels_min <= labels_max, "synth: invalid labels-per-bag range");
    detail::require(labels_max <= num_classes, "synth: labels per bag exceeds class count");
    detail::require(labels_max <= instances_min, "synth: bags too small to hold one instance per label");
    for (auto c : pool_classes) detail::require(c < num_classes, "synth: pool class out of range");
  }

  double instance_std() const { return class_cluster_spread * noise_scale; }
};

/// Center of class c: +/- 10*spread along axis (c mod D); the sign flips on
/// every wrap so classes never share a center.
inline Matrix class_centers(const SynthConfig& cfg) {
  Matrix centers = Matrix::Zero(static_cast<Index>(cfg.num_classes), cfg.feature_dim);
  for (std::size_t c = 0; c < cfg.num_classes; ++c) {
    const auto axis = static_cast<Index>(c % static_cast<std::size_t>(cfg.feature_dim));
    const double sign = (c / static_cast<std::size_t>(cfg.feature_dim)) % 2 == 0 ? 1.0 : -1.0;
    centers(static_cast<Index>(c), axis) = sign * 10.0 * cfg.class_cluster_spread;
  }
  return centers;
}

struct SynthData {
  Dataset bags;
  ExemplarSet exemplars;
};

namespace internal {

inline void draw_from_class(Rng& rng, const Matrix& centers, std::size_t cls, double stddev,
                            Eigen::Ref<RowVector> out) {
  for (Index d = 0; d < out.size(); ++d) out(d) = rng.normal(centers(static_cast<Index>(cls), d), stddev);
}

}  // namespace internal

/// Draws a multi-label bag set and a strong-label exemplar set.
///
/// Each bag carries a random label subset. For every label at least one
/// instance comes from that class's Gaussian, so the MIL assumption holds by
/// construction; floor(background_fraction * n_i) instances (capped to leave
/// room for the labels) are uniform noise over the box spanning all centers.
inline SynthData generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const Matrix centers = class_centers(cfg);
  const double stddev = cfg.instance_std();
  const RowVector pad = RowVector::Constant(cfg.feature_dim, 3.0 * stddev);
  const RowVector box_lo = centers.colwise().minCoeff() - pad;
  const RowVector box_hi = centers.colwise().maxCoeff() + pad;

  SynthData out;
  out.bags.class_names = default_class_names(cfg.num_classes);
  out.bags.feature_dim = cfg.feature_dim;
  out.bags.bags.reserve(cfg.num_bags);

  for (std::size_t b = 0; b < cfg.num_bags; ++b) {
    const auto n = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(cfg.instances_min), static_cast<std::int64_t>(cfg.instances_max)));
    const auto num_labels = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(cfg.labels_min), static_cast<std::int64_t>(cfg.labels_max)));

    auto order = rng.permutation(cfg.num_classes);
    std::vector<std::size_t> labels(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(num_labels));
    std::sort(labels.begin(), labels.end());

    const auto background = std::min(static_cast<std::size_t>(std::floor(cfg.background_fraction * static_cast<double>(n))),
                                      n - num_labels);
    const std::size_t foreground = n - background;

    Matrix instances(static_cast<Index>(n), cfg.feature_dim);
    for (std::size_t j = 0; j < foreground; ++j) {
      const std::size_t cls =
          j < num_labels ? labels[j]
                         : labels[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(num_labels) - 1))];
      internal::draw_from_class(rng, centers, cls, stddev, instances.row(static_cast<Index>(j)));
    }
    for (std::size_t j = foreground; j < n; ++j)
      for (Index d = 0; d < cfg.feature_dim; ++d)
        instances(static_cast<Index>(j), d) = rng.uniform(box_lo(d), box_hi(d));

    const auto perm = rng.permutation(n);
    Matrix shuffled(static_cast<Index>(n), cfg.feature_dim);
    for (std::size_t j = 0; j < n; ++j) shuffled.row(static_cast<Index>(j)) = instances.row(static_cast<Index>(perm[j]));

    Bag bag;
    char id[32];
    std::snprintf(id, sizeof(id), "%06zu", b);
    bag.id = cfg.id_prefix + id;
    bag.instances = std::move(shuffled);
    bag.labels.assign(cfg.num_classes, 0);
    for (auto c : labels) bag.labels[c] = 1;
    out.bags.bags.push_back(std::move(bag));
  }

  std::vector<std::uint32_t> pool_classes = cfg.pool_classes;
  if (pool_classes.empty())
    for (std::size_t c = 0; c < cfg.num_classes; ++c) pool_classes.push_back(static_cast<std::uint32_t>(c));
  std::sort(pool_classes.begin(), pool_classes.end());
  pool_classes.erase(std::unique(pool_classes.begin(), pool_classes.end()), pool_classes.end());

  const auto m = static_cast<Index>(pool_classes.size() * cfg.exemplars_per_class);
  out.exemplars = ExemplarSet{Matrix(m, cfg.feature_dim), {}, cfg.num_classes};
  out.exemplars.classes.reserve(static_cast<std::size_t>(m));
  Index row = 0;
  for (auto c : pool_classes)
    for (std::size_t e = 0; e < cfg.exemplars_per_class; ++e) {
      internal::draw_from_class(rng, centers, c, stddev, out.exemplars.features.row(row++));
      out.exemplars.classes.push_back(c);
    }
  return out;
}

}  // namespace milv::synth
