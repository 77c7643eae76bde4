#pragma once

#include "milv/binary_io.hpp"
#include "milv/core.hpp"
#include "milv/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <filesystem>

namespace milv::pca {

/// Energy-thresholded principal subspace. Projection is centering followed by
/// the orthonormal basis; coordinates are not whitened.
struct PcaModel {
  RowVector mean;      // D
  Matrix basis;        // d x D, orthonormal rows
  Vector eigenvalues;  // d, descending
  double energy_kept = 1.0;

  Index input_dim() const { return basis.cols(); }
  Index output_dim() const { return basis.rows(); }

  bool operator==(const PcaModel& o) const {
    return mean == o.mean && basis == o.basis && eigenvalues == o.eigenvalues && energy_kept == o.energy_kept;
  }
};

/// Full eigen-decomposition of the sample covariance (1/(n-1)), sorted by
/// descending eigenvalue. Eigenvalues below 1e-12 of the largest are zeroed.
struct Spectrum {
  RowVector mean;
  Matrix axes;  // D x D, row i is the i-th principal axis
  Vector eigenvalues;
};

inline Spectrum spectrum(const Eigen::Ref<const Matrix>& points) {
  const Index n = points.rows();
  detail::require(n >= 2, "pca: need at least 2 points");
  detail::require(points.cols() >= 1, "pca: points have no dimensions");
  detail::require_finite(points, "pca: points");

  Spectrum s;
  s.mean = points.colwise().mean();
  const Matrix centered = points.rowwise() - s.mean;
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw Error("pca: eigen-decomposition failed");

  const Index D = cov.rows();
  s.axes.resize(D, D);
  s.eigenvalues.resize(D);
  // Eigen returns ascending order.
  const double largest = std::max(solver.eigenvalues()(D - 1), 0.0);
  for (Index i = 0; i < D; ++i) {
    const Index src = D - 1 - i;
    double value = solver.eigenvalues()(src);
    if (value <= 1e-12 * largest) value = 0.0;
    s.eigenvalues(i) = value;
    Vector axis = solver.eigenvectors().col(src);
    // Sign convention: the largest-magnitude coordinate is positive.
    Index peak = 0;
    axis.cwiseAbs().maxCoeff(&peak);
    if (axis(peak) < 0.0) axis = -axis;
    s.axes.row(i) = axis.transpose();
  }
  return s;
}

/// Keeps the smallest d whose leading eigenvalues hold at least `energy` of the
/// total variance.
inline PcaModel fit(const Eigen::Ref<const Matrix>& points, double energy) {
  detail::require(energy > 0.0 && energy <= 1.0, "pca: energy must be in (0, 1]");
  Spectrum s = spectrum(points);
  const double total = s.eigenvalues.sum();
  if (!(total > 0.0)) throw InvalidArgument("pca: points are all identical (zero covariance)");

  Index d = 0;
  double cumulative = 0.0;
  while (d < s.eigenvalues.size()) {
    cumulative += s.eigenvalues(d);
    ++d;
    if (cumulative >= energy * total) break;
  }
  PcaModel model;
  model.mean = s.mean;
  model.basis = s.axes.topRows(d);
  model.eigenvalues = s.eigenvalues.head(d);
  model.energy_kept = cumulative / total;
  return model;
}

inline Matrix project(const PcaModel& model, const Eigen::Ref<const Matrix>& points) {
  detail::require(points.cols() == model.input_dim(), "pca: point dimension " + std::to_string(points.cols()) +
                                                          " does not match model input " +
                                                          std::to_string(model.input_dim()));
  Matrix out(points.rows(), model.output_dim());
  // Fixed-order dot products: a row projects to the same bits alone or in a batch.
  parallel_for(static_cast<std::size_t>(points.rows()), [&](std::size_t i) {
    const auto r = static_cast<Index>(i);
    for (Index o = 0; o < model.output_dim(); ++o) {
      double acc = 0.0;
      for (Index d = 0; d < model.input_dim(); ++d) acc += model.basis(o, d) * (points(r, d) - model.mean(d));
      out(r, o) = acc;
    }
  }, 256);
  return out;
}

// ---------------------------------------------------------------------------
// "MILA" u32 version=1, u32 D, u32 d, f64 energy, mean (D), eigenvalues (d),
// basis (d x D row-major).

inline std::string encode(const PcaModel& m) {
  io::ByteWriter w;
  w.magic("MILA", 1);
  w.u32(io::checked_u32(m.input_dim(), "D"));
  w.u32(io::checked_u32(m.output_dim(), "d"));
  w.f64(m.energy_kept);
  w.f64_block(m.mean);
  w.f64_block(m.eigenvalues.transpose());
  w.f64_block(m.basis);
  return w.buffer();
}

inline PcaModel decode(std::string bytes) {
  io::ByteReader r(std::move(bytes));
  r.magic("MILA", 1);
  const auto D = r.u32("D");
  const auto d = r.u32("d");
  if (D == 0 || d == 0 || d > D) r.fail("malformed header: need 0 < d <= D");
  PcaModel m;
  m.energy_kept = r.f64("energy");
  r.expect_payload(D + d + static_cast<std::uint64_t>(d) * D, 8, "pca parameters");
  Vector mean(D);
  r.f64_block(mean, "mean");
  m.mean = mean.transpose();
  m.eigenvalues.resize(d);
  r.f64_block(m.eigenvalues, "eigenvalues");
  m.basis.resize(d, D);
  r.f64_block(m.basis, "basis");
  r.expect_end();
  return m;
}

inline void save(const PcaModel& m, const std::filesystem::path& path) { io::write_file(path, encode(m)); }
inline PcaModel load(const std::filesystem::path& path) { return decode(io::read_file(path)); }

}  // namespace milv::pca
