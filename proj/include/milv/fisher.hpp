#pragma once

#include "milv/datamodel.hpp"
#include "milv/gmm.hpp"
#include "milv/parallel.hpp"
#include "milv/pca.hpp"

#include <optional>

namespace milv::fisher {

/// Bag encoding of length 2*K*D laid out as [f_mu_1 .. f_mu_K, f_sigma_1 .. f_sigma_K].
struct FisherVector {
  Vector values;
  bool normalized = false;
};

inline Index encoded_length(const gmm::GmmModel& model) { return 2 * model.num_components() * model.dim(); }

/// Sums over the bag's instances of the mean and deviation gradients:
///   f_mu_k    = 1/sqrt(w_k) * sum_j g_jk * (x_j - mu_k) / sigma_k
///   f_sigma_k = 1/sqrt(w_k) * sum_j g_jk * ((x_j - mu_k)^2 / sigma_k^2 - 1) / sqrt(2)
/// No 1/n averaging; the normalization step absorbs bag size.
inline FisherVector encode(const gmm::GmmModel& model, const Eigen::Ref<const Matrix>& instances) {
  detail::require(instances.rows() >= 1, "fisher: cannot encode an empty bag");
  const Matrix gamma = gmm::soft_assign(model, instances);
  const Index K = model.num_components();
  const Index D = model.dim();

  FisherVector fv{Vector::Zero(2 * K * D), false};
  for (Index k = 0; k < K; ++k) {
    const Eigen::ArrayXd g = gamma.col(k).array();
    const Eigen::ArrayXXd z =
        (instances.rowwise() - model.means.row(k)).array().rowwise() / model.stds.row(k).array();
    const double scale = 1.0 / std::sqrt(model.weights(k));
    fv.values.segment(k * D, D) = scale * (z.colwise() * g).colwise().sum().transpose().matrix();
    fv.values.segment((K + k) * D, D) =
        (scale / std::sqrt(2.0)) * ((z.square() - 1.0).colwise() * g).colwise().sum().transpose().matrix();
  }
  return fv;
}

/// Signed square root followed by L2 normalization; zero stays zero.
inline FisherVector normalize(const FisherVector& fv) {
  FisherVector out{fv.values.unaryExpr([](double z) { return std::copysign(std::sqrt(std::abs(z)), z); }), true};
  const double norm = out.values.norm();
  if (norm > 0.0) out.values /= norm;
  return out;
}

/// Per-bag instance matrices after the optional PCA stage.
inline std::vector<Matrix> prepare_instances(const Dataset& ds, const pca::PcaModel* pca) {
  std::vector<Matrix> out(ds.size());
  parallel_for(ds.size(), [&](std::size_t i) {
    out[i] = pca ? pca::project(*pca, ds.bags[i].instances) : ds.bags[i].instances;
  }, 4);
  return out;
}

/// Row i = normalize(encode(bag i)), rows in input order.
inline Matrix encode_all(const gmm::GmmModel& model, const std::vector<Matrix>& bags) {
  Matrix out(static_cast<Index>(bags.size()), encoded_length(model));
  parallel_for(bags.size(), [&](std::size_t i) {
    out.row(static_cast<Index>(i)) = normalize(encode(model, bags[i])).values.transpose();
  }, 4);
  return out;
}

inline Matrix encode_dataset(const gmm::GmmModel& model, const Dataset& ds,
                             const std::optional<pca::PcaModel>& pca = std::nullopt) {
  return encode_all(model, prepare_instances(ds, pca ? &*pca : nullptr));
}

}  // namespace milv::fisher
