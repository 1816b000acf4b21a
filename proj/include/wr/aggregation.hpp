#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <span>
#include <string>

#include "wr/descriptors.hpp"
#include "wr/entity_id.hpp"

namespace wr {

/// An encoding tagged with the unit (line, word, ...) it came from.
struct KeyedEncoding {
  EntityId unit;
  Eigen::VectorXd values;
};

/// Sum of l2-normalized encodings, summed in the given order.
Eigen::VectorXd pool_encodings(std::span<const Eigen::VectorXd> encodings);
/// Sum of l2-normalized encodings, summed in ascending unit-id order so the
/// result does not depend on input order.
Eigen::VectorXd pool_encodings(std::span<const KeyedEncoding> encodings);

/// sign(x) sqrt(|x|) elementwise, then l2 normalization.
Eigen::VectorXd power_normalize(const Eigen::VectorXd& v);

/// Divides by the l2 norm; throws ZeroVector for the zero vector.
Eigen::VectorXd l2_normalize(const Eigen::VectorXd& v);

/// PCA whitening: rows of `projection` are eigenvectors of the sample
/// covariance scaled by 1/sqrt(lambda + eps), largest eigenvalue first.
struct WhiteningTransform {
  Eigen::VectorXd mean;
  RowMatrix projection;  // out_dim x in_dim
  Eigen::VectorXd eigenvalues;  // out_dim, descending
  double eps = 1e-8;

  Eigen::Index in_dim() const { return projection.cols(); }
  Eigen::Index out_dim() const { return projection.rows(); }
};

enum class WhiteningRoute {
  Auto,        // covariance when in_dim <= n, Gram matrix otherwise
  Covariance,  // eigendecomposition of the in_dim x in_dim covariance
  Gram,        // eigendecomposition of the n x n Gram matrix
};

/// Fits on one sample per row. Requires n >= 2 and
/// out_dim <= min(in_dim, n - 1). Each eigenvector is signed so that its
/// largest-magnitude entry is positive.
WhiteningTransform fit_whitening(const RowMatrix& samples, Eigen::Index out_dim, double eps = 1e-8,
                                 WhiteningRoute route = WhiteningRoute::Auto);

/// Projection of the centered vector, before the final normalization.
Eigen::VectorXd whiten_unnormalized(const Eigen::VectorXd& v, const WhiteningTransform& t);
/// l2-normalized projection of the centered vector: the retrieval descriptor.
Eigen::VectorXd apply_whitening(const Eigen::VectorXd& v, const WhiteningTransform& t);

void save_whitening(const std::filesystem::path& path, const WhiteningTransform& t, const std::string& config_hash);
WhiteningTransform load_whitening(const std::filesystem::path& path);

}  // namespace wr
