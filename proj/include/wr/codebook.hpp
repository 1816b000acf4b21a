#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <vector>

#include "wr/descriptors.hpp"

namespace wr {

/// k-means vocabulary: one center per row.
struct Codebook {
  RowMatrix centers;
  std::uint64_t seed = 0;

  Eigen::Index n_clusters() const { return centers.rows(); }
  Eigen::Index dim() const { return centers.cols(); }
};

struct KMeansOptions {
  int n_clusters = 100;
  std::uint64_t seed = 0;
  int max_iters = 100;
  double tol = 1e-4;  // relative center shift ||C' - C||_F / ||C||_F
};

struct KMeansReport {
  std::vector<double> objective;  // sum of squared distances after each assignment step
  int iterations = 0;
  bool converged = false;
};

/// k-means++ seeding: first center uniform, then proportional to squared
/// distance to the nearest chosen center. Throws TooFewPoints when the data
/// has fewer distinct points than clusters.
RowMatrix kmeanspp_seed(const RowMatrix& data, int n_clusters, std::uint64_t seed);

/// Lloyd's algorithm from k-means++ seeds. An empty cluster is reseeded to
/// the point farthest from its assigned center.
Codebook train_codebook(const RowMatrix& data, const KMeansOptions& opts, KMeansReport* report = nullptr);

/// Index of the closest center; ties go to the smallest index.
Eigen::Index nearest_center(const Eigen::Ref<const Eigen::VectorXd>& x, const Codebook& cb);

/// nearest_center for every row, with `distances` receiving the squared
/// distance when non-null. Candidate minima from the expanded dot-product
/// form are re-checked with exact differences, so ties resolve as in
/// nearest_center.
std::vector<Eigen::Index> assign_nearest(const RowMatrix& data, const RowMatrix& centers,
                                         std::vector<double>* distances = nullptr);

void save_codebook(const std::filesystem::path& path, const Codebook& cb, const std::string& config_hash);
Codebook load_codebook(const std::filesystem::path& path);

}  // namespace wr
