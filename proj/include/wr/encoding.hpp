#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "wr/codebook.hpp"
#include "wr/descriptors.hpp"

namespace wr {

/// Concatenated per-cluster residual sums; block k occupies
/// [k * dim, (k + 1) * dim).
using VladVector = Eigen::VectorXd;

/// Hard-assignment VLAD: v_k = sum over descriptors whose nearest center is
/// c_k of (x - c_k). Raw, not normalized.
VladVector vlad_encode(const RowMatrix& xs, const Codebook& cb);
inline VladVector vlad_encode(const LocalDescriptorSet& xs, const Codebook& cb) {
  return vlad_encode(xs.vectors, cb);
}

/// Soft-assignment parameters: logits w_k . x + b_k, learnable centers.
struct NetVladParams {
  RowMatrix centers;  // K x dim
  RowMatrix weights;  // K x dim
  Eigen::VectorXd biases;  // K

  Eigen::Index n_clusters() const { return centers.rows(); }
  Eigen::Index dim() const { return centers.cols(); }
  void validate() const;
};

/// w_k = 2 alpha c_k, b_k = -alpha |c_k|^2, which makes the softmax over
/// clusters equal to the softmax of -alpha |x - c_k|^2.
NetVladParams netvlad_init(const Codebook& cb, double alpha);

/// Row-wise softmax of the logits (n x K), computed with the row maximum
/// subtracted.
RowMatrix soft_assign(const RowMatrix& xs, const NetVladParams& params);

/// v_k = sum_i a_k(x_i) (x_i - c_k) with soft assignments a.
VladVector netvlad_encode(const RowMatrix& xs, const NetVladParams& params);
inline VladVector netvlad_encode(const LocalDescriptorSet& xs, const NetVladParams& params) {
  return netvlad_encode(xs.vectors, params);
}

/// Anchor / positive / negative row indices.
struct Triplet {
  std::size_t anchor;
  std::size_t positive;
  std::size_t negative;
  auto operator<=>(const Triplet&) const = default;
};

/// max(0, |a - p| - |a - n| + margin).
double triplet_loss(const Eigen::Ref<const Eigen::VectorXd>& anchor,
                    const Eigen::Ref<const Eigen::VectorXd>& positive,
                    const Eigen::Ref<const Eigen::VectorXd>& negative, double margin);

/// For every ordered same-label pair (a, p), the negative n with the
/// smallest d(a, n) inside the semi-hard band d(a,p) < d(a,n) < d(a,p) + m.
/// If the band is empty, the hardest negative with d(a,n) <= d(a,p) is used;
/// pairs with neither are skipped. Throws NoValidTriplets when nothing
/// remains. `embeddings` holds one sample per row.
std::vector<Triplet> mine_semi_hard(const RowMatrix& embeddings, std::span<const std::string> labels,
                                    double margin);

void save_netvlad(const std::filesystem::path& path, const NetVladParams& p, const std::string& config_hash);
NetVladParams load_netvlad(const std::filesystem::path& path);

}  // namespace wr
