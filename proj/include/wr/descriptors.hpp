#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "wr/corpus.hpp"
#include "wr/entity_id.hpp"
#include "wr/image.hpp"
#include "wr/sampling.hpp"

namespace wr {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kSiftDim = 128;

/// Local descriptors of one entity: row i belongs to keypoints[i].
struct LocalDescriptorSet {
  EntityId entity;
  RowMatrix vectors;  // n x dim
  std::vector<Keypoint> keypoints;

  Eigen::Index dim() const { return vectors.cols(); }
  std::size_t size() const { return keypoints.size(); }
};

/// Gradients of the 3x3 box-smoothed ink mask (ink = 1), zero-padded so
/// descriptor windows may extend past the image border.
class GradientField {
 public:
  explicit GradientField(const BinaryImage& img);

  double gx(int x, int y) const { return gx_[index(x, y)]; }
  double gy(int x, int y) const { return gy_[index(x, y)]; }
  int width() const { return width_; }
  int height() const { return height_; }
  static constexpr int kPad = 10;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y + kPad) * stride_ + static_cast<std::size_t>(x + kPad);
  }
  int width_, height_;
  std::size_t stride_;
  std::vector<double> gx_, gy_;
};

/// Upright SIFT histogram at a fixed scale: a 16x16 window split into 4x4
/// cells of 8 orientation bins, trilinear interpolation, Gaussian spatial
/// weight with sigma 8. Entries are raw (not normalized). Throws
/// EmptyDescriptor when the window has no gradient.
Eigen::VectorXd sift_descriptor(const GradientField& grad, Keypoint kp);
Eigen::VectorXd sift_descriptor(const BinaryImage& img, Keypoint kp);

/// sqrt of the l1-normalized vector, then l2-normalized.
Eigen::VectorXd root_sift(const Eigen::VectorXd& raw);

/// RootSIFT at each keypoint; keypoints whose window holds no gradient are
/// skipped.
LocalDescriptorSet compute_rootsift(const EntityId& entity, const BinaryImage& img,
                                    std::span<const Keypoint> kps);

/// Groups WRDESC rows by the entity id in their sidecar. Every id must occur
/// in the manifest.
std::map<EntityId, LocalDescriptorSet> load_external_descriptors(const std::filesystem::path& path,
                                                                 const DatasetManifest& manifest);

/// Writes descriptor sets as one WRDESC file (float32 rows), sets in map order.
void save_descriptor_sets(const std::filesystem::path& path,
                          const std::map<EntityId, LocalDescriptorSet>& sets);

}  // namespace wr
