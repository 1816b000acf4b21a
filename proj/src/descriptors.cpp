#include "wr/descriptors.hpp"

#include <cmath>
#include <numbers>
#include <unordered_set>

#include "wr/error.hpp"
#include "wr/wrdesc.hpp"

namespace wr {

GradientField::GradientField(const BinaryImage& img)
    : width_(img.width), height_(img.height), stride_(static_cast<std::size_t>(img.width + 2 * kPad)) {
  const std::size_t rows = static_cast<std::size_t>(img.height + 2 * kPad);
  std::vector<double> smooth(stride_ * rows, 0.0);
  // Box smoothing of the zero-padded mask; values reach one pixel past the border.
  for (int y = -1; y <= img.height; ++y) {
    for (int x = -1; x <= img.width; ++x) {
      int sum = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) sum += img.ink_at(x + dx, y + dy) ? 1 : 0;
      }
      smooth[index(x, y)] = sum / 9.0;
    }
  }
  gx_.assign(stride_ * rows, 0.0);
  gy_.assign(stride_ * rows, 0.0);
  for (int y = -kPad + 1; y < img.height + kPad - 1; ++y) {
    for (int x = -kPad + 1; x < img.width + kPad - 1; ++x) {
      gx_[index(x, y)] = 0.5 * (smooth[index(x + 1, y)] - smooth[index(x - 1, y)]);
      gy_[index(x, y)] = 0.5 * (smooth[index(x, y + 1)] - smooth[index(x, y - 1)]);
    }
  }
}

namespace {
constexpr int kGrid = 4;
constexpr int kBins = 8;
constexpr int kWindow = 16;
constexpr double kSigma = 8.0;
}  // namespace

Eigen::VectorXd sift_descriptor(const GradientField& grad, Keypoint kp) {
  if (kp.x < 0 || kp.y < 0 || kp.x >= grad.width() || kp.y >= grad.height()) {
    fail(ErrorCode::InvalidArgument, "keypoint outside image");
  }
  Eigen::VectorXd hist = Eigen::VectorXd::Zero(kSiftDim);
  constexpr double bin_width = 2.0 * std::numbers::pi / kBins;
  constexpr double cell = static_cast<double>(kWindow) / kGrid;
  double energy = 0.0;
  for (int oy = -kWindow / 2; oy < kWindow / 2; ++oy) {
    for (int ox = -kWindow / 2; ox < kWindow / 2; ++ox) {
      const double gx = grad.gx(kp.x + ox, kp.y + oy);
      const double gy = grad.gy(kp.x + ox, kp.y + oy);
      const double mag = std::sqrt(gx * gx + gy * gy);
      if (mag == 0.0) continue;
      energy += mag;
      // Pixel centers relative to the window center, in [-7.5, 7.5].
      const double rx = ox + 0.5;
      const double ry = oy + 0.5;
      const double w = mag * std::exp(-(rx * rx + ry * ry) / (2.0 * kSigma * kSigma));
      double theta = std::atan2(gy, gx);
      if (theta < 0) theta += 2.0 * std::numbers::pi;
      const double ob = theta / bin_width;
      const double cx = (rx + kWindow / 2.0) / cell - 0.5;
      const double cy = (ry + kWindow / 2.0) / cell - 0.5;
      const int x0 = static_cast<int>(std::floor(cx));
      const int y0 = static_cast<int>(std::floor(cy));
      const int o0 = static_cast<int>(std::floor(ob));
      const double fx = cx - x0, fy = cy - y0, fo = ob - o0;
      for (int dy = 0; dy <= 1; ++dy) {
        const int by = y0 + dy;
        if (by < 0 || by >= kGrid) continue;
        const double wy = dy ? fy : 1.0 - fy;
        for (int dx = 0; dx <= 1; ++dx) {
          const int bx = x0 + dx;
          if (bx < 0 || bx >= kGrid) continue;
          const double wx = dx ? fx : 1.0 - fx;
          for (int d_o = 0; d_o <= 1; ++d_o) {
            const int bo = (o0 + d_o) % kBins;
            const double wo = d_o ? fo : 1.0 - fo;
            hist[(by * kGrid + bx) * kBins + bo] += w * wx * wy * wo;
          }
        }
      }
    }
  }
  if (energy == 0.0) fail(ErrorCode::EmptyDescriptor, "no gradient in descriptor window");
  return hist;
}

Eigen::VectorXd sift_descriptor(const BinaryImage& img, Keypoint kp) {
  return sift_descriptor(GradientField(img), kp);
}

Eigen::VectorXd root_sift(const Eigen::VectorXd& raw) {
  if ((raw.array() < 0).any()) fail(ErrorCode::InvalidArgument, "RootSIFT input has negative entries");
  const double l1 = raw.sum();
  if (!(l1 > 0.0)) fail(ErrorCode::EmptyDescriptor, "RootSIFT input is all zero");
  Eigen::VectorXd y = (raw / l1).array().sqrt().matrix();
  return y / y.norm();
}

LocalDescriptorSet compute_rootsift(const EntityId& entity, const BinaryImage& img,
                                    std::span<const Keypoint> kps) {
  const GradientField grad(img);
  LocalDescriptorSet set;
  set.entity = entity;
  set.vectors.resize(static_cast<Eigen::Index>(kps.size()), kSiftDim);
  Eigen::Index n = 0;
  for (const auto& kp : kps) {
    try {
      set.vectors.row(n) = root_sift(sift_descriptor(grad, kp)).transpose();
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptyDescriptor) throw;
      continue;
    }
    set.keypoints.push_back(kp);
    ++n;
  }
  set.vectors.conservativeResize(n, kSiftDim);
  return set;
}

std::map<EntityId, LocalDescriptorSet> load_external_descriptors(const std::filesystem::path& path,
                                                                 const DatasetManifest& manifest) {
  const WrdescPayload payload = load_wrdesc(path);
  std::unordered_set<EntityId> known;
  for (const auto& e : manifest.entries) known.insert(e.id);

  std::map<EntityId, std::vector<Eigen::Index>> rows_of;
  for (std::size_t r = 0; r < payload.sidecar.size(); ++r) {
    EntityId id = EntityId::parse(payload.sidecar[r].label);
    if (!known.contains(id)) fail(ErrorCode::UnknownEntity, "descriptor for unknown entity " + id.str());
    rows_of[id].push_back(static_cast<Eigen::Index>(r));
  }
  std::map<EntityId, LocalDescriptorSet> out;
  for (const auto& [id, rows] : rows_of) {
    LocalDescriptorSet set;
    set.entity = id;
    set.vectors.resize(static_cast<Eigen::Index>(rows.size()), payload.dim);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      set.vectors.row(static_cast<Eigen::Index>(i)) = payload.rows.row(rows[i]).cast<double>();
      const auto& sc = payload.sidecar[static_cast<std::size_t>(rows[i])];
      set.keypoints.push_back({sc.x, sc.y});
    }
    out.emplace(id, std::move(set));
  }
  return out;
}

void save_descriptor_sets(const std::filesystem::path& path,
                          const std::map<EntityId, LocalDescriptorSet>& sets) {
  WrdescPayload p;
  Eigen::Index total = 0;
  for (const auto& [id, s] : sets) {
    if (s.size() == 0) continue;
    if (p.dim == 0) p.dim = static_cast<std::uint32_t>(s.dim());
    if (static_cast<std::uint32_t>(s.dim()) != p.dim) fail(ErrorCode::DimMismatch, "mixed descriptor dims");
    total += static_cast<Eigen::Index>(s.size());
  }
  p.rows.resize(total, p.dim);
  Eigen::Index r = 0;
  for (const auto& [id, s] : sets) {
    const std::string label = id.str();
    for (std::size_t i = 0; i < s.size(); ++i, ++r) {
      p.rows.row(r) = s.vectors.row(static_cast<Eigen::Index>(i)).cast<float>();
      p.sidecar.push_back({label, s.keypoints[i].x, s.keypoints[i].y});
    }
  }
  save_wrdesc(path, p);
}

}  // namespace wr
