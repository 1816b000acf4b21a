#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "wr/entity_id.hpp"
#include "wr/image.hpp"

namespace wr {

struct Keypoint {
  int x = 0;
  int y = 0;
  auto operator<=>(const Keypoint&) const = default;
};

inline constexpr int kPatchSide = 32;

/// 32x32 ink window centered on a keypoint. The window spans offsets
/// [-16, 15] around the center; pixels outside the source are non-ink.
struct Patch {
  Keypoint center;
  std::array<std::uint8_t, kPatchSide * kPatchSide> mask{};

  bool at(int x, int y) const { return mask[static_cast<std::size_t>(y) * kPatchSide + x] != 0; }
  std::size_t ink_count() const;
};

/// Ink pixels with at least one non-ink 4-neighbour (outside counts as
/// non-ink), in row-major order.
std::vector<Keypoint> contour_keypoints(const BinaryImage& img);

/// Indices kept by budget_keypoints for a list of length n.
std::vector<std::size_t> budget_indices(std::size_t n, std::size_t max_count, std::uint64_t seed);

/// All keypoints if there are at most `max_count`, else a uniform random
/// subset of exactly `max_count` drawn without replacement. Input order is
/// preserved.
std::vector<Keypoint> budget_keypoints(std::span<const Keypoint> kps, std::size_t max_count,
                                       std::uint64_t seed);

/// One patch per keypoint; patches without any ink are dropped.
std::vector<Patch> extract_patches(const BinaryImage& img, std::span<const Keypoint> kps);

/// Default feature-budget sweep (features per line).
const std::vector<std::size_t>& default_feature_sweep();

// Interchange with the patch-embedding exporter ------------------------------

struct PatchRecord {
  EntityId entity;
  Patch patch;
};

/// `WRPATCH\0`, u32 version=1, u32 side=32, u64 count, then count masks of
/// 128 bytes (rows of 32 bits, most significant bit first), then a sidecar:
/// u64 byte length followed by `entity_id x y` lines in row order.
void write_patch_dump(const std::filesystem::path& path, std::span<const PatchRecord> records);
std::vector<PatchRecord> read_patch_dump(const std::filesystem::path& path);

/// Text dump, one `entity_id x y` line per keypoint.
void write_keypoint_dump(std::ostream& out, const EntityId& id, std::span<const Keypoint> kps);

}  // namespace wr
