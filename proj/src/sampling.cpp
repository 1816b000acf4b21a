#include "wr/sampling.hpp"

#include <fstream>
#include <sstream>

#include "wr/error.hpp"
#include "wr/rng.hpp"
#include "wr/wrdesc.hpp"

namespace wr {

std::size_t Patch::ink_count() const {
  std::size_t n = 0;
  for (auto v : mask) n += v != 0;
  return n;
}

std::vector<Keypoint> contour_keypoints(const BinaryImage& img) {
  std::vector<Keypoint> out;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      if (!img.at(x, y)) continue;
      if (!img.ink_at(x - 1, y) || !img.ink_at(x + 1, y) || !img.ink_at(x, y - 1) || !img.ink_at(x, y + 1)) {
        out.push_back({x, y});
      }
    }
  }
  return out;
}

std::vector<std::size_t> budget_indices(std::size_t n, std::size_t max_count, std::uint64_t seed) {
  if (max_count == 0) fail(ErrorCode::InvalidArgument, "feature budget must be positive");
  std::vector<std::size_t> out;
  if (n <= max_count) {
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = i;
    return out;
  }
  // Selection sampling: each item is kept with probability needed/remaining,
  // which yields a uniform subset in input order.
  Rng rng(seed);
  out.reserve(max_count);
  std::size_t needed = max_count;
  for (std::size_t i = 0; i < n && needed > 0; ++i) {
    if (rng.below(n - i) < needed) {
      out.push_back(i);
      --needed;
    }
  }
  return out;
}

std::vector<Keypoint> budget_keypoints(std::span<const Keypoint> kps, std::size_t max_count,
                                       std::uint64_t seed) {
  std::vector<Keypoint> out;
  for (std::size_t i : budget_indices(kps.size(), max_count, seed)) out.push_back(kps[i]);
  return out;
}

std::vector<Patch> extract_patches(const BinaryImage& img, std::span<const Keypoint> kps) {
  std::vector<Patch> out;
  constexpr int half = kPatchSide / 2;
  for (const auto& kp : kps) {
    Patch p;
    p.center = kp;
    bool any = false;
    for (int dy = 0; dy < kPatchSide; ++dy) {
      for (int dx = 0; dx < kPatchSide; ++dx) {
        const bool v = img.ink_at(kp.x - half + dx, kp.y - half + dy);
        p.mask[static_cast<std::size_t>(dy) * kPatchSide + dx] = v ? 1 : 0;
        any |= v;
      }
    }
    if (any) out.push_back(p);
  }
  return out;
}

const std::vector<std::size_t>& default_feature_sweep() {
  static const std::vector<std::size_t> sweep = {10, 50, 100, 250, 500, 1000, 1500, 2000, 3000, 5000};
  return sweep;
}

namespace {
constexpr char kPatchMagic[8] = {'W', 'R', 'P', 'A', 'T', 'C', 'H', '\0'};
constexpr std::size_t kPackedBytes = kPatchSide * kPatchSide / 8;
}  // namespace

void write_patch_dump(const std::filesystem::path& path, std::span<const PatchRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out.write(kPatchMagic, 8);
  detail::write_le<std::uint32_t>(out, 1);
  detail::write_le<std::uint32_t>(out, kPatchSide);
  detail::write_le<std::uint64_t>(out, records.size());
  std::string sidecar;
  for (const auto& r : records) {
    std::array<std::uint8_t, kPackedBytes> packed{};
    for (std::size_t i = 0; i < r.patch.mask.size(); ++i) {
      if (r.patch.mask[i]) packed[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
    }
    out.write(reinterpret_cast<const char*>(packed.data()), kPackedBytes);
    sidecar += r.entity.str() + " " + std::to_string(r.patch.center.x) + " " +
               std::to_string(r.patch.center.y) + "\n";
  }
  detail::write_le<std::uint64_t>(out, sidecar.size());
  out.write(sidecar.data(), static_cast<std::streamsize>(sidecar.size()));
  if (!out) fail(ErrorCode::IoError, "short write to " + path.string());
}

std::vector<PatchRecord> read_patch_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || !std::equal(magic, magic + 8, kPatchMagic)) {
    fail(ErrorCode::FormatError, path.string() + ": bad patch dump magic");
  }
  const auto version = detail::read_le<std::uint32_t>(in);
  const auto side = detail::read_le<std::uint32_t>(in);
  const auto count = detail::read_le<std::uint64_t>(in);
  if (version != 1 || side != kPatchSide) fail(ErrorCode::FormatError, "unsupported patch dump header");
  std::vector<std::array<std::uint8_t, kPackedBytes>> packed(count);
  for (auto& p : packed) {
    if (!in.read(reinterpret_cast<char*>(p.data()), kPackedBytes)) {
      fail(ErrorCode::FormatError, path.string() + ": truncated patch rows");
    }
  }
  const auto side_len = detail::read_le<std::uint64_t>(in);
  std::string sidecar(side_len, '\0');
  if (!in.read(sidecar.data(), static_cast<std::streamsize>(side_len))) {
    fail(ErrorCode::FormatError, path.string() + ": truncated sidecar");
  }
  const auto rows = detail::parse_sidecar(sidecar, count);
  std::vector<PatchRecord> out;
  out.reserve(count);
  for (std::size_t r = 0; r < count; ++r) {
    PatchRecord rec;
    rec.entity = EntityId::parse(rows[r].label);
    rec.patch.center = {rows[r].x, rows[r].y};
    for (std::size_t i = 0; i < rec.patch.mask.size(); ++i) {
      rec.patch.mask[i] = (packed[r][i / 8] >> (7 - i % 8)) & 1u;
    }
    out.push_back(rec);
  }
  return out;
}

void write_keypoint_dump(std::ostream& out, const EntityId& id, std::span<const Keypoint> kps) {
  const std::string prefix = id.str();
  for (const auto& kp : kps) out << prefix << ' ' << kp.x << ' ' << kp.y << '\n';
}

}  // namespace wr
