#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "wr/entity_id.hpp"
#include "wr/image.hpp"

namespace wr {

// ---------------------------------------------------------------------------
// Binarization

using Histogram = std::array<std::uint64_t, 256>;

Histogram histogram(const GrayImage& img);

/// Otsu's threshold: the t maximizing the between-class variance of the
/// split {v <= t} / {v > t}. Ties resolve to the smallest t. Throws
/// DegenerateHistogram when fewer than two intensities occur.
int otsu_threshold(const Histogram& hist);
int otsu_threshold(const GrayImage& img);

/// Dark pixels (intensity <= Otsu threshold) become ink.
BinaryImage binarize(const GrayImage& img);
BinaryImage binarize(const GrayImage& img, int threshold);

// ---------------------------------------------------------------------------
// Manifest

enum class Split { Train, Test };
std::string_view split_name(Split s);
Split parse_split(std::string_view text);

/// Image reference of a manifest entry: a file, optionally restricted to a
/// bounding box, written `path@x,y,w,h`.
struct ImageRef {
  std::string path;
  std::optional<Rect> box;

  static ImageRef parse(std::string_view text);
  std::string str() const;
  bool operator==(const ImageRef&) const = default;
};

struct ManifestEntry {
  EntityId id;
  ImageRef image;
  std::optional<std::string> transcription;
  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::map<std::string, Split> split;  // per writer

  Split split_of(const EntityId& id) const;
  const ManifestEntry* find(const EntityId& id) const;
  bool operator==(const DatasetManifest&) const = default;
};

/// Text form: `entity_id<TAB>image<TAB>split[<TAB>transcription]` per line;
/// blank and `#` lines are skipped.
DatasetManifest parse_manifest(std::string_view text);
std::string serialize_manifest(const DatasetManifest& m);
/// Parses and checks that every referenced image exists relative to the
/// manifest's directory.
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& m);

/// True if the UTF-8 text holds at least one Unicode letter or digit.
bool has_alphanumeric(std::string_view utf8);

/// Drops entries whose transcription has no letter or digit. Entries without
/// a transcription pass through.
DatasetManifest filter_words(const DatasetManifest& m);

// ---------------------------------------------------------------------------
// Image access

/// Manifest plus the means to materialize each entity's image: from disk
/// (relative to `root`) or from in-memory images (synthetic corpora).
class Corpus {
 public:
  Corpus(DatasetManifest manifest, std::filesystem::path root);
  Corpus(DatasetManifest manifest, std::unordered_map<std::string, GrayImage> images);

  static Corpus load(const std::filesystem::path& manifest_path);

  const DatasetManifest& manifest() const { return manifest_; }
  GrayImage gray(const ManifestEntry& entry) const;
  BinaryImage binary(const ManifestEntry& entry) const;

 private:
  DatasetManifest manifest_;
  std::filesystem::path root_;
  std::unordered_map<std::string, GrayImage> memory_;  // keyed by ImageRef::path
  struct Cache;
  std::shared_ptr<Cache> cache_;  // last decoded page, for bounding-box crops
};

}  // namespace wr
