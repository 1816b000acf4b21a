#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "wr/corpus.hpp"

namespace wr {

/// Parameters of the seeded pseudo-handwriting generator. Test writers get
/// the `test` split; `train_writers` additional writers get `train`.
struct SynthConfig {
  int writers = 20;
  int train_writers = 10;
  int pages_per_writer = 5;
  int lines_per_page = 8;
  int words_per_line = 6;
  double style_spread = 1.0;   // scales how far writer styles stray from the mean style
  double shape_jitter = 0.03;  // per-instance control point noise, in x-height units
  double spacing_jitter = 0.05;
  double pixel_noise = 6.0;  // gray-level standard deviation
  double punctuation_rate = 0.04;
  std::uint64_t seed = 1;

  void validate() const;
};

/// The small vocabulary drawn from when composing lines.
const std::vector<std::string>& synth_vocabulary();

struct SyntheticCorpus {
  DatasetManifest manifest;
  std::unordered_map<std::string, GrayImage> images;  // keyed by image path

  Corpus corpus() const { return Corpus(manifest, images); }
};

/// Renders pages of pseudo-glyph handwriting. Each page is one image; lines
/// and words reference it through bounding boxes. Identical seeds give
/// identical output.
SyntheticCorpus generate_synthetic_corpus(const SynthConfig& cfg);

/// Writes `manifest.tsv` and the page PNGs below `dir`.
void write_synthetic_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir);

}  // namespace wr
