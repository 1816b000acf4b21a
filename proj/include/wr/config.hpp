#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "wr/netvlad_train.hpp"
#include "wr/synth.hpp"

namespace wr {

enum class DescriptorSource { Native, External };
enum class EncoderKind { Vlad, NetVlad };

std::string_view descriptor_source_name(DescriptorSource s);
std::string_view encoder_name(EncoderKind e);

/// Every tunable of a run. The text form has one `[section]` per module and
/// `key = value` lines; lists are space separated.
struct RunConfig {
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0: all cores

  std::string manifest;  // dataset manifest; empty means a synthetic corpus
  std::string output = "wr-out";

  SynthConfig synth;

  int patch_side = kPatchSide;
  std::size_t line_budget = 5000;
  std::size_t word_budget = 500;

  DescriptorSource descriptor_source = DescriptorSource::Native;
  std::string external_descriptors;  // WRDESC file for the external source

  int n_clusters = 100;
  std::size_t codebook_max_descriptors = 500000;
  int kmeans_max_iters = 100;
  double kmeans_tol = 1e-4;

  EncoderKind encoder = EncoderKind::Vlad;
  TripletConfig triplet;
  std::size_t netvlad_unit_budget = 500;  // descriptors per training unit

  int out_dim = 256;
  double whitening_eps = 1e-8;

  std::vector<std::size_t> top_x{1, 3, 5, 10};
  std::vector<std::size_t> merge_n{1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<std::size_t> sweep{10, 50, 100, 250, 500, 1000, 1500, 2000, 3000, 5000};
  std::size_t common_words = 20;

  /// Throws InvalidConfig naming the first bad field.
  void validate() const;

  /// Canonical text form: every field, fixed order, round-trips through parse.
  std::string dump() const;
  /// First 16 hex digits of the SHA-256 of dump().
  std::string hash() const;

  /// Applies the keys present in `text` on top of the defaults. Unknown
  /// sections or keys and malformed values raise InvalidConfig.
  /// `present` receives the `section.key` names that were set.
  static RunConfig parse(std::string_view text, std::set<std::string>* present = nullptr);
  static RunConfig load(const std::filesystem::path& path, std::set<std::string>* present = nullptr);
};

/// Value of WR_SEED when set; InvalidConfig if it is not a number.
std::optional<std::uint64_t> seed_from_environment();

}  // namespace wr
