#pragma once

#include <Eigen/Core>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wr/aggregation.hpp"
#include "wr/codebook.hpp"
#include "wr/config.hpp"
#include "wr/corpus.hpp"
#include "wr/descriptors.hpp"
#include "wr/encoding.hpp"
#include "wr/retrieval.hpp"

namespace wr {

/// Local descriptors for manifest entries: RootSIFT at budgeted contour
/// keypoints, or rows of an external WRDESC file budgeted the same way.
/// The subset kept for an entity depends only on (seed, entity id, budget).
class FeatureSource {
 public:
  FeatureSource(const Corpus& corpus, std::uint64_t seed);
  FeatureSource(const Corpus& corpus, std::uint64_t seed, std::map<EntityId, LocalDescriptorSet> external);

  /// budget 0 keeps everything.
  LocalDescriptorSet describe(const ManifestEntry& entry, std::size_t budget) const;
  /// One set per budget; each descriptor is computed once.
  std::vector<LocalDescriptorSet> describe(const ManifestEntry& entry, std::span<const std::size_t> budgets) const;

  const Corpus& corpus() const { return *corpus_; }
  bool external() const { return external_.has_value(); }

 private:
  const Corpus* corpus_;
  std::uint64_t seed_;
  std::optional<std::map<EntityId, LocalDescriptorSet>> external_;
};

/// VLAD with a fixed codebook, or NetVLAD with trained parameters.
class Encoder {
 public:
  explicit Encoder(Codebook cb);
  Encoder(Codebook cb, NetVladParams params);

  /// Raw encoding of a non-empty descriptor set.
  Eigen::VectorXd encode(const RowMatrix& xs) const;
  Eigen::Index dim() const;
  EncoderKind kind() const { return params_ ? EncoderKind::NetVlad : EncoderKind::Vlad; }
  const Codebook& codebook() const { return cb_; }
  const std::optional<NetVladParams>& netvlad() const { return params_; }

 private:
  Codebook cb_;
  std::optional<NetVladParams> params_;
};

/// Whitened global descriptor of a group of unit encodings: pool (in unit-id
/// order), power-normalize, whiten.
Eigen::VectorXd global_descriptor(std::span<const KeyedEncoding> units, const WhiteningTransform& t);
/// Pooled and power-normalized, before whitening.
Eigen::VectorXd pre_whitening(std::span<const KeyedEncoding> units);

/// Test/train membership and the page -> line hierarchy of a manifest.
/// Lines are the encoding units of a page; a page without line entries is
/// its own unit.
struct CorpusIndex {
  struct PageUnits {
    EntityId page;
    std::vector<const ManifestEntry*> units;  // lines in line order, or the page entry
  };
  std::vector<PageUnits> pages;               // sorted by page id
  std::vector<const ManifestEntry*> words;    // sorted by id, transcribed ones only after filtering

  /// Entries of `manifest` in `split`. Word entries pass through filter_words.
  static CorpusIndex build(const DatasetManifest& manifest, Split split);

  std::vector<const ManifestEntry*> units() const;
  std::size_t writer_count() const;
};

/// Codebook, optional NetVLAD parameters and whitening, all fit on the
/// training split.
struct Artifacts {
  Codebook codebook;
  std::optional<NetVladParams> netvlad;
  WhiteningTransform whitening;
  std::size_t kmeans_samples = 0;
  int requested_out_dim = 0;

  Encoder encoder() const;
};

struct FitLog {
  KMeansReport kmeans;
  std::vector<double> netvlad_epoch_loss;
  std::size_t training_units = 0;
};

/// Trains the codebook on a stratified subsample of the training units'
/// descriptors (at most cfg.codebook_max_descriptors, spread evenly over
/// units), then NetVLAD if requested, then whitening on the training units'
/// pre-whitening vectors. out_dim is clamped to min(requested, n_train - 1,
/// encoding dim).
Artifacts fit_artifacts(const FeatureSource& features, const RunConfig& cfg, FitLog* log = nullptr);

/// Refits only the whitening, on training units described with `budget`.
WhiteningTransform fit_whitening_for_budget(const FeatureSource& features, const RunConfig& cfg,
                                            const Encoder& encoder, std::size_t budget);

/// Same for several budgets at once, sharing descriptor computation.
std::vector<WhiteningTransform> fit_whitening_for_budgets(const FeatureSource& features, const RunConfig& cfg,
                                                          const Encoder& encoder,
                                                          std::span<const std::size_t> budgets);

}  // namespace wr
