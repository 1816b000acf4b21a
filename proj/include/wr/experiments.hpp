#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wr/config.hpp"
#include "wr/pipeline.hpp"
#include "wr/retrieval.hpp"

namespace wr {

enum class QueryMode { Full, OneLine, HalfPage };
std::string_view query_mode_name(QueryMode m);
QueryMode parse_query_mode(std::string_view text);

struct Curve {
  std::string name;
  std::string x_label;
  std::string y_label;
  std::vector<std::pair<double, double>> points;
};

struct ExperimentReport {
  std::string kind;
  Granularity granularity = Granularity::Page;
  std::vector<std::pair<std::string, double>> metrics;  // report order
  std::vector<Curve> curves;
  std::map<std::string, double> per_word;
  std::map<std::size_t, double> line_count_histogram;  // n -> % of pages with fewer than n lines
  std::vector<std::string> notes;
  std::optional<EvalResult> eval;

  /// Throws InvalidArgument when absent.
  double metric(std::string_view name) const;
  void add(std::string name, double value) { metrics.emplace_back(std::move(name), value); }
};

/// Runs the granularity studies on the test split with one set of fitted
/// artifacts. Unit encodings are cached between runs.
class Experiments {
 public:
  Experiments(const FeatureSource& features, RunConfig cfg, Artifacts artifacts);

  const Artifacts& artifacts() const { return artifacts_; }
  const RunConfig& config() const { return cfg_; }
  const CorpusIndex& index() const { return test_; }

  std::vector<GlobalDescriptor> page_globals();
  std::vector<GlobalDescriptor> line_globals();
  /// Consecutive groups of n lines per page, trailing remainder dropped. A
  /// group carries the id of its first line.
  std::vector<GlobalDescriptor> merge_globals(std::size_t n);
  std::vector<GlobalDescriptor> word_globals();

  ExperimentReport page_level();
  ExperimentReport line_level();
  ExperimentReport line_merge(std::size_t n);
  /// line_merge for every cfg.merge_n, with the normalized curve.
  ExperimentReport line_merge_curve();
  ExperimentReport short_query(QueryMode mode);
  ExperimentReport word_level();
  ExperimentReport word_specific(const std::string& word);
  /// word_specific for the cfg.common_words most frequent words that at
  /// least two writers use.
  ExperimentReport word_specific_common();
  ExperimentReport feature_sweep();

  /// Test-split words by instance count, descending; ties lexicographic.
  std::vector<std::pair<std::string, std::size_t>> common_words(std::size_t k) const;

 private:
  const std::map<EntityId, Eigen::VectorXd>& line_encodings();
  const std::map<EntityId, GlobalDescriptor>& word_cache();
  std::vector<KeyedEncoding> page_units(const CorpusIndex::PageUnits& page);
  const EvalResult& page_eval();
  const EvalResult& word_eval();
  void require_pages() const;
  double pct_pages_below(std::size_t n) const;

  const FeatureSource* features_;
  RunConfig cfg_;
  Artifacts artifacts_;
  Encoder encoder_;
  CorpusIndex test_;
  std::optional<std::map<EntityId, Eigen::VectorXd>> line_cache_;
  std::optional<std::map<EntityId, GlobalDescriptor>> word_cache_;
  std::optional<EvalResult> page_eval_;
  std::optional<EvalResult> word_eval_;
  std::size_t skipped_units_ = 0;
  std::size_t skipped_words_ = 0;
};

}  // namespace wr
