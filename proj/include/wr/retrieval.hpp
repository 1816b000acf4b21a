#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "wr/entity_id.hpp"

namespace wr {

struct GlobalDescriptor {
  EntityId entity;
  Eigen::VectorXd values;

  const std::string& label() const { return entity.writer; }
};

struct RankedItem {
  EntityId entity;
  double similarity;
};

struct RankedList {
  EntityId query;
  std::vector<RankedItem> items;  // descending similarity, ties by id string
};

/// Cosine-similarity ranking. Gallery entries carrying the query's id are
/// skipped.
RankedList rank(const GlobalDescriptor& query, std::span<const GlobalDescriptor> gallery);

/// Mean over relevant positions of precision at that position. Throws
/// NoRelevant if the list holds no relevant item.
double average_precision(std::span<const bool> ranked_rel);
/// As above, checking that `relevant` matches the number of true entries.
double average_precision(std::span<const bool> ranked_rel, std::size_t relevant);
double average_precision(const std::vector<bool>& ranked_rel);

/// Arithmetic mean; NoQueries when empty.
double mean_ap(std::span<const double> aps);

/// 1 iff the first x entries are all relevant; ListTooShort if the list is
/// shorter than x.
int top_x_hard(std::span<const bool> ranked_rel, std::size_t x);
int top_x_hard(const std::vector<bool>& ranked_rel, std::size_t x);

inline const std::vector<std::size_t> kDefaultTopX{1, 3, 5, 10};

struct EvalResult {
  std::map<EntityId, double> ap;                 // queries with at least one relevant item
  std::map<EntityId, std::size_t> relevant;      // all queries
  std::map<EntityId, std::size_t> gallery_size;  // all queries
  double map = 0.0;
  /// Fraction of queries (with R >= 1 and at least x gallery items) whose
  /// first x results share the query's writer. Absent when no query qualifies.
  std::map<std::size_t, double> top_x;
  std::size_t n_queries() const { return relevant.size(); }
};

struct EvalOptions {
  std::vector<std::size_t> top_x = kDefaultTopX;
  /// Gallery items for which exclude(query, item) holds are dropped. Items
  /// with the query's id are always dropped.
  std::function<bool(const EntityId&, const EntityId&)> exclude;
};

/// Ranks every query against the gallery and scores it with writer-label
/// relevance. Ranked lists are appended to `lists` when given.
EvalResult evaluate(std::span<const GlobalDescriptor> queries, std::span<const GlobalDescriptor> gallery,
                    const EvalOptions& opts = {}, std::vector<RankedList>* lists = nullptr);

/// Every entity queries all the others.
EvalResult evaluate_leave_one_out(std::span<const GlobalDescriptor> entities, const EvalOptions& opts = {},
                                  std::vector<RankedList>* lists = nullptr);

/// `query_id rank gallery_id similarity relevant` lines, ranks from 1.
void write_ranked_lists(std::ostream& out, std::span<const RankedList> lists);

void save_global_descriptors(const std::filesystem::path& path, std::span<const GlobalDescriptor> descs);
std::vector<GlobalDescriptor> load_global_descriptors(const std::filesystem::path& path);

}  // namespace wr
