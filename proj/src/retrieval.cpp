#include "wr/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "wr/descriptors.hpp"
#include "wr/error.hpp"
#include "wr/parallel.hpp"
#include "wr/wrdesc.hpp"

namespace wr {

namespace {

// Sorts gallery indices by descending similarity; equal similarities fall
// back to the precomputed id-string order.
std::vector<std::size_t> order_by_similarity(const std::vector<double>& sims,
                                             const std::vector<std::size_t>& candidates,
                                             const std::vector<std::size_t>& id_order) {
  std::vector<std::size_t> idx = candidates;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (sims[a] != sims[b]) return sims[a] > sims[b];
    return id_order[a] < id_order[b];
  });
  return idx;
}

std::vector<std::size_t> id_string_order(std::span<const GlobalDescriptor> gallery) {
  std::vector<std::string> keys;
  keys.reserve(gallery.size());
  for (const auto& g : gallery) keys.push_back(g.entity.str());
  std::vector<std::size_t> by_key(gallery.size());
  std::iota(by_key.begin(), by_key.end(), 0);
  std::sort(by_key.begin(), by_key.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  std::vector<std::size_t> order(gallery.size());
  for (std::size_t r = 0; r < by_key.size(); ++r) order[by_key[r]] = r;
  return order;
}

void check_dims(std::span<const GlobalDescriptor> set, Eigen::Index dim) {
  for (const auto& g : set) {
    if (g.values.size() != dim) fail(ErrorCode::DimMismatch, "descriptor " + g.entity.str() + " has wrong length");
  }
}

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm(), nb = b.norm();
  if (!(na > 0) || !(nb > 0)) fail(ErrorCode::ZeroVector, "cosine similarity of a zero vector");
  return a.dot(b) / (na * nb);
}

}  // namespace

RankedList rank(const GlobalDescriptor& query, std::span<const GlobalDescriptor> gallery) {
  check_dims(gallery, query.values.size());
  std::vector<double> sims(gallery.size(), 0.0);
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < gallery.size(); ++i) {
    if (gallery[i].entity == query.entity) continue;
    sims[i] = cosine(query.values, gallery[i].values);
    candidates.push_back(i);
  }
  if (candidates.empty()) fail(ErrorCode::EmptyGallery, "nothing to rank against " + query.entity.str());
  RankedList out;
  out.query = query.entity;
  for (std::size_t i : order_by_similarity(sims, candidates, id_string_order(gallery))) {
    out.items.push_back({gallery[i].entity, sims[i]});
  }
  return out;
}

namespace {

template <typename Range>
double ap_impl(const Range& ranked_rel) {
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < ranked_rel.size(); ++k) {
    if (!ranked_rel[k]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  if (hits == 0) fail(ErrorCode::NoRelevant, "ranked list has no relevant item");
  return sum / static_cast<double>(hits);
}

template <typename Range>
int top_x_impl(const Range& ranked_rel, std::size_t x) {
  if (x == 0) fail(ErrorCode::InvalidArgument, "x must be positive");
  if (ranked_rel.size() < x) fail(ErrorCode::ListTooShort, "ranked list shorter than x");
  for (std::size_t k = 0; k < x; ++k) {
    if (!ranked_rel[k]) return 0;
  }
  return 1;
}

}  // namespace

double average_precision(std::span<const bool> ranked_rel) { return ap_impl(ranked_rel); }

double average_precision(std::span<const bool> ranked_rel, std::size_t relevant) {
  const auto count = static_cast<std::size_t>(std::count(ranked_rel.begin(), ranked_rel.end(), true));
  if (relevant == 0) fail(ErrorCode::NoRelevant, "R must be positive");
  if (count != relevant) fail(ErrorCode::InvalidArgument, "R does not match the relevant entries");
  return ap_impl(ranked_rel);
}

double average_precision(const std::vector<bool>& ranked_rel) { return ap_impl(ranked_rel); }

double mean_ap(std::span<const double> aps) {
  if (aps.empty()) fail(ErrorCode::NoQueries, "no query with a relevant item");
  double sum = 0.0;
  for (double a : aps) sum += a;
  return sum / static_cast<double>(aps.size());
}

int top_x_hard(std::span<const bool> ranked_rel, std::size_t x) { return top_x_impl(ranked_rel, x); }
int top_x_hard(const std::vector<bool>& ranked_rel, std::size_t x) { return top_x_impl(ranked_rel, x); }

EvalResult evaluate(std::span<const GlobalDescriptor> queries, std::span<const GlobalDescriptor> gallery,
                    const EvalOptions& opts, std::vector<RankedList>* lists) {
  if (queries.empty()) fail(ErrorCode::NoQueries, "no queries");
  if (gallery.empty()) fail(ErrorCode::EmptyGallery, "empty gallery");
  const Eigen::Index dim = gallery.front().values.size();
  check_dims(gallery, dim);
  check_dims(queries, dim);

  RowMatrix g(static_cast<Eigen::Index>(gallery.size()), dim);
  for (std::size_t i = 0; i < gallery.size(); ++i) {
    const double n = gallery[i].values.norm();
    if (!(n > 0)) fail(ErrorCode::ZeroVector, "zero descriptor " + gallery[i].entity.str());
    g.row(static_cast<Eigen::Index>(i)) = gallery[i].values.transpose() / n;
  }
  const std::vector<std::size_t> id_order = id_string_order(gallery);

  struct PerQuery {
    std::vector<std::size_t> order;
    std::vector<double> sims;
    std::vector<bool> rel;
    std::size_t relevant = 0;
  };
  std::vector<PerQuery> per(queries.size());
  parallel_for(queries.size(), [&](std::size_t q) {
    const auto& query = queries[q];
    const double n = query.values.norm();
    if (!(n > 0)) fail(ErrorCode::ZeroVector, "zero descriptor " + query.entity.str());
    const Eigen::VectorXd s = g * (query.values / n);
    PerQuery& r = per[q];
    r.sims.assign(s.data(), s.data() + s.size());
    std::vector<std::size_t> candidates;
    candidates.reserve(gallery.size());
    for (std::size_t i = 0; i < gallery.size(); ++i) {
      if (gallery[i].entity == query.entity) continue;
      if (opts.exclude && opts.exclude(query.entity, gallery[i].entity)) continue;
      candidates.push_back(i);
    }
    if (candidates.empty()) fail(ErrorCode::EmptyGallery, "nothing to rank against " + query.entity.str());
    r.order = order_by_similarity(r.sims, candidates, id_order);
    r.rel.reserve(r.order.size());
    for (std::size_t i : r.order) {
      const bool rel = gallery[i].label() == query.label();
      r.rel.push_back(rel);
      r.relevant += rel ? 1 : 0;
    }
  });

  EvalResult out;
  std::vector<double> aps;
  std::map<std::size_t, std::pair<std::size_t, std::size_t>> top_counts;  // x -> (hits, eligible)
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const EntityId& id = queries[q].entity;
    const PerQuery& r = per[q];
    if (out.relevant.count(id)) fail(ErrorCode::InvalidArgument, "duplicate query id " + id.str());
    out.relevant[id] = r.relevant;
    out.gallery_size[id] = r.order.size();
    if (r.relevant > 0) {
      const double ap = average_precision(r.rel);
      out.ap[id] = ap;
      aps.push_back(ap);
      for (std::size_t x : opts.top_x) {
        auto& c = top_counts[x];
        if (r.rel.size() < x) continue;
        ++c.second;
        c.first += static_cast<std::size_t>(top_x_hard(r.rel, x));
      }
    }
    if (lists) {
      RankedList list;
      list.query = id;
      list.items.reserve(r.order.size());
      for (std::size_t i : r.order) list.items.push_back({gallery[i].entity, r.sims[i]});
      lists->push_back(std::move(list));
    }
  }
  out.map = mean_ap(aps);
  for (const auto& [x, c] : top_counts) {
    if (c.second) out.top_x[x] = static_cast<double>(c.first) / static_cast<double>(c.second);
  }
  return out;
}

EvalResult evaluate_leave_one_out(std::span<const GlobalDescriptor> entities, const EvalOptions& opts,
                                  std::vector<RankedList>* lists) {
  return evaluate(entities, entities, opts, lists);
}

void write_ranked_lists(std::ostream& out, std::span<const RankedList> lists) {
  char buf[64];
  for (const auto& list : lists) {
    const std::string q = list.query.str();
    for (std::size_t r = 0; r < list.items.size(); ++r) {
      const auto& item = list.items[r];
      std::snprintf(buf, sizeof buf, "%.9f", item.similarity);
      out << q << ' ' << (r + 1) << ' ' << item.entity.str() << ' ' << buf << ' '
          << (item.entity.writer == list.query.writer ? 1 : 0) << '\n';
    }
  }
}

void save_global_descriptors(const std::filesystem::path& path, std::span<const GlobalDescriptor> descs) {
  WrdescPayload p;
  p.dim = descs.empty() ? 0 : static_cast<std::uint32_t>(descs.front().values.size());
  p.rows.resize(static_cast<Eigen::Index>(descs.size()), p.dim);
  for (std::size_t i = 0; i < descs.size(); ++i) {
    if (descs[i].values.size() != static_cast<Eigen::Index>(p.dim)) {
      fail(ErrorCode::DimMismatch, "global descriptors differ in length");
    }
    p.rows.row(static_cast<Eigen::Index>(i)) = descs[i].values.transpose().cast<float>();
    p.sidecar.push_back({descs[i].entity.str(), 0, 0});
  }
  save_wrdesc(path, p);
}

std::vector<GlobalDescriptor> load_global_descriptors(const std::filesystem::path& path) {
  const WrdescPayload p = load_wrdesc(path);
  std::vector<GlobalDescriptor> out;
  out.reserve(p.count());
  for (std::size_t i = 0; i < p.count(); ++i) {
    out.push_back({EntityId::parse(p.sidecar[i].label),
                   p.rows.row(static_cast<Eigen::Index>(i)).transpose().cast<double>()});
  }
  return out;
}

}  // namespace wr
