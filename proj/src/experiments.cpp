#include "wr/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "wr/error.hpp"
#include "wr/parallel.hpp"

namespace wr {

std::string_view query_mode_name(QueryMode m) {
  switch (m) {
    case QueryMode::Full: return "full";
    case QueryMode::OneLine: return "one-line";
    case QueryMode::HalfPage: return "half-page";
  }
  return "?";
}

QueryMode parse_query_mode(std::string_view text) {
  if (text == "full" || text == "FP") return QueryMode::Full;
  if (text == "one-line" || text == "1L") return QueryMode::OneLine;
  if (text == "half-page" || text == "HP") return QueryMode::HalfPage;
  fail(ErrorCode::InvalidArgument, "unknown query mode '" + std::string(text) + "'");
}

double ExperimentReport::metric(std::string_view name) const {
  for (const auto& [k, v] : metrics) {
    if (k == name) return v;
  }
  fail(ErrorCode::InvalidArgument, "report has no metric '" + std::string(name) + "'");
}

namespace {

void add_eval(ExperimentReport& r, const EvalResult& e, const std::string& suffix = "") {
  r.add("mAP" + suffix, e.map);
  for (const auto& [x, v] : e.top_x) r.add("top" + std::to_string(x) + suffix, v);
  r.add("queries" + suffix, static_cast<double>(e.ap.size()));
}

EvalOptions eval_options(const RunConfig& cfg) {
  EvalOptions o;
  o.top_x = cfg.top_x;
  return o;
}

std::optional<Eigen::VectorXd> try_global(std::span<const KeyedEncoding> units, const WhiteningTransform& t) {
  if (units.empty()) return std::nullopt;
  try {
    return global_descriptor(units, t);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ZeroVector) throw;
    return std::nullopt;
  }
}

}  // namespace

Experiments::Experiments(const FeatureSource& features, RunConfig cfg, Artifacts artifacts)
    : features_(&features),
      cfg_(std::move(cfg)),
      artifacts_(std::move(artifacts)),
      encoder_(artifacts_.encoder()),
      test_(CorpusIndex::build(features.corpus().manifest(), Split::Test)) {}

const std::map<EntityId, Eigen::VectorXd>& Experiments::line_encodings() {
  if (line_cache_) return *line_cache_;
  const auto units = test_.units();
  std::vector<Eigen::VectorXd> enc(units.size());
  parallel_for(units.size(), [&](std::size_t u) {
    const LocalDescriptorSet set = features_->describe(*units[u], cfg_.line_budget);
    if (set.vectors.rows() == 0) return;
    Eigen::VectorXd v = encoder_.encode(set.vectors);
    if (v.squaredNorm() > 0) enc[u] = std::move(v);
  });
  line_cache_.emplace();
  for (std::size_t u = 0; u < units.size(); ++u) {
    if (enc[u].size()) line_cache_->emplace(units[u]->id, std::move(enc[u]));
    else ++skipped_units_;
  }
  return *line_cache_;
}

std::vector<KeyedEncoding> Experiments::page_units(const CorpusIndex::PageUnits& page) {
  const auto& cache = line_encodings();
  std::vector<KeyedEncoding> out;
  for (const auto* e : page.units) {
    if (auto it = cache.find(e->id); it != cache.end()) out.push_back({e->id, it->second});
  }
  return out;
}

std::vector<GlobalDescriptor> Experiments::page_globals() {
  std::vector<GlobalDescriptor> out;
  for (const auto& page : test_.pages) {
    const auto units = page_units(page);
    if (auto g = try_global(units, artifacts_.whitening)) out.push_back({page.page, std::move(*g)});
  }
  return out;
}

std::vector<GlobalDescriptor> Experiments::line_globals() {
  std::vector<GlobalDescriptor> out;
  for (const auto& [id, enc] : line_encodings()) {
    if (id.granularity() != Granularity::Line) continue;
    const KeyedEncoding k{id, enc};
    if (auto g = try_global({&k, 1}, artifacts_.whitening)) out.push_back({id, std::move(*g)});
  }
  return out;
}

std::vector<GlobalDescriptor> Experiments::merge_globals(std::size_t n) {
  if (n == 0) fail(ErrorCode::InvalidArgument, "merge size must be positive");
  std::vector<GlobalDescriptor> out;
  for (const auto& page : test_.pages) {
    const auto units = page_units(page);
    if (units.empty() || units.front().unit.granularity() != Granularity::Line) continue;
    for (std::size_t start = 0; start + n <= units.size(); start += n) {
      const std::span<const KeyedEncoding> group(units.data() + start, n);
      if (auto g = try_global(group, artifacts_.whitening)) out.push_back({group.front().unit, std::move(*g)});
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.entity < b.entity; });
  return out;
}

const std::map<EntityId, GlobalDescriptor>& Experiments::word_cache() {
  if (word_cache_) return *word_cache_;
  const auto& words = test_.words;
  std::vector<std::optional<Eigen::VectorXd>> g(words.size());
  parallel_for(words.size(), [&](std::size_t w) {
    const LocalDescriptorSet set = features_->describe(*words[w], cfg_.word_budget);
    if (set.vectors.rows() == 0) return;
    const KeyedEncoding k{words[w]->id, encoder_.encode(set.vectors)};
    if (!(k.values.squaredNorm() > 0)) return;
    g[w] = try_global({&k, 1}, artifacts_.whitening);
  });
  word_cache_.emplace();
  for (std::size_t w = 0; w < words.size(); ++w) {
    if (g[w]) word_cache_->emplace(words[w]->id, GlobalDescriptor{words[w]->id, std::move(*g[w])});
    else ++skipped_words_;
  }
  return *word_cache_;
}

std::vector<GlobalDescriptor> Experiments::word_globals() {
  std::vector<GlobalDescriptor> out;
  for (const auto& [id, g] : word_cache()) out.push_back(g);
  return out;
}

double Experiments::pct_pages_below(std::size_t n) const {
  if (test_.pages.empty()) return 0.0;
  std::size_t short_pages = 0;
  for (const auto& p : test_.pages) {
    const bool lines = !p.units.empty() && p.units.front()->id.granularity() == Granularity::Line;
    if (!lines || p.units.size() < n) ++short_pages;
  }
  return 100.0 * static_cast<double>(short_pages) / static_cast<double>(test_.pages.size());
}

void Experiments::require_pages() const {
  std::map<std::string, std::size_t> pages_per_writer;
  for (const auto& p : test_.pages) ++pages_per_writer[p.page.writer];
  std::size_t ok = 0;
  for (const auto& [w, n] : pages_per_writer) ok += n >= 2 ? 1 : 0;
  if (ok < 2) fail(ErrorCode::InsufficientCorpus, "need at least two writers with two pages in the test split");
}

const EvalResult& Experiments::page_eval() {
  if (!page_eval_) {
    require_pages();
    page_eval_ = evaluate_leave_one_out(page_globals(), eval_options(cfg_));
  }
  return *page_eval_;
}

const EvalResult& Experiments::word_eval() {
  if (!word_eval_) {
    const auto g = word_globals();
    if (g.size() < 2) fail(ErrorCode::InsufficientCorpus, "fewer than two usable test words");
    word_eval_ = evaluate_leave_one_out(g, eval_options(cfg_));
  }
  return *word_eval_;
}

ExperimentReport Experiments::page_level() {
  ExperimentReport r;
  r.kind = "page";
  r.granularity = Granularity::Page;
  add_eval(r, page_eval());
  r.eval = page_eval();
  if (skipped_units_) r.notes.push_back(std::to_string(skipped_units_) + " units without descriptors skipped");
  return r;
}

ExperimentReport Experiments::line_level() {
  const auto g = line_globals();
  if (g.size() < 2) fail(ErrorCode::InsufficientCorpus, "fewer than two usable test lines");
  ExperimentReport r;
  r.kind = "line";
  r.granularity = Granularity::Line;
  r.eval = evaluate_leave_one_out(g, eval_options(cfg_));
  add_eval(r, *r.eval);
  return r;
}

ExperimentReport Experiments::line_merge(std::size_t n) {
  const auto g = merge_globals(n);
  if (g.empty()) fail(ErrorCode::EmptyAfterMerge, "no page has " + std::to_string(n) + " lines");
  if (g.size() < 2) fail(ErrorCode::InsufficientCorpus, "fewer than two merged groups");
  const double page_map = page_eval().map;
  ExperimentReport r;
  r.kind = "line-merge";
  r.granularity = Granularity::Line;
  r.eval = evaluate_leave_one_out(g, eval_options(cfg_));
  add_eval(r, *r.eval);
  r.add("mAP_page", page_map);
  r.add("normalized_mAP", r.eval->map / page_map);
  const double pct = pct_pages_below(n);
  r.line_count_histogram[n] = pct;
  r.add("pct_pages_lt_n_lines", pct);
  r.add("n", static_cast<double>(n));
  return r;
}

ExperimentReport Experiments::line_merge_curve() {
  ExperimentReport r;
  r.kind = "line-merge";
  r.granularity = Granularity::Line;
  const double page_map = page_eval().map;
  r.add("mAP_page", page_map);
  Curve raw{"mAP_vs_lines", "lines merged", "mAP", {}};
  Curve norm{"normalized_mAP_vs_lines", "lines merged", "mAP / mAP_page", {}};
  Curve hist{"pct_pages_lt_n_lines", "lines merged", "% pages with fewer lines", {}};
  for (std::size_t n : cfg_.merge_n) {
    ExperimentReport one;
    try {
      one = line_merge(n);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptyAfterMerge && e.code() != ErrorCode::InsufficientCorpus) throw;
      r.notes.push_back("n=" + std::to_string(n) + ": " + e.what());
      r.line_count_histogram[n] = pct_pages_below(n);
      hist.points.emplace_back(static_cast<double>(n), r.line_count_histogram[n]);
      continue;
    }
    const std::string s = "_n" + std::to_string(n);
    r.add("mAP" + s, one.metric("mAP"));
    r.add("normalized_mAP" + s, one.metric("normalized_mAP"));
    r.add("pct_pages_lt_n_lines" + s, one.metric("pct_pages_lt_n_lines"));
    r.line_count_histogram[n] = one.metric("pct_pages_lt_n_lines");
    raw.points.emplace_back(static_cast<double>(n), one.metric("mAP"));
    norm.points.emplace_back(static_cast<double>(n), one.metric("normalized_mAP"));
    hist.points.emplace_back(static_cast<double>(n), one.metric("pct_pages_lt_n_lines"));
  }
  r.curves = {raw, norm, hist};
  return r;
}

ExperimentReport Experiments::short_query(QueryMode mode) {
  if (mode == QueryMode::Full) {
    ExperimentReport r = page_level();
    r.kind = "short-query";
    r.add("mAP_FP", r.eval->map);
    return r;
  }
  require_pages();
  const auto gallery = page_globals();
  std::vector<GlobalDescriptor> queries;
  for (const auto& page : test_.pages) {
    const auto units = page_units(page);
    if (units.empty() || units.front().unit.granularity() != Granularity::Line) continue;
    std::vector<std::span<const KeyedEncoding>> fragments;
    if (mode == QueryMode::OneLine) {
      for (std::size_t i = 0; i < units.size(); ++i) fragments.emplace_back(units.data() + i, 1);
    } else {
      // First ceil(L/2) annotated lines against the rest.
      const std::size_t cut = (page.units.size() + 1) / 2;
      std::set<EntityId> first_half;
      for (std::size_t i = 0; i < cut; ++i) first_half.insert(page.units[i]->id);
      std::size_t first = 0;
      while (first < units.size() && first_half.contains(units[first].unit)) ++first;
      if (first > 0) fragments.emplace_back(units.data(), first);
      if (first < units.size()) fragments.emplace_back(units.data() + first, units.size() - first);
    }
    for (const auto& f : fragments) {
      if (auto g = try_global(f, artifacts_.whitening)) queries.push_back({f.front().unit, std::move(*g)});
    }
  }
  EvalOptions opts = eval_options(cfg_);
  opts.exclude = [](const EntityId& q, const EntityId& g) { return q.page_id() == g.page_id(); };
  ExperimentReport r;
  r.kind = "short-query";
  r.granularity = Granularity::Page;
  r.eval = evaluate(queries, gallery, opts);
  add_eval(r, *r.eval);
  const std::string tag = mode == QueryMode::OneLine ? "1L" : "HP";
  r.add("mAP_" + tag, r.eval->map);
  // The other reading of "mean mAP": average per page first, then over pages.
  std::map<EntityId, std::pair<double, std::size_t>> per_page;
  for (const auto& [id, ap] : r.eval->ap) {
    auto& acc = per_page[id.page_id()];
    acc.first += ap;
    ++acc.second;
  }
  double sum = 0;
  for (const auto& [_, acc] : per_page) sum += acc.first / static_cast<double>(acc.second);
  r.add("mAP_" + tag + "_page_mean", per_page.empty() ? 0.0 : sum / static_cast<double>(per_page.size()));
  r.notes.push_back("mAP pools all fragments; mAP_" + tag + "_page_mean averages per page first");
  return r;
}

ExperimentReport Experiments::word_level() {
  ExperimentReport r;
  r.kind = "word";
  r.granularity = Granularity::Word;
  r.eval = word_eval();
  add_eval(r, *r.eval);
  if (skipped_words_) r.notes.push_back(std::to_string(skipped_words_) + " words without descriptors skipped");
  return r;
}

std::vector<std::pair<std::string, std::size_t>> Experiments::common_words(std::size_t k) const {
  std::map<std::string, std::size_t> counts;
  for (const auto* w : test_.words) {
    if (w->transcription) ++counts[*w->transcription];
  }
  std::vector<std::pair<std::string, std::size_t>> out(counts.begin(), counts.end());
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (out.size() > k) out.resize(k);
  return out;
}

ExperimentReport Experiments::word_specific(const std::string& word) {
  const auto& cache = word_cache();
  std::vector<GlobalDescriptor> instances;
  std::set<std::string> writers;
  for (const auto* w : test_.words) {
    if (!w->transcription || *w->transcription != word) continue;
    auto it = cache.find(w->id);
    if (it == cache.end()) continue;
    instances.push_back(it->second);
    writers.insert(w->id.writer);
  }
  if (instances.size() < 2 || writers.size() < 2) {
    fail(ErrorCode::WordTooRare, "'" + word + "' has " + std::to_string(instances.size()) + " usable instances from " +
                                     std::to_string(writers.size()) + " writers");
  }
  ExperimentReport r;
  r.kind = "word-specific";
  r.granularity = Granularity::Word;
  try {
    r.eval = evaluate_leave_one_out(instances, eval_options(cfg_));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoQueries) throw;
    fail(ErrorCode::WordTooRare, "no writer uses '" + word + "' twice");
  }
  add_eval(r, *r.eval);
  std::vector<double> baseline;
  const EvalResult& all = word_eval();
  for (const auto& [id, ap] : r.eval->ap) baseline.push_back(all.ap.at(id));
  r.add("mAP_word_level_same_queries", mean_ap(baseline));
  r.per_word[word] = r.eval->map;
  return r;
}

ExperimentReport Experiments::word_specific_common() {
  ExperimentReport r;
  r.kind = "word-specific";
  r.granularity = Granularity::Word;
  const EvalResult& all = word_eval();
  std::vector<double> specific, baseline;
  Curve curve{"mAP_per_word", "word rank", "mAP", {}};
  std::size_t rank = 0;
  for (const auto& [word, count] : common_words(cfg_.common_words)) {
    ++rank;
    ExperimentReport one;
    try {
      one = word_specific(word);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::WordTooRare) throw;
      r.notes.push_back(e.what());
      continue;
    }
    r.per_word[word] = one.eval->map;
    curve.points.emplace_back(static_cast<double>(rank), one.eval->map);
    for (const auto& [id, ap] : one.eval->ap) {
      specific.push_back(ap);
      baseline.push_back(all.ap.at(id));
    }
    r.notes.push_back(word + ": " + std::to_string(count) + " instances");
  }
  if (specific.empty()) fail(ErrorCode::WordTooRare, "no common word is shared by two writers");
  r.add("mAP_word_specific", mean_ap(specific));
  r.add("mAP_word_level_shared", mean_ap(baseline));
  std::vector<double> per;
  for (const auto& [w, m] : r.per_word) per.push_back(m);
  r.add("mAP_word_specific_macro", mean_ap(per));
  r.add("mAP_word_level", all.map);
  r.add("words", static_cast<double>(r.per_word.size()));
  for (const auto& [w, m] : r.per_word) r.add("mAP_word_" + w, m);
  r.curves.push_back(curve);
  return r;
}

ExperimentReport Experiments::feature_sweep() {
  require_pages();
  const std::vector<std::size_t>& budgets = cfg_.sweep;
  if (budgets.empty()) fail(ErrorCode::InvalidConfig, "empty sweep");
  const auto whitening = fit_whitening_for_budgets(*features_, cfg_, encoder_, budgets);

  // Per page and budget: keyed unit encodings. Identical budgeted sets
  // (budget above the keypoint count) are encoded once.
  const auto& pages = test_.pages;
  std::vector<std::vector<std::optional<Eigen::VectorXd>>> globals(pages.size());
  parallel_for(pages.size(), [&](std::size_t p) {
    std::vector<std::vector<KeyedEncoding>> units(budgets.size());
    for (const auto* e : pages[p].units) {
      const auto sets = features_->describe(*e, budgets);
      std::vector<Eigen::VectorXd> enc(budgets.size());
      for (std::size_t b = 0; b < budgets.size(); ++b) {
        if (sets[b].vectors.rows() == 0) continue;
        for (std::size_t prev = 0; prev < b; ++prev) {
          if (enc[prev].size() && sets[prev].keypoints == sets[b].keypoints) {
            enc[b] = enc[prev];
            break;
          }
        }
        if (!enc[b].size()) enc[b] = encoder_.encode(sets[b].vectors);
        if (enc[b].squaredNorm() > 0) units[b].push_back({e->id, enc[b]});
      }
    }
    globals[p].resize(budgets.size());
    for (std::size_t b = 0; b < budgets.size(); ++b) globals[p][b] = try_global(units[b], whitening[b]);
  });

  ExperimentReport r;
  r.kind = "feature-sweep";
  r.granularity = Granularity::Page;
  Curve curve{"mAP_vs_features", "features per line", "mAP", {}};
  for (std::size_t b = 0; b < budgets.size(); ++b) {
    std::vector<GlobalDescriptor> g;
    for (std::size_t p = 0; p < pages.size(); ++p) {
      if (globals[p][b]) g.push_back({pages[p].page, *globals[p][b]});
    }
    const EvalResult e = evaluate_leave_one_out(g, eval_options(cfg_));
    r.add("mAP_features_" + std::to_string(budgets[b]), e.map);
    curve.points.emplace_back(static_cast<double>(budgets[b]), e.map);
  }
  r.curves.push_back(curve);
  return r;
}

}  // namespace wr
