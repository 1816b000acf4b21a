#include "wr/pipeline.hpp"

#include <algorithm>
#include <set>

#include "wr/error.hpp"
#include "wr/netvlad_train.hpp"
#include "wr/parallel.hpp"
#include "wr/rng.hpp"
#include "wr/sampling.hpp"

namespace wr {

namespace {

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = i;
  return out;
}

std::vector<std::size_t> budget_for(std::size_t n, std::size_t budget, std::uint64_t seed) {
  if (budget == 0 || budget >= n) return all_indices(n);
  return budget_indices(n, budget, seed);
}

RowMatrix select_rows(const RowMatrix& m, std::span<const std::size_t> rows) {
  RowMatrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

}  // namespace

FeatureSource::FeatureSource(const Corpus& corpus, std::uint64_t seed) : corpus_(&corpus), seed_(seed) {}

FeatureSource::FeatureSource(const Corpus& corpus, std::uint64_t seed, std::map<EntityId, LocalDescriptorSet> external)
    : corpus_(&corpus), seed_(seed), external_(std::move(external)) {}

LocalDescriptorSet FeatureSource::describe(const ManifestEntry& entry, std::size_t budget) const {
  const std::size_t b[1] = {budget};
  return std::move(describe(entry, b).front());
}

std::vector<LocalDescriptorSet> FeatureSource::describe(const ManifestEntry& entry,
                                                        std::span<const std::size_t> budgets) const {
  const std::uint64_t seed = derive_seed(seed_, "budget/" + entry.id.str());
  std::vector<LocalDescriptorSet> out(budgets.size());
  for (auto& s : out) s.entity = entry.id;

  if (external_) {
    auto it = external_->find(entry.id);
    if (it == external_->end()) {
      for (auto& s : out) s.vectors.resize(0, 0);
      return out;
    }
    const LocalDescriptorSet& all = it->second;
    for (std::size_t b = 0; b < budgets.size(); ++b) {
      const auto rows = budget_for(all.size(), budgets[b], seed);
      out[b].vectors = select_rows(all.vectors, rows);
      for (std::size_t r : rows) out[b].keypoints.push_back(all.keypoints[r]);
    }
    return out;
  }

  const BinaryImage img = corpus_->binary(entry);
  const std::vector<Keypoint> kps = contour_keypoints(img);
  std::vector<std::vector<std::size_t>> chosen(budgets.size());
  std::set<std::size_t> needed;
  for (std::size_t b = 0; b < budgets.size(); ++b) {
    chosen[b] = budget_for(kps.size(), budgets[b], seed);
    needed.insert(chosen[b].begin(), chosen[b].end());
  }
  // Descriptor per keypoint index; rows stay empty where the window has no
  // gradient.
  const GradientField grad(img);
  std::vector<Eigen::VectorXd> desc(kps.size());
  for (std::size_t i : needed) {
    try {
      desc[i] = root_sift(sift_descriptor(grad, kps[i]));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptyDescriptor) throw;
    }
  }
  for (std::size_t b = 0; b < budgets.size(); ++b) {
    std::size_t valid = 0;
    for (std::size_t i : chosen[b]) valid += desc[i].size() ? 1 : 0;
    out[b].vectors.resize(static_cast<Eigen::Index>(valid), kSiftDim);
    Eigen::Index r = 0;
    for (std::size_t i : chosen[b]) {
      if (!desc[i].size()) continue;
      out[b].vectors.row(r++) = desc[i].transpose();
      out[b].keypoints.push_back(kps[i]);
    }
  }
  return out;
}

Encoder::Encoder(Codebook cb) : cb_(std::move(cb)) {}

Encoder::Encoder(Codebook cb, NetVladParams params) : cb_(std::move(cb)), params_(std::move(params)) {
  params_->validate();
}

Eigen::VectorXd Encoder::encode(const RowMatrix& xs) const {
  return params_ ? netvlad_encode(xs, *params_) : vlad_encode(xs, cb_);
}

Eigen::Index Encoder::dim() const {
  return params_ ? params_->n_clusters() * params_->dim() : cb_.n_clusters() * cb_.dim();
}

Eigen::VectorXd pre_whitening(std::span<const KeyedEncoding> units) { return power_normalize(pool_encodings(units)); }

Eigen::VectorXd global_descriptor(std::span<const KeyedEncoding> units, const WhiteningTransform& t) {
  return apply_whitening(pre_whitening(units), t);
}

CorpusIndex CorpusIndex::build(const DatasetManifest& manifest, Split split) {
  CorpusIndex idx;
  std::map<EntityId, std::vector<const ManifestEntry*>> lines;
  std::map<EntityId, const ManifestEntry*> page_entries;
  for (const auto& e : manifest.entries) {
    if (manifest.split_of(e.id) != split) continue;
    switch (e.id.granularity()) {
      case Granularity::Page: page_entries[e.id] = &e; break;
      case Granularity::Line: lines[e.id.page_id()].push_back(&e); break;
      case Granularity::Word: break;
    }
  }
  std::set<EntityId> page_ids;
  for (const auto& [id, _] : lines) page_ids.insert(id);
  for (const auto& [id, _] : page_entries) page_ids.insert(id);
  for (const auto& id : page_ids) {
    PageUnits p{id, {}};
    if (auto it = lines.find(id); it != lines.end()) {
      p.units = it->second;
      std::sort(p.units.begin(), p.units.end(), [](auto* a, auto* b) { return *a->id.line < *b->id.line; });
    } else {
      p.units.push_back(page_entries.at(id));
    }
    idx.pages.push_back(std::move(p));
  }
  // filter_words builds a copy; map back to the original entries.
  const DatasetManifest filtered = filter_words(manifest);
  std::set<EntityId> keep;
  for (const auto& e : filtered.entries) {
    if (e.id.granularity() == Granularity::Word && filtered.split_of(e.id) == split) keep.insert(e.id);
  }
  for (const auto& e : manifest.entries) {
    if (keep.contains(e.id)) idx.words.push_back(&e);
  }
  std::sort(idx.words.begin(), idx.words.end(), [](auto* a, auto* b) { return a->id < b->id; });
  return idx;
}

std::vector<const ManifestEntry*> CorpusIndex::units() const {
  std::vector<const ManifestEntry*> out;
  for (const auto& p : pages) out.insert(out.end(), p.units.begin(), p.units.end());
  return out;
}

std::size_t CorpusIndex::writer_count() const {
  std::set<std::string> w;
  for (const auto& p : pages) w.insert(p.page.writer);
  return w.size();
}

Encoder Artifacts::encoder() const { return netvlad ? Encoder(codebook, *netvlad) : Encoder(codebook); }

std::vector<WhiteningTransform> fit_whitening_for_budgets(const FeatureSource& features, const RunConfig& cfg,
                                                          const Encoder& encoder,
                                                          std::span<const std::size_t> budgets) {
  const CorpusIndex train = CorpusIndex::build(features.corpus().manifest(), Split::Train);
  const auto units = train.units();
  // rows[u][b]: pre-whitening vector of unit u at budget b, empty if the
  // unit produced no usable encoding.
  std::vector<std::vector<Eigen::VectorXf>> rows(units.size());
  parallel_for(units.size(), [&](std::size_t u) {
    const auto sets = features.describe(*units[u], budgets);
    rows[u].resize(budgets.size());
    for (std::size_t b = 0; b < budgets.size(); ++b) {
      if (sets[b].vectors.rows() == 0) continue;
      KeyedEncoding k{units[u]->id, encoder.encode(sets[b].vectors)};
      if (!(k.values.squaredNorm() > 0)) continue;
      rows[u][b] = pre_whitening({&k, 1}).cast<float>();
    }
  });
  std::vector<WhiteningTransform> out;
  for (std::size_t b = 0; b < budgets.size(); ++b) {
    std::size_t n = 0;
    for (const auto& r : rows) n += r[b].size() ? 1 : 0;
    RowMatrix m(static_cast<Eigen::Index>(n), encoder.dim());
    Eigen::Index i = 0;
    for (const auto& r : rows) {
      if (r[b].size()) m.row(i++) = r[b].transpose().cast<double>();
    }
    if (n < 2) fail(ErrorCode::TooFewSamples, "fewer than two training units for whitening");
    const Eigen::Index out_dim =
        std::min<Eigen::Index>({static_cast<Eigen::Index>(cfg.out_dim), m.rows() - 1, m.cols()});
    out.push_back(fit_whitening(m, out_dim, cfg.whitening_eps));
  }
  return out;
}

WhiteningTransform fit_whitening_for_budget(const FeatureSource& features, const RunConfig& cfg,
                                            const Encoder& encoder, std::size_t budget) {
  const std::size_t b[1] = {budget};
  return std::move(fit_whitening_for_budgets(features, cfg, encoder, b).front());
}

Artifacts fit_artifacts(const FeatureSource& features, const RunConfig& cfg, FitLog* log) {
  const CorpusIndex train = CorpusIndex::build(features.corpus().manifest(), Split::Train);
  const auto units = train.units();
  if (units.size() < 2) fail(ErrorCode::InsufficientCorpus, "the training split needs at least two units");
  const bool netvlad = cfg.encoder == EncoderKind::NetVlad;
  const std::size_t quota = std::max<std::size_t>(1, cfg.codebook_max_descriptors / units.size());

  std::vector<RowMatrix> kmeans_rows(units.size()), netvlad_rows(units.size());
  parallel_for(units.size(), [&](std::size_t u) {
    const LocalDescriptorSet set = features.describe(*units[u], cfg.line_budget);
    const std::string id = units[u]->id.str();
    const auto n = static_cast<std::size_t>(set.vectors.rows());
    kmeans_rows[u] = select_rows(set.vectors, budget_for(n, quota, derive_seed(cfg.seed, "codebook-sample/" + id)));
    if (netvlad) {
      netvlad_rows[u] =
          select_rows(set.vectors, budget_for(n, cfg.netvlad_unit_budget, derive_seed(cfg.seed, "netvlad-sample/" + id)));
    }
  });

  Eigen::Index total = 0, dim = 0;
  for (const auto& r : kmeans_rows) {
    total += r.rows();
    if (r.rows()) dim = r.cols();
  }
  RowMatrix data(total, dim);
  Eigen::Index at = 0;
  for (auto& r : kmeans_rows) {
    if (r.rows() == 0) continue;
    if (r.cols() != dim) fail(ErrorCode::DimMismatch, "training descriptors differ in dimension");
    data.middleRows(at, r.rows()) = r;
    at += r.rows();
    r.resize(0, 0);
  }

  Artifacts a;
  a.kmeans_samples = static_cast<std::size_t>(total);
  a.requested_out_dim = cfg.out_dim;
  KMeansOptions km;
  km.n_clusters = cfg.n_clusters;
  km.seed = derive_seed(cfg.seed, "codebook");
  km.max_iters = cfg.kmeans_max_iters;
  km.tol = cfg.kmeans_tol;
  KMeansReport km_report;
  a.codebook = train_codebook(data, km, &km_report);
  data.resize(0, 0);

  TrainReport nv_report;
  if (netvlad) {
    std::vector<TrainingSample> samples;
    for (std::size_t u = 0; u < units.size(); ++u) {
      if (netvlad_rows[u].rows() == 0) continue;
      samples.push_back({units[u]->id.writer, {std::move(netvlad_rows[u])}});
    }
    TripletConfig tc = cfg.triplet;
    tc.seed = derive_seed(cfg.seed, "netvlad");
    a.netvlad = netvlad_train(samples, tc, a.codebook, &nv_report);
  }
  a.whitening = fit_whitening_for_budget(features, cfg, a.encoder(), cfg.line_budget);
  if (log) {
    log->kmeans = km_report;
    log->netvlad_epoch_loss = nv_report.epoch_loss;
    log->training_units = units.size();
  }
  return a;
}

}  // namespace wr
