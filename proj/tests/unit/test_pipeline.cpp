#include <algorithm>

#include "test_util.hpp"
#include "wr/pipeline.hpp"
#include "wr/rng.hpp"
#include "wr/synth.hpp"

using namespace wr;

namespace {

SynthConfig tiny_synth() {
  SynthConfig s;
  s.writers = 3;
  s.train_writers = 3;
  s.pages_per_writer = 2;
  s.lines_per_page = 3;
  s.words_per_line = 3;
  s.seed = 4;
  return s;
}

RunConfig tiny_config() {
  RunConfig cfg;
  cfg.synth = tiny_synth();
  cfg.n_clusters = 8;
  cfg.codebook_max_descriptors = 4000;
  cfg.kmeans_max_iters = 10;
  cfg.line_budget = 300;
  cfg.word_budget = 100;
  cfg.seed = 4;
  return cfg;
}

const SyntheticCorpus& tiny_corpus() {
  static const SyntheticCorpus c = generate_synthetic_corpus(tiny_synth());
  return c;
}

}  // namespace

TEST_CASE("budgeted descriptors depend only on seed, id and budget") {
  const auto corpus = tiny_corpus().corpus();
  const FeatureSource a(corpus, 9), b(corpus, 9), c(corpus, 10);
  const auto& entry = corpus.manifest().entries[1];
  REQUIRE(entry.id.granularity() == Granularity::Line);

  const auto all = a.describe(entry, 0);
  const auto s = a.describe(entry, 100);
  CHECK(all.size() > 100);
  CHECK(s.size() <= 100);
  CHECK(s.size() > 90);
  CHECK(b.describe(entry, 100).vectors == s.vectors);
  CHECK_FALSE(c.describe(entry, 100).keypoints == s.keypoints);
  for (const auto& kp : s.keypoints) CHECK(std::find(all.keypoints.begin(), all.keypoints.end(), kp) != all.keypoints.end());

  const std::vector<std::size_t> budgets = {50, 0, 100};
  const auto many = a.describe(entry, budgets);
  REQUIRE(many.size() == 3);
  CHECK(many[0].vectors == a.describe(entry, 50).vectors);
  CHECK(many[1].vectors == all.vectors);
  CHECK(many[2].vectors == s.vectors);
}

TEST_CASE("external descriptors are budgeted the same way") {
  const auto corpus = tiny_corpus().corpus();
  const auto& entry = corpus.manifest().entries[1];
  LocalDescriptorSet set;
  set.entity = entry.id;
  set.vectors = RowMatrix::Random(40, 5);
  for (int i = 0; i < 40; ++i) set.keypoints.push_back({i, 0});
  std::map<EntityId, LocalDescriptorSet> ext{{entry.id, set}};
  const FeatureSource f(corpus, 1, ext);
  CHECK(f.external());
  CHECK(f.describe(entry, 0).vectors == set.vectors);
  const auto sub = f.describe(entry, 10);
  CHECK(sub.size() == 10);
  const auto idx = budget_indices(40, 10, derive_seed(1, "budget/" + entry.id.str()));
  for (std::size_t i = 0; i < idx.size(); ++i) CHECK(sub.keypoints[i].x == static_cast<int>(idx[i]));
  CHECK(f.describe(corpus.manifest().entries[2], 10).size() == 0);
}

TEST_CASE("corpus index groups lines under pages") {
  const auto& m = tiny_corpus().manifest;
  const auto test = CorpusIndex::build(m, Split::Test);
  CHECK(test.pages.size() == 6);
  CHECK(test.writer_count() == 3);
  CHECK(std::is_sorted(test.pages.begin(), test.pages.end(),
                       [](const auto& a, const auto& b) { return a.page.str() < b.page.str(); }));
  for (const auto& p : test.pages) {
    REQUIRE(p.units.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(p.units[i]->id.page_id() == p.page);
      CHECK(p.units[i]->id.line == std::optional<std::uint32_t>(static_cast<std::uint32_t>(i)));
    }
  }
  CHECK(test.units().size() == 18);
  for (const auto* w : test.words) CHECK(m.split_of(w->id) == Split::Test);
  CHECK(std::is_sorted(test.words.begin(), test.words.end(),
                       [](auto* a, auto* b) { return a->id.str() < b->id.str(); }));

  // without line entries a page is its own unit
  const auto pages_only = parse_manifest("a-1\tx.png\ttest\na-2\ty.png\ttest\n");
  const auto idx = CorpusIndex::build(pages_only, Split::Test);
  REQUIRE(idx.pages.size() == 2);
  REQUIRE(idx.pages[0].units.size() == 1);
  CHECK(idx.pages[0].units[0]->id == EntityId::parse("a-1"));
}

TEST_CASE("global descriptors are unit norm and order independent") {
  const auto corpus = tiny_corpus().corpus();
  const auto cfg = tiny_config();
  const FeatureSource f(corpus, cfg.seed);
  FitLog log;
  const auto art = fit_artifacts(f, cfg, &log);
  CHECK(log.training_units == 18);
  // 18 training lines: at most 17 whitened dimensions
  CHECK(art.whitening.out_dim() == 17);
  CHECK(art.requested_out_dim == 256);
  CHECK(art.codebook.n_clusters() == 8);
  CHECK(art.kmeans_samples <= 4000);
  CHECK_FALSE(art.netvlad.has_value());
  const auto enc = art.encoder();
  CHECK(enc.dim() == 8 * kSiftDim);

  const auto test = CorpusIndex::build(corpus.manifest(), Split::Test);
  std::vector<KeyedEncoding> units;
  for (const auto* u : test.pages[0].units) units.push_back({u->id, enc.encode(f.describe(*u, cfg.line_budget).vectors)});
  const auto g = global_descriptor(units, art.whitening);
  CHECK(g.size() == 17);
  CHECK(g.norm() == doctest::Approx(1.0));
  std::reverse(units.begin(), units.end());
  CHECK(global_descriptor(units, art.whitening) == g);
  CHECK(pre_whitening(units).norm() == doctest::Approx(1.0));

  const auto again = fit_artifacts(f, cfg);
  CHECK(again.codebook.centers == art.codebook.centers);
  CHECK(again.whitening.projection == art.whitening.projection);

  const std::vector<std::size_t> budgets = {50, 300};
  const auto ws = fit_whitening_for_budgets(f, cfg, enc, budgets);
  REQUIRE(ws.size() == 2);
  CHECK(ws[1].projection == art.whitening.projection);
  CHECK(fit_whitening_for_budget(f, cfg, enc, 50).projection == ws[0].projection);
}

TEST_CASE("NetVLAD artifacts") {
  const auto corpus = tiny_corpus().corpus();
  auto cfg = tiny_config();
  cfg.encoder = EncoderKind::NetVlad;
  cfg.triplet.epochs = 2;
  cfg.triplet.batch_size = 6;
  cfg.triplet.samples_per_writer = 2;
  cfg.netvlad_unit_budget = 100;
  const FeatureSource f(corpus, cfg.seed);
  FitLog log;
  const auto art = fit_artifacts(f, cfg, &log);
  REQUIRE(art.netvlad.has_value());
  CHECK(art.encoder().kind() == EncoderKind::NetVlad);
  CHECK(log.netvlad_epoch_loss.size() == 2);
}
