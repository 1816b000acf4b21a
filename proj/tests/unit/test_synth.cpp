#include <set>

#include "test_util.hpp"
#include "wr/synth.hpp"

using namespace wr;

namespace {

SynthConfig small_config() {
  SynthConfig cfg;
  cfg.writers = 3;
  cfg.train_writers = 2;
  cfg.pages_per_writer = 2;
  cfg.lines_per_page = 3;
  cfg.words_per_line = 4;
  cfg.seed = 77;
  return cfg;
}

}  // namespace

TEST_CASE("same seed renders the same corpus") {
  const auto a = generate_synthetic_corpus(small_config());
  const auto b = generate_synthetic_corpus(small_config());
  CHECK(a.manifest == b.manifest);
  CHECK(a.images == b.images);

  auto other = small_config();
  other.seed = 78;
  const auto c = generate_synthetic_corpus(other);
  CHECK_FALSE(a.images == c.images);
}

TEST_CASE("manifest covers pages, lines and words with splits") {
  const auto cfg = small_config();
  const auto s = generate_synthetic_corpus(cfg);
  std::size_t pages = 0, lines = 0, words = 0;
  std::set<std::string> train, test;
  for (const auto& e : s.manifest.entries) {
    switch (e.id.granularity()) {
      case Granularity::Page: ++pages; break;
      case Granularity::Line: ++lines; break;
      case Granularity::Word: ++words; break;
    }
    (s.manifest.split_of(e.id) == Split::Train ? train : test).insert(e.id.writer);
    CHECK(s.images.count(e.image.path) == 1);
    if (e.image.box) {
      const auto& img = s.images.at(e.image.path);
      CHECK(e.image.box->x >= 0);
      CHECK(e.image.box->y >= 0);
      CHECK(e.image.box->width > 0);
      CHECK(e.image.box->height > 0);
      CHECK(e.image.box->x + e.image.box->width <= img.width);
      CHECK(e.image.box->y + e.image.box->height <= img.height);
    }
  }
  const std::size_t total_writers = cfg.writers + cfg.train_writers;
  CHECK(pages == total_writers * cfg.pages_per_writer);
  CHECK(lines == pages * cfg.lines_per_page);
  CHECK(words == lines * cfg.words_per_line);
  CHECK(test.size() == static_cast<std::size_t>(cfg.writers));
  CHECK(train.size() == static_cast<std::size_t>(cfg.train_writers));
  // the serialized manifest parses back unchanged
  CHECK(parse_manifest(serialize_manifest(s.manifest)) == s.manifest);
}

TEST_CASE("rendered lines binarize to ink") {
  const auto s = generate_synthetic_corpus(small_config());
  const auto corpus = s.corpus();
  for (const auto& e : s.manifest.entries) {
    if (e.id.granularity() != Granularity::Line) continue;
    const auto bin = corpus.binary(e);
    CHECK(bin.ink_count() > 0);
    CHECK(bin.ink_count() < bin.ink.size() / 2);
  }
}

TEST_CASE("written corpus loads from disk") {
  const auto s = generate_synthetic_corpus(small_config());
  test::TempDir dir("synth");
  write_synthetic_corpus(s, dir.path());
  const auto loaded = Corpus::load(dir / "manifest.tsv");
  CHECK(loaded.manifest() == s.manifest);
  const auto& e = s.manifest.entries[1];
  CHECK(loaded.gray(e) == s.corpus().gray(e));
}

TEST_CASE("invalid generator settings") {
  auto cfg = small_config();
  cfg.writers = 0;
  CHECK_FAILS_WITH(generate_synthetic_corpus(cfg), ErrorCode::InvalidConfig);
  cfg = small_config();
  cfg.pixel_noise = -1;
  CHECK_FAILS_WITH(cfg.validate(), ErrorCode::InvalidConfig);
}
