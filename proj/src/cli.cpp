#include "wr/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "wr/config.hpp"
#include "wr/error.hpp"
#include "wr/experiments.hpp"
#include "wr/netvlad_train.hpp"
#include "wr/parallel.hpp"
#include "wr/report.hpp"
#include "wr/rng.hpp"
#include "wr/synth.hpp"

namespace wr {

namespace fs = std::filesystem;

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

struct Context {
  RunConfig cfg;
  std::string hash;
  ReportStamp stamp;
};

RunConfig base_config(const Globals& g) {
  std::set<std::string> present;
  RunConfig cfg = g.config_path.empty() ? RunConfig{} : RunConfig::load(g.config_path, &present);
  if (g.seed) {
    cfg.seed = *g.seed;
  } else if (!present.contains("run.seed")) {
    if (auto env = seed_from_environment()) cfg.seed = *env;
  }
  if (g.threads) cfg.threads = *g.threads;
  return cfg;
}

Context finish(RunConfig cfg) {
  cfg.synth.seed = cfg.seed;
  cfg.validate();
  set_thread_count(cfg.threads);
  Context c{cfg, cfg.hash(), {}};
  c.stamp = {cfg.seed, c.hash, std::string(encoder_name(cfg.encoder))};
  return c;
}

std::string stamp_text(const Context& c) {
  return "seed=" + std::to_string(c.cfg.seed) + "\nconfig=" + c.hash + "\n";
}

// Binary formats have no room for provenance; it goes next to them.
void write_meta(const fs::path& file, const Context& c) {
  std::ofstream out(file.string() + ".meta");
  if (!out) fail(ErrorCode::IoError, "cannot write " + file.string() + ".meta");
  out << stamp_text(c);
}

void write_run_config(const fs::path& dir, const Context& c) {
  fs::create_directories(dir);
  std::ofstream out(dir / "run.ini");
  out << "# seed=" << c.cfg.seed << " config=" << c.hash << "\n" << c.cfg.dump();
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

Granularity granularity_option(const std::string& s) { return parse_granularity(s); }

std::size_t default_budget(const RunConfig& cfg, Granularity g) {
  return g == Granularity::Word ? cfg.word_budget : cfg.line_budget;
}

std::vector<const ManifestEntry*> entries_at(const DatasetManifest& m, Granularity g) {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : m.entries) {
    if (e.id.granularity() == g) out.push_back(&e);
  }
  return out;
}

struct LoadedCorpus {
  std::optional<SyntheticCorpus> synthetic;
  std::optional<Corpus> corpus;
};

void load_corpus(LoadedCorpus& lc, const std::string& manifest_flag, const RunConfig& cfg) {
  const std::string path = manifest_flag.empty() ? cfg.manifest : manifest_flag;
  if (!path.empty()) {
    lc.corpus.emplace(Corpus::load(path));
  } else {
    lc.synthetic.emplace(generate_synthetic_corpus(cfg.synth));
    lc.corpus.emplace(lc.synthetic->corpus());
  }
}

FeatureSource make_features(const Corpus& corpus, const RunConfig& cfg) {
  if (cfg.descriptor_source == DescriptorSource::External) {
    return FeatureSource(corpus, cfg.seed, load_external_descriptors(cfg.external_descriptors, corpus.manifest()));
  }
  return FeatureSource(corpus, cfg.seed);
}

std::map<EntityId, LocalDescriptorSet> train_sets(const std::map<EntityId, LocalDescriptorSet>& sets,
                                                  const DatasetManifest& m) {
  std::map<EntityId, LocalDescriptorSet> out;
  for (const auto& [id, s] : sets) {
    if (m.split_of(id) == Split::Train && s.size() > 0) out.emplace(id, s);
  }
  if (out.size() < 2) fail(ErrorCode::InsufficientCorpus, "fewer than two training entities with descriptors");
  return out;
}

RowMatrix rows_subset(const RowMatrix& m, std::size_t budget, std::uint64_t seed) {
  const auto idx = budget_indices(static_cast<std::size_t>(m.rows()), budget, seed);
  RowMatrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

void save_artifacts(const fs::path& dir, const Artifacts& a, const Context& c) {
  fs::create_directories(dir);
  save_codebook(dir / "codebook.bin", a.codebook, c.hash);
  if (a.netvlad) save_netvlad(dir / "netvlad.bin", *a.netvlad, c.hash);
  save_whitening(dir / "whitening.bin", a.whitening, c.hash);
}

Artifacts load_artifacts(const fs::path& dir, const RunConfig& cfg) {
  Artifacts a;
  a.codebook = load_codebook(dir / "codebook.bin");
  if (cfg.encoder == EncoderKind::NetVlad) a.netvlad = load_netvlad(dir / "netvlad.bin");
  a.whitening = load_whitening(dir / "whitening.bin");
  a.requested_out_dim = cfg.out_dim;
  return a;
}

std::vector<GlobalDescriptor> restrict_to_test(std::vector<GlobalDescriptor> all, const std::string& manifest) {
  if (manifest.empty()) return all;
  const DatasetManifest m = load_manifest(manifest);
  std::vector<GlobalDescriptor> out;
  for (auto& g : all) {
    if (m.split_of(g.entity) == Split::Test) out.push_back(std::move(g));
  }
  return out;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Writer retrieval engine and experiment harness", "wr"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "global seed (default: config, then WR_SEED, then 0)");
  app.add_option("--threads", g.threads, "worker cap (0: all cores)");

  std::function<void()> action;

  // synth ---------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "generate a synthetic handwriting corpus");
  std::string synth_out;
  std::optional<int> s_writers, s_train, s_pages, s_lines, s_words;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--writers", s_writers, "test writers");
  synth->add_option("--train-writers", s_train, "training writers");
  synth->add_option("--pages", s_pages, "pages per writer");
  synth->add_option("--lines", s_lines, "lines per page");
  synth->add_option("--words", s_words, "words per line");
  synth->callback([&] {
    action = [&] {
      RunConfig cfg = base_config(g);
      if (s_writers) cfg.synth.writers = *s_writers;
      if (s_train) cfg.synth.train_writers = *s_train;
      if (s_pages) cfg.synth.pages_per_writer = *s_pages;
      if (s_lines) cfg.synth.lines_per_page = *s_lines;
      if (s_words) cfg.synth.words_per_line = *s_words;
      const Context c = finish(cfg);
      const SyntheticCorpus sc = generate_synthetic_corpus(c.cfg.synth);
      write_synthetic_corpus(sc, synth_out);
      const fs::path manifest = fs::path(synth_out) / "manifest.tsv";
      std::stringstream body;
      body << std::ifstream(manifest).rdbuf();
      std::ofstream(manifest, std::ios::trunc) << "# seed=" << c.cfg.seed << " config=" << c.hash << "\n"
                                               << body.str();
      write_run_config(synth_out, c);
      out << "wrote " << sc.manifest.entries.size() << " entries to " << manifest.string() << "\n";
    };
  });

  // binarize ------------------------------------------------------------
  auto* binarize_cmd = app.add_subcommand("binarize", "Otsu-binarize a PNG");
  std::string bin_in, bin_out;
  std::optional<int> bin_threshold;
  binarize_cmd->add_option("input", bin_in, "input PNG")->required()->check(CLI::ExistingFile);
  binarize_cmd->add_option("output", bin_out, "output PNG")->required();
  binarize_cmd->add_option("--threshold", bin_threshold, "fixed threshold instead of Otsu")
      ->check(CLI::Range(0, 255));
  binarize_cmd->callback([&] {
    action = [&] {
      const Context c = finish(base_config(g));
      const GrayImage img = read_png(bin_in);
      const int t = bin_threshold ? *bin_threshold : otsu_threshold(img);
      ensure_parent(bin_out);
      write_png(bin_out, to_gray(binarize(img, t)));
      write_meta(bin_out, c);
      out << "threshold " << t << "\n";
    };
  });

  // sample --------------------------------------------------------------
  auto* sample = app.add_subcommand("sample", "contour keypoints and 32x32 patch dump");
  std::string manifest_flag, sample_out, gran_flag = "line";
  std::optional<std::size_t> budget_flag;
  sample->add_option("--manifest", manifest_flag, "dataset manifest")->required()->check(CLI::ExistingFile);
  sample->add_option("--out", sample_out, "output directory")->required();
  sample->add_option("--granularity", gran_flag, "page, line or word");
  sample->add_option("--budget", budget_flag, "keypoints per entity (0: all)");
  sample->callback([&] {
    action = [&] {
      const Context c = finish(base_config(g));
      const Corpus corpus = Corpus::load(manifest_flag);
      const Granularity gr = granularity_option(gran_flag);
      const std::size_t budget = budget_flag ? *budget_flag : default_budget(c.cfg, gr);
      const auto entries = entries_at(corpus.manifest(), gr);
      std::vector<std::vector<Keypoint>> kps(entries.size());
      std::vector<std::vector<Patch>> patches(entries.size());
      parallel_for(entries.size(), [&](std::size_t i) {
        const BinaryImage img = corpus.binary(*entries[i]);
        const auto all = contour_keypoints(img);
        kps[i] = budget == 0 ? all
                             : budget_keypoints(all, budget, derive_seed(c.cfg.seed, "budget/" + entries[i]->id.str()));
        patches[i] = extract_patches(img, kps[i]);
      });
      fs::create_directories(sample_out);
      std::ofstream kp_out(fs::path(sample_out) / "keypoints.txt");
      kp_out << "# seed=" << c.cfg.seed << " config=" << c.hash << "\n";
      std::vector<PatchRecord> records;
      for (std::size_t i = 0; i < entries.size(); ++i) {
        write_keypoint_dump(kp_out, entries[i]->id, kps[i]);
        for (const auto& p : patches[i]) records.push_back({entries[i]->id, p});
      }
      const fs::path dump = fs::path(sample_out) / "patches.wrpatch";
      write_patch_dump(dump, records);
      write_meta(dump, c);
      out << "sampled " << records.size() << " patches from " << entries.size() << " entities\n";
    };
  });

  // describe ------------------------------------------------------------
  auto* describe = app.add_subcommand("describe", "RootSIFT descriptors at budgeted contour keypoints");
  std::string describe_out;
  describe->add_option("--manifest", manifest_flag, "dataset manifest")->required()->check(CLI::ExistingFile);
  describe->add_option("--out", describe_out, "output WRDESC file")->required();
  describe->add_option("--granularity", gran_flag, "page, line or word");
  describe->add_option("--budget", budget_flag, "keypoints per entity (0: all)");
  describe->callback([&] {
    action = [&] {
      const Context c = finish(base_config(g));
      const Corpus corpus = Corpus::load(manifest_flag);
      const FeatureSource features(corpus, c.cfg.seed);
      const Granularity gr = granularity_option(gran_flag);
      const std::size_t budget = budget_flag ? *budget_flag : default_budget(c.cfg, gr);
      const auto entries = entries_at(corpus.manifest(), gr);
      std::vector<LocalDescriptorSet> sets(entries.size());
      parallel_for(entries.size(), [&](std::size_t i) { sets[i] = features.describe(*entries[i], budget); });
      std::map<EntityId, LocalDescriptorSet> by_id;
      std::size_t rows = 0;
      for (auto& s : sets) {
        rows += s.size();
        by_id.emplace(s.entity, std::move(s));
      }
      ensure_parent(describe_out);
      save_descriptor_sets(describe_out, by_id);
      write_meta(describe_out, c);
      out << "wrote " << rows << " descriptors for " << entries.size() << " entities\n";
    };
  });

  // codebook ------------------------------------------------------------
  auto* codebook = app.add_subcommand("codebook", "k-means vocabulary on training-split descriptors");
  std::string desc_flag, codebook_flag, netvlad_flag, stage_out;
  codebook->add_option("--manifest", manifest_flag, "dataset manifest")->required()->check(CLI::ExistingFile);
  codebook->add_option("--descriptors", desc_flag, "WRDESC local descriptors")->required()->check(CLI::ExistingFile);
  codebook->add_option("--out", stage_out, "output codebook file")->required();
  codebook->callback([&] {
    action = [&] {
      const Context c = finish(base_config(g));
      const DatasetManifest m = load_manifest(manifest_flag);
      const auto sets = train_sets(load_external_descriptors(desc_flag, m), m);
      const std::size_t quota = std::max<std::size_t>(1, c.cfg.codebook_max_descriptors / sets.size());
      std::vector<RowMatrix> parts;
      Eigen::Index total = 0;
      for (const auto& [id, s] : sets) {
        parts.push_back(rows_subset(s.vectors, quota, derive_seed(c.cfg.seed, "codebook-sample/" + id.str())));
        total += parts.back().rows();
      }
      RowMatrix data(total, parts.front().cols());
      Eigen::Index at = 0;
      for (const auto& p : parts) {
        data.middleRows(at, p.rows()) = p;
        at += p.rows();
      }
      KMeansOptions km{c.cfg.n_clusters, derive_seed(c.cfg.seed, "codebook"), c.cfg.kmeans_max_iters, c.cfg.kmeans_tol};
      KMeansReport report;
      const Codebook cb = train_codebook(data, km, &report);
      ensure_parent(stage_out);
      save_codebook(stage_out, cb, c.hash);
      write_meta(stage_out, c);
      out << "codebook: " << cb.n_clusters() << " centers from " << total << " descriptors, " << report.iterations
          << " iterations" << (report.converged ? "" : " (not converged)") << "\n";
    };
  });

  // train-netvlad -------------------------------------------------------
  auto* train = app.add_subcommand("train-netvlad", "train NetVLAD with semi-hard triplets");
  train->add_option("--manifest", manifest_flag, "dataset manifest")->required()->check(CLI::ExistingFile);
  train->add_option("--descriptors", desc_flag, "WRDESC local descriptors")->required()->check(CLI::ExistingFile);
  train->add_option("--codebook", codebook_flag, "codebook file")->required()->check(CLI::ExistingFile);
  train->add_option("--out", stage_out, "output parameter file")->required();
  train->callback([&] {
    action = [&] {
      const Context c = finish(base_config(g));
      const DatasetManifest m = load_manifest(manifest_flag);
      const auto sets = train_sets(load_external_descriptors(desc_flag, m), m);
      std::vector<TrainingSample> samples;
      for (const auto& [id, s] : sets) {
        samples.push_back({id.writer, {rows_subset(s.vectors, c.cfg.netvlad_unit_budget,
                                                   derive_seed(c.cfg.seed, "netvlad-sample/" + id.str()))}});
      }
      TripletConfig tc = c.cfg.triplet;
      tc.seed = derive_seed(c.cfg.seed, "netvlad");
      TrainReport report;
      const NetVladParams p = netvlad_train(samples, tc, load_codebook(codebook_flag), &report);
      ensure_parent(stage_out);
      save_netvlad(stage_out, p, c.hash);
      write_meta(stage_out, c);
      for (std::size_t e = 0; e < report.epoch_loss.size(); ++e) {
        out << "epoch " << e + 1 << " loss " << format_value(report.epoch_loss[e]) << "\n";
      }
    };
  });

  // encode --------------------------------------------------------------
  auto* encode = app.add_subcommand("encode", "pooled, power-normalized encodings per entity");
  encode->add_option("--manifest", manifest_flag, "dataset manifest")->required()->check(CLI::ExistingFile);
  encode->add_option("--descriptors", desc_flag, "WRDESC local descriptors")->required()->check(CLI::ExistingFile);
  encode->add_option("--codebook", codebook_flag, "codebook file")->required()->check(CLI::ExistingFile);
  encode->add_option("--netvlad", netvlad_flag, "NetVLAD parameters (default: VLAD)")->check(CLI::ExistingFile);
  encode->add_option("--granularity", gran_flag, "page (pooled over its lines), line or word");
  encode->add_option("--out", stage_out, "output WRDESC file")->required();
  encode->callback([&] {
    action = [&] {
      const Context c = finish(base_config(g));
      const DatasetManifest m = load_manifest(manifest_flag);
      const auto sets = load_external_descriptors(desc_flag, m);
      const Encoder enc = netvlad_flag.empty() ? Encoder(load_codebook(codebook_flag))
                                               : Encoder(load_codebook(codebook_flag), load_netvlad(netvlad_flag));
      const Granularity gr = granularity_option(gran_flag);
      // Groups of units to pool, keyed by the output entity.
      std::vector<std::pair<EntityId, std::vector<EntityId>>> groups;
      if (gr == Granularity::Page) {
        for (Split split : {Split::Train, Split::Test}) {
          for (const auto& p : CorpusIndex::build(m, split).pages) {
            std::vector<EntityId> units;
            for (const auto* e : p.units) units.push_back(e->id);
            groups.emplace_back(p.page, units);
          }
        }
        std::sort(groups.begin(), groups.end());
      } else {
        const auto entries = entries_at(gr == Granularity::Word ? filter_words(m) : m, gr);
        for (const auto* e : entries) groups.push_back({e->id, {e->id}});
      }
      std::vector<std::optional<Eigen::VectorXd>> vecs(groups.size());
      parallel_for(groups.size(), [&](std::size_t i) {
        std::vector<KeyedEncoding> units;
        for (const auto& id : groups[i].second) {
          auto it = sets.find(id);
          if (it == sets.end() || it->second.size() == 0) continue;
          Eigen::VectorXd v = enc.encode(it->second.vectors);
          if (v.squaredNorm() > 0) units.push_back({id, std::move(v)});
        }
        if (!units.empty()) vecs[i] = pre_whitening(units);
      });
      std::vector<GlobalDescriptor> outv;
      for (std::size_t i = 0; i < groups.size(); ++i) {
        if (vecs[i]) outv.push_back({groups[i].first, std::move(*vecs[i])});
      }
      ensure_parent(stage_out);
      save_global_descriptors(stage_out, outv);
      write_meta(stage_out, c);
      out << "encoded " << outv.size() << " of " << groups.size() << " entities\n";
    };
  });

  // whiten --------------------------------------------------------------
  auto* whiten = app.add_subcommand("whiten", "fit PCA whitening on the training split and apply it");
  std::string encoded_flag, transform_flag, transform_out;
  whiten->add_option("--manifest", manifest_flag, "dataset manifest")->required()->check(CLI::ExistingFile);
  whiten->add_option("--encoded", encoded_flag, "output of encode")->required()->check(CLI::ExistingFile);
  whiten->add_option("--transform", transform_flag, "apply this transform instead of fitting")
      ->check(CLI::ExistingFile);
  whiten->add_option("--transform-out", transform_out, "where to save the fitted transform");
  whiten->add_option("--out", stage_out, "output WRDESC file")->required();
  whiten->callback([&] {
    action = [&] {
      const Context c = finish(base_config(g));
      const DatasetManifest m = load_manifest(manifest_flag);
      const auto all = load_global_descriptors(encoded_flag);
      WhiteningTransform t;
      if (!transform_flag.empty()) {
        t = load_whitening(transform_flag);
      } else {
        std::vector<const GlobalDescriptor*> train;
        for (const auto& d : all) {
          if (m.split_of(d.entity) == Split::Train) train.push_back(&d);
        }
        if (train.size() < 2) fail(ErrorCode::TooFewSamples, "fewer than two training rows to fit whitening");
        RowMatrix x(static_cast<Eigen::Index>(train.size()), train.front()->values.size());
        for (std::size_t i = 0; i < train.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = train[i]->values.transpose();
        const Eigen::Index od = std::min<Eigen::Index>({c.cfg.out_dim, x.rows() - 1, x.cols()});
        t = fit_whitening(x, od, c.cfg.whitening_eps);
        const std::string tpath = transform_out.empty() ? stage_out + ".whitening" : transform_out;
        ensure_parent(tpath);
        save_whitening(tpath, t, c.hash);
        out << "whitening: " << t.in_dim() << " -> " << t.out_dim() << " dims from " << train.size() << " rows\n";
      }
      std::vector<GlobalDescriptor> outv;
      std::size_t skipped = 0;
      for (const auto& d : all) {
        try {
          outv.push_back({d.entity, apply_whitening(d.values, t)});
        } catch (const Error& e) {
          if (e.code() != ErrorCode::ZeroVector) throw;
          ++skipped;
        }
      }
      ensure_parent(stage_out);
      save_global_descriptors(stage_out, outv);
      write_meta(stage_out, c);
      if (skipped) err << "warning: " << skipped << " descriptors whiten to zero and were dropped\n";
    };
  });

  // rank / evaluate -----------------------------------------------------
  auto* rank_cmd = app.add_subcommand("rank", "leave-one-out ranked lists");
  rank_cmd->add_option("--descriptors", desc_flag, "whitened global descriptors")->required()->check(CLI::ExistingFile);
  rank_cmd->add_option("--manifest", manifest_flag, "restrict to the test split of this manifest")
      ->check(CLI::ExistingFile);
  rank_cmd->add_option("--out", stage_out, "ranked-list text file")->required();
  rank_cmd->callback([&] {
    action = [&] {
      const Context c = finish(base_config(g));
      const auto descs = restrict_to_test(load_global_descriptors(desc_flag), manifest_flag);
      std::vector<RankedList> lists;
      EvalOptions opts;
      opts.top_x = c.cfg.top_x;
      const EvalResult e = evaluate_leave_one_out(descs, opts, &lists);
      ensure_parent(stage_out);
      std::ofstream f(stage_out);
      f << "# seed=" << c.cfg.seed << " config=" << c.hash << "\n";
      write_ranked_lists(f, lists);
      out << "ranked " << lists.size() << " queries, mAP " << format_value(e.map) << "\n";
    };
  });

  auto* evaluate_cmd = app.add_subcommand("evaluate", "mAP and Top-x of whitened descriptors");
  std::string eval_name = "evaluate";
  evaluate_cmd->add_option("--descriptors", desc_flag, "whitened global descriptors")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--manifest", manifest_flag, "restrict to the test split of this manifest")
      ->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--out", stage_out, "report directory")->required();
  evaluate_cmd->add_option("--name", eval_name, "report file stem");
  evaluate_cmd->callback([&] {
    action = [&] {
      const Context c = finish(base_config(g));
      const auto descs = restrict_to_test(load_global_descriptors(desc_flag), manifest_flag);
      if (descs.empty()) fail(ErrorCode::EmptyGallery, "no descriptors to evaluate");
      EvalOptions opts;
      opts.top_x = c.cfg.top_x;
      ExperimentReport r;
      r.kind = "evaluate";
      r.granularity = descs.front().entity.granularity();
      r.eval = evaluate_leave_one_out(descs, opts);
      r.add("mAP", r.eval->map);
      for (const auto& [x, v] : r.eval->top_x) r.add("top" + std::to_string(x), v);
      r.add("queries", static_cast<double>(r.eval->ap.size()));
      write_report(stage_out, eval_name, r, c.stamp);
      out << report_summary(r, c.stamp);
    };
  });

  // experiment ----------------------------------------------------------
  auto* experiment = app.add_subcommand("experiment", "granularity studies on the test split");
  std::string kind, artifacts_flag, mode_flag, word_flag, encoder_flag;
  std::optional<std::size_t> merge_flag;
  std::vector<std::size_t> sweep_flag;
  experiment->add_option("kind", kind, "page, line, line-merge, short-query, word, word-specific, feature-sweep, all")
      ->required()
      ->check(CLI::IsMember({"page", "line", "line-merge", "short-query", "word", "word-specific", "feature-sweep",
                             "all"}));
  experiment->add_option("--manifest", manifest_flag, "dataset manifest (default: synthetic corpus)")
      ->check(CLI::ExistingFile);
  experiment->add_option("--out", stage_out, "report directory (default: config output)");
  experiment->add_option("--artifacts", artifacts_flag, "load fitted artifacts instead of training")
      ->check(CLI::ExistingDirectory);
  experiment->add_option("--n", merge_flag, "lines per merged group")->check(CLI::PositiveNumber);
  experiment->add_option("--mode", mode_flag, "short-query mode: full, one-line or half-page");
  experiment->add_option("--word", word_flag, "word for word-specific retrieval");
  experiment->add_option("--sweep", sweep_flag, "features-per-line budgets");
  experiment->add_option("--encoder", encoder_flag, "vlad or netvlad")->check(CLI::IsMember({"vlad", "netvlad"}));
  experiment->callback([&] {
    action = [&] {
      RunConfig cfg = base_config(g);
      if (!sweep_flag.empty()) cfg.sweep = sweep_flag;
      if (!encoder_flag.empty()) cfg.encoder = encoder_flag == "vlad" ? EncoderKind::Vlad : EncoderKind::NetVlad;
      if (merge_flag) cfg.merge_n = {*merge_flag};
      const Context c = finish(cfg);
      const fs::path dir = stage_out.empty() ? fs::path(c.cfg.output) : fs::path(stage_out);
      LoadedCorpus lc;
      load_corpus(lc, manifest_flag, c.cfg);
      const FeatureSource features = make_features(*lc.corpus, c.cfg);
      Artifacts artifacts;
      if (!artifacts_flag.empty()) {
        artifacts = load_artifacts(artifacts_flag, c.cfg);
      } else {
        FitLog log;
        artifacts = fit_artifacts(features, c.cfg, &log);
        save_artifacts(dir / "artifacts", artifacts, c);
        out << "fitted artifacts on " << log.training_units << " training units (" << artifacts.kmeans_samples
            << " k-means samples, whitening " << artifacts.whitening.in_dim() << " -> "
            << artifacts.whitening.out_dim() << ")\n";
      }
      write_run_config(dir, c);
      Experiments ex(features, c.cfg, std::move(artifacts));
      auto emit = [&](const std::string& name, const ExperimentReport& r) {
        write_report(dir, name, r, c.stamp);
        out << "== " << name << "\n" << report_summary(r, c.stamp) << "\n";
      };
      const bool all = kind == "all";
      if (all || kind == "page") emit("page", ex.page_level());
      if (all || kind == "line") emit("line", ex.line_level());
      if (all || kind == "line-merge") {
        if (merge_flag) emit("line-merge-n" + std::to_string(*merge_flag), ex.line_merge(*merge_flag));
        else emit("line-merge", ex.line_merge_curve());
      }
      if (all || kind == "short-query") {
        if (!mode_flag.empty()) {
          const QueryMode qm = parse_query_mode(mode_flag);
          emit("short-query-" + std::string(query_mode_name(qm)), ex.short_query(qm));
        } else {
          for (QueryMode qm : {QueryMode::Full, QueryMode::OneLine, QueryMode::HalfPage}) {
            emit("short-query-" + std::string(query_mode_name(qm)), ex.short_query(qm));
          }
        }
      }
      if (all || kind == "word") emit("word", ex.word_level());
      if (all || kind == "word-specific") {
        if (!word_flag.empty()) emit("word-specific-" + word_flag, ex.word_specific(word_flag));
        else emit("word-specific", ex.word_specific_common());
      }
      if (all || kind == "feature-sweep") emit("feature-sweep", ex.feature_sweep());
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return 0;
    err << "\n" << app.help();
    return 2;
  }
  try {
    if (action) action();
    return 0;
  } catch (const Error& e) {
    err << "error [" << error_name(e.code()) << "]: " << e.what() << "\n";
    return e.code() == ErrorCode::InvalidConfig ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace wr
