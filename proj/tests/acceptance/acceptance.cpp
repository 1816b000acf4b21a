// Acceptance suite: one PASS/FAIL/SKIP line per criterion, nonzero exit on
// any failure. WR_SEED picks the seed of the synthetic runs (default 1).
// Optional real-data checks run when WR_CVL_MANIFEST and WR_CVL_FEATURES
// point at a CVL manifest and an external WRDESC feature file.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "wr/aggregation.hpp"
#include "wr/config.hpp"
#include "wr/corpus.hpp"
#include "wr/descriptors.hpp"
#include "wr/encoding.hpp"
#include "wr/error.hpp"
#include "wr/experiments.hpp"
#include "wr/netvlad_train.hpp"
#include "wr/parallel.hpp"
#include "wr/pipeline.hpp"
#include "wr/retrieval.hpp"
#include "wr/synth.hpp"

using namespace wr;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
  if (!ok) ++failures;
}

void skip(const std::string& name, const std::string& why) {
  std::cout << "SKIP " << name << ": " << why << std::endl;
}

// Runs a criterion; an exception counts as a failure.
void criterion(const std::string& name, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(name, false, std::string("exception: ") + e.what());
  }
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

RowMatrix gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& gen, double mean = 0.0, double sd = 1.0) {
  std::normal_distribution<double> n(mean, sd);
  RowMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(gen);
  return m;
}

// ---------------------------------------------------------------------------

void vlad_oracle(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<int> dim(1, 8), clusters(1, 5), count(1, 50);
  double worst = 0;
  Stopwatch sw;
  for (int t = 0; t < 200; ++t) {
    const int d = dim(gen), k = clusters(gen), n = count(gen);
    const Codebook cb{gaussian(k, d, gen), 0};
    const RowMatrix xs = gaussian(n, d, gen);
    worst = std::max(worst, (vlad_encode(xs, cb) - oracle::vlad(xs, cb.centers)).cwiseAbs().maxCoeff());
  }
  const double secs = sw.seconds();
  report("vlad-oracle", worst < 1e-9 && secs < 5.0,
         "200 instances, max abs error " + fmt(worst) + ", " + fmt(secs, 3) + " s");
}

void netvlad_hard_limit(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<int> dim(2, 8), clusters(2, 5), count(5, 50);
  double worst = 0;
  for (int t = 0; t < 50; ++t) {
    const int d = dim(gen), k = clusters(gen), n = count(gen);
    const Codebook cb{gaussian(k, d, gen), 0};
    // Keep descriptors whose two nearest centers differ by at least 0.05 in
    // squared distance, so alpha = 1e4 leaves a margin of 500 in the logits.
    RowMatrix xs(n, d);
    Eigen::Index kept = 0;
    while (kept < n) {
      const Eigen::RowVectorXd x = gaussian(1, d, gen).row(0);
      std::vector<double> sq;
      for (Eigen::Index c = 0; c < k; ++c) sq.push_back((x - cb.centers.row(c)).squaredNorm());
      std::sort(sq.begin(), sq.end());
      if (sq[1] - sq[0] >= 0.05) xs.row(kept++) = x;
    }
    const auto hard = vlad_encode(xs, cb);
    const auto soft = netvlad_encode(xs, netvlad_init(cb, 1e4));
    worst = std::max(worst, (soft - hard).norm() / hard.norm());
  }
  report("netvlad-hard-limit", worst < 1e-3, "50 instances, max relative error " + fmt(worst));
}

void gradient_check(std::uint64_t seed) {
  Stopwatch sw;
  std::mt19937_64 gen(seed);
  std::vector<TrainingSample> samples;
  for (int w = 0; w < 2; ++w) {
    for (int s = 0; s < 3; ++s) {
      TrainingSample t{w == 0 ? "alice" : "bob", {}};
      for (int u = 0; u < 2; ++u) t.units.push_back(gaussian(12, 4, gen, w == 0 ? 0.0 : 0.3, 0.6));
      samples.push_back(std::move(t));
    }
  }
  const auto params = netvlad_init(Codebook{gaussian(3, 4, gen, 0.0, 0.7), 0}, 2.0);
  const double margin = 1.0, h = 1e-5;
  std::vector<std::string> labels;
  for (const auto& s : samples) labels.push_back(s.label);
  const auto emb = pooled_embeddings(params, samples);
  // Triplets away from the hinge kink, where the loss is differentiable.
  std::vector<Triplet> active;
  for (const auto& t : mine_semi_hard(emb, labels, margin)) {
    if (triplet_loss(emb.row(t.anchor).transpose(), emb.row(t.positive).transpose(),
                     emb.row(t.negative).transpose(), margin) > 1e-2)
      active.push_back(t);
  }
  if (active.empty()) {
    report("gradient-check", false, "no active triplets on the toy problem");
    return;
  }
  const auto analytic = triplet_objective(params, samples, active, margin, true).gradient;
  double worst = 0;
  std::size_t checked = 0;
  auto block = [&](RowMatrix NetVladParams::*m) {
    const auto& g = analytic.*m;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      NetVladParams up = params, down = params;
      (up.*m).data()[i] += h;
      (down.*m).data()[i] -= h;
      const double numeric = (triplet_objective(up, samples, active, margin, false).loss -
                              triplet_objective(down, samples, active, margin, false).loss) /
                             (2 * h);
      const double a = g.data()[i];
      worst = std::max(worst, std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6}));
      ++checked;
    }
  };
  block(&NetVladParams::centers);
  block(&NetVladParams::weights);
  for (Eigen::Index i = 0; i < analytic.biases.size(); ++i) {
    NetVladParams up = params, down = params;
    up.biases[i] += h;
    down.biases[i] -= h;
    const double numeric = (triplet_objective(up, samples, active, margin, false).loss -
                            triplet_objective(down, samples, active, margin, false).loss) /
                           (2 * h);
    const double a = analytic.biases[i];
    worst = std::max(worst, std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6}));
    ++checked;
  }
  const double secs = sw.seconds();
  report("gradient-check", worst < 1e-4 && secs < 30.0,
         std::to_string(checked) + " parameters, " + std::to_string(active.size()) +
             " triplets, max relative error " + fmt(worst) + ", " + fmt(secs, 3) + " s");
}

void ap_oracle(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<int> length(1, 60);
  double worst = 0;
  for (int t = 0; t < 1000; ++t) {
    const int n = length(gen);
    std::bernoulli_distribution coin(std::uniform_real_distribution<double>(0.05, 0.95)(gen));
    std::vector<bool> rel(n);
    for (int i = 0; i < n; ++i) rel[i] = coin(gen);
    rel[std::uniform_int_distribution<int>(0, n - 1)(gen)] = true;
    worst = std::max(worst, std::abs(average_precision(rel) - oracle::average_precision(rel)));
  }
  const double hand = average_precision(std::vector<bool>{true, false, true});
  const bool hand_ok = std::abs(hand - 5.0 / 6.0) < 1e-15;
  report("ap-oracle", worst < 1e-12 && hand_ok,
         "1000 lists, max abs error " + fmt(worst) + "; [t,f,t] -> " + fmt(hand, 17));
}

void otsu_oracle(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  int mismatches = 0;
  for (int t = 0; t < 100; ++t) {
    Histogram h{};
    // Mixtures of two or three bumps plus sparse noise.
    const int bumps = 2 + t % 2;
    for (int b = 0; b < bumps; ++b) {
      const double mu = std::uniform_real_distribution<double>(0, 255)(gen);
      const double sd = std::uniform_real_distribution<double>(2, 40)(gen);
      const int n = std::uniform_int_distribution<int>(100, 100000)(gen);
      std::normal_distribution<double> g(mu, sd);
      for (int i = 0; i < n; ++i) ++h[static_cast<std::size_t>(std::clamp(std::lround(g(gen)), 0L, 255L))];
    }
    for (int i = 0; i < 20; ++i) ++h[std::uniform_int_distribution<int>(0, 255)(gen)];
    mismatches += otsu_threshold(h) != oracle::otsu(h);
  }
  report("otsu-oracle", mismatches == 0, "100 histograms, " + std::to_string(mismatches) + " mismatches");
}

void whitening(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  RowMatrix xs = gaussian(1000, 2, gen);
  xs.col(0) *= 2.0;  // variance 4
  const auto t = fit_whitening(xs, 2);
  RowMatrix ys(1000, 2);
  for (Eigen::Index i = 0; i < 1000; ++i) ys.row(i) = whiten_unnormalized(xs.row(i).transpose(), t).transpose();
  const RowMatrix centered = ys.rowwise() - ys.colwise().mean();
  const Eigen::Matrix2d cov = centered.transpose() * centered / 999.0;
  const double dev = (cov - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff();
  report("whitening", dev < 0.1, "max |cov - I| entry " + fmt(dev));
}

// ---------------------------------------------------------------------------

void permutation_invariance(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  const RowMatrix train = gaussian(40, 24, gen);
  const auto t = fit_whitening(train, 16);
  std::vector<KeyedEncoding> units;
  for (std::uint32_t l = 0; l < 12; ++l) units.push_back({EntityId{"w1", "p1", l, std::nullopt}, gaussian(24, 1, gen).col(0)});
  const Eigen::VectorXd ref = global_descriptor(units, t);
  int mismatches = 0;
  for (int trial = 0; trial < 50; ++trial) {
    std::shuffle(units.begin(), units.end(), gen);
    const Eigen::VectorXd g = global_descriptor(units, t);
    mismatches += !(g.size() == ref.size() &&
                    std::equal(g.data(), g.data() + g.size(), ref.data(), [](double a, double b) {
                      return std::memcmp(&a, &b, sizeof a) == 0;
                    }));
  }
  report("permutation-invariance", mismatches == 0,
         "50 permutations of 12 line encodings, " + std::to_string(mismatches) + " differing globals");
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    files[fs::relative(e.path(), root).string()] = std::string(std::istreambuf_iterator<char>(in), {});
  }
  return files;
}

void reproducible_outputs(std::uint64_t seed) {
  const fs::path dir = fs::temp_directory_path() / ("wr-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "run.ini") << "[run]\nseed = " << seed
                                 << "\n[synth]\nwriters = 4\ntrain_writers = 4\npages_per_writer = 3\n"
                                    "lines_per_page = 4\nwords_per_line = 4\n"
                                    "[sampling]\nline_budget = 300\nword_budget = 80\n"
                                    "[codebook]\nn_clusters = 16\nmax_descriptors = 8000\nmax_iters = 10\n"
                                    "[experiments]\nmerge_n = 1 2 4\nsweep = 20 100 300\ncommon_words = 3\n";
  auto run = [&](const std::string& out) {
    const std::string cmd = std::string(WR_CLI_PATH) + " --config " + (dir / "run.ini").string() +
                            " experiment all --out " + (dir / out).string() + " > " + (dir / (out + ".log")).string() +
                            " 2>&1";
    const int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  const int a = run("a"), b = run("b");
  if (a != 0 || b != 0) {
    report("reproducible-outputs", false, "experiment all exited with " + std::to_string(a) + "/" + std::to_string(b));
    return;
  }
  const auto ta = read_tree(dir / "a"), tb = read_tree(dir / "b");
  std::size_t csvs = 0;
  for (const auto& [name, _] : ta) csvs += name.ends_with(".csv");
  const bool same = ta == tb;
  report("reproducible-outputs", same && csvs >= 7,
         std::to_string(ta.size()) + " files (" + std::to_string(csvs) + " CSVs) " +
             (same ? "byte-identical" : "differ") + " across two seeded runs");
  fs::remove_all(dir);
}

bool same_bits(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

void merge_one_is_line_level(Experiments& ex) {
  const auto lines = ex.line_globals();
  const auto merged = ex.merge_globals(1);
  bool same = lines.size() == merged.size();
  for (std::size_t i = 0; same && i < lines.size(); ++i)
    same = lines[i].entity == merged[i].entity && same_bits(lines[i].values, merged[i].values);
  const auto l = ex.line_level(), m = ex.line_merge(1);
  same = same && l.eval->ap == m.eval->ap && l.eval->map == m.eval->map;
  report("merge-one-equals-line", same,
         std::to_string(lines.size()) + " line globals, mAP " + fmt(l.eval->map) + " vs " + fmt(m.eval->map));
}

// ---------------------------------------------------------------------------

RunConfig trend_config(std::uint64_t seed, EncoderKind encoder) {
  RunConfig cfg;
  cfg.seed = seed;
  cfg.synth.seed = seed;  // default synth shape: 20 + 10 writers, 5 pages, 8 lines, 6 words
  cfg.codebook_max_descriptors = 50000;
  cfg.kmeans_max_iters = 30;
  cfg.encoder = encoder;
  cfg.validate();
  return cfg;
}

void trend_suite(std::uint64_t seed) {
  Stopwatch sw;
  const RunConfig cfg = trend_config(seed, EncoderKind::Vlad);
  const SyntheticCorpus sc = generate_synthetic_corpus(cfg.synth);
  const Corpus corpus = sc.corpus();
  const FeatureSource features(corpus, cfg.seed);
  Experiments ex(features, cfg, fit_artifacts(features, cfg));

  const double page = ex.page_level().metric("mAP");
  report("trend-a-page-map", page >= 0.95, "page mAP " + fmt(page));

  const double line = ex.line_level().metric("mAP");
  report("trend-b-line-below-page", line <= page, "line mAP " + fmt(line) + " <= page mAP " + fmt(page));

  auto merged_ratios = [&](Experiments& e, const std::string& tag) {
    std::ostringstream detail;
    bool ok = true;
    for (std::size_t n = 4; n <= static_cast<std::size_t>(cfg.synth.lines_per_page); ++n) {
      const double r = e.line_merge(n).metric("normalized_mAP");
      ok = ok && r >= 0.90;
      detail << " n=" << n << ":" << fmt(r);
    }
    report("trend-c-merged-lines-" + tag, ok, "mAP(n)/mAP_page" + detail.str());
  };
  merged_ratios(ex, "vlad");

  const double full = ex.short_query(QueryMode::Full).metric("mAP_FP");
  const double one = ex.short_query(QueryMode::OneLine).metric("mAP_1L");
  report("trend-d-short-query", full - one <= 0.02, "FP " + fmt(full) + ", 1L " + fmt(one));

  const auto words = ex.word_specific_common();
  const double specific = words.metric("mAP_word_specific"), shared = words.metric("mAP_word_level_shared");
  report("trend-e-word-specific", specific >= shared,
         "word-specific " + fmt(specific) + " vs word-level " + fmt(shared) + " on " +
             fmt(words.metric("words"), 3) + " shared words");

  const auto sweep = ex.feature_sweep();
  std::ostringstream pts;
  bool monotone = true;
  double prev = -1;
  for (std::size_t b : cfg.sweep) {
    const double m = sweep.metric("mAP_features_" + std::to_string(b));
    if (prev >= 0 && m < prev - 0.02) monotone = false;
    prev = m;
    pts << " " << b << ":" << fmt(m);
  }
  report("trend-f-feature-sweep", monotone, "mAP by budget" + pts.str());

  merge_one_is_line_level(ex);

  const RunConfig ncfg = trend_config(seed, EncoderKind::NetVlad);
  Experiments nex(features, ncfg, fit_artifacts(features, ncfg));
  merged_ratios(nex, "netvlad");

  const double secs = sw.seconds();
  report("trend-runtime", secs < 600.0, fmt(secs, 4) + " s for the synthetic suite");
}

// ---------------------------------------------------------------------------

void licensed_data(std::uint64_t seed) {
  const char* manifest = std::getenv("WR_CVL_MANIFEST");
  const char* feats = std::getenv("WR_CVL_FEATURES");
  if (!manifest || !feats) {
    skip("cvl-page-vlad", "WR_CVL_MANIFEST / WR_CVL_FEATURES not set");
    skip("cvl-line-netvlad", "WR_CVL_MANIFEST / WR_CVL_FEATURES not set");
    skip("cvl-word-dann", "WR_CVL_MANIFEST / WR_CVL_FEATURES not set");
    return;
  }
  RunConfig cfg;
  if (const char* path = std::getenv("WR_CVL_CONFIG")) cfg = RunConfig::load(path);
  cfg.seed = seed;
  cfg.manifest = manifest;
  cfg.descriptor_source = DescriptorSource::External;
  cfg.external_descriptors = feats;
  const Corpus corpus = Corpus::load(manifest);
  const FeatureSource features(corpus, cfg.seed, load_external_descriptors(feats, corpus.manifest()));

  cfg.encoder = EncoderKind::Vlad;
  Experiments vlad(features, cfg, fit_artifacts(features, cfg));
  const double page = 100 * vlad.page_level().metric("mAP");
  report("cvl-page-vlad", std::abs(page - 97.4) <= 1.5, "page mAP " + fmt(page) + " (target 97.4 +- 1.5)");
  criterion("cvl-word-dann", [&] {
    const double dann = 100 * vlad.word_specific("Dann").metric("mAP_word_specific");
    report("cvl-word-dann", std::abs(dann - 71.4) <= 5.0, "word-specific mAP " + fmt(dann) + " (target 71.4 +- 5)");
  });

  cfg.encoder = EncoderKind::NetVlad;
  Experiments net(features, cfg, fit_artifacts(features, cfg));
  const double line = 100 * net.line_level().metric("mAP");
  report("cvl-line-netvlad", std::abs(line - 68.6) <= 2.0, "line mAP " + fmt(line) + " (target 68.6 +- 2.0)");
}

}  // namespace

int main() {
  std::uint64_t seed = 1;
  try {
    seed = seed_from_environment().value_or(1);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
  std::cout << "acceptance suite, seed " << seed << std::endl;
  criterion("vlad-oracle", [&] { vlad_oracle(seed); });
  criterion("netvlad-hard-limit", [&] { netvlad_hard_limit(seed); });
  criterion("gradient-check", [&] { gradient_check(seed); });
  criterion("ap-oracle", [&] { ap_oracle(seed); });
  criterion("otsu-oracle", [&] { otsu_oracle(seed); });
  criterion("whitening", [&] { whitening(seed); });
  criterion("permutation-invariance", [&] { permutation_invariance(seed); });
  criterion("reproducible-outputs", [&] { reproducible_outputs(seed); });
  criterion("trend-suite", [&] { trend_suite(seed); });
  criterion("cvl", [&] { licensed_data(seed); });
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
