#include "wr/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "wr/error.hpp"
#include "wr/rng.hpp"

namespace wr {

void SynthConfig::validate() const {
  if (writers < 1 || pages_per_writer < 1 || lines_per_page < 1 || words_per_line < 1 ||
      train_writers < 0) {
    fail(ErrorCode::InvalidConfig, "synthetic corpus counts must be >= 1");
  }
  if (style_spread < 0 || shape_jitter < 0 || spacing_jitter < 0 || pixel_noise < 0 ||
      punctuation_rate < 0 || punctuation_rate > 1) {
    fail(ErrorCode::InvalidConfig, "synthetic corpus noise parameters must be non-negative");
  }
}

const std::vector<std::string>& synth_vocabulary() {
  static const std::vector<std::string> words = {
      "of", "the", "a",  "on",   "and",  "in",  "or",   "Dann", "is",    "my",
      "but", "du", "will", "that", "his", "with", "it", "like", "which", "other"};
  return words;
}

namespace {

struct Point {
  double x = 0, y = 0;
};

// Cubic Bezier in glyph units: x along the writing direction, y up from the
// baseline with x-height 1.
struct Stroke {
  std::array<Point, 4> p;
};

struct Glyph {
  double advance = 0.8;
  std::vector<Stroke> strokes;
};

constexpr std::uint64_t kScriptSeed = 0x5eed0f5c1a7ULL;

bool has_ascender(char c) {
  return std::string_view("bdfhklt").find(c) != std::string_view::npos || (c >= 'A' && c <= 'Z') ||
         c == '!';
}
bool has_descender(char c) { return std::string_view("gjpqy").find(c) != std::string_view::npos; }

// The shared script: one fixed random glyph per character.
const Glyph& glyph_for(char c) {
  static const std::map<char, Glyph> table = [] {
    std::map<char, Glyph> t;
    auto make = [](char ch) {
      Rng rng(derive_seed(kScriptSeed, std::string(1, ch)));
      Glyph g;
      if (ch == '!') {
        g.advance = 0.35;
        g.strokes.push_back({{{{0.15, 1.6}, {0.17, 1.2}, {0.16, 0.8}, {0.17, 0.45}}}});
        g.strokes.push_back({{{{0.15, 0.05}, {0.17, 0.08}, {0.19, 0.04}, {0.16, 0.0}}}});
        return g;
      }
      g.advance = rng.uniform(0.6, 1.1);
      const double top = has_ascender(ch) ? 1.7 : 1.0;
      const double bottom = has_descender(ch) ? -0.6 : 0.0;
      const int n = 2 + static_cast<int>(rng.below(2));
      Point pen{rng.uniform(0.0, 0.3 * g.advance), rng.uniform(bottom, top)};
      for (int s = 0; s < n; ++s) {
        Stroke st;
        st.p[0] = pen;
        for (int k = 1; k < 4; ++k) {
          st.p[k] = {rng.uniform(-0.1, 1.0) * g.advance, rng.uniform(bottom, top)};
        }
        // Strokes mostly continue from the previous end, as in cursive.
        pen = rng.uniform() < 0.7 ? st.p[3] : Point{rng.uniform(0.0, g.advance), rng.uniform(bottom, top)};
        g.strokes.push_back(st);
      }
      return g;
    };
    for (char ch = 'a'; ch <= 'z'; ++ch) t[ch] = make(ch);
    for (char ch = 'A'; ch <= 'Z'; ++ch) t[ch] = make(ch);
    t['!'] = make('!');
    return t;
  }();
  auto it = table.find(c);
  if (it == table.end()) fail(ErrorCode::InvalidArgument, std::string("no glyph for '") + c + "'");
  return it->second;
}

struct WriterStyle {
  double slant;
  double stroke_width;
  double x_height;
  double width_scale;
  double curvature;
  double glyph_gap;
  double allograph_sd;
  double ink;
  double background;
  std::uint64_t allograph_seed;
};

WriterStyle draw_style(const SynthConfig& cfg, const std::string& writer) {
  Rng rng(derive_seed(cfg.seed, "style:" + writer));
  const double s = cfg.style_spread;
  WriterStyle st;
  st.slant = s * rng.uniform(-0.45, 0.45);
  st.stroke_width = std::max(1.0, 2.4 + s * rng.uniform(-1.0, 1.4));
  st.x_height = std::max(8.0, 18.0 + s * rng.uniform(-5.0, 6.0));
  st.width_scale = std::max(0.5, 1.0 + s * rng.uniform(-0.3, 0.3));
  st.curvature = std::max(0.2, 1.0 + s * rng.uniform(-0.5, 0.5));
  st.glyph_gap = std::max(0.0, 0.15 + s * rng.uniform(-0.1, 0.2));
  st.allograph_sd = 0.12 * s;
  st.ink = rng.uniform(20.0, 80.0);
  st.background = rng.uniform(220.0, 245.0);
  st.allograph_seed = rng.next();
  return st;
}

// Writer-specific variant of a glyph: control points displaced once per
// (writer, character) and curvature applied around each stroke chord.
Glyph allograph(const WriterStyle& st, char c) {
  Glyph g = glyph_for(c);
  Rng rng(derive_seed(st.allograph_seed, std::string(1, c)));
  for (auto& stroke : g.strokes) {
    for (auto& p : stroke.p) {
      p.x += rng.normal(0.0, st.allograph_sd);
      p.y += rng.normal(0.0, st.allograph_sd);
    }
    for (int k = 1; k <= 2; ++k) {
      const double t = k / 3.0;
      const Point chord{stroke.p[0].x + t * (stroke.p[3].x - stroke.p[0].x),
                        stroke.p[0].y + t * (stroke.p[3].y - stroke.p[0].y)};
      stroke.p[k].x = chord.x + st.curvature * (stroke.p[k].x - chord.x);
      stroke.p[k].y = chord.y + st.curvature * (stroke.p[k].y - chord.y);
    }
  }
  return g;
}

Point bezier(const Stroke& s, double t) {
  const double u = 1.0 - t;
  const double b0 = u * u * u, b1 = 3 * u * u * t, b2 = 3 * u * t * t, b3 = t * t * t;
  return {b0 * s.p[0].x + b1 * s.p[1].x + b2 * s.p[2].x + b3 * s.p[3].x,
          b0 * s.p[0].y + b1 * s.p[1].y + b2 * s.p[2].y + b3 * s.p[3].y};
}

// Ink coverage canvas in [0, 1].
struct Canvas {
  int width, height;
  std::vector<float> coverage;
  Canvas(int w, int h) : width(w), height(h), coverage(static_cast<std::size_t>(w) * h, 0.f) {}

  void disc(Point c, double radius) {
    const int x0 = std::max(0, static_cast<int>(std::floor(c.x - radius - 1)));
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil(c.x + radius + 1)));
    const int y0 = std::max(0, static_cast<int>(std::floor(c.y - radius - 1)));
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil(c.y + radius + 1)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double d = std::hypot(x - c.x, y - c.y);
        const float v = static_cast<float>(std::clamp(radius + 0.5 - d, 0.0, 1.0));
        float& cov = coverage[static_cast<std::size_t>(y) * width + x];
        cov = std::max(cov, v);
      }
    }
  }
};

struct PlacedWord {
  std::string text;
  std::vector<std::pair<Point, double>> dabs;  // pixel centers and radii, line-local
  double min_x, max_x, min_y, max_y;
};

// Lays out one line of words in line-local pixel coordinates.
std::vector<PlacedWord> layout_line(const SynthConfig& cfg, const WriterStyle& st,
                                    const std::vector<std::string>& words, Rng& rng, double baseline,
                                    double& line_end) {
  std::vector<PlacedWord> placed;
  const double xh = st.x_height;
  const double radius = st.stroke_width / 2.0;
  double cursor = 0.6 * xh;
  for (const auto& w : words) {
    PlacedWord pw;
    pw.text = w;
    pw.min_x = pw.min_y = 1e300;
    pw.max_x = pw.max_y = -1e300;
    double gx = 0.0;  // glyph origin in x-height units, relative to the word start
    for (char c : w) {
      Glyph g = allograph(st, c);
      for (auto& stroke : g.strokes) {
        for (auto& p : stroke.p) {
          p.x += rng.normal(0.0, cfg.shape_jitter);
          p.y += rng.normal(0.0, cfg.shape_jitter);
        }
        // Arc length estimate from the control polygon sets the sampling step.
        double len = 0.0;
        for (int k = 0; k < 3; ++k) {
          len += std::hypot(stroke.p[k + 1].x - stroke.p[k].x, stroke.p[k + 1].y - stroke.p[k].y);
        }
        const int steps = std::max(2, static_cast<int>(len * xh / 0.4));
        for (int i = 0; i <= steps; ++i) {
          const Point q = bezier(stroke, static_cast<double>(i) / steps);
          const double ux = (gx + q.x * st.width_scale + st.slant * q.y) * xh;
          const Point px{cursor + ux, baseline - q.y * xh};
          pw.dabs.emplace_back(px, radius);
          pw.min_x = std::min(pw.min_x, px.x - radius);
          pw.max_x = std::max(pw.max_x, px.x + radius);
          pw.min_y = std::min(pw.min_y, px.y - radius);
          pw.max_y = std::max(pw.max_y, px.y + radius);
        }
      }
      gx += g.advance * st.width_scale + st.glyph_gap + rng.normal(0.0, cfg.spacing_jitter);
    }
    cursor = pw.max_x + 1.2 * xh * (1.0 + rng.normal(0.0, cfg.spacing_jitter));
    placed.push_back(std::move(pw));
  }
  line_end = placed.empty() ? cursor : placed.back().max_x;
  return placed;
}

std::string pad(int value, int width) {
  std::string s = std::to_string(value);
  return std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
}

void render_writer(const SynthConfig& cfg, const std::string& writer, Split split, SyntheticCorpus& out) {
  const WriterStyle st = draw_style(cfg, writer);
  const auto& vocab = synth_vocabulary();
  const double xh = st.x_height;
  const int line_height = static_cast<int>(std::ceil(3.2 * xh + st.stroke_width));
  const double baseline = 2.0 * xh + st.stroke_width;
  out.manifest.split[writer] = split;

  for (int p = 1; p <= cfg.pages_per_writer; ++p) {
    const std::string page = std::to_string(p);
    const EntityId page_id{writer, page, std::nullopt, std::nullopt};
    Rng rng(derive_seed(cfg.seed, "page:" + page_id.str()));

    struct LineLayout {
      std::vector<PlacedWord> words;
      double end;
    };
    std::vector<LineLayout> lines;
    double page_width = 0;
    for (int l = 0; l < cfg.lines_per_page; ++l) {
      std::vector<std::string> text;
      for (int w = 0; w < cfg.words_per_line; ++w) {
        if (rng.uniform() < cfg.punctuation_rate) {
          text.emplace_back("!");
        } else {
          text.push_back(vocab[rng.below(vocab.size())]);
        }
      }
      LineLayout ll;
      ll.words = layout_line(cfg, st, text, rng, baseline, ll.end);
      page_width = std::max(page_width, ll.end);
      lines.push_back(std::move(ll));
    }

    const int width = static_cast<int>(std::ceil(page_width + 0.6 * xh));
    const int height = line_height * cfg.lines_per_page;
    Canvas canvas(width, height);
    for (int l = 0; l < cfg.lines_per_page; ++l) {
      const double y_off = static_cast<double>(l) * line_height;
      for (const auto& w : lines[l].words) {
        for (const auto& [c, r] : w.dabs) canvas.disc({c.x, c.y + y_off}, r);
      }
    }
    GrayImage img(width, height);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
      const double v = st.background - (st.background - st.ink) * canvas.coverage[i] +
                       rng.normal(0.0, cfg.pixel_noise);
      img.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }

    const std::string path = "pages/" + page_id.str() + ".png";
    out.manifest.entries.push_back({page_id, ImageRef{path, std::nullopt}, std::nullopt});
    for (int l = 0; l < cfg.lines_per_page; ++l) {
      const EntityId line_id{writer, page, static_cast<std::uint32_t>(l), std::nullopt};
      const int y0 = l * line_height;
      const int line_w = std::min(width, static_cast<int>(std::ceil(lines[l].end + 0.3 * xh)));
      std::string line_text;
      for (const auto& w : lines[l].words) line_text += (line_text.empty() ? "" : " ") + w.text;
      out.manifest.entries.push_back({line_id, ImageRef{path, Rect{0, y0, line_w, line_height}}, line_text});
      for (std::size_t k = 0; k < lines[l].words.size(); ++k) {
        const auto& w = lines[l].words[k];
        const int x0 = std::max(0, static_cast<int>(std::floor(w.min_x)) - 2);
        const int x1 = std::min(width, static_cast<int>(std::ceil(w.max_x)) + 2);
        const int wy0 = std::max(0, static_cast<int>(std::floor(w.min_y)) - 2);
        const int wy1 = std::min(line_height, static_cast<int>(std::ceil(w.max_y)) + 2);
        const EntityId word_id{writer, page, static_cast<std::uint32_t>(l), static_cast<std::uint32_t>(k)};
        out.manifest.entries.push_back(
            {word_id, ImageRef{path, Rect{x0, y0 + wy0, x1 - x0, wy1 - wy0}}, w.text});
      }
    }
    out.images.emplace(path, std::move(img));
  }
}

}  // namespace

SyntheticCorpus generate_synthetic_corpus(const SynthConfig& cfg) {
  cfg.validate();
  SyntheticCorpus out;
  const int digits = 3;
  for (int w = 0; w < cfg.writers; ++w) render_writer(cfg, "w" + pad(w, digits), Split::Test, out);
  for (int w = 0; w < cfg.train_writers; ++w) render_writer(cfg, "t" + pad(w, digits), Split::Train, out);
  return out;
}

void write_synthetic_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "pages");
  // Sorted order keeps the written tree independent of hash-map layout.
  std::vector<std::string> paths;
  for (const auto& [path, img] : corpus.images) paths.push_back(path);
  std::sort(paths.begin(), paths.end());
  for (const auto& path : paths) write_png(dir / path, corpus.images.at(path));
  save_manifest(dir / "manifest.tsv", corpus.manifest);
}

}  // namespace wr
