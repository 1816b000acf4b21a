#include "wr/corpus.hpp"

#include <clocale>
#include <cwctype>
#include <fstream>
#include <locale.h>
#include <mutex>
#include <sstream>

#include "wr/error.hpp"

namespace wr {

Histogram histogram(const GrayImage& img) {
  Histogram h{};
  for (auto p : img.pixels) ++h[p];
  return h;
}

int otsu_threshold(const Histogram& hist) {
  std::uint64_t total = 0;
  __int128 total_sum = 0;
  int distinct = 0;
  for (int v = 0; v < 256; ++v) {
    total += hist[v];
    total_sum += static_cast<__int128>(v) * hist[v];
    distinct += hist[v] > 0;
  }
  if (distinct < 2) fail(ErrorCode::DegenerateHistogram, "image has fewer than two intensity values");

  // Between-class variance up to the constant 1/N^2:
  //   (s0*n1 - s1*n0)^2 / (n0*n1)
  // The difference is exact in 128-bit integers so equal splits tie exactly.
  long double best = -1.0L;
  int best_t = 0;
  std::uint64_t n0 = 0;
  __int128 s0 = 0;
  for (int t = 0; t < 255; ++t) {
    n0 += hist[t];
    s0 += static_cast<__int128>(t) * hist[t];
    const std::uint64_t n1 = total - n0;
    if (n0 == 0 || n1 == 0) continue;
    const __int128 s1 = total_sum - s0;
    const __int128 diff = s0 * static_cast<__int128>(n1) - s1 * static_cast<__int128>(n0);
    const long double d = static_cast<long double>(diff);
    const long double score = d * d / (static_cast<long double>(n0) * static_cast<long double>(n1));
    if (score > best) {
      best = score;
      best_t = t;
    }
  }
  return best_t;
}

int otsu_threshold(const GrayImage& img) { return otsu_threshold(histogram(img)); }

BinaryImage binarize(const GrayImage& img, int threshold) {
  BinaryImage out(img.width, img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) out.ink[i] = img.pixels[i] <= threshold ? 1 : 0;
  return out;
}

BinaryImage binarize(const GrayImage& img) { return binarize(img, otsu_threshold(img)); }

// ---------------------------------------------------------------------------

std::string_view split_name(Split s) { return s == Split::Train ? "train" : "test"; }

Split parse_split(std::string_view text) {
  if (text == "train") return Split::Train;
  if (text == "test") return Split::Test;
  fail(ErrorCode::FormatError, "unknown split '" + std::string(text) + "'");
}

ImageRef ImageRef::parse(std::string_view text) {
  ImageRef ref;
  const auto at = text.rfind('@');
  if (at == std::string_view::npos) {
    ref.path = std::string(text);
  } else {
    ref.path = std::string(text.substr(0, at));
    std::istringstream in{std::string(text.substr(at + 1))};
    Rect r;
    char c1 = 0, c2 = 0, c3 = 0;
    if (!(in >> r.x >> c1 >> r.y >> c2 >> r.width >> c3 >> r.height) || c1 != ',' || c2 != ',' ||
        c3 != ',' || !in.eof() || r.width <= 0 || r.height <= 0 || r.x < 0 || r.y < 0) {
      fail(ErrorCode::FormatError, "bad bounding box in image reference '" + std::string(text) + "'");
    }
    ref.box = r;
  }
  if (ref.path.empty()) fail(ErrorCode::FormatError, "empty image path");
  return ref;
}

std::string ImageRef::str() const {
  if (!box) return path;
  return path + "@" + std::to_string(box->x) + "," + std::to_string(box->y) + "," +
         std::to_string(box->width) + "," + std::to_string(box->height);
}

Split DatasetManifest::split_of(const EntityId& id) const {
  auto it = split.find(id.writer);
  if (it == split.end()) fail(ErrorCode::UnknownEntity, "writer '" + id.writer + "' not in manifest");
  return it->second;
}

const ManifestEntry* DatasetManifest::find(const EntityId& id) const {
  for (const auto& e : entries) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find('\t', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

DatasetManifest parse_manifest(std::string_view text) {
  DatasetManifest m;
  std::unordered_map<std::string, std::size_t> seen;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;

    const auto fields = split_tabs(line);
    if (fields.size() < 3 || fields.size() > 4) {
      fail(ErrorCode::FormatError, "manifest line " + std::to_string(line_no) + ": expected 3 or 4 fields");
    }
    ManifestEntry e;
    e.id = EntityId::parse(fields[0]);
    e.image = ImageRef::parse(fields[1]);
    const Split s = parse_split(fields[2]);
    if (fields.size() == 4) e.transcription = std::string(fields[3]);

    auto [it, inserted] = m.split.emplace(e.id.writer, s);
    if (!inserted && it->second != s) {
      fail(ErrorCode::FormatError, "writer '" + e.id.writer + "' has conflicting split tags");
    }
    if (!seen.emplace(e.id.str(), m.entries.size()).second) {
      fail(ErrorCode::FormatError, "duplicate entity id " + e.id.str());
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

std::string serialize_manifest(const DatasetManifest& m) {
  std::string out;
  for (const auto& e : m.entries) {
    out += e.id.str();
    out += '\t';
    out += e.image.str();
    out += '\t';
    out += split_name(m.split_of(e.id));
    if (e.transcription) {
      out += '\t';
      out += *e.transcription;
    }
    out += '\n';
  }
  return out;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open manifest " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  DatasetManifest m = parse_manifest(buf.str());
  const auto root = path.parent_path();
  for (const auto& e : m.entries) {
    if (!std::filesystem::exists(root / e.image.path)) {
      fail(ErrorCode::IoError, "missing image " + (root / e.image.path).string() + " for " + e.id.str());
    }
  }
  return m;
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  std::ofstream out(path, std::ios::binary);
  out << serialize_manifest(m);
  if (!out) fail(ErrorCode::IoError, "cannot write manifest " + path.string());
}

namespace {

// Decodes one UTF-8 sequence; malformed bytes decode as U+FFFD.
char32_t next_code_point(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i++]);
  if (b0 < 0x80) return b0;
  int extra = b0 >= 0xF0 ? 3 : b0 >= 0xE0 ? 2 : b0 >= 0xC0 ? 1 : -1;
  if (extra < 0) return 0xFFFD;
  char32_t cp = b0 & (0x3F >> extra);
  for (int k = 0; k < extra; ++k) {
    if (i >= s.size()) return 0xFFFD;
    const auto b = static_cast<unsigned char>(s[i]);
    if ((b & 0xC0) != 0x80) return 0xFFFD;
    cp = (cp << 6) | (b & 0x3F);
    ++i;
  }
  return cp;
}

locale_t utf8_locale() {
  static locale_t loc = newlocale(LC_CTYPE_MASK, "C.UTF-8", static_cast<locale_t>(nullptr));
  return loc;
}

bool is_alnum_code_point(char32_t cp) {
  if (cp < 0x80) return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
  if (cp == 0xFFFD) return false;
  if (auto loc = utf8_locale()) return iswalnum_l(static_cast<wint_t>(cp), loc) != 0;
  // Without a UTF-8 locale: Latin-1 letters plus everything outside the
  // common punctuation and symbol blocks.
  if (cp < 0xC0) return cp == 0xAA || cp == 0xB5 || cp == 0xBA;
  if (cp == 0xD7 || cp == 0xF7) return false;
  if (cp >= 0x2000 && cp <= 0x2BFF) return false;
  if (cp >= 0x3000 && cp <= 0x303F) return false;
  return true;
}

}  // namespace

bool has_alphanumeric(std::string_view utf8) {
  std::size_t i = 0;
  while (i < utf8.size()) {
    if (is_alnum_code_point(next_code_point(utf8, i))) return true;
  }
  return false;
}

DatasetManifest filter_words(const DatasetManifest& m) {
  DatasetManifest out;
  out.split = m.split;
  for (const auto& e : m.entries) {
    if (e.transcription && !has_alphanumeric(*e.transcription)) continue;
    out.entries.push_back(e);
  }
  return out;
}

// ---------------------------------------------------------------------------

struct Corpus::Cache {
  std::mutex mutex;
  std::string path;
  GrayImage image;
};

Corpus::Corpus(DatasetManifest manifest, std::filesystem::path root)
    : manifest_(std::move(manifest)), root_(std::move(root)), cache_(std::make_shared<Cache>()) {}

Corpus::Corpus(DatasetManifest manifest, std::unordered_map<std::string, GrayImage> images)
    : manifest_(std::move(manifest)), memory_(std::move(images)), cache_(std::make_shared<Cache>()) {}

Corpus Corpus::load(const std::filesystem::path& manifest_path) {
  const auto root = manifest_path.has_parent_path() ? manifest_path.parent_path() : std::filesystem::path(".");
  return Corpus(load_manifest(manifest_path), root);
}

GrayImage Corpus::gray(const ManifestEntry& entry) const {
  const GrayImage* source = nullptr;
  GrayImage loaded;
  std::unique_lock lock(cache_->mutex);
  if (auto it = memory_.find(entry.image.path); it != memory_.end()) {
    source = &it->second;
  } else if (!memory_.empty() || root_.empty()) {
    fail(ErrorCode::UnknownEntity, "no image '" + entry.image.path + "' for " + entry.id.str());
  } else if (cache_->path == entry.image.path) {
    source = &cache_->image;
  } else {
    cache_->image = read_png(root_ / entry.image.path);
    cache_->path = entry.image.path;
    source = &cache_->image;
  }
  if (entry.image.box) return crop(*source, *entry.image.box);
  return *source;
}

BinaryImage Corpus::binary(const ManifestEntry& entry) const { return binarize(gray(entry)); }

}  // namespace wr
