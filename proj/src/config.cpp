#include "wr/config.hpp"

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "wr/error.hpp"

namespace wr {

std::string_view descriptor_source_name(DescriptorSource s) {
  return s == DescriptorSource::Native ? "native" : "external";
}

std::string_view encoder_name(EncoderKind e) { return e == EncoderKind::Vlad ? "vlad" : "netvlad"; }

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& why) {
  fail(ErrorCode::InvalidConfig, key + ": " + why);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = first + text.size();
  if constexpr (std::is_floating_point_v<T>) {
    char* end = nullptr;
    value = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size()) bad(key, "not a number: '" + text + "'");
  } else {
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) bad(key, "not an integer: '" + text + "'");
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  bad(key, "not a boolean: '" + text + "'");
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<std::size_t>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(xs[i]);
  }
  return out;
}

// One entry per configurable field: how to read it from its inputs and how
// to print it. The table order is the dump order.
struct Field {
  std::string section;
  std::string key;
  std::function<void(RunConfig&, const std::vector<std::string>&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::string& single(const std::string& key, const std::vector<std::string>& in) {
  if (in.size() != 1) bad(key, "expected one value");
  return in.front();
}

template <typename T, typename Member>
Field number(std::string section, std::string key, Member member) {
  Field f{section, key, {}, {}};
  f.set = [key, member](RunConfig& c, const std::vector<std::string>& in) {
    std::invoke(member, c) = parse_number<T>(key, single(key, in));
  };
  f.get = [member](const RunConfig& c) {
    if constexpr (std::is_floating_point_v<T>) return fmt_double(std::invoke(member, const_cast<RunConfig&>(c)));
    else return std::to_string(std::invoke(member, const_cast<RunConfig&>(c)));
  };
  return f;
}

template <typename Member>
Field text(std::string section, std::string key, Member member) {
  return {section, key,
          [key, member](RunConfig& c, const std::vector<std::string>& in) {
            std::invoke(member, c) = in.empty() ? std::string() : single(key, in);
          },
          [member](const RunConfig& c) { return std::invoke(member, c); }};
}

template <typename Member>
Field list(std::string section, std::string key, Member member) {
  return {section, key,
          [key, member](RunConfig& c, const std::vector<std::string>& in) {
            std::vector<std::size_t> out;
            for (const auto& item : in) {
              std::stringstream ss(item);
              std::string tok;
              while (ss >> tok) out.push_back(parse_number<std::size_t>(key, tok));
            }
            std::invoke(member, c) = out;
          },
          [member](const RunConfig& c) { return join(std::invoke(member, c)); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    using C = RunConfig;
    std::vector<Field> t;
    t.push_back(number<std::uint64_t>("run", "seed", &C::seed));
    t.push_back(number<unsigned>("run", "threads", &C::threads));
    t.push_back(text("run", "manifest", &C::manifest));
    t.push_back(text("run", "output", &C::output));

    t.push_back(number<int>("synth", "writers", [](C& c) -> int& { return c.synth.writers; }));
    t.push_back(number<int>("synth", "train_writers", [](C& c) -> int& { return c.synth.train_writers; }));
    t.push_back(number<int>("synth", "pages_per_writer", [](C& c) -> int& { return c.synth.pages_per_writer; }));
    t.push_back(number<int>("synth", "lines_per_page", [](C& c) -> int& { return c.synth.lines_per_page; }));
    t.push_back(number<int>("synth", "words_per_line", [](C& c) -> int& { return c.synth.words_per_line; }));
    t.push_back(number<double>("synth", "style_spread", [](C& c) -> double& { return c.synth.style_spread; }));
    t.push_back(number<double>("synth", "shape_jitter", [](C& c) -> double& { return c.synth.shape_jitter; }));
    t.push_back(number<double>("synth", "spacing_jitter", [](C& c) -> double& { return c.synth.spacing_jitter; }));
    t.push_back(number<double>("synth", "pixel_noise", [](C& c) -> double& { return c.synth.pixel_noise; }));
    t.push_back(
        number<double>("synth", "punctuation_rate", [](C& c) -> double& { return c.synth.punctuation_rate; }));

    t.push_back(number<int>("sampling", "patch_side", &C::patch_side));
    t.push_back(number<std::size_t>("sampling", "line_budget", &C::line_budget));
    t.push_back(number<std::size_t>("sampling", "word_budget", &C::word_budget));

    t.push_back({"descriptors", "source",
                 [](C& c, const std::vector<std::string>& in) {
                   const auto& v = single("source", in);
                   if (v == "native") c.descriptor_source = DescriptorSource::Native;
                   else if (v == "external") c.descriptor_source = DescriptorSource::External;
                   else bad("source", "expected native or external");
                 },
                 [](const C& c) { return std::string(descriptor_source_name(c.descriptor_source)); }});
    t.push_back(text("descriptors", "external", &C::external_descriptors));

    t.push_back(number<int>("codebook", "n_clusters", &C::n_clusters));
    t.push_back(number<std::size_t>("codebook", "max_descriptors", &C::codebook_max_descriptors));
    t.push_back(number<int>("codebook", "max_iters", &C::kmeans_max_iters));
    t.push_back(number<double>("codebook", "tol", &C::kmeans_tol));

    t.push_back({"encoding", "encoder",
                 [](C& c, const std::vector<std::string>& in) {
                   const auto& v = single("encoder", in);
                   if (v == "vlad") c.encoder = EncoderKind::Vlad;
                   else if (v == "netvlad") c.encoder = EncoderKind::NetVlad;
                   else bad("encoder", "expected vlad or netvlad");
                 },
                 [](const C& c) { return std::string(encoder_name(c.encoder)); }});
    t.push_back(number<double>("encoding", "alpha", [](C& c) -> double& { return c.triplet.alpha; }));
    t.push_back(number<double>("encoding", "margin", [](C& c) -> double& { return c.triplet.margin; }));
    t.push_back(
        number<double>("encoding", "learning_rate", [](C& c) -> double& { return c.triplet.learning_rate; }));
    t.push_back(number<int>("encoding", "epochs", [](C& c) -> int& { return c.triplet.epochs; }));
    t.push_back(number<int>("encoding", "batch_size", [](C& c) -> int& { return c.triplet.batch_size; }));
    t.push_back(
        number<int>("encoding", "samples_per_writer", [](C& c) -> int& { return c.triplet.samples_per_writer; }));
    t.push_back({"encoding", "full_batch",
                 [](C& c, const std::vector<std::string>& in) {
                   c.triplet.full_batch = parse_bool("full_batch", single("full_batch", in));
                 },
                 [](const C& c) { return std::string(c.triplet.full_batch ? "true" : "false"); }});
    t.push_back(number<std::size_t>("encoding", "unit_budget", &C::netvlad_unit_budget));

    t.push_back(number<int>("aggregation", "out_dim", &C::out_dim));
    t.push_back(number<double>("aggregation", "eps", &C::whitening_eps));

    t.push_back(list("experiments", "top_x", &C::top_x));
    t.push_back(list("experiments", "merge_n", &C::merge_n));
    t.push_back(list("experiments", "sweep", &C::sweep));
    t.push_back(number<std::size_t>("experiments", "common_words", &C::common_words));
    return t;
  }();
  return table;
}

}  // namespace

void RunConfig::validate() const {
  try {
    synth.validate();
    triplet.validate();
  } catch (const Error& e) {
    fail(ErrorCode::InvalidConfig, e.what());
  }
  if (patch_side != kPatchSide) bad("patch_side", "only " + std::to_string(kPatchSide) + " is supported");
  if (line_budget == 0) bad("line_budget", "must be positive");
  if (word_budget == 0) bad("word_budget", "must be positive");
  if (descriptor_source == DescriptorSource::External && external_descriptors.empty()) {
    bad("external", "required when source = external");
  }
  if (n_clusters < 1) bad("n_clusters", "must be positive");
  if (codebook_max_descriptors < static_cast<std::size_t>(n_clusters)) {
    bad("max_descriptors", "must be at least n_clusters");
  }
  if (kmeans_max_iters < 1) bad("max_iters", "must be positive");
  if (!(kmeans_tol >= 0)) bad("tol", "must be non-negative");
  if (netvlad_unit_budget == 0) bad("unit_budget", "must be positive");
  if (out_dim < 1) bad("out_dim", "must be positive");
  if (!(whitening_eps >= 0)) bad("eps", "must be non-negative");
  if (top_x.empty()) bad("top_x", "must not be empty");
  for (auto x : top_x) if (x == 0) bad("top_x", "values must be positive");
  for (auto n : merge_n) if (n == 0) bad("merge_n", "values must be positive");
  for (auto s : sweep) if (s == 0) bad("sweep", "values must be positive");
  if (common_words == 0) bad("common_words", "must be positive");
}

std::string RunConfig::dump() const {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      if (!section.empty()) out += '\n';
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += f.key + " = " + f.get(*this) + "\n";
  }
  return out;
}

std::string RunConfig::hash() const {
  const std::string text = dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    fail(ErrorCode::InvalidConfig, "SHA-256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < 8; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

RunConfig RunConfig::parse(std::string_view text, std::set<std::string>* present) {
  std::map<std::string, const Field*> by_name;
  for (const auto& f : fields()) by_name[f.section + "." + f.key] = &f;

  std::istringstream in{std::string(text)};
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_config(in);
  } catch (const std::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("unreadable config: ") + e.what());
  }
  RunConfig cfg;
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    const std::string name = item.fullname();
    auto it = by_name.find(name);
    if (it == by_name.end()) fail(ErrorCode::InvalidConfig, "unknown key '" + name + "'");
    std::vector<std::string> inputs = item.inputs;
    // Bracketed lists arrive as one token per element already; strip quotes.
    for (auto& s : inputs) {
      if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) s = s.substr(1, s.size() - 2);
    }
    it->second->set(cfg, inputs);
    if (present) present->insert(name);
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path, std::set<std::string>* present) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), present);
}

std::optional<std::uint64_t> seed_from_environment() {
  const char* v = std::getenv("WR_SEED");
  if (!v || !*v) return std::nullopt;
  std::uint64_t seed = 0;
  const char* end = v + std::strlen(v);
  auto [ptr, ec] = std::from_chars(v, end, seed);
  if (ec != std::errc() || ptr != end) fail(ErrorCode::InvalidConfig, "WR_SEED is not a number");
  return seed;
}

}  // namespace wr
