#include "wr/entity_id.hpp"

#include <charconv>
#include <vector>

#include "wr/error.hpp"

namespace wr {

std::string_view granularity_name(Granularity g) {
  switch (g) {
    case Granularity::Page: return "page";
    case Granularity::Line: return "line";
    case Granularity::Word: return "word";
  }
  return "page";
}

Granularity parse_granularity(std::string_view text) {
  if (text == "page") return Granularity::Page;
  if (text == "line") return Granularity::Line;
  if (text == "word") return Granularity::Word;
  fail(ErrorCode::InvalidArgument, "unknown granularity '" + std::string(text) + "'");
}

bool is_valid_label(std::string_view label) {
  if (label.empty()) return false;
  for (char c : label) {
    if (c == '-' || c == ' ' || c == '\t' || c == '\n' || c == '\r') return false;
  }
  return true;
}

namespace {

std::uint32_t parse_index(std::string_view part, std::string_view whole) {
  std::uint32_t value = 0;
  const auto* end = part.data() + part.size();
  auto [ptr, ec] = std::from_chars(part.data(), end, value);
  if (part.empty() || ec != std::errc{} || ptr != end) {
    fail(ErrorCode::FormatError, "bad index '" + std::string(part) + "' in entity id '" +
                                     std::string(whole) + "'");
  }
  // Leading zeros would break the lossless round trip.
  if (part.size() > 1 && part.front() == '0') {
    fail(ErrorCode::FormatError, "index with leading zero in entity id '" + std::string(whole) + "'");
  }
  return value;
}

}  // namespace

EntityId EntityId::parse(std::string_view text) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    auto pos = text.find('-', start);
    parts.push_back(text.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  if (parts.size() < 2 || parts.size() > 4) {
    fail(ErrorCode::FormatError, "entity id '" + std::string(text) + "' must have 2 to 4 parts");
  }
  EntityId id;
  id.writer = std::string(parts[0]);
  id.page = std::string(parts[1]);
  if (!is_valid_label(id.writer) || !is_valid_label(id.page)) {
    fail(ErrorCode::FormatError, "bad writer/page label in entity id '" + std::string(text) + "'");
  }
  if (parts.size() >= 3) id.line = parse_index(parts[2], text);
  if (parts.size() == 4) id.word = parse_index(parts[3], text);
  return id;
}

std::string EntityId::str() const {
  if (word && !line) fail(ErrorCode::InvalidArgument, "word index without line index");
  std::string out = writer + "-" + page;
  if (line) {
    out += "-" + std::to_string(*line);
    if (word) out += "-" + std::to_string(*word);
  }
  return out;
}

Granularity EntityId::granularity() const {
  if (word) return Granularity::Word;
  if (line) return Granularity::Line;
  return Granularity::Page;
}

}  // namespace wr
