#include "wr/wrdesc.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

namespace wr {

namespace {
constexpr char kMagic[8] = {'W', 'R', 'D', 'E', 'S', 'C', '1', '\0'};
}

void write_wrdesc(std::ostream& out, const WrdescPayload& p) {
  if (static_cast<std::size_t>(p.rows.rows()) != p.sidecar.size() ||
      (p.rows.rows() > 0 && static_cast<std::uint32_t>(p.rows.cols()) != p.dim)) {
    fail(ErrorCode::DimMismatch, "WRDESC rows do not match sidecar/dim");
  }
  out.write(kMagic, 8);
  detail::write_le<std::uint32_t>(out, 1);
  detail::write_le<std::uint32_t>(out, p.dim);
  detail::write_le<std::uint64_t>(out, p.sidecar.size());
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(p.rows.data()),
              static_cast<std::streamsize>(p.rows.size() * sizeof(float)));
  } else {
    for (Eigen::Index i = 0; i < p.rows.size(); ++i) detail::write_le<float>(out, p.rows.data()[i]);
  }
  std::string sidecar;
  for (const auto& r : p.sidecar) {
    sidecar += r.label;
    sidecar += ' ';
    sidecar += std::to_string(r.x);
    sidecar += ' ';
    sidecar += std::to_string(r.y);
    sidecar += '\n';
  }
  detail::write_le<std::uint64_t>(out, sidecar.size());
  out.write(sidecar.data(), static_cast<std::streamsize>(sidecar.size()));
  if (!out) fail(ErrorCode::IoError, "WRDESC write failed");
}

WrdescPayload read_wrdesc(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || !std::equal(magic, magic + 8, kMagic)) {
    fail(ErrorCode::FormatError, "bad WRDESC magic");
  }
  const auto version = detail::read_le<std::uint32_t>(in);
  if (version != 1) fail(ErrorCode::FormatError, "unsupported WRDESC version " + std::to_string(version));
  WrdescPayload p;
  p.dim = detail::read_le<std::uint32_t>(in);
  const auto count = detail::read_le<std::uint64_t>(in);
  if (p.dim == 0 && count > 0) fail(ErrorCode::FormatError, "WRDESC dim must be positive");
  if (count > (std::uint64_t{1} << 40) / std::max<std::uint64_t>(1, p.dim)) {
    fail(ErrorCode::FormatError, "implausible WRDESC row count");
  }
  p.rows.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(p.dim));
  const auto bytes = static_cast<std::streamsize>(count * p.dim * sizeof(float));
  if (!in.read(reinterpret_cast<char*>(p.rows.data()), bytes)) {
    fail(ErrorCode::FormatError, "truncated WRDESC rows");
  }
  if constexpr (std::endian::native == std::endian::big) {
    for (Eigen::Index i = 0; i < p.rows.size(); ++i) {
      auto* b = reinterpret_cast<unsigned char*>(p.rows.data() + i);
      std::reverse(b, b + sizeof(float));
    }
  }
  const auto side_len = detail::read_le<std::uint64_t>(in);
  if (side_len > (std::uint64_t{1} << 40)) fail(ErrorCode::FormatError, "implausible sidecar length");
  std::string sidecar(side_len, '\0');
  if (!in.read(sidecar.data(), static_cast<std::streamsize>(side_len))) {
    fail(ErrorCode::FormatError, "truncated WRDESC sidecar");
  }
  p.sidecar = detail::parse_sidecar(sidecar, count);
  return p;
}

void save_wrdesc(const std::filesystem::path& path, const WrdescPayload& payload) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  write_wrdesc(out, payload);
}

WrdescPayload load_wrdesc(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  auto p = read_wrdesc(in);
  if (in.peek() != std::char_traits<char>::eof()) fail(ErrorCode::FormatError, "trailing bytes after WRDESC");
  return p;
}

namespace detail {

std::vector<SidecarRow> parse_sidecar(std::string_view text, std::size_t expected_rows) {
  std::vector<SidecarRow> rows;
  rows.reserve(expected_rows);
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) fail(ErrorCode::FormatError, "sidecar line without newline");
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    const auto s1 = line.find(' ');
    const auto s2 = s1 == std::string_view::npos ? s1 : line.find(' ', s1 + 1);
    if (s1 == std::string_view::npos || s2 == std::string_view::npos || s1 == 0) {
      fail(ErrorCode::FormatError, "bad sidecar line '" + std::string(line) + "'");
    }
    SidecarRow r;
    r.label = std::string(line.substr(0, s1));
    auto parse_int = [&](std::string_view part, int& value) {
      auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), value);
      if (ec != std::errc{} || ptr != part.data() + part.size() || part.empty()) {
        fail(ErrorCode::FormatError, "bad sidecar coordinate in '" + std::string(line) + "'");
      }
    };
    parse_int(line.substr(s1 + 1, s2 - s1 - 1), r.x);
    parse_int(line.substr(s2 + 1), r.y);
    rows.push_back(std::move(r));
  }
  if (rows.size() != expected_rows) {
    fail(ErrorCode::FormatError, "sidecar has " + std::to_string(rows.size()) + " lines, expected " +
                                     std::to_string(expected_rows));
  }
  return rows;
}

}  // namespace detail

const std::string& Container::get(std::string_view key) const {
  for (const auto& [k, v] : header) {
    if (k == key) return v;
  }
  fail(ErrorCode::FormatError, kind + " header lacks '" + std::string(key) + "'");
}

void save_container(const std::filesystem::path& path, const Container& c) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << c.kind;
  for (const auto& [k, v] : c.header) out << ' ' << k << '=' << v;
  out << '\n';
  for (const auto& p : c.payloads) write_wrdesc(out, p);
  if (!out) fail(ErrorCode::IoError, "short write to " + path.string());
}

Container load_container(const std::filesystem::path& path, std::string_view expected_kind,
                         std::size_t expected_payloads) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::FormatError, path.string() + ": missing header");
  Container c;
  std::size_t start = 0;
  bool first = true;
  while (start <= line.size()) {
    auto end = line.find(' ', start);
    if (end == std::string::npos) end = line.size();
    const std::string token = line.substr(start, end - start);
    start = end + 1;
    if (token.empty()) continue;
    if (first) {
      c.kind = token;
      first = false;
      continue;
    }
    const auto eq = token.find('=');
    if (eq == std::string::npos) fail(ErrorCode::FormatError, "bad header token '" + token + "'");
    c.header.emplace_back(token.substr(0, eq), token.substr(eq + 1));
  }
  if (c.kind != expected_kind) {
    fail(ErrorCode::FormatError, path.string() + ": expected " + std::string(expected_kind) + ", found '" +
                                     c.kind + "'");
  }
  for (std::size_t i = 0; i < expected_payloads; ++i) c.payloads.push_back(read_wrdesc(in));
  if (in.peek() != std::char_traits<char>::eof()) fail(ErrorCode::FormatError, "trailing bytes in container");
  return c;
}

}  // namespace wr
