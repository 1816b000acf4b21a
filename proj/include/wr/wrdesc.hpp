#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <iosfwd>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "wr/error.hpp"

namespace wr {

using RowMatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One sidecar line: `label x y`.
struct SidecarRow {
  std::string label;
  int x = 0;
  int y = 0;
  bool operator==(const SidecarRow&) const = default;
};

/// In-memory WRDESC payload.
///
/// Layout (little-endian): magic `WRDESC1\0`, u32 version = 1, u32 dim,
/// u64 count, count rows of dim float32, then u64 sidecar byte length and
/// the UTF-8 sidecar with one `label x y` line per row.
struct WrdescPayload {
  std::uint32_t dim = 0;
  RowMatrixF rows;  // count x dim
  std::vector<SidecarRow> sidecar;

  std::size_t count() const { return sidecar.size(); }
};

void write_wrdesc(std::ostream& out, const WrdescPayload& payload);
WrdescPayload read_wrdesc(std::istream& in);

void save_wrdesc(const std::filesystem::path& path, const WrdescPayload& payload);
WrdescPayload load_wrdesc(const std::filesystem::path& path);

/// Container of named payloads behind a one-line text header, used for
/// codebooks, NetVLAD parameters and whitening transforms:
///   `<kind> key=value key=value ...\n` followed by the payloads in order.
struct Container {
  std::string kind;
  std::vector<std::pair<std::string, std::string>> header;
  std::vector<WrdescPayload> payloads;

  const std::string& get(std::string_view key) const;
};

void save_container(const std::filesystem::path& path, const Container& c);
Container load_container(const std::filesystem::path& path, std::string_view expected_kind,
                         std::size_t expected_payloads);

namespace detail {

template <typename T>
void write_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    fail(ErrorCode::FormatError, "truncated binary header");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

std::vector<SidecarRow> parse_sidecar(std::string_view text, std::size_t expected_rows);

}  // namespace detail

}  // namespace wr
