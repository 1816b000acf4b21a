#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace wr {

enum class Granularity { Page, Line, Word };

std::string_view granularity_name(Granularity g);
Granularity parse_granularity(std::string_view text);

/// Hierarchical identity of a retrieval unit, written `writer-page[-line[-word]]`.
///
/// Writer and page are free labels (no '-' or whitespace); line and word are
/// indices. A word index requires a line index.
struct EntityId {
  std::string writer;
  std::string page;
  std::optional<std::uint32_t> line;
  std::optional<std::uint32_t> word;

  static EntityId parse(std::string_view text);
  std::string str() const;

  Granularity granularity() const;
  EntityId page_id() const { return EntityId{writer, page, std::nullopt, std::nullopt}; }
  EntityId line_id() const { return EntityId{writer, page, line, std::nullopt}; }

  auto operator<=>(const EntityId&) const = default;
  bool operator==(const EntityId&) const = default;
};

bool is_valid_label(std::string_view label);

}  // namespace wr

template <>
struct std::hash<wr::EntityId> {
  std::size_t operator()(const wr::EntityId& id) const noexcept {
    return std::hash<std::string>{}(id.str());
  }
};
