#include "test_util.hpp"
#include "wr/entity_id.hpp"

using namespace wr;

TEST_CASE("entity ids round-trip through their string form") {
  for (const char* text : {"w01-p3", "a-b-0", "a-b-12", "a-b-12-0", "writer_7-page_2-3-45"}) {
    CHECK(EntityId::parse(text).str() == text);
  }
  const EntityId id = EntityId::parse("0013-1-4-2");
  CHECK(id.writer == "0013");
  CHECK(id.page == "1");
  CHECK(*id.line == 4);
  CHECK(*id.word == 2);
  CHECK(id.granularity() == Granularity::Word);
  CHECK(id.line_id().str() == "0013-1-4");
  CHECK(id.page_id().str() == "0013-1");
}

TEST_CASE("malformed entity ids are rejected") {
  for (const char* text : {"", "w", "w-", "-p", "w-p-", "w-p-x", "w-p-01", "w-p-1-", "w-p-1-2-3", "w p-1", "w-p--1"}) {
    CAPTURE(text);
    CHECK_FAILS_WITH(EntityId::parse(text), ErrorCode::FormatError);
  }
  EntityId bad{"w", "p", std::nullopt, 3};
  CHECK_FAILS_WITH(bad.str(), ErrorCode::InvalidArgument);
}

TEST_CASE("granularity names") {
  CHECK(parse_granularity("page") == Granularity::Page);
  CHECK(parse_granularity("line") == Granularity::Line);
  CHECK(parse_granularity("word") == Granularity::Word);
  CHECK(granularity_name(Granularity::Line) == "line");
  CHECK_FAILS_WITH(parse_granularity("paragraph"), ErrorCode::InvalidArgument);
}

TEST_CASE("ordering groups entities by writer, page, line, word") {
  const auto a = EntityId::parse("a-1");
  const auto b = EntityId::parse("a-1-0");
  const auto c = EntityId::parse("a-1-0-5");
  const auto d = EntityId::parse("a-1-1");
  CHECK(a < b);
  CHECK(b < c);
  CHECK(c < d);
  CHECK(std::hash<EntityId>{}(b) == std::hash<EntityId>{}(EntityId::parse("a-1-0")));
}
