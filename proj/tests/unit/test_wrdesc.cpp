#include <cstring>
#include <sstream>

#include "test_util.hpp"
#include "wr/wrdesc.hpp"

using namespace wr;

namespace {

WrdescPayload sample_payload() {
  WrdescPayload p;
  p.dim = 3;
  p.rows.resize(2, 3);
  p.rows << 1.5f, -2.0f, 0.25f, 3.0f, 4.0f, -0.5f;
  p.sidecar = {{"w1-p1-0", 10, 20}, {"w1-p1-1", -1, 7}};
  return p;
}

}  // namespace

TEST_CASE("payload round trip and byte layout") {
  const auto p = sample_payload();
  std::stringstream ss;
  write_wrdesc(ss, p);
  const std::string bytes = ss.str();

  CHECK(bytes.substr(0, 8) == std::string("WRDESC1\0", 8));
  std::uint32_t version, dim;
  std::uint64_t count;
  std::memcpy(&version, bytes.data() + 8, 4);
  std::memcpy(&dim, bytes.data() + 12, 4);
  std::memcpy(&count, bytes.data() + 16, 8);
  CHECK(version == 1);
  CHECK(dim == 3);
  CHECK(count == 2);
  float first;
  std::memcpy(&first, bytes.data() + 24, 4);
  CHECK(first == 1.5f);
  const std::string sidecar = "w1-p1-0 10 20\nw1-p1-1 -1 7\n";
  std::uint64_t side_len;
  std::memcpy(&side_len, bytes.data() + 24 + 6 * 4, 8);
  CHECK(side_len == sidecar.size());
  CHECK(bytes.substr(24 + 6 * 4 + 8) == sidecar);

  std::stringstream in(bytes);
  const auto back = read_wrdesc(in);
  CHECK(back.dim == 3);
  CHECK(back.rows == p.rows);
  CHECK(back.sidecar == p.sidecar);
}

TEST_CASE("empty payload") {
  WrdescPayload p;
  p.dim = 128;
  p.rows.resize(0, 128);
  std::stringstream ss;
  write_wrdesc(ss, p);
  const auto back = read_wrdesc(ss);
  CHECK(back.count() == 0);
  CHECK(back.dim == 128);
}

TEST_CASE("corrupt payloads are format errors") {
  std::stringstream ss;
  write_wrdesc(ss, sample_payload());
  const std::string good = ss.str();

  auto read = [](std::string bytes) {
    std::stringstream in(bytes);
    return read_wrdesc(in);
  };
  std::string bad_magic = good;
  bad_magic[0] = 'X';
  CHECK_FAILS_WITH(read(bad_magic), ErrorCode::FormatError);
  std::string bad_version = good;
  bad_version[8] = 2;
  CHECK_FAILS_WITH(read(bad_version), ErrorCode::FormatError);
  CHECK_FAILS_WITH(read(good.substr(0, 30)), ErrorCode::FormatError);
  CHECK_FAILS_WITH(read(good.substr(0, good.size() - 3)), ErrorCode::FormatError);

  // sidecar line count must equal the row count
  auto p = sample_payload();
  p.sidecar.pop_back();
  std::stringstream out;
  CHECK_FAILS_WITH(write_wrdesc(out, p), ErrorCode::DimMismatch);
  CHECK_FAILS_WITH(detail::parse_sidecar("a 1 2\n", 2), ErrorCode::FormatError);
  CHECK_FAILS_WITH(detail::parse_sidecar("a 1\n", 1), ErrorCode::FormatError);
  CHECK_FAILS_WITH(detail::parse_sidecar("a 1 z\n", 1), ErrorCode::FormatError);
}

TEST_CASE("files reject trailing bytes") {
  test::TempDir dir("wrdesc");
  save_wrdesc(dir / "a.wrdesc", sample_payload());
  CHECK(load_wrdesc(dir / "a.wrdesc").rows == sample_payload().rows);
  {
    std::ofstream app(dir / "a.wrdesc", std::ios::binary | std::ios::app);
    app << "x";
  }
  CHECK_FAILS_WITH(load_wrdesc(dir / "a.wrdesc"), ErrorCode::FormatError);
  CHECK_FAILS_WITH(load_wrdesc(dir / "missing.wrdesc"), ErrorCode::IoError);
}

TEST_CASE("containers carry a header and payloads") {
  test::TempDir dir("container");
  Container c;
  c.kind = "WRTEST";
  c.header = {{"k", "5"}, {"hash", "abc"}};
  c.payloads = {sample_payload(), sample_payload()};
  save_container(dir / "c.bin", c);

  const auto back = load_container(dir / "c.bin", "WRTEST", 2);
  CHECK(back.get("k") == "5");
  CHECK(back.get("hash") == "abc");
  CHECK_FAILS_WITH(back.get("missing"), ErrorCode::FormatError);
  REQUIRE(back.payloads.size() == 2);
  CHECK(back.payloads[1].rows == c.payloads[1].rows);

  CHECK_FAILS_WITH(load_container(dir / "c.bin", "OTHER", 2), ErrorCode::FormatError);
  CHECK_FAILS_WITH(load_container(dir / "c.bin", "WRTEST", 1), ErrorCode::FormatError);
  CHECK_FAILS_WITH(load_container(dir / "c.bin", "WRTEST", 3), ErrorCode::FormatError);
}
