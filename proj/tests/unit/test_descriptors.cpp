#include <cmath>

#include "test_util.hpp"
#include "wr/descriptors.hpp"
#include "wr/wrdesc.hpp"

using namespace wr;

namespace {

// A small "glyph": an L shape and a dot.
void stamp(BinaryImage& img, int ox, int oy) {
  for (int y = 0; y < 9; ++y) img.set(ox + 2, oy + y, true);
  for (int x = 2; x < 8; ++x) img.set(ox + x, oy + 8, true);
  img.set(ox + 6, oy + 3, true);
  img.set(ox + 7, oy + 3, true);
}

}  // namespace

TEST_CASE("descriptor is translation invariant") {
  BinaryImage a(80, 60), b(80, 60);
  stamp(a, 20, 20);
  stamp(b, 45, 31);
  const auto da = sift_descriptor(a, {22, 24});
  const auto db = sift_descriptor(b, {47, 35});
  CHECK(da.size() == kSiftDim);
  CHECK((da - db).norm() < 1e-12);
  CHECK((da.array() >= 0).all());
}

TEST_CASE("vertical edge votes into a single orientation") {
  // Ink on the left half: the gradient points to -x everywhere, angle pi.
  BinaryImage img(60, 60);
  for (int y = 0; y < 60; ++y)
    for (int x = 0; x < 30; ++x) img.set(x, y, true);
  const auto d = sift_descriptor(img, {29, 30});
  double on = 0, off = 0;
  for (int i = 0; i < kSiftDim; ++i) (i % 8 == 4 ? on : off) += d[i];
  CHECK(on > 0);
  CHECK(off == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("image border is zero padded") {
  BinaryImage img(10, 10);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) img.set(x, y, true);
  // The corner pixel sees the padding as background.
  const auto d = sift_descriptor(img, {0, 0});
  CHECK(d.sum() > 0);
  CHECK_FAILS_WITH(sift_descriptor(img, {10, 0}), ErrorCode::InvalidArgument);
}

TEST_CASE("flat windows have no descriptor") {
  BinaryImage img(40, 40);
  for (auto& v : img.ink) v = 1;
  CHECK_FAILS_WITH(sift_descriptor(img, {20, 20}), ErrorCode::EmptyDescriptor);
  const std::vector<Keypoint> kps = {{20, 20}, {0, 0}};
  const auto set = compute_rootsift(EntityId::parse("w-p-0"), img, kps);
  REQUIRE(set.size() == 1);
  CHECK(set.keypoints[0] == Keypoint{0, 0});
  CHECK(set.vectors.rows() == 1);
}

TEST_CASE("RootSIFT squares back to the l1-normalized input") {
  Eigen::VectorXd raw(4);
  raw << 1, 4, 0, 11;
  const auto y = root_sift(raw);
  CHECK(y.norm() == doctest::Approx(1.0));
  for (int i = 0; i < 4; ++i) CHECK(y[i] * y[i] == doctest::Approx(raw[i] / 16.0));
  CHECK((y.array() >= 0).all());
  // scale invariance
  CHECK((root_sift(raw * 37.0) - y).norm() < 1e-12);

  CHECK_FAILS_WITH(root_sift(Eigen::VectorXd::Zero(4)), ErrorCode::EmptyDescriptor);
  Eigen::VectorXd neg(2);
  neg << 1, -1;
  CHECK_FAILS_WITH(root_sift(neg), ErrorCode::InvalidArgument);
}

TEST_CASE("computed sets are unit norm and match the single-point path") {
  BinaryImage img(50, 40);
  stamp(img, 10, 10);
  stamp(img, 25, 15);
  const std::vector<Keypoint> kps = {{12, 12}, {12, 18}, {30, 23}, {32, 18}};
  const auto set = compute_rootsift(EntityId::parse("w-p-1"), img, kps);
  REQUIRE(set.size() == kps.size());
  for (Eigen::Index i = 0; i < set.vectors.rows(); ++i) {
    CHECK(set.vectors.row(i).norm() == doctest::Approx(1.0));
    const auto single = root_sift(sift_descriptor(img, kps[i]));
    CHECK((set.vectors.row(i).transpose() - single).norm() < 1e-12);
  }
}

TEST_CASE("external descriptors group by entity") {
  test::TempDir dir("ext");
  const auto manifest = parse_manifest(
      "w1-p1-0\ta.png\ttrain\n"
      "w1-p1-1\ta.png\ttrain\n");
  WrdescPayload p;
  p.dim = 2;
  p.rows.resize(3, 2);
  p.rows << 1, 2, 3, 4, 5, 6;
  p.sidecar = {{"w1-p1-1", 1, 1}, {"w1-p1-0", 2, 2}, {"w1-p1-1", 3, 3}};
  save_wrdesc(dir / "d.wrdesc", p);

  const auto sets = load_external_descriptors(dir / "d.wrdesc", manifest);
  REQUIRE(sets.size() == 2);
  const auto& s1 = sets.at(EntityId::parse("w1-p1-1"));
  CHECK(s1.size() == 2);
  CHECK(s1.vectors(1, 0) == 5);
  CHECK(s1.keypoints[1] == Keypoint{3, 3});

  save_descriptor_sets(dir / "e.wrdesc", sets);
  const auto again = load_external_descriptors(dir / "e.wrdesc", manifest);
  CHECK(again.at(EntityId::parse("w1-p1-1")).vectors == s1.vectors);

  p.sidecar[0].label = "w9-p1-0";
  save_wrdesc(dir / "bad.wrdesc", p);
  CHECK_FAILS_WITH(load_external_descriptors(dir / "bad.wrdesc", manifest), ErrorCode::UnknownEntity);
}
