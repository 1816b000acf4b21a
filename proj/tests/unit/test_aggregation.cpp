#include <algorithm>
#include <random>

#include "test_util.hpp"
#include "wr/aggregation.hpp"

using namespace wr;

namespace {

RowMatrix random_matrix(int rows, int cols, std::uint32_t seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  RowMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(gen);
  return m;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST_CASE("pooling sums unit-normalized encodings") {
  const std::vector<Eigen::VectorXd> enc = {vec({3, 4}), vec({0, 2}), vec({-1, 0})};
  const auto p = pool_encodings(enc);
  CHECK(p[0] == doctest::Approx(0.6 + 0 - 1));
  CHECK(p[1] == doctest::Approx(0.8 + 1 + 0));
  CHECK_FAILS_WITH(pool_encodings(std::vector<Eigen::VectorXd>{vec({0, 0})}), ErrorCode::ZeroVector);
}

TEST_CASE("keyed pooling does not depend on input order") {
  std::mt19937 gen(1);
  std::vector<KeyedEncoding> units;
  for (int i = 0; i < 9; ++i) {
    units.push_back({EntityId::parse("w1-p1-" + std::to_string(i)), random_matrix(1, 50, 100 + i).row(0).transpose()});
  }
  const auto ref = pool_encodings(units);
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(units.begin(), units.end(), gen);
    const auto again = pool_encodings(units);
    CHECK(again == ref);  // bit-identical
  }
}

TEST_CASE("power normalization") {
  const auto y = power_normalize(vec({4, -9, 0}));
  const double s = std::sqrt(13.0);
  CHECK(y[0] == doctest::Approx(2 / s));
  CHECK(y[1] == doctest::Approx(-3 / s));
  CHECK(y[2] == 0);
  CHECK(y.norm() == doctest::Approx(1.0));
  CHECK_FAILS_WITH(power_normalize(vec({0, 0})), ErrorCode::ZeroVector);
  CHECK_FAILS_WITH(l2_normalize(vec({0, 0})), ErrorCode::ZeroVector);
  CHECK(l2_normalize(vec({3, 4}))[1] == doctest::Approx(0.8));
}

TEST_CASE("whitening decorrelates to identity covariance") {
  // Anisotropic 2-D data with a rotation.
  std::mt19937 gen(2);
  std::normal_distribution<double> n(0.0, 1.0);
  RowMatrix x(500, 2);
  const double c = std::cos(0.4), s = std::sin(0.4);
  for (int i = 0; i < 500; ++i) {
    const double a = 2.0 * n(gen), b = n(gen);
    x(i, 0) = c * a - s * b + 5;
    x(i, 1) = s * a + c * b - 1;
  }
  const auto t = fit_whitening(x, 2, 0.0);

  // closed-form eigenvalues of the 2x2 sample covariance
  const Eigen::RowVector2d mu = x.colwise().mean();
  const RowMatrix xc = x.rowwise() - mu;
  const double sxx = xc.col(0).squaredNorm() / 499, syy = xc.col(1).squaredNorm() / 499;
  const double sxy = xc.col(0).dot(xc.col(1)) / 499;
  const double tr = sxx + syy, det = sxx * syy - sxy * sxy;
  const double l1 = tr / 2 + std::sqrt(tr * tr / 4 - det), l2 = tr / 2 - std::sqrt(tr * tr / 4 - det);
  CHECK(t.eigenvalues[0] == doctest::Approx(l1));
  CHECK(t.eigenvalues[1] == doctest::Approx(l2));

  RowMatrix w(500, 2);
  for (int i = 0; i < 500; ++i) w.row(i) = whiten_unnormalized(x.row(i).transpose(), t).transpose();
  const RowMatrix wc = w.rowwise() - w.colwise().mean();
  const Eigen::Matrix2d cov = wc.transpose() * wc / 499.0;
  CHECK((cov - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 1e-9);

  // sign convention: the largest-magnitude entry of each direction is positive
  for (Eigen::Index r = 0; r < 2; ++r) {
    Eigen::Index arg;
    t.projection.row(r).cwiseAbs().maxCoeff(&arg);
    CHECK(t.projection(r, arg) > 0);
  }
}

TEST_CASE("axis-aligned variances whiten by their square roots") {
  // Points with variance 4 on x and 1 on y, uncorrelated by construction.
  RowMatrix x(4, 2);
  x << std::sqrt(6.0), 0, -std::sqrt(6.0), 0, 0, std::sqrt(1.5), 0, -std::sqrt(1.5);
  const auto t = fit_whitening(x, 2, 0.0);
  CHECK(t.eigenvalues[0] == doctest::Approx(4.0));
  CHECK(t.eigenvalues[1] == doctest::Approx(1.0));
  const auto w = whiten_unnormalized(vec({2, 1}), t);
  CHECK(std::abs(w[0]) == doctest::Approx(1.0));
  CHECK(std::abs(w[1]) == doctest::Approx(1.0));
}

TEST_CASE("Gram and covariance routes agree") {
  const RowMatrix x = random_matrix(30, 12, 3);
  const auto a = fit_whitening(x, 8, 1e-8, WhiteningRoute::Covariance);
  const auto b = fit_whitening(x, 8, 1e-8, WhiteningRoute::Gram);
  CHECK((a.eigenvalues - b.eigenvalues).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((a.projection - b.projection).cwiseAbs().maxCoeff() < 1e-7);

  // more dimensions than samples: Auto picks the Gram route
  const RowMatrix wide = random_matrix(10, 60, 4);
  const auto g = fit_whitening(wide, 9);
  const auto cv = fit_whitening(wide, 9, 1e-8, WhiteningRoute::Covariance);
  CHECK(g.out_dim() == 9);
  CHECK(g.in_dim() == 60);
  CHECK((g.eigenvalues - cv.eigenvalues).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((g.projection - cv.projection).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("whitening preconditions") {
  CHECK_FAILS_WITH(fit_whitening(random_matrix(1, 4, 5), 1), ErrorCode::TooFewSamples);
  CHECK_FAILS_WITH(fit_whitening(random_matrix(5, 4, 5), 5), ErrorCode::BadDim);
  CHECK_FAILS_WITH(fit_whitening(random_matrix(3, 8, 5), 3), ErrorCode::BadDim);
  CHECK_FAILS_WITH(fit_whitening(random_matrix(5, 4, 5), 0), ErrorCode::BadDim);
  const auto t = fit_whitening(random_matrix(5, 4, 5), 2);
  CHECK_FAILS_WITH(apply_whitening(Eigen::VectorXd::Zero(3), t), ErrorCode::DimMismatch);
}

TEST_CASE("applied whitening is the normalized projection") {
  const RowMatrix x = random_matrix(40, 6, 6);
  const auto t = fit_whitening(x, 4);
  const Eigen::VectorXd v = random_matrix(1, 6, 7).row(0).transpose();
  const auto y = apply_whitening(v, t);
  CHECK(y.size() == 4);
  CHECK(y.norm() == doctest::Approx(1.0));
  const auto u = whiten_unnormalized(v, t);
  CHECK((y - u / u.norm()).norm() < 1e-12);
}

TEST_CASE("whitening save and load") {
  const auto t = fit_whitening(random_matrix(20, 5, 8), 3);
  test::TempDir dir("whiten");
  save_whitening(dir / "w.bin", t, "abc");
  const auto back = load_whitening(dir / "w.bin");
  CHECK(back.out_dim() == 3);
  CHECK(back.in_dim() == 5);
  CHECK((back.projection - t.projection).cwiseAbs().maxCoeff() < 1e-4 * t.projection.cwiseAbs().maxCoeff());
  CHECK((back.mean - t.mean).cwiseAbs().maxCoeff() < 1e-6);
}
