#include "wr/aggregation.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wr/error.hpp"
#include "wr/wrdesc.hpp"

namespace wr {

Eigen::VectorXd l2_normalize(const Eigen::VectorXd& v) {
  const double n = v.norm();
  if (!(n > 0.0)) fail(ErrorCode::ZeroVector, "cannot l2-normalize a zero vector");
  return v / n;
}

Eigen::VectorXd pool_encodings(std::span<const Eigen::VectorXd> encodings) {
  if (encodings.empty()) fail(ErrorCode::EmptySet, "pooling zero encodings");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(encodings.front().size());
  for (const auto& e : encodings) {
    if (e.size() != sum.size()) fail(ErrorCode::DimMismatch, "encodings differ in length");
    sum += l2_normalize(e);
  }
  return sum;
}

Eigen::VectorXd pool_encodings(std::span<const KeyedEncoding> encodings) {
  if (encodings.empty()) fail(ErrorCode::EmptySet, "pooling zero encodings");
  std::vector<std::size_t> order(encodings.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::string> keys;
  keys.reserve(encodings.size());
  for (const auto& e : encodings) keys.push_back(e.unit.str());
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(encodings.front().values.size());
  for (std::size_t i : order) {
    if (encodings[i].values.size() != sum.size()) fail(ErrorCode::DimMismatch, "encodings differ in length");
    sum += l2_normalize(encodings[i].values);
  }
  return sum;
}

Eigen::VectorXd power_normalize(const Eigen::VectorXd& v) {
  Eigen::VectorXd out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double x = v[i];
    out[i] = x > 0 ? std::sqrt(x) : x < 0 ? -std::sqrt(-x) : 0.0;
  }
  return l2_normalize(out);
}

namespace {

void fix_sign(Eigen::Ref<Eigen::VectorXd> u) {
  Eigen::Index arg = 0;
  for (Eigen::Index i = 1; i < u.size(); ++i) {
    if (std::abs(u[i]) > std::abs(u[arg])) arg = i;
  }
  if (u[arg] < 0) u = -u;
}

}  // namespace

WhiteningTransform fit_whitening(const RowMatrix& samples, Eigen::Index out_dim, double eps, WhiteningRoute route) {
  const Eigen::Index n = samples.rows();
  const Eigen::Index d = samples.cols();
  if (n < 2) fail(ErrorCode::TooFewSamples, "whitening needs at least two samples");
  if (out_dim < 1 || out_dim > std::min(d, n - 1)) {
    fail(ErrorCode::BadDim, "out_dim " + std::to_string(out_dim) + " exceeds min(in_dim, n - 1) = " +
                                std::to_string(std::min(d, n - 1)));
  }
  if (!(eps >= 0.0)) fail(ErrorCode::InvalidArgument, "eps must be non-negative");
  if (route == WhiteningRoute::Auto) route = d <= n ? WhiteningRoute::Covariance : WhiteningRoute::Gram;

  WhiteningTransform t;
  t.eps = eps;
  t.mean = samples.colwise().mean().transpose();
  const RowMatrix centered = samples.rowwise() - t.mean.transpose();
  const double denom = static_cast<double>(n - 1);
  t.projection.resize(out_dim, d);
  t.eigenvalues.resize(out_dim);

  if (route == WhiteningRoute::Covariance) {
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) fail(ErrorCode::InvalidArgument, "covariance eigendecomposition failed");
    for (Eigen::Index r = 0; r < out_dim; ++r) {
      const Eigen::Index col = d - 1 - r;  // eigenvalues are ascending
      Eigen::VectorXd u = eig.eigenvectors().col(col);
      fix_sign(u);
      const double lambda = std::max(0.0, eig.eigenvalues()[col]);
      t.eigenvalues[r] = lambda;
      t.projection.row(r) = u.transpose() / std::sqrt(lambda + eps);
    }
  } else {
    // Nonzero eigenpairs of X^T X / (n-1) from those of X X^T / (n-1):
    // u = X^T v / sqrt((n-1) lambda).
    const Eigen::MatrixXd gram = (centered * centered.transpose()) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success) fail(ErrorCode::InvalidArgument, "Gram eigendecomposition failed");
    const double top = std::max(0.0, eig.eigenvalues()[n - 1]);
    for (Eigen::Index r = 0; r < out_dim; ++r) {
      const Eigen::Index col = n - 1 - r;
      const double lambda = std::max(0.0, eig.eigenvalues()[col]);
      t.eigenvalues[r] = lambda;
      if (lambda <= 1e-12 * top) {
        // Null direction of the sample: no well-defined eigenvector.
        t.projection.row(r).setZero();
        continue;
      }
      Eigen::VectorXd u = centered.transpose() * eig.eigenvectors().col(col);
      u /= u.norm();
      fix_sign(u);
      t.projection.row(r) = u.transpose() / std::sqrt(lambda + eps);
    }
  }
  return t;
}

Eigen::VectorXd whiten_unnormalized(const Eigen::VectorXd& v, const WhiteningTransform& t) {
  if (v.size() != t.in_dim()) fail(ErrorCode::DimMismatch, "vector and whitening dims differ");
  return t.projection * (v - t.mean);
}

Eigen::VectorXd apply_whitening(const Eigen::VectorXd& v, const WhiteningTransform& t) {
  return l2_normalize(whiten_unnormalized(v, t));
}

void save_whitening(const std::filesystem::path& path, const WhiteningTransform& t, const std::string& config_hash) {
  Container c;
  c.kind = "WRWHITEN";
  c.header = {{"in_dim", std::to_string(t.in_dim())},
              {"out_dim", std::to_string(t.out_dim())},
              {"eps", std::to_string(t.eps)},
              {"config", config_hash}};
  WrdescPayload mean;
  mean.dim = static_cast<std::uint32_t>(t.in_dim());
  mean.rows = t.mean.transpose().cast<float>();
  mean.sidecar.push_back({"mean", 0, 0});
  WrdescPayload proj;
  proj.dim = static_cast<std::uint32_t>(t.in_dim());
  proj.rows = t.projection.cast<float>();
  for (Eigen::Index r = 0; r < t.out_dim(); ++r) proj.sidecar.push_back({"component" + std::to_string(r), 0, 0});
  WrdescPayload eig;
  eig.dim = static_cast<std::uint32_t>(t.out_dim());
  eig.rows = t.eigenvalues.transpose().cast<float>();
  eig.sidecar.push_back({"eigenvalues", 0, 0});
  c.payloads = {std::move(mean), std::move(proj), std::move(eig)};
  save_container(path, c);
}

WhiteningTransform load_whitening(const std::filesystem::path& path) {
  const Container c = load_container(path, "WRWHITEN", 3);
  WhiteningTransform t;
  t.eps = std::stod(c.get("eps"));
  t.mean = c.payloads[0].rows.row(0).transpose().cast<double>();
  t.projection = c.payloads[1].rows.cast<double>();
  t.eigenvalues = c.payloads[2].rows.row(0).transpose().cast<double>();
  if (t.projection.cols() != t.mean.size()) fail(ErrorCode::FormatError, "whitening payload shapes disagree");
  return t;
}

}  // namespace wr
