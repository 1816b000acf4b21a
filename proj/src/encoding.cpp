#include "wr/encoding.hpp"

#include <cmath>
#include <limits>

#include "wr/error.hpp"
#include "wr/wrdesc.hpp"

namespace wr {

VladVector vlad_encode(const RowMatrix& xs, const Codebook& cb) {
  if (xs.rows() == 0) fail(ErrorCode::EmptySet, "VLAD of an empty descriptor set");
  if (xs.cols() != cb.dim()) fail(ErrorCode::DimMismatch, "descriptor and codebook dims differ");
  const auto assign = assign_nearest(xs, cb.centers);
  const Eigen::Index d = cb.dim();
  RowMatrix v = RowMatrix::Zero(cb.n_clusters(), d);
  for (Eigen::Index i = 0; i < xs.rows(); ++i) {
    const Eigen::Index k = assign[static_cast<std::size_t>(i)];
    v.row(k) += xs.row(i) - cb.centers.row(k);
  }
  return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
}

void NetVladParams::validate() const {
  if (centers.rows() < 1 || weights.rows() != centers.rows() || weights.cols() != centers.cols() ||
      biases.size() != centers.rows()) {
    fail(ErrorCode::DimMismatch, "inconsistent NetVLAD parameter shapes");
  }
  if (!centers.allFinite() || !weights.allFinite() || !biases.allFinite()) {
    fail(ErrorCode::InvalidArgument, "non-finite NetVLAD parameters");
  }
}

NetVladParams netvlad_init(const Codebook& cb, double alpha) {
  if (!(alpha > 0.0)) fail(ErrorCode::InvalidArgument, "alpha must be positive");
  NetVladParams p;
  p.centers = cb.centers;
  p.weights = 2.0 * alpha * cb.centers;
  p.biases = -alpha * cb.centers.rowwise().squaredNorm();
  return p;
}

RowMatrix soft_assign(const RowMatrix& xs, const NetVladParams& params) {
  if (xs.cols() != params.dim()) fail(ErrorCode::DimMismatch, "descriptor and NetVLAD dims differ");
  RowMatrix a = xs * params.weights.transpose();
  a.rowwise() += params.biases.transpose();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double m = a.row(i).maxCoeff();
    a.row(i) = (a.row(i).array() - m).exp();
    a.row(i) /= a.row(i).sum();
  }
  return a;
}

VladVector netvlad_encode(const RowMatrix& xs, const NetVladParams& params) {
  if (xs.rows() == 0) fail(ErrorCode::EmptySet, "NetVLAD of an empty descriptor set");
  const RowMatrix a = soft_assign(xs, params);
  RowMatrix v = a.transpose() * xs;
  const Eigen::VectorXd mass = a.colwise().sum().transpose();
  v -= mass.asDiagonal() * params.centers;
  return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
}

double triplet_loss(const Eigen::Ref<const Eigen::VectorXd>& anchor,
                    const Eigen::Ref<const Eigen::VectorXd>& positive,
                    const Eigen::Ref<const Eigen::VectorXd>& negative, double margin) {
  if (anchor.size() != positive.size() || anchor.size() != negative.size()) {
    fail(ErrorCode::DimMismatch, "triplet vectors differ in dimension");
  }
  if (!(margin > 0.0)) fail(ErrorCode::InvalidArgument, "margin must be positive");
  return std::max(0.0, (anchor - positive).norm() - (anchor - negative).norm() + margin);
}

std::vector<Triplet> mine_semi_hard(const RowMatrix& embeddings, std::span<const std::string> labels,
                                    double margin) {
  const auto n = static_cast<std::size_t>(embeddings.rows());
  if (labels.size() != n) fail(ErrorCode::DimMismatch, "one label per embedding required");
  if (!(margin > 0.0)) fail(ErrorCode::InvalidArgument, "margin must be positive");
  RowMatrix dist(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) dist(i, j) = (embeddings.row(i) - embeddings.row(j)).norm();
  }
  std::vector<Triplet> out;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t p = 0; p < n; ++p) {
      if (p == a || labels[p] != labels[a]) continue;
      const double dap = dist(a, p);
      std::size_t semi = n, hard = n;
      for (std::size_t c = 0; c < n; ++c) {
        if (labels[c] == labels[a]) continue;
        const double dan = dist(a, c);
        if (dan > dap && dan < dap + margin) {
          if (semi == n || dan < dist(a, semi)) semi = c;
        } else if (dan <= dap) {
          if (hard == n || dan < dist(a, hard)) hard = c;
        }
      }
      if (semi != n) {
        out.push_back({a, p, semi});
      } else if (hard != n) {
        out.push_back({a, p, hard});
      }
    }
  }
  if (out.empty()) fail(ErrorCode::NoValidTriplets, "no semi-hard or hard triplets in batch");
  return out;
}

void save_netvlad(const std::filesystem::path& path, const NetVladParams& p, const std::string& config_hash) {
  p.validate();
  Container c;
  c.kind = "WRNETVLAD";
  c.header = {{"n_clusters", std::to_string(p.n_clusters())},
              {"dim", std::to_string(p.dim())},
              {"config", config_hash}};
  auto payload = [](const RowMatrix& m, const std::string& prefix) {
    WrdescPayload out;
    out.dim = static_cast<std::uint32_t>(m.cols());
    out.rows = m.cast<float>();
    for (Eigen::Index k = 0; k < m.rows(); ++k) out.sidecar.push_back({prefix + std::to_string(k), 0, 0});
    return out;
  };
  c.payloads.push_back(payload(p.centers, "center"));
  c.payloads.push_back(payload(p.weights, "weight"));
  RowMatrix b = p.biases.transpose();
  c.payloads.push_back(payload(b, "bias"));
  save_container(path, c);
}

NetVladParams load_netvlad(const std::filesystem::path& path) {
  const Container c = load_container(path, "WRNETVLAD", 3);
  NetVladParams p;
  p.centers = c.payloads[0].rows.cast<double>();
  p.weights = c.payloads[1].rows.cast<double>();
  if (c.payloads[2].rows.rows() != 1) fail(ErrorCode::FormatError, "NetVLAD bias payload must be one row");
  p.biases = c.payloads[2].rows.row(0).transpose().cast<double>();
  p.validate();
  return p;
}

}  // namespace wr
