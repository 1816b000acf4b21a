#include "wr/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wr/error.hpp"
#include "wr/rng.hpp"
#include "wr/wrdesc.hpp"

namespace wr {

namespace {

double squared_distance(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                        const Eigen::Ref<const Eigen::RowVectorXd>& b) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

}  // namespace

RowMatrix kmeanspp_seed(const RowMatrix& data, int n_clusters, std::uint64_t seed) {
  const Eigen::Index n = data.rows();
  if (n_clusters < 1) fail(ErrorCode::InvalidArgument, "n_clusters must be >= 1");
  if (n < n_clusters) {
    fail(ErrorCode::TooFewPoints, std::to_string(n) + " points for " + std::to_string(n_clusters) + " clusters");
  }
  Rng rng(seed);
  RowMatrix centers(n_clusters, data.cols());
  centers.row(0) = data.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) d2[i] = squared_distance(data.row(i), centers.row(0));
  for (int k = 1; k < n_clusters; ++k) {
    double total = 0.0;
    for (double v : d2) total += v;
    if (!(total > 0.0)) {
      fail(ErrorCode::TooFewPoints, "fewer distinct points than " + std::to_string(n_clusters) + " clusters");
    }
    const double target = rng.uniform() * total;
    double acc = 0.0;
    Eigen::Index pick = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      acc += d2[i];
      pick = i;
      if (acc > target) break;
    }
    centers.row(k) = data.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(data.row(i), centers.row(k)));
  }
  return centers;
}

std::vector<Eigen::Index> assign_nearest(const RowMatrix& data, const RowMatrix& centers,
                                         std::vector<double>* distances) {
  if (data.cols() != centers.cols()) fail(ErrorCode::DimMismatch, "descriptor and center dims differ");
  const Eigen::Index n = data.rows();
  const Eigen::Index k = centers.rows();
  std::vector<Eigen::Index> out(static_cast<std::size_t>(n));
  if (distances) distances->assign(static_cast<std::size_t>(n), 0.0);
  const Eigen::VectorXd c_norm = centers.rowwise().squaredNorm();
  const double c_max = k > 0 ? c_norm.maxCoeff() : 0.0;
  constexpr Eigen::Index kBlock = 2048;
  Eigen::MatrixXd dots;
  for (Eigen::Index start = 0; start < n; start += kBlock) {
    const Eigen::Index rows = std::min(kBlock, n - start);
    dots.noalias() = data.middleRows(start, rows) * centers.transpose();
    for (Eigen::Index r = 0; r < rows; ++r) {
      const Eigen::Index i = start + r;
      const double x_norm = data.row(i).squaredNorm();
      double approx_min = std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < k; ++c) {
        approx_min = std::min(approx_min, x_norm + c_norm[c] - 2.0 * dots(r, c));
      }
      // Rounding in the expanded form is bounded well below this slack.
      const double slack = 1e-9 * (x_norm + c_max) + 1e-300;
      Eigen::Index best = -1;
      double best_d = std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < k; ++c) {
        if (x_norm + c_norm[c] - 2.0 * dots(r, c) > approx_min + slack) continue;
        const double d = squared_distance(data.row(i), centers.row(c));
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      out[static_cast<std::size_t>(i)] = best;
      if (distances) (*distances)[static_cast<std::size_t>(i)] = best_d;
    }
  }
  return out;
}

Eigen::Index nearest_center(const Eigen::Ref<const Eigen::VectorXd>& x, const Codebook& cb) {
  if (x.size() != cb.dim()) fail(ErrorCode::DimMismatch, "vector and codebook dims differ");
  Eigen::Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < cb.n_clusters(); ++c) {
    const double d = squared_distance(x.transpose(), cb.centers.row(c));
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

Codebook train_codebook(const RowMatrix& data, const KMeansOptions& opts, KMeansReport* report) {
  if (opts.max_iters < 0 || !(opts.tol >= 0)) fail(ErrorCode::InvalidConfig, "bad k-means options");
  if (data.rows() < opts.n_clusters) {
    fail(ErrorCode::TooFewPoints,
         std::to_string(data.rows()) + " points for " + std::to_string(opts.n_clusters) + " clusters");
  }
  Codebook cb;
  cb.seed = opts.seed;
  cb.centers = kmeanspp_seed(data, opts.n_clusters, opts.seed);
  KMeansReport local;
  KMeansReport& rep = report ? *report : local;
  rep = {};
  const Eigen::Index n = data.rows();
  const Eigen::Index k = cb.n_clusters();
  std::vector<double> dist;
  for (int iter = 0; iter < opts.max_iters; ++iter) {
    const auto assign = assign_nearest(data, cb.centers, &dist);
    double objective = 0.0;
    for (double d : dist) objective += d;
    if (!rep.objective.empty() && objective > rep.objective.back() * (1.0 + 1e-12) + 1e-300) {
      fail(ErrorCode::InvalidArgument, "k-means objective increased");
    }
    rep.objective.push_back(objective);
    rep.iterations = iter + 1;

    // Fixed reduction order: rows are summed in index order.
    RowMatrix sums = RowMatrix::Zero(k, data.cols());
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[i]) += data.row(i);
      ++counts[static_cast<std::size_t>(assign[i])];
    }
    RowMatrix next(k, data.cols());
    std::vector<bool> taken(static_cast<std::size_t>(n), false);
    for (Eigen::Index c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        next.row(c) = sums.row(c) / static_cast<double>(counts[c]);
        continue;
      }
      Eigen::Index far = -1;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!taken[i] && (far < 0 || dist[i] > dist[far])) far = i;
      }
      taken[far] = true;
      dist[far] = 0.0;
      next.row(c) = data.row(far);
    }
    const double denom = cb.centers.norm();
    const double shift = (next - cb.centers).norm() / (denom > 0 ? denom : 1.0);
    cb.centers = std::move(next);
    if (shift < opts.tol) {
      rep.converged = true;
      break;
    }
  }
  if (!cb.centers.allFinite()) fail(ErrorCode::InvalidArgument, "non-finite codebook center");
  return cb;
}

void save_codebook(const std::filesystem::path& path, const Codebook& cb, const std::string& config_hash) {
  Container c;
  c.kind = "WRCODEBOOK";
  c.header = {{"n_clusters", std::to_string(cb.n_clusters())},
              {"seed", std::to_string(cb.seed)},
              {"config", config_hash}};
  WrdescPayload p;
  p.dim = static_cast<std::uint32_t>(cb.dim());
  p.rows = cb.centers.cast<float>();
  for (Eigen::Index k = 0; k < cb.n_clusters(); ++k) p.sidecar.push_back({"center" + std::to_string(k), 0, 0});
  c.payloads.push_back(std::move(p));
  save_container(path, c);
}

Codebook load_codebook(const std::filesystem::path& path) {
  const Container c = load_container(path, "WRCODEBOOK", 1);
  Codebook cb;
  cb.seed = std::stoull(c.get("seed"));
  cb.centers = c.payloads[0].rows.cast<double>();
  if (std::to_string(cb.n_clusters()) != c.get("n_clusters")) {
    fail(ErrorCode::FormatError, "codebook header disagrees with payload");
  }
  return cb;
}

}  // namespace wr
