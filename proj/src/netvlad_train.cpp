#include "wr/netvlad_train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wr/error.hpp"
#include "wr/rng.hpp"

namespace wr {

void TripletConfig::validate() const {
  if (!(margin > 0.0)) fail(ErrorCode::InvalidConfig, "triplet margin must be positive");
  if (!(learning_rate > 0.0) || epochs < 0 || !(alpha > 0.0)) {
    fail(ErrorCode::InvalidConfig, "learning rate and alpha must be positive, epochs >= 0");
  }
  if (!full_batch && (samples_per_writer < 2 || batch_size < 2 * samples_per_writer)) {
    fail(ErrorCode::InvalidConfig, "a batch needs >= 2 writers with >= 2 samples each");
  }
}

namespace {

struct UnitForward {
  RowMatrix assign;  // n x K
  RowMatrix normalized;  // K x d, E / |E|
  double norm = 0.0;
};

UnitForward forward_unit(const RowMatrix& xs, const NetVladParams& p) {
  if (xs.rows() == 0) fail(ErrorCode::EmptySet, "training unit without descriptors");
  UnitForward f;
  f.assign = soft_assign(xs, p);
  RowMatrix e = f.assign.transpose() * xs;
  const Eigen::VectorXd mass = f.assign.colwise().sum().transpose();
  e -= mass.asDiagonal() * p.centers;
  f.norm = e.norm();
  if (!(f.norm > 0.0)) fail(ErrorCode::ZeroVector, "zero NetVLAD encoding in training");
  f.normalized = e / f.norm;
  return f;
}

// Accumulates d loss / d params for one unit given d loss / d pooled (K x d).
void backward_unit(const RowMatrix& xs, const NetVladParams& p, const UnitForward& f, const RowMatrix& g_pooled,
                   NetVladParams& grad) {
  const double proj = (f.normalized.array() * g_pooled.array()).sum();
  const RowMatrix g_e = (g_pooled - proj * f.normalized) / f.norm;
  const Eigen::VectorXd mass = f.assign.colwise().sum().transpose();
  grad.centers -= mass.asDiagonal() * g_e;
  // d loss / d a_ik = g_e_k . (x_i - c_k)
  RowMatrix g_a = xs * g_e.transpose();
  const Eigen::RowVectorXd gc = (g_e.array() * p.centers.array()).rowwise().sum().transpose();
  g_a.rowwise() -= gc;
  // Softmax backward.
  const Eigen::VectorXd inner = (f.assign.array() * g_a.array()).rowwise().sum();
  RowMatrix g_z = f.assign.array() * (g_a.colwise() - inner).array();
  grad.weights.noalias() += g_z.transpose() * xs;
  grad.biases += g_z.colwise().sum().transpose();
}

NetVladParams zeros_like(const NetVladParams& p) {
  NetVladParams g;
  g.centers = RowMatrix::Zero(p.centers.rows(), p.centers.cols());
  g.weights = RowMatrix::Zero(p.weights.rows(), p.weights.cols());
  g.biases = Eigen::VectorXd::Zero(p.biases.size());
  return g;
}

using SampleRefs = std::span<const TrainingSample* const>;

std::vector<const TrainingSample*> refs_of(std::span<const TrainingSample> samples) {
  std::vector<const TrainingSample*> out;
  for (const auto& s : samples) out.push_back(&s);
  return out;
}

RowMatrix pooled_impl(const NetVladParams& params, SampleRefs samples) {
  RowMatrix out(static_cast<Eigen::Index>(samples.size()), params.n_clusters() * params.dim());
  for (std::size_t s = 0; s < samples.size(); ++s) {
    RowMatrix sum = RowMatrix::Zero(params.n_clusters(), params.dim());
    for (const auto& u : samples[s]->units) sum += forward_unit(u, params).normalized;
    out.row(static_cast<Eigen::Index>(s)) = Eigen::Map<const Eigen::RowVectorXd>(sum.data(), sum.size());
  }
  return out;
}

ObjectiveResult objective_impl(const NetVladParams& params, SampleRefs samples,
                               std::span<const Triplet> triplets, double margin, bool with_gradient) {
  if (triplets.empty()) fail(ErrorCode::NoValidTriplets, "objective over zero triplets");
  const Eigen::Index kd = params.n_clusters() * params.dim();
  std::vector<std::vector<UnitForward>> fwd(samples.size());
  RowMatrix pooled = RowMatrix::Zero(static_cast<Eigen::Index>(samples.size()), kd);
  for (std::size_t s = 0; s < samples.size(); ++s) {
    for (const auto& u : samples[s]->units) {
      fwd[s].push_back(forward_unit(u, params));
      pooled.row(static_cast<Eigen::Index>(s)) +=
          Eigen::Map<const Eigen::RowVectorXd>(fwd[s].back().normalized.data(), kd);
    }
  }

  ObjectiveResult result;
  RowMatrix g_pooled = RowMatrix::Zero(pooled.rows(), kd);
  const double scale = 1.0 / static_cast<double>(triplets.size());
  for (const auto& t : triplets) {
    const auto a = static_cast<Eigen::Index>(t.anchor);
    const auto p = static_cast<Eigen::Index>(t.positive);
    const auto n = static_cast<Eigen::Index>(t.negative);
    const Eigen::RowVectorXd ap = pooled.row(a) - pooled.row(p);
    const Eigen::RowVectorXd an = pooled.row(a) - pooled.row(n);
    const double dap = ap.norm(), dan = an.norm();
    const double loss = dap - dan + margin;
    if (loss <= 0.0) continue;
    result.loss += scale * loss;
    if (!with_gradient) continue;
    if (dap > 0.0) {
      g_pooled.row(a) += scale * ap / dap;
      g_pooled.row(p) -= scale * ap / dap;
    }
    if (dan > 0.0) {
      g_pooled.row(a) -= scale * an / dan;
      g_pooled.row(n) += scale * an / dan;
    }
  }
  if (!with_gradient) return result;

  result.gradient = zeros_like(params);
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const auto row = static_cast<Eigen::Index>(s);
    if (g_pooled.row(row).isZero(0.0)) continue;
    const RowMatrix g = Eigen::Map<const RowMatrix>(g_pooled.row(row).data(), params.n_clusters(), params.dim());
    for (std::size_t u = 0; u < samples[s]->units.size(); ++u) {
      backward_unit(samples[s]->units[u], params, fwd[s][u], g, result.gradient);
    }
  }
  return result;
}

}  // namespace

RowMatrix pooled_embeddings(const NetVladParams& params, std::span<const TrainingSample> samples) {
  return pooled_impl(params, refs_of(samples));
}

ObjectiveResult triplet_objective(const NetVladParams& params, std::span<const TrainingSample> samples,
                                  std::span<const Triplet> triplets, double margin, bool with_gradient) {
  return objective_impl(params, refs_of(samples), triplets, margin, with_gradient);
}

namespace {

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

}  // namespace

NetVladParams netvlad_train(std::span<const TrainingSample> samples, const TripletConfig& cfg,
                            const Codebook& cb, TrainReport* report) {
  cfg.validate();
  NetVladParams params = netvlad_init(cb, cfg.alpha);
  TrainReport local;
  TrainReport& rep = report ? *report : local;
  rep = {};
  if (cfg.epochs == 0) return params;

  // Writers with enough samples to supply positives.
  std::map<std::string, std::vector<std::size_t>> by_writer;
  for (std::size_t i = 0; i < samples.size(); ++i) by_writer[samples[i].label].push_back(i);
  std::vector<std::string> writers;
  for (const auto& [w, idx] : by_writer) {
    if (idx.size() >= 2) writers.push_back(w);
  }
  if (by_writer.size() < 2 || writers.empty()) {
    fail(ErrorCode::NoValidTriplets, "training needs >= 2 writers and one writer with >= 2 samples");
  }

  const std::size_t per_writer = static_cast<std::size_t>(cfg.samples_per_writer);
  const std::size_t writers_per_batch =
      std::max<std::size_t>(2, static_cast<std::size_t>(cfg.batch_size) / per_writer);
  const std::size_t batches =
      cfg.full_batch ? 1 : std::max<std::size_t>(1, samples.size() / static_cast<std::size_t>(cfg.batch_size));

  bool any_triplet = false;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(derive_seed(cfg.seed, "netvlad-epoch:" + std::to_string(epoch)));
    double epoch_loss = 0.0;
    std::size_t counted = 0;
    for (std::size_t b = 0; b < batches; ++b) {
      std::vector<const TrainingSample*> batch;
      if (cfg.full_batch) {
        batch = refs_of(samples);
      } else {
        // Writer-balanced draw; writers without positives still serve as negatives.
        std::vector<std::string> pool;
        for (const auto& [w, idx] : by_writer) pool.push_back(w);
        shuffle(pool, rng);
        std::stable_partition(pool.begin(), pool.end(), [&](const std::string& w) {
          return by_writer[w].size() >= 2;
        });
        const std::size_t take = std::min(writers_per_batch, pool.size());
        for (std::size_t w = 0; w < take; ++w) {
          auto idx = by_writer[pool[w]];
          shuffle(idx, rng);
          for (std::size_t k = 0; k < std::min(per_writer, idx.size()); ++k) batch.push_back(&samples[idx[k]]);
        }
      }
      std::vector<std::string> labels;
      for (const auto* s : batch) labels.push_back(s->label);
      std::vector<Triplet> triplets;
      try {
        triplets = mine_semi_hard(pooled_impl(params, batch), labels, cfg.margin);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NoValidTriplets) throw;
        continue;
      }
      any_triplet = true;
      const auto obj = objective_impl(params, batch, triplets, cfg.margin, true);
      epoch_loss += obj.loss;
      ++counted;
      params.centers -= cfg.learning_rate * obj.gradient.centers;
      params.weights -= cfg.learning_rate * obj.gradient.weights;
      params.biases -= cfg.learning_rate * obj.gradient.biases;
      ++rep.steps;
    }
    rep.epoch_loss.push_back(counted ? epoch_loss / static_cast<double>(counted) : 0.0);
  }
  if (!any_triplet) fail(ErrorCode::NoValidTriplets, "no epoch produced a triplet");
  params.validate();
  return params;
}

NetVladParams netvlad_train(const std::map<EntityId, LocalDescriptorSet>& entities, const TripletConfig& cfg,
                            const Codebook& cb, TrainReport* report) {
  std::vector<TrainingSample> samples;
  for (const auto& [id, set] : entities) samples.push_back({id.writer, {set.vectors}});
  return netvlad_train(samples, cfg, cb, report);
}

}  // namespace wr
