#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "wr/encoding.hpp"

namespace wr {

struct TripletConfig {
  double margin = 0.1;
  double learning_rate = 1e-2;
  int epochs = 5;
  int batch_size = 8;          // entities per minibatch
  int samples_per_writer = 2;  // entities drawn per writer within a batch
  bool full_batch = false;     // one batch holding every training entity
  double alpha = 50.0;         // soft-assignment sharpness at initialization
  std::uint64_t seed = 0;

  void validate() const;
};

/// A training entity: its writer label and the descriptor sets whose
/// l2-normalized encodings are summed into its descriptor.
struct TrainingSample {
  std::string label;
  std::vector<RowMatrix> units;
};

/// Pooled descriptor sum_u V_u / |V_u| per sample, one row each.
RowMatrix pooled_embeddings(const NetVladParams& params, std::span<const TrainingSample> samples);

struct ObjectiveResult {
  double loss = 0.0;
  NetVladParams gradient;  // same shapes as the parameters; empty when not requested
};

/// Mean triplet loss over the given triplets of pooled embeddings and, on
/// request, its gradient with respect to centers, weights and biases.
ObjectiveResult triplet_objective(const NetVladParams& params, std::span<const TrainingSample> samples,
                                  std::span<const Triplet> triplets, double margin, bool with_gradient);

struct TrainReport {
  std::vector<double> epoch_loss;  // mean mined-triplet loss per epoch, before its updates
  std::size_t steps = 0;
};

/// Plain minibatch gradient descent on the mined triplet loss, starting from
/// netvlad_init(cb, cfg.alpha). Throws NoValidTriplets if no batch of any
/// epoch yields a triplet.
NetVladParams netvlad_train(std::span<const TrainingSample> samples, const TripletConfig& cfg,
                            const Codebook& cb, TrainReport* report = nullptr);

/// One sample per descriptor set, labelled by writer.
NetVladParams netvlad_train(const std::map<EntityId, LocalDescriptorSet>& entities, const TripletConfig& cfg,
                            const Codebook& cb, TrainReport* report = nullptr);

}  // namespace wr
