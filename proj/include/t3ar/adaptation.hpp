#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "t3ar/datasets.hpp"
#include "t3ar/memory_bank.hpp"
#include "t3ar/model.hpp"
#include "t3ar/objective.hpp"
#include "t3ar/retrieval_index.hpp"

namespace t3ar {

enum class Retriever : std::uint8_t { Embedding, Random };

struct AdaptationConfig {
  Mode mode = Mode::TestTime;
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  LossConfig loss;
  double start_lr = 1e-5;
  double base_lr = 0.1;
  double min_lr = 1e-6;
  std::size_t warmup_epochs = 4;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::size_t bank_capacity = 2048;
  std::uint64_t data_seed = 1;     // batching, bank init, neighbor sampling
  std::uint64_t init_seed = 2;     // parameter initialization
  std::uint64_t augment_seed = 3;  // augmentation noise
  double target_fraction = 1.0;
  Retriever retriever = Retriever::Embedding;
  AugmentSpec augment;
  /// When false the classification loss only trains the head.
  bool ce_updates_encoder = true;

  void validate() const;
  /// Copy with data/init/augment seeds derived from one run seed.
  AdaptationConfig with_seed(std::uint64_t seed) const;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  std::optional<double> accuracy;               // on the evaluation set
  double mean_ce = 0.0;
  double mean_ctr = 0.0;
  std::optional<double> pseudo_label_accuracy;  // against hidden labels
  std::size_t bank_occupancy = 0;
  std::size_t retrieved_negatives = 0;
  std::size_t steps = 0;
};

struct RunMetrics {
  std::vector<EpochMetrics> epochs;  // epochs[0] is the unadapted model
  std::size_t max_bank_occupancy = 0;

  std::optional<double> initial_accuracy() const { return epochs.front().accuracy; }
  std::optional<double> final_accuracy() const { return epochs.back().accuracy; }
};

struct AdaptationInputs {
  const Dataset* target = nullptr;            // adaptation data
  const Dataset* pool = nullptr;              // raw pool samples, needed when n_r > 0
  const EmbeddingIndex* index = nullptr;      // skips table entries removed from the pool
  const NeighborTable* neighbors = nullptr;   // needed when n_r > 0
  const Dataset* eval = nullptr;              // defaults to target
};

struct AdaptResult {
  ModelParams<float> params;
  RunMetrics metrics;
};

/// Runs the retrieval-augmented adaptation loop. Per step and sample: weak
/// and strong views, filtered pseudo-label (or the ground truth in
/// train-time mode), negative set from the bank, contrastive loss on the
/// (weak, strong) feature pair plus cross-entropy on the weak logits; then
/// one SGD step per batch and an enqueue of the strong-view target entries
/// followed by freshly encoded strong views of the sampled pool neighbors.
///
/// In test-time mode target labels only feed the reported metrics.
AdaptResult adapt(const AdaptationConfig& config, ModelParams<float> params,
                  const AdaptationInputs& inputs);

/// Top-1 accuracy of argmax(logits) on a labeled dataset.
double evaluate(const Network<float>& net, const Dataset& dataset);

}  // namespace t3ar
