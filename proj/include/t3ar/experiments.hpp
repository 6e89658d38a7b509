#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "t3ar/adaptation.hpp"
#include "t3ar/datasets.hpp"
#include "t3ar/retrieval_index.hpp"
#include "t3ar/table.hpp"

namespace t3ar {

/// Everything needed to reproduce one family of runs on the synthetic task.
struct ExperimentConfig {
  ShiftSpec shift;
  TaskSizes sizes;
  Architecture arch;
  /// Supervised pre-training on the source split (train-time mode, no
  /// retrieval) producing the source model.
  AdaptationConfig source;
  /// Test-time adaptation of the source model on the target split.
  AdaptationConfig adaptation;
  double dedup_threshold = 0.999;
  EmbedSpec embed;
  std::vector<std::uint64_t> seeds = {1};

  /// Defaults for the reference task.
  static ExperimentConfig reference();
  void validate() const;
};

/// Per-seed data, index, neighbor lists and source model.
struct PreparedExperiment {
  std::uint64_t seed = 0;
  ShiftedTask task;
  EmbeddingIndex index;
  std::size_t dropped_duplicates = 0;
  NeighborTable neighbors;  // lists of length r * max_n_r
  ModelParams<float> source_params;
  double source_only_accuracy = 0.0;  // source model on the full target set
};

/// Generates the task for `seed`, trains the source model, builds the pool
/// index and neighbor lists of length r * max_n_r.
PreparedExperiment prepare_experiment(const ExperimentConfig& config, std::uint64_t seed,
                                      std::size_t max_n_r);
/// Same, on an existing task (for example one loaded from disk).
PreparedExperiment prepare_from_task(const ExperimentConfig& config, std::uint64_t seed,
                                     ShiftedTask task, std::size_t max_n_r);

/// What a single adaptation run varies relative to the prepared context.
struct RunOverrides {
  double fraction = 1.0;
  std::size_t n_r = 0;
  Retriever retriever = Retriever::Embedding;
  /// Replacement pool (index + raw samples); defaults to the prepared one.
  const Dataset* pool = nullptr;
  const EmbeddingIndex* index = nullptr;
  const NeighborTable* neighbors = nullptr;
};

/// Adapts the prepared source model on the (subsampled) target set and
/// evaluates on the full target set.
AdaptResult run_target_adaptation(const ExperimentConfig& config,
                                  const PreparedExperiment& prepared,
                                  const RunOverrides& overrides);

/// Columns: seed, fraction, n_target, source_only, no_retrieval, retrieval.
Table run_fraction_sweep(const ExperimentConfig& config, std::span<const double> fractions,
                         std::span<const PreparedExperiment> prepared = {});

/// Columns: seed, retriever (none | embedding | random), accuracy.
Table run_retriever_ablation(const ExperimentConfig& config,
                             std::span<const PreparedExperiment> prepared = {});

struct PoolVariant {
  std::string name;
  bool keep = false;                 // keep listed tags, else drop them
  std::vector<std::uint16_t> tags;

  bool admits(std::uint16_t tag) const;
  /// "all", "keep:0|3" or "drop:1|2".
  static PoolVariant parse(const std::string& text);
};

/// Columns: seed, variant, pool_size, accuracy, delta (vs the full pool).
Table run_pool_ablations(const ExperimentConfig& config, std::span<const PoolVariant> variants,
                         std::span<const PreparedExperiment> prepared = {});

/// Columns: seed, n_r, accuracy. n_r = 0 disables retrieval.
Table run_nn_sweep(const ExperimentConfig& config, std::span<const std::size_t> nr_values,
                   std::span<const PreparedExperiment> prepared = {});

/// Columns: seed, mix_fraction, pool_size, dropped_duplicates, accuracy.
/// The pool is regenerated per mix fraction with the same seed.
Table run_domain_gap_sweep(const ExperimentConfig& config, std::span<const double> mix_fractions);

/// Spearman correlation of the seed-averaged accuracy against mix_fraction.
double domain_gap_trend(const Table& gap_table);

}  // namespace t3ar
