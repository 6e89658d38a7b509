#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "t3ar/memory_bank.hpp"
#include "t3ar/numerics.hpp"
#include "t3ar/retrieval_index.hpp"
#include "t3ar/rng.hpp"

namespace t3ar {

/// TrainTime supervises with ground-truth labels; TestTime with filtered
/// pseudo-labels. The same label source drives negative filtering.
enum class Mode : std::uint8_t { TrainTime, TestTime };

struct LossConfig {
  double temperature = 0.07;
  std::size_t n_r = 2;  // retrieved negatives per query, 0 disables retrieval
  std::size_t r = 5;    // candidate multiplier for dedup sampling
  double lambda_ctr = 1.0;
  /// Standard InfoNCE keeps the positive in the denominator. When false the
  /// denominator holds negatives only, which is undefined for an empty set.
  bool include_positive = true;
  Mode mode = Mode::TestTime;

  void validate() const;
};

enum class Provenance : std::uint8_t { LabelFiltered, Retrieved };

struct NegativeRef {
  const BankEntry* entry = nullptr;
  Provenance provenance = Provenance::LabelFiltered;
};

/// References into a MemoryBank; valid until the bank is next modified.
struct NegativeSet {
  std::vector<NegativeRef> items;

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
  std::size_t retrieved_count() const;
  std::vector<std::span<const float>> features() const;
};

struct NegativeSelection {
  NegativeSet negatives;
  /// Pool IDs drawn for this query this step (resident or not).
  std::vector<std::uint64_t> sampled_neighbors;
};

/// Label-filtered bank entries plus the resident subset of n_r pool
/// neighbors sampled uniformly from the query's first r*n_r table entries.
/// Table entries that are dead in `index` (when given) are skipped. With
/// n_r == 0 the table is not consulted.
NegativeSelection build_negative_set(std::uint64_t query_id, std::size_t query_label,
                                     const MemoryBank& bank, const NeighborTable* table,
                                     std::size_t n_r, std::size_t r, Rng& rng,
                                     const EmbeddingIndex* index = nullptr);

template <typename T>
struct InfoNceResult {
  T loss{};
  std::vector<T> grad_q;
  std::vector<T> grad_k;
  Matrix<T> grad_negatives;  // one row per negative; empty unless requested
};

/// -log( exp(q.k/tau) / Z ), Z summing exp(q.k_j/tau) over negatives, plus
/// the positive term when include_positive is set.
template <typename T>
InfoNceResult<T> info_nce(std::span<const T> q, std::span<const T> k,
                          const std::vector<std::span<const T>>& negatives, double temperature,
                          bool include_positive, bool negative_grads = true);

template <typename T>
struct CeResult {
  T loss{};
  std::vector<T> grad_logits;
};

/// Cross-entropy against a hard label: -log softmax(logits)[label].
template <typename T>
CeResult<T> ce_consistency(std::span<const T> logits, std::size_t label);

struct PseudoLabel {
  std::size_t label = 0;
  std::vector<float> averaged_logits;
};

/// argmax of the logits averaged over the current view and every resident
/// snapshot of `id` in the bank.
PseudoLabel filtered_pseudo_label(const MemoryBank& bank, std::uint64_t id,
                                  std::span<const float> current_logits);

double total_loss(double ce, double ctr, double lambda_ctr);

}  // namespace t3ar
