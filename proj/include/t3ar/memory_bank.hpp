#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace t3ar {

enum class Origin : std::uint8_t { Target, Pool };

/// One queued feature. Target entries carry the logits of the view that
/// produced the feature; pool entries never do.
struct BankEntry {
  std::uint64_t sample_id = 0;
  Origin origin = Origin::Target;
  std::vector<float> feature;                 // unit norm
  std::optional<std::vector<float>> logits;   // present iff origin == Target
  std::optional<std::uint32_t> known_label;   // ground truth, train-time only
  std::uint64_t insertion_counter = 0;        // assigned by the bank

  /// Class used for same-label filtering: the ground-truth label when one is
  /// known, otherwise argmax of the stored logits.
  std::size_t label() const;
};

/// Bounded FIFO queue of features and logits keyed by sample ID.
///
/// Several entries may share an ID (snapshots from different steps). For
/// negative selection each ID is represented by its newest resident entry;
/// logit aggregation uses all resident target snapshots of the ID.
class MemoryBank {
 public:
  MemoryBank(std::size_t capacity, std::vector<BankEntry> seed_entries = {});

  /// Appends in order, evicting oldest-first. Returns evicted IDs in
  /// eviction order.
  std::vector<std::uint64_t> enqueue(std::vector<BankEntry> entries);

  /// Uniform mean of `current_logits` and every resident target snapshot of
  /// `id`.
  std::vector<float> aggregate_logits(std::uint64_t id,
                                      std::span<const float> current_logits) const;

  /// Target entries with a different ID and label than the query, plus pool
  /// entries whose ID is in `neighbor_ids`. One entry per ID (the newest),
  /// oldest first.
  std::vector<const BankEntry*> negative_candidates(
      std::uint64_t query_id, std::size_t query_label,
      std::span<const std::uint64_t> neighbor_ids) const;

  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t counter() const { return counter_; }
  const std::deque<BankEntry>& entries() const { return entries_; }

  /// Newest resident entry with this ID, or nullptr.
  const BankEntry* newest(std::uint64_t id) const;

 private:
  struct Slot {
    std::size_t label = 0;         // cached label(), target entries only
    bool superseded = false;       // a newer entry with the same ID exists
    std::uint64_t previous = 0;    // counter of the previous entry with this ID, +1
  };

  void validate(const BankEntry& e) const;
  void push(BankEntry e);
  std::uint64_t evict_front();
  const BankEntry* at_counter(std::uint64_t counter) const;

  std::size_t capacity_;
  std::size_t feature_dim_ = 0;
  std::size_t logit_dim_ = 0;
  std::uint64_t counter_ = 0;
  std::deque<BankEntry> entries_;
  std::deque<Slot> slots_;
  std::unordered_map<std::uint64_t, std::uint64_t> newest_counter_;
};

}  // namespace t3ar
