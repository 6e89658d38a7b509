#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "t3ar/kernels.hpp"
#include "t3ar/numerics.hpp"
#include "t3ar/rng.hpp"

namespace t3ar {

using kernels::Hit;

/// Exact cosine-similarity index over the auxiliary pool.
///
/// Rows are stored L2-normalized so similarity is a plain dot product.
/// Removal only clears an alive flag; row positions and IDs never move, so
/// neighbor lists computed earlier stay valid (dead entries are skipped by
/// whoever consumes them). Queries may run concurrently; remove() needs
/// exclusive access.
class EmbeddingIndex {
 public:
  struct BuildReport {
    std::vector<std::uint64_t> dropped_ids;  // near-duplicates, ascending
  };

  /// Normalizes every row, then prunes near-duplicates greedily in
  /// ascending-ID order: an item is dropped when its similarity to an
  /// already kept item is >= dedup_threshold.
  static EmbeddingIndex build(const Matrix<float>& embeddings,
                              std::span<const std::uint64_t> ids,
                              std::span<const std::uint16_t> tags,
                              double dedup_threshold, BuildReport* report = nullptr);

  /// Exhaustive scan; ties broken by ascending ID.
  std::vector<Hit> top_k(std::span<const float> query, std::size_t k) const;

  /// Uniformly samples min(n_r, candidates) IDs from the top
  /// min(r*n_r, alive) neighbors. Returned in rank order.
  std::vector<std::uint64_t> dedup_sample(std::span<const float> query, std::size_t n_r,
                                          std::size_t r, Rng& rng) const;

  /// Marks IDs dead; returns how many were alive before the call.
  std::size_t remove(std::span<const std::uint64_t> ids);

  /// Majority label over the top-k neighbors, ties to the smallest class.
  std::uint32_t knn_classify(const std::unordered_map<std::uint64_t, std::uint32_t>& labels,
                             std::span<const float> query, std::size_t k) const;

  std::size_t size() const { return ids_.size(); }
  std::size_t alive_count() const { return alive_count_; }
  std::size_t dim() const { return embeddings_.cols(); }
  bool contains(std::uint64_t id) const { return row_of_.contains(id); }
  bool is_alive(std::uint64_t id) const;
  std::uint16_t tag_of(std::uint64_t id) const;

  const Matrix<float>& embeddings() const { return embeddings_; }
  std::span<const std::uint64_t> ids() const { return ids_; }
  std::span<const std::uint16_t> tags() const { return tags_; }
  std::span<const std::uint8_t> alive() const { return alive_; }

 private:
  Matrix<float> embeddings_;
  std::vector<std::uint64_t> ids_;
  std::vector<std::uint16_t> tags_;
  std::vector<std::uint8_t> alive_;
  std::unordered_map<std::uint64_t, std::size_t> row_of_;
  std::size_t alive_count_ = 0;

  void require_nonempty() const;
  std::vector<float> normalized_query(std::span<const float> query) const;
};

/// Frozen map from target-sample ID to a ranked list of pool IDs.
class NeighborTable {
 public:
  NeighborTable() = default;
  NeighborTable(std::vector<std::uint64_t> query_ids,
                std::vector<std::vector<std::uint64_t>> lists);

  /// Throws "unknown target id" when absent. Counts every call.
  std::span<const std::uint64_t> lookup(std::uint64_t query_id) const;

  bool contains(std::uint64_t query_id) const { return index_.contains(query_id); }
  std::size_t size() const { return lists_.size(); }
  std::size_t list_length() const { return list_length_; }
  std::size_t lookup_count() const { return lookups_->load(); }

  /// Copy keeping only the first `length` entries of each list.
  NeighborTable truncated(std::size_t length) const;

 private:
  std::vector<std::vector<std::uint64_t>> lists_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
  std::size_t list_length_ = 0;
  std::shared_ptr<std::atomic<std::size_t>> lookups_ =
      std::make_shared<std::atomic<std::size_t>>(0);
};

/// Lists of the top r*n_r pool IDs for every query row.
NeighborTable precompute_neighbors(const EmbeddingIndex& index, const Matrix<float>& queries,
                                   std::span<const std::uint64_t> query_ids, std::size_t n_r,
                                   std::size_t r);

/// Retriever that ignores content: each list holds `length` distinct alive
/// pool IDs drawn uniformly, from a stream derived from (seed, query id).
NeighborTable random_neighbors(const EmbeddingIndex& index,
                               std::span<const std::uint64_t> query_ids, std::size_t length,
                               std::uint64_t seed);

}  // namespace t3ar
