#include "t3ar/retrieval_index.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <unordered_set>

namespace t3ar {
namespace {

// Near-duplicate pruning buckets items on a few fixed 1-D projections. For
// unit vectors cos(a, b) >= t implies |a - b| <= sqrt(2 (1 - t)), and every
// projection onto a unit direction shrinks distances, so any near-duplicate
// pair lands in the same or an adjacent cell along each projection. Cells
// only propose candidates; the similarity test itself is exact.
constexpr std::size_t kHashedDims = 3;

struct CellKey {
  std::array<std::int64_t, kHashedDims> c{};
  bool operator==(const CellKey&) const = default;
};

struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (auto v : k.c) {
      h ^= static_cast<std::uint64_t>(v);
      h *= 0x100000001b3ull;
    }
    return static_cast<std::size_t>(h);
  }
};

Matrix<double> projection_directions(std::size_t dim, std::size_t count) {
  Matrix<double> dirs(count, dim);
  Rng rng(0x7e3a5d1u);
  for (std::size_t p = 0; p < count; ++p) {
    std::vector<double> v(dim);
    for (auto& x : v) x = rng.normal();
    v = l2_normalize(v);
    std::copy(v.begin(), v.end(), dirs.row(p).begin());
  }
  return dirs;
}

std::vector<std::size_t> greedy_dedup(const Matrix<float>& unit,
                                      std::span<const std::uint64_t> ids,
                                      double threshold) {
  const std::size_t n = unit.rows();
  const std::size_t d = unit.cols();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });

  const std::size_t hashed = std::min(kHashedDims, d);
  const Matrix<double> dirs = projection_directions(d, hashed);
  const double radius = std::sqrt(std::max(0.0, 2.0 * (1.0 - threshold)));
  const double cell = radius + 1e-6;

  std::unordered_map<CellKey, std::vector<std::size_t>, CellKeyHash> grid;
  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    CellKey key;
    for (std::size_t p = 0; p < hashed; ++p) {
      const auto dir = dirs.row(p);
      const auto x = unit.row(i);
      double proj = 0.0;
      for (std::size_t j = 0; j < d; ++j) proj += dir[j] * static_cast<double>(x[j]);
      key.c[p] = static_cast<std::int64_t>(std::floor(proj / cell));
    }
    bool duplicate = false;
    const std::size_t neighborhood = static_cast<std::size_t>(std::pow(3, hashed));
    for (std::size_t code = 0; code < neighborhood && !duplicate; ++code) {
      CellKey probe = key;
      std::size_t rest = code;
      for (std::size_t p = 0; p < hashed; ++p) {
        probe.c[p] += static_cast<std::int64_t>(rest % 3) - 1;
        rest /= 3;
      }
      auto it = grid.find(probe);
      if (it == grid.end()) continue;
      for (std::size_t j : it->second) {
        if (dot(unit.row(i), unit.row(j)) >= threshold) {
          duplicate = true;
          break;
        }
      }
    }
    if (!duplicate) {
      grid[key].push_back(i);
      kept.push_back(i);
    }
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

}  // namespace

EmbeddingIndex EmbeddingIndex::build(const Matrix<float>& embeddings,
                                     std::span<const std::uint64_t> ids,
                                     std::span<const std::uint16_t> tags,
                                     double dedup_threshold, BuildReport* report) {
  if (embeddings.rows() != ids.size() || ids.size() != tags.size()) {
    throw Error("build_index: row count, ids and tags must have equal length");
  }
  if (!(dedup_threshold > 0.0 && dedup_threshold <= 1.0)) {
    throw ConfigError("dedup_threshold must be in (0, 1]");
  }
  {
    std::unordered_set<std::uint64_t> seen;
    for (auto id : ids) {
      if (!seen.insert(id).second) throw Error("duplicate id " + std::to_string(id));
    }
  }

  Matrix<float> unit(embeddings.rows(), embeddings.cols());
  for (std::size_t i = 0; i < embeddings.rows(); ++i) {
    const auto v = l2_normalize(embeddings.row(i));
    std::copy(v.begin(), v.end(), unit.row(i).begin());
  }

  const auto kept = greedy_dedup(unit, ids, dedup_threshold);

  EmbeddingIndex index;
  index.embeddings_ = Matrix<float>(kept.size(), embeddings.cols());
  index.ids_.reserve(kept.size());
  index.tags_.reserve(kept.size());
  for (std::size_t r = 0; r < kept.size(); ++r) {
    const auto src = unit.row(kept[r]);
    std::copy(src.begin(), src.end(), index.embeddings_.row(r).begin());
    index.ids_.push_back(ids[kept[r]]);
    index.tags_.push_back(tags[kept[r]]);
    index.row_of_.emplace(ids[kept[r]], r);
  }
  index.alive_.assign(kept.size(), 1);
  index.alive_count_ = kept.size();

  if (report != nullptr) {
    report->dropped_ids.clear();
    std::vector<std::uint8_t> is_kept(ids.size(), 0);
    for (auto k : kept) is_kept[k] = 1;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!is_kept[i]) report->dropped_ids.push_back(ids[i]);
    }
    std::sort(report->dropped_ids.begin(), report->dropped_ids.end());
  }
  return index;
}

void EmbeddingIndex::require_nonempty() const {
  if (alive_count_ == 0) throw Error("empty index");
}

std::vector<float> EmbeddingIndex::normalized_query(std::span<const float> query) const {
  if (query.size() != dim()) throw Error("dimension mismatch");
  return l2_normalize(query);
}

std::vector<Hit> EmbeddingIndex::top_k(std::span<const float> query, std::size_t k) const {
  require_nonempty();
  if (k == 0) throw Error("k must be >= 1");
  const auto q = normalized_query(query);
  std::vector<double> scores(size());
  kernels::parallel::row_scores(embeddings_, q, scores);
  return kernels::select_top_k(scores, ids_, alive_, k);
}

std::vector<std::uint64_t> EmbeddingIndex::dedup_sample(std::span<const float> query,
                                                        std::size_t n_r, std::size_t r,
                                                        Rng& rng) const {
  if (n_r == 0 || r == 0) throw Error("n_r and r must be >= 1");
  const auto candidates = top_k(query, r * n_r);
  auto picks = rng.sample_without_replacement(candidates.size(), n_r);
  std::sort(picks.begin(), picks.end());
  std::vector<std::uint64_t> out;
  out.reserve(picks.size());
  for (auto p : picks) out.push_back(candidates[p].id);
  return out;
}

std::size_t EmbeddingIndex::remove(std::span<const std::uint64_t> ids) {
  std::size_t removed = 0;
  for (auto id : ids) {
    auto it = row_of_.find(id);
    if (it == row_of_.end() || !alive_[it->second]) continue;
    alive_[it->second] = 0;
    --alive_count_;
    ++removed;
  }
  return removed;
}

bool EmbeddingIndex::is_alive(std::uint64_t id) const {
  auto it = row_of_.find(id);
  return it != row_of_.end() && alive_[it->second] != 0;
}

std::uint16_t EmbeddingIndex::tag_of(std::uint64_t id) const {
  auto it = row_of_.find(id);
  if (it == row_of_.end()) throw Error("unknown pool id " + std::to_string(id));
  return tags_[it->second];
}

std::uint32_t EmbeddingIndex::knn_classify(
    const std::unordered_map<std::uint64_t, std::uint32_t>& labels,
    std::span<const float> query, std::size_t k) const {
  const auto hits = top_k(query, k);
  std::map<std::uint32_t, std::size_t> votes;
  for (const auto& h : hits) {
    auto it = labels.find(h.id);
    if (it == labels.end()) throw Error("missing label for id " + std::to_string(h.id));
    ++votes[it->second];
  }
  // std::map iterates in ascending class order, so strict > keeps the
  // smallest class among equal counts.
  std::uint32_t best = 0;
  std::size_t best_votes = 0;
  for (const auto& [cls, count] : votes) {
    if (count > best_votes) {
      best = cls;
      best_votes = count;
    }
  }
  return best;
}

NeighborTable::NeighborTable(std::vector<std::uint64_t> query_ids,
                             std::vector<std::vector<std::uint64_t>> lists)
    : lists_(std::move(lists)) {
  if (query_ids.size() != lists_.size()) throw Error("neighbor table size mismatch");
  for (std::size_t i = 0; i < query_ids.size(); ++i) {
    if (!index_.emplace(query_ids[i], i).second) {
      throw Error("duplicate target id " + std::to_string(query_ids[i]));
    }
    list_length_ = std::max(list_length_, lists_[i].size());
  }
}

std::span<const std::uint64_t> NeighborTable::lookup(std::uint64_t query_id) const {
  lookups_->fetch_add(1, std::memory_order_relaxed);
  auto it = index_.find(query_id);
  if (it == index_.end()) throw Error("unknown target id");
  return lists_[it->second];
}

NeighborTable NeighborTable::truncated(std::size_t length) const {
  std::vector<std::uint64_t> ids(lists_.size());
  for (const auto& [id, pos] : index_) ids[pos] = id;
  std::vector<std::vector<std::uint64_t>> lists = lists_;
  for (auto& l : lists) {
    if (l.size() > length) l.resize(length);
  }
  return NeighborTable(std::move(ids), std::move(lists));
}

NeighborTable precompute_neighbors(const EmbeddingIndex& index, const Matrix<float>& queries,
                                   std::span<const std::uint64_t> query_ids, std::size_t n_r,
                                   std::size_t r) {
  if (queries.rows() != query_ids.size()) throw Error("query rows and ids differ in length");
  if (n_r == 0 || r == 0) throw Error("n_r and r must be >= 1");
  if (index.alive_count() == 0) throw Error("empty index");
  Matrix<float> unit(queries.rows(), queries.cols());
  for (std::size_t i = 0; i < queries.rows(); ++i) {
    if (queries.cols() != index.dim()) throw Error("dimension mismatch");
    const auto v = l2_normalize(queries.row(i));
    std::copy(v.begin(), v.end(), unit.row(i).begin());
  }
  const auto hits = kernels::parallel::top_k_many(index.embeddings(), index.ids(),
                                                  index.alive(), unit, r * n_r);
  std::vector<std::vector<std::uint64_t>> lists(hits.size());
  for (std::size_t q = 0; q < hits.size(); ++q) {
    lists[q].reserve(hits[q].size());
    for (const auto& h : hits[q]) lists[q].push_back(h.id);
  }
  return NeighborTable({query_ids.begin(), query_ids.end()}, std::move(lists));
}

NeighborTable random_neighbors(const EmbeddingIndex& index,
                               std::span<const std::uint64_t> query_ids, std::size_t length,
                               std::uint64_t seed) {
  std::vector<std::uint64_t> alive_ids;
  alive_ids.reserve(index.alive_count());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index.alive()[i]) alive_ids.push_back(index.ids()[i]);
  }
  if (alive_ids.empty()) throw Error("empty index");
  std::sort(alive_ids.begin(), alive_ids.end());
  std::vector<std::vector<std::uint64_t>> lists;
  lists.reserve(query_ids.size());
  for (auto qid : query_ids) {
    Rng rng = Rng::derive(seed, {0x4A4D, qid});
    // Floyd's algorithm keeps this O(length) for large pools.
    const std::size_t n = alive_ids.size();
    const std::size_t k = std::min(length, n);
    std::vector<std::size_t> picks;
    std::unordered_set<std::size_t> chosen;
    for (std::size_t j = n - k; j < n; ++j) {
      const auto t = static_cast<std::size_t>(rng.uniform_index(j + 1));
      if (chosen.insert(t).second) {
        picks.push_back(t);
      } else {
        chosen.insert(j);
        picks.push_back(j);
      }
    }
    std::vector<std::uint64_t> list;
    list.reserve(k);
    for (auto p : picks) list.push_back(alive_ids[p]);
    lists.push_back(std::move(list));
  }
  return NeighborTable({query_ids.begin(), query_ids.end()}, std::move(lists));
}

}  // namespace t3ar
