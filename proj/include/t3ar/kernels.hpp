#pragma once

// Data-parallel inner loops. Every kernel exists twice: `serial` is the
// reference used by tests, `parallel` splits the outer loop across OpenMP
// threads. Each output element is computed by the same serial code in both
// variants, so results are bit-identical regardless of thread count.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "t3ar/model.hpp"
#include "t3ar/numerics.hpp"

namespace t3ar::kernels {

struct Hit {
  std::uint64_t id = 0;
  double similarity = 0.0;
  bool operator==(const Hit&) const = default;
};

/// Similarity descending, then id ascending.
inline bool ranks_before(const Hit& a, const Hit& b) {
  return a.similarity != b.similarity ? a.similarity > b.similarity : a.id < b.id;
}

/// Best k rows among those with alive[i] != 0, scored against `scores`.
std::vector<Hit> select_top_k(std::span<const double> scores,
                              std::span<const std::uint64_t> ids,
                              std::span<const std::uint8_t> alive, std::size_t k);

namespace serial {

/// out[i] = rows.row(i) . query, accumulated in double.
void row_scores(const Matrix<float>& rows, std::span<const float> query,
                std::span<double> out);

/// Top-k for every query row.
std::vector<std::vector<Hit>> top_k_many(const Matrix<float>& rows,
                                         std::span<const std::uint64_t> ids,
                                         std::span<const std::uint8_t> alive,
                                         const Matrix<float>& queries, std::size_t k);

/// argmax of the logits for every sample row.
std::vector<std::size_t> predict_many(const Network<float>& net,
                                      const Matrix<float>& samples);

}  // namespace serial

namespace parallel {

void row_scores(const Matrix<float>& rows, std::span<const float> query,
                std::span<double> out);

std::vector<std::vector<Hit>> top_k_many(const Matrix<float>& rows,
                                         std::span<const std::uint64_t> ids,
                                         std::span<const std::uint8_t> alive,
                                         const Matrix<float>& queries, std::size_t k);

std::vector<std::size_t> predict_many(const Network<float>& net,
                                      const Matrix<float>& samples);

}  // namespace parallel

/// Threads the parallel variants will use.
int max_threads();

}  // namespace t3ar::kernels
