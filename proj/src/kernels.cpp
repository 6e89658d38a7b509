#include "t3ar/kernels.hpp"

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace t3ar::kernels {
namespace {

inline double row_dot(const Matrix<float>& rows, std::size_t i,
                      std::span<const float> query) {
  const float* r = rows.row(i).data();
  double acc = 0.0;
  for (std::size_t j = 0; j < query.size(); ++j) {
    acc += static_cast<double>(r[j]) * static_cast<double>(query[j]);
  }
  return acc;
}

void check_query(const Matrix<float>& rows, std::span<const float> query,
                 std::span<double> out) {
  if (query.size() != rows.cols()) throw Error("dimension mismatch");
  if (out.size() != rows.rows()) throw Error("score buffer size mismatch");
}

std::vector<Hit> top_k_one(const Matrix<float>& rows, std::span<const std::uint64_t> ids,
                           std::span<const std::uint8_t> alive,
                           std::span<const float> query, std::size_t k) {
  std::vector<double> scores(rows.rows());
  for (std::size_t i = 0; i < rows.rows(); ++i) scores[i] = row_dot(rows, i, query);
  return select_top_k(scores, ids, alive, k);
}

}  // namespace

std::vector<Hit> select_top_k(std::span<const double> scores,
                              std::span<const std::uint64_t> ids,
                              std::span<const std::uint8_t> alive, std::size_t k) {
  std::vector<Hit> hits;
  hits.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (alive[i]) hits.push_back({ids[i], scores[i]});
  }
  k = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(),
                    ranks_before);
  hits.resize(k);
  return hits;
}

namespace serial {

void row_scores(const Matrix<float>& rows, std::span<const float> query,
                std::span<double> out) {
  check_query(rows, query, out);
  for (std::size_t i = 0; i < rows.rows(); ++i) out[i] = row_dot(rows, i, query);
}

std::vector<std::vector<Hit>> top_k_many(const Matrix<float>& rows,
                                         std::span<const std::uint64_t> ids,
                                         std::span<const std::uint8_t> alive,
                                         const Matrix<float>& queries, std::size_t k) {
  if (queries.rows() > 0 && queries.cols() != rows.cols()) throw Error("dimension mismatch");
  std::vector<std::vector<Hit>> out(queries.rows());
  for (std::size_t q = 0; q < queries.rows(); ++q) {
    out[q] = top_k_one(rows, ids, alive, queries.row(q), k);
  }
  return out;
}

std::vector<std::size_t> predict_many(const Network<float>& net,
                                      const Matrix<float>& samples) {
  std::vector<std::size_t> out(samples.rows());
  for (std::size_t i = 0; i < samples.rows(); ++i) {
    out[i] = argmax(predict_logits(net, samples.row(i)));
  }
  return out;
}

}  // namespace serial

namespace parallel {

void row_scores(const Matrix<float>& rows, std::span<const float> query,
                std::span<double> out) {
  check_query(rows, query, out);
  const auto n = static_cast<std::int64_t>(rows.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = row_dot(rows, static_cast<std::size_t>(i), query);
  }
}

std::vector<std::vector<Hit>> top_k_many(const Matrix<float>& rows,
                                         std::span<const std::uint64_t> ids,
                                         std::span<const std::uint8_t> alive,
                                         const Matrix<float>& queries, std::size_t k) {
  if (queries.rows() > 0 && queries.cols() != rows.cols()) throw Error("dimension mismatch");
  std::vector<std::vector<Hit>> out(queries.rows());
  const auto n = static_cast<std::int64_t>(queries.rows());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t q = 0; q < n; ++q) {
    const auto qi = static_cast<std::size_t>(q);
    out[qi] = top_k_one(rows, ids, alive, queries.row(qi), k);
  }
  return out;
}

std::vector<std::size_t> predict_many(const Network<float>& net,
                                      const Matrix<float>& samples) {
  std::vector<std::size_t> out(samples.rows());
  if (samples.rows() > 0 && samples.cols() != net.input_dim()) {
    throw Error("input dimension mismatch");
  }
  const auto n = static_cast<std::int64_t>(samples.rows());
  // Forward passes only throw on non-finite logits; record and rethrow outside.
  std::vector<std::uint8_t> failed(samples.rows(), 0);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto si = static_cast<std::size_t>(i);
    try {
      out[si] = argmax(predict_logits(net, samples.row(si)));
    } catch (...) {
      failed[si] = 1;
    }
  }
  if (std::find(failed.begin(), failed.end(), 1) != failed.end()) {
    throw Error("numerical blowup");
  }
  return out;
}

}  // namespace parallel

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace t3ar::kernels
