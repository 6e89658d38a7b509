#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "t3ar/error.hpp"

namespace t3ar {

/// Norms at or below this are treated as degenerate.
inline constexpr double kDegenerateNorm = 1e-12;

template <typename T>
using Vector = std::vector<T>;

/// Dense row-major matrix with explicit dimensions.
template <typename T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{0})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> values)
      : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (data_.size() != rows_ * cols_) {
      throw Error("matrix buffer length " + std::to_string(data_.size()) +
                  " does not match " + std::to_string(rows_) + "x" +
                  std::to_string(cols_));
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<T> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const T> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  T& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const T& operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& buffer() { return data_; }
  const std::vector<T>& buffer() const { return data_; }

  /// Appends a row; the first row of an empty 0x0 matrix fixes the width.
  void push_row(std::span<const T> r) {
    if (rows_ == 0 && cols_ == 0) cols_ = r.size();
    if (r.size() != cols_) throw Error("push_row: width mismatch");
    data_.insert(data_.end(), r.begin(), r.end());
    ++rows_;
  }

  template <typename U>
  Matrix<U> cast() const {
    return Matrix<U>(rows_, cols_, std::vector<U>(data_.begin(), data_.end()));
  }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

template <typename T>
bool all_finite(std::span<const T> v) {
  return std::all_of(v.begin(), v.end(), [](T x) { return std::isfinite(x); });
}

/// Dot product accumulated in double regardless of T.
template <typename T>
double dot(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) throw Error("dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return acc;
}

template <typename T>
double l2_norm(std::span<const T> v) {
  return std::sqrt(dot(v, v));
}

/// Index of the largest element; ties go to the smallest index.
template <typename T>
std::size_t argmax(std::span<const T> v) {
  if (v.empty()) throw Error("empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

template <typename T>
T log_sum_exp(std::span<const T> v) {
  if (v.empty()) throw Error("empty input");
  if (!all_finite(v)) throw Error("non-finite input");
  const double shift = static_cast<double>(*std::max_element(v.begin(), v.end()));
  double acc = 0.0;
  for (T x : v) acc += std::exp(static_cast<double>(x) - shift);
  return static_cast<T>(shift + std::log(acc));
}

template <typename T>
std::vector<T> softmax(std::span<const T> v) {
  if (v.empty()) return {};
  if (!all_finite(v)) throw Error("non-finite input");
  const double shift = static_cast<double>(*std::max_element(v.begin(), v.end()));
  std::vector<double> e(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    e[i] = std::exp(static_cast<double>(v[i]) - shift);
    total += e[i];
  }
  std::vector<T> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<T>(e[i] / total);
  return out;
}

template <typename T>
std::vector<T> l2_normalize(std::span<const T> v) {
  if (!all_finite(v)) throw Error("non-finite input");
  const double norm = l2_norm(v);
  if (!(norm > kDegenerateNorm)) throw Error("degenerate embedding");
  std::vector<T> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = static_cast<T>(static_cast<double>(v[i]) / norm);
  }
  return out;
}

template <typename T>
double cosine_sim(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) throw Error("dimension mismatch");
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (!(na > kDegenerateNorm) || !(nb > kDegenerateNorm)) {
    throw Error("degenerate embedding");
  }
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

// Convenience overloads so call sites can pass std::vector directly.
template <typename T>
T log_sum_exp(const std::vector<T>& v) { return log_sum_exp(std::span<const T>(v)); }
template <typename T>
std::vector<T> softmax(const std::vector<T>& v) { return softmax(std::span<const T>(v)); }
template <typename T>
std::vector<T> l2_normalize(const std::vector<T>& v) {
  return l2_normalize(std::span<const T>(v));
}
template <typename T>
double cosine_sim(const std::vector<T>& a, const std::vector<T>& b) {
  return cosine_sim(std::span<const T>(a), std::span<const T>(b));
}
template <typename T>
std::size_t argmax(const std::vector<T>& v) { return argmax(std::span<const T>(v)); }

}  // namespace t3ar
