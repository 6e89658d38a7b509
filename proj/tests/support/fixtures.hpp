#pragma once

// Random instance generators shared by unit and acceptance tests.

#include <cstdint>
#include <algorithm>
#include <random>
#include <vector>

#include "oracles/oracles.hpp"
#include "t3ar/memory_bank.hpp"
#include "t3ar/model.hpp"
#include "t3ar/numerics.hpp"
#include "t3ar/retrieval_index.hpp"

namespace fixtures {

using Gen = std::mt19937_64;

inline oracle::Vec gaussian(Gen& g, std::size_t d) {
  std::normal_distribution<double> n(0.0, 1.0);
  oracle::Vec v(d);
  for (auto& x : v) x = n(g);
  return v;
}

inline oracle::Vec unit(Gen& g, std::size_t d) { return oracle::normalized(gaussian(g, d)); }

inline std::vector<float> to_float(const oracle::Vec& v) { return {v.begin(), v.end()}; }

inline oracle::Vec to_double(std::span<const float> v) { return {v.begin(), v.end()}; }

/// Unit-norm float vector (norm error well below the bank's 1e-6 check).
inline std::vector<float> unit_float(Gen& g, std::size_t d) {
  auto v = to_float(unit(g, d));
  return t3ar::l2_normalize(v);
}

inline std::size_t uniform(Gen& g, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(g);
}

inline double uniform_real(Gen& g, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(g);
}

/// Rows plus ids for an index; ids are shuffled and sparse.
struct PoolData {
  std::vector<oracle::Vec> rows;
  std::vector<std::uint64_t> ids;
  t3ar::Matrix<float> matrix;
  std::vector<std::uint16_t> tags;
};

inline PoolData random_pool(Gen& g, std::size_t n, std::size_t d, std::uint64_t first_id = 1000) {
  PoolData p;
  p.matrix = t3ar::Matrix<float>(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    auto v = gaussian(g, d);
    for (std::size_t j = 0; j < d; ++j) {
      p.matrix(i, j) = static_cast<float>(v[j]);
      v[j] = static_cast<double>(p.matrix(i, j));
    }
    p.rows.push_back(v);
    p.ids.push_back(first_id + 3 * i);
    p.tags.push_back(static_cast<std::uint16_t>(i % 3));
  }
  std::shuffle(p.ids.begin(), p.ids.end(), g);
  return p;
}

inline t3ar::BankEntry target_entry(Gen& g, std::uint64_t id, std::size_t d, std::size_t c,
                                    bool with_known = false) {
  t3ar::BankEntry e;
  e.sample_id = id;
  e.origin = t3ar::Origin::Target;
  e.feature = unit_float(g, d);
  e.logits = to_float(gaussian(g, c));
  if (with_known) e.known_label = static_cast<std::uint32_t>(uniform(g, 0, c - 1));
  return e;
}

inline t3ar::BankEntry pool_entry(Gen& g, std::uint64_t id, std::size_t d) {
  t3ar::BankEntry e;
  e.sample_id = id;
  e.origin = t3ar::Origin::Pool;
  e.feature = unit_float(g, d);
  return e;
}

inline oracle::BankItem mirror(const t3ar::BankEntry& e) {
  oracle::BankItem it;
  it.id = e.sample_id;
  it.target = e.origin == t3ar::Origin::Target;
  if (e.logits) it.logits = to_double(*e.logits);
  if (e.known_label) it.known = static_cast<int>(*e.known_label);
  return it;
}

inline std::vector<oracle::BankItem> mirror(const t3ar::MemoryBank& bank) {
  std::vector<oracle::BankItem> out;
  for (const auto& e : bank.entries()) out.push_back(mirror(e));
  return out;
}

/// Small random network in double precision.
inline t3ar::Network<double> random_network(Gen& g, std::size_t in,
                                            const std::vector<std::size_t>& hidden,
                                            std::size_t feature, std::size_t classes) {
  t3ar::Network<double> net;
  std::size_t prev = in;
  auto layer = [&](std::size_t out_dim, std::size_t in_dim) {
    t3ar::Linear<double> l{t3ar::Matrix<double>(out_dim, in_dim), std::vector<double>(out_dim)};
    const double s = 1.0 / std::sqrt(static_cast<double>(in_dim));
    for (auto& w : l.weight.buffer()) w = s * gaussian(g, 1)[0];
    for (auto& b : l.bias) b = 0.1 * gaussian(g, 1)[0];
    return l;
  };
  for (auto h : hidden) {
    net.encoder.push_back(layer(h, prev));
    prev = h;
  }
  net.encoder.push_back(layer(feature, prev));
  net.head = layer(classes, feature);
  return net;
}

}  // namespace fixtures
