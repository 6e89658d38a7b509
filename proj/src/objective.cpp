#include "t3ar/objective.hpp"

#include <algorithm>
#include <cmath>

namespace t3ar {
namespace {

template <typename T>
void require_unit(std::span<const T> v, const char* what) {
  if (std::abs(l2_norm(v) - 1.0) > 1e-6) {
    throw Error(std::string(what) + " is not unit norm");
  }
}

}  // namespace

void LossConfig::validate() const {
  if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
  if (r == 0) throw ConfigError("r must be >= 1");
  if (!(lambda_ctr >= 0.0)) throw ConfigError("lambda_ctr must be >= 0");
}

std::size_t NegativeSet::retrieved_count() const {
  return static_cast<std::size_t>(std::count_if(items.begin(), items.end(), [](const auto& n) {
    return n.provenance == Provenance::Retrieved;
  }));
}

std::vector<std::span<const float>> NegativeSet::features() const {
  std::vector<std::span<const float>> out;
  out.reserve(items.size());
  for (const auto& n : items) out.emplace_back(n.entry->feature);
  return out;
}

NegativeSelection build_negative_set(std::uint64_t query_id, std::size_t query_label,
                                     const MemoryBank& bank, const NeighborTable* table,
                                     std::size_t n_r, std::size_t r, Rng& rng,
                                     const EmbeddingIndex* index) {
  NegativeSelection out;
  if (n_r > 0) {
    if (table == nullptr) throw Error("retrieval requested without a neighbor table");
    const auto list = table->lookup(query_id);
    std::vector<std::uint64_t> candidates;
    candidates.reserve(std::min(list.size(), r * n_r));
    for (auto id : list) {
      if (candidates.size() == r * n_r) break;
      if (index != nullptr && !index->is_alive(id)) continue;
      candidates.push_back(id);
    }
    auto picks = rng.sample_without_replacement(candidates.size(), n_r);
    std::sort(picks.begin(), picks.end());
    for (auto p : picks) out.sampled_neighbors.push_back(candidates[p]);
  }
  for (const BankEntry* e : bank.negative_candidates(query_id, query_label, out.sampled_neighbors)) {
    out.negatives.items.push_back(
        {e, e->origin == Origin::Pool ? Provenance::Retrieved : Provenance::LabelFiltered});
  }
  return out;
}

template <typename T>
InfoNceResult<T> info_nce(std::span<const T> q, std::span<const T> k,
                          const std::vector<std::span<const T>>& negatives, double temperature,
                          bool include_positive, bool negative_grads) {
  if (!(temperature > 0.0)) throw Error("temperature must be > 0");
  if (q.size() != k.size()) throw Error("dimension mismatch");
  if (negatives.empty() && !include_positive) {
    throw Error("literal InfoNCE undefined: empty negative set without the positive term");
  }
  require_unit(q, "query");
  require_unit(k, "key");
  for (const auto& n : negatives) {
    if (n.size() != q.size()) throw Error("dimension mismatch");
    require_unit(n, "negative");
  }

  const std::size_t d = q.size();
  const std::size_t m = negatives.size();
  const double inv_tau = 1.0 / temperature;
  const double s_pos = dot(q, k) * inv_tau;
  std::vector<double> s(m);
  double shift = include_positive ? s_pos : -INFINITY;
  for (std::size_t j = 0; j < m; ++j) {
    s[j] = dot(q, negatives[j]) * inv_tau;
    shift = std::max(shift, s[j]);
  }
  double z = include_positive ? std::exp(s_pos - shift) : 0.0;
  for (double sj : s) z += std::exp(sj - shift);
  const double lse = shift + std::log(z);

  InfoNceResult<T> out;
  out.loss = static_cast<T>(lse - s_pos);

  // d loss / d s_pos and d loss / d s_j
  const double g_pos = include_positive ? std::exp(s_pos - lse) - 1.0 : -1.0;
  std::vector<double> p(m);
  for (std::size_t j = 0; j < m; ++j) p[j] = std::exp(s[j] - lse);

  std::vector<double> gq(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) gq[i] = g_pos * static_cast<double>(k[i]);
  for (std::size_t j = 0; j < m; ++j) {
    const auto& n = negatives[j];
    for (std::size_t i = 0; i < d; ++i) gq[i] += p[j] * static_cast<double>(n[i]);
  }
  out.grad_q.resize(d);
  out.grad_k.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    out.grad_q[i] = static_cast<T>(gq[i] * inv_tau);
    out.grad_k[i] = static_cast<T>(g_pos * static_cast<double>(q[i]) * inv_tau);
  }
  if (negative_grads) {
    out.grad_negatives = Matrix<T>(m, d);
    for (std::size_t j = 0; j < m; ++j) {
      auto row = out.grad_negatives.row(j);
      for (std::size_t i = 0; i < d; ++i) {
        row[i] = static_cast<T>(p[j] * static_cast<double>(q[i]) * inv_tau);
      }
    }
  }
  return out;
}

template <typename T>
CeResult<T> ce_consistency(std::span<const T> logits, std::size_t label) {
  if (label >= logits.size()) throw Error("label out of range");
  const T lse = log_sum_exp(logits);
  CeResult<T> out;
  out.loss = static_cast<T>(static_cast<double>(lse) - static_cast<double>(logits[label]));
  out.grad_logits = softmax(logits);
  out.grad_logits[label] -= T{1};
  return out;
}

PseudoLabel filtered_pseudo_label(const MemoryBank& bank, std::uint64_t id,
                                  std::span<const float> current_logits) {
  PseudoLabel out;
  out.averaged_logits = bank.aggregate_logits(id, current_logits);
  out.label = argmax(out.averaged_logits);
  return out;
}

double total_loss(double ce, double ctr, double lambda_ctr) {
  if (!(lambda_ctr >= 0.0)) throw Error("lambda_ctr must be >= 0");
  return ce + lambda_ctr * ctr;
}

template InfoNceResult<float> info_nce<float>(std::span<const float>, std::span<const float>,
                                              const std::vector<std::span<const float>>&,
                                              double, bool, bool);
template InfoNceResult<double> info_nce<double>(std::span<const double>,
                                                std::span<const double>,
                                                const std::vector<std::span<const double>>&,
                                                double, bool, bool);
template CeResult<float> ce_consistency<float>(std::span<const float>, std::size_t);
template CeResult<double> ce_consistency<double>(std::span<const double>, std::size_t);

}  // namespace t3ar
