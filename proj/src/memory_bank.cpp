#include "t3ar/memory_bank.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "t3ar/numerics.hpp"

namespace t3ar {

std::size_t BankEntry::label() const {
  if (known_label) return *known_label;
  if (!logits) throw Error("pool entries carry no label");
  return argmax(*logits);
}

MemoryBank::MemoryBank(std::size_t capacity, std::vector<BankEntry> seed_entries)
    : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("memory bank capacity must be >= 1");
  if (seed_entries.size() > capacity) {
    throw Error("seed entries (" + std::to_string(seed_entries.size()) +
                ") exceed bank capacity " + std::to_string(capacity));
  }
  for (const auto& e : seed_entries) validate(e);
  for (auto& e : seed_entries) push(std::move(e));
}

void MemoryBank::validate(const BankEntry& e) const {
  if (e.feature.empty()) throw Error("bank entry has an empty feature");
  if (feature_dim_ != 0 && e.feature.size() != feature_dim_) {
    throw Error("bank entry feature dimension mismatch");
  }
  const double norm = l2_norm(std::span<const float>(e.feature));
  if (std::abs(norm - 1.0) > 1e-6) throw Error("bank entry feature is not unit norm");
  if (e.origin == Origin::Pool && e.logits) throw Error("pool entries must not carry logits");
  if (e.origin == Origin::Target) {
    if (!e.logits || e.logits->empty()) throw Error("target entries require logits");
    if (logit_dim_ != 0 && e.logits->size() != logit_dim_) {
      throw Error("bank entry logit dimension mismatch");
    }
  }
}

void MemoryBank::push(BankEntry e) {
  if (feature_dim_ == 0) feature_dim_ = e.feature.size();
  if (e.logits && logit_dim_ == 0) logit_dim_ = e.logits->size();
  e.insertion_counter = counter_++;
  Slot slot;
  if (e.origin == Origin::Target) slot.label = e.label();
  auto it = newest_counter_.find(e.sample_id);
  if (it != newest_counter_.end()) {
    const std::uint64_t base = entries_.front().insertion_counter;
    slots_[it->second - base].superseded = true;
    slot.previous = it->second + 1;
    it->second = e.insertion_counter;
  } else {
    newest_counter_.emplace(e.sample_id, e.insertion_counter);
  }
  entries_.push_back(std::move(e));
  slots_.push_back(slot);
}

std::uint64_t MemoryBank::evict_front() {
  const auto& front = entries_.front();
  const std::uint64_t id = front.sample_id;
  auto it = newest_counter_.find(id);
  if (it != newest_counter_.end() && it->second == front.insertion_counter) {
    newest_counter_.erase(it);
  }
  entries_.pop_front();
  slots_.pop_front();
  return id;
}

std::vector<std::uint64_t> MemoryBank::enqueue(std::vector<BankEntry> entries) {
  if (entries.size() > capacity_) {
    throw Error("enqueue batch of " + std::to_string(entries.size()) +
                " exceeds bank capacity " + std::to_string(capacity_));
  }
  for (const auto& e : entries) validate(e);
  std::vector<std::uint64_t> evicted;
  for (auto& e : entries) {
    if (entries_.size() == capacity_) evicted.push_back(evict_front());
    push(std::move(e));
  }
  return evicted;
}

const BankEntry* MemoryBank::at_counter(std::uint64_t counter) const {
  if (entries_.empty()) return nullptr;
  const std::uint64_t base = entries_.front().insertion_counter;
  if (counter < base || counter >= counter_) return nullptr;
  return &entries_[counter - base];
}

const BankEntry* MemoryBank::newest(std::uint64_t id) const {
  auto it = newest_counter_.find(id);
  return it == newest_counter_.end() ? nullptr : at_counter(it->second);
}

std::vector<float> MemoryBank::aggregate_logits(std::uint64_t id,
                                                std::span<const float> current_logits) const {
  std::vector<double> sum(current_logits.begin(), current_logits.end());
  std::size_t count = 1;
  auto it = newest_counter_.find(id);
  if (it != newest_counter_.end()) {
    const std::uint64_t base = entries_.front().insertion_counter;
    std::uint64_t c = it->second;
    while (const BankEntry* e = at_counter(c)) {
      if (e->origin == Origin::Target && e->logits) {
        if (e->logits->size() != sum.size()) throw Error("logit dimension mismatch");
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += (*e->logits)[i];
        ++count;
      }
      const std::uint64_t prev = slots_[c - base].previous;
      if (prev == 0) break;
      c = prev - 1;
    }
  }
  std::vector<float> out(sum.size());
  for (std::size_t i = 0; i < sum.size(); ++i) {
    out[i] = static_cast<float>(sum[i] / static_cast<double>(count));
  }
  return out;
}

std::vector<const BankEntry*> MemoryBank::negative_candidates(
    std::uint64_t query_id, std::size_t query_label,
    std::span<const std::uint64_t> neighbor_ids) const {
  std::vector<const BankEntry*> out;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    const auto& slot = slots_[i];
    if (slot.superseded || e.sample_id == query_id) continue;
    if (e.origin == Origin::Target) {
      if (slot.label != query_label) out.push_back(&e);
    } else if (std::find(neighbor_ids.begin(), neighbor_ids.end(), e.sample_id) !=
               neighbor_ids.end()) {
      out.push_back(&e);
    }
  }
  return out;
}

}  // namespace t3ar
