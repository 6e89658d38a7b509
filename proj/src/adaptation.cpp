#include "t3ar/adaptation.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <unordered_map>

#include "t3ar/kernels.hpp"

namespace t3ar {
namespace {

// Stream labels under data_seed.
enum : std::uint64_t { kShuffleStream = 0x5F, kBankInitStream = 0xB4, kNeighborStream = 0x4E };

std::optional<std::uint32_t> label_of(const Dataset& ds, std::size_t row) {
  if (!ds.labels) return std::nullopt;
  return (*ds.labels)[row];
}

BankEntry target_entry(std::uint64_t id, ForwardResult<float>&& view,
                       std::optional<std::uint32_t> known_label) {
  BankEntry e;
  e.sample_id = id;
  e.origin = Origin::Target;
  e.feature = std::move(view.feature);
  e.logits = std::move(view.logits);
  e.known_label = known_label;
  return e;
}

void enqueue_chunked(MemoryBank& bank, std::vector<BankEntry> entries) {
  const std::size_t cap = bank.capacity();
  if (entries.size() <= cap) {
    bank.enqueue(std::move(entries));
    return;
  }
  for (std::size_t start = 0; start < entries.size(); start += cap) {
    const std::size_t end = std::min(entries.size(), start + cap);
    std::vector<BankEntry> chunk(std::make_move_iterator(entries.begin() + start),
                                 std::make_move_iterator(entries.begin() + end));
    bank.enqueue(std::move(chunk));
  }
}

}  // namespace

void AdaptationConfig::validate() const {
  loss.validate();
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (bank_capacity == 0) throw ConfigError("bank_capacity must be >= 1");
  if (!(base_lr > 0.0)) throw ConfigError("base_lr must be > 0");
  if (!(start_lr >= 0.0 && start_lr <= base_lr)) {
    throw ConfigError("start_lr must be in [0, base_lr]");
  }
  if (!(min_lr >= 0.0 && min_lr <= base_lr)) throw ConfigError("min_lr must be in [0, base_lr]");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (!(target_fraction > 0.0 && target_fraction <= 1.0)) {
    throw ConfigError("target_fraction must be in (0, 1]");
  }
  augment.validate();
}

AdaptationConfig AdaptationConfig::with_seed(std::uint64_t seed) const {
  AdaptationConfig out = *this;
  Rng rng = Rng::derive(seed, {0x5EED});
  out.data_seed = rng.next_u64();
  out.init_seed = rng.next_u64();
  out.augment_seed = rng.next_u64();
  return out;
}

double evaluate(const Network<float>& net, const Dataset& dataset) {
  if (dataset.size() == 0) throw Error("cannot evaluate on an empty dataset");
  if (!dataset.labeled()) throw Error("evaluation needs labels");
  const auto predictions = kernels::parallel::predict_many(net, dataset.samples);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] == (*dataset.labels)[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

AdaptResult adapt(const AdaptationConfig& config, ModelParams<float> params,
                  const AdaptationInputs& inputs) {
  config.validate();
  if (inputs.target == nullptr || inputs.target->size() == 0) {
    throw ConfigError("adaptation needs a non-empty target set");
  }
  const Dataset& target = *inputs.target;
  target.validate();
  if (target.dim() != params.net.input_dim()) {
    throw ConfigError("target samples do not match the model input dimension");
  }
  const bool train_time = config.mode == Mode::TrainTime;
  if (train_time && !target.labeled()) throw ConfigError("train-time mode needs labels");
  const std::size_t n_r = config.loss.n_r;
  if (n_r > 0 && (inputs.pool == nullptr || inputs.neighbors == nullptr)) {
    throw ConfigError("retrieval (n_r > 0) needs a pool and a neighbor table");
  }
  const Dataset& eval = inputs.eval != nullptr ? *inputs.eval : target;

  std::unordered_map<std::uint64_t, std::size_t> pool_row;
  if (n_r > 0) {
    pool_row.reserve(inputs.pool->size());
    for (std::size_t i = 0; i < inputs.pool->size(); ++i) pool_row.emplace(inputs.pool->ids[i], i);
  }

  AdaptResult result;
  auto record_epoch = [&](EpochMetrics m, const Network<float>& net) {
    if (eval.labeled() && eval.size() > 0) m.accuracy = evaluate(net, eval);
    result.metrics.epochs.push_back(m);
  };
  record_epoch(EpochMetrics{}, params.net);
  if (config.epochs == 0) {
    result.params = std::move(params);
    return result;
  }

  const std::size_t n = target.size();
  const std::size_t batch = std::min(config.batch_size, n);
  const std::size_t steps_per_epoch = (n + batch - 1) / batch;
  LrSchedule schedule;
  schedule.start_lr = config.start_lr;
  schedule.base_lr = config.base_lr;
  schedule.min_lr = config.min_lr;
  schedule.total_steps = config.epochs * steps_per_epoch;
  schedule.warmup_steps = std::min(config.warmup_epochs * steps_per_epoch, schedule.total_steps - 1);

  const BackwardOptions backward_options{config.ce_updates_encoder};
  const double lambda = config.loss.lambda_ctr;
  const auto& aug = config.augment;

  // Bank seeded with strong views of randomly chosen target samples.
  std::vector<BankEntry> seeds;
  {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng::derive(config.data_seed, {kBankInitStream}).shuffle(order.begin(), order.end());
    order.resize(std::min(n, config.bank_capacity));
    for (std::size_t row : order) {
      const auto id = target.ids[row];
      Rng rng = augment_stream(config.augment_seed, id, 0, View::BankInit);
      auto view = forward(params.net, std::span<const float>(strong_aug(aug, target.samples.row(row), rng)), true);
      seeds.push_back(target_entry(id, std::move(view),
                                   train_time ? label_of(target, row) : std::nullopt));
    }
  }
  MemoryBank bank(config.bank_capacity, std::move(seeds));
  result.metrics.max_bank_occupancy = bank.size();

  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng::derive(config.data_seed, {kShuffleStream, epoch}).shuffle(order.begin(), order.end());

    EpochMetrics em;
    em.epoch = epoch;
    double ce_sum = 0.0;
    double ctr_sum = 0.0;
    std::size_t pseudo_correct = 0;

    for (std::size_t start = 0; start < n; start += batch, ++step) {
      const std::size_t end = std::min(n, start + batch);
      const double scale = 1.0 / static_cast<double>(end - start);
      Grads<float> grads = params.net.zeros_like();
      std::vector<BankEntry> new_targets;
      std::vector<std::uint64_t> new_neighbors;

      try {
        for (std::size_t b = start; b < end; ++b) {
          const std::size_t row = order[b];
          const std::uint64_t id = target.ids[row];
          const auto x = target.samples.row(row);

          Rng weak_rng = augment_stream(config.augment_seed, id, step + 1, View::Weak);
          Rng strong_rng = augment_stream(config.augment_seed, id, step + 1, View::Strong);
          const auto weak_x = weak_aug(aug, x, weak_rng);
          const auto strong_x = strong_aug(aug, x, strong_rng);
          auto weak = forward(params.net, std::span<const float>(weak_x), true);
          auto strong = forward(params.net, std::span<const float>(strong_x), true);

          std::size_t label;
          if (train_time) {
            label = (*target.labels)[row];
          } else {
            label = filtered_pseudo_label(bank, id, strong.logits).label;
          }
          if (target.labeled() && label == (*target.labels)[row]) ++pseudo_correct;

          Rng neighbor_rng = Rng::derive(config.data_seed, {kNeighborStream, id, step});
          auto selection = build_negative_set(id, label, bank, inputs.neighbors, n_r,
                                              config.loss.r, neighbor_rng, inputs.index);
          em.retrieved_negatives += selection.negatives.retrieved_count();

          std::vector<float> grad_q;
          std::vector<float> grad_k;
          const bool use_ctr =
              lambda > 0.0 && (config.loss.include_positive || !selection.negatives.empty());
          if (use_ctr) {
            auto ctr = info_nce<float>(weak.feature, strong.feature,
                                       selection.negatives.features(),
                                       config.loss.temperature, config.loss.include_positive,
                                       false);
            ctr_sum += ctr.loss;
            grad_q = std::move(ctr.grad_q);
            grad_k = std::move(ctr.grad_k);
            for (auto& g : grad_q) g = static_cast<float>(g * lambda * scale);
            for (auto& g : grad_k) g = static_cast<float>(g * lambda * scale);
          }
          auto ce = ce_consistency<float>(weak.logits, label);
          ce_sum += ce.loss;
          for (auto& g : ce.grad_logits) g = static_cast<float>(g * scale);

          accumulate_backward(params.net, weak.cache, std::span<const float>(grad_q),
                              std::span<const float>(ce.grad_logits), grads, backward_options);
          if (!grad_k.empty()) {
            accumulate_backward(params.net, strong.cache, std::span<const float>(grad_k), {},
                                grads, backward_options);
          }

          new_targets.push_back(target_entry(
              id, std::move(strong), train_time ? label_of(target, row) : std::nullopt));
          for (auto pid : selection.sampled_neighbors) {
            if (std::find(new_neighbors.begin(), new_neighbors.end(), pid) == new_neighbors.end()) {
              new_neighbors.push_back(pid);
            }
          }
        }

        // Pool neighbors go through the same (pre-update) encoder as the batch.
        std::vector<BankEntry> new_pool;
        for (auto pid : new_neighbors) {
          auto it = pool_row.find(pid);
          if (it == pool_row.end()) throw Error("neighbor " + std::to_string(pid) + " not in pool");
          Rng rng = augment_stream(config.augment_seed, pid, step + 1, View::PoolStrong);
          const auto px = strong_aug(aug, inputs.pool->samples.row(it->second), rng);
          auto view = forward(params.net, std::span<const float>(px), true);
          BankEntry e;
          e.sample_id = pid;
          e.origin = Origin::Pool;
          e.feature = std::move(view.feature);
          new_pool.push_back(std::move(e));
        }

        sgd_step(params, grads, lr_at(schedule, step), config.momentum, config.weight_decay);

        enqueue_chunked(bank, std::move(new_targets));
        enqueue_chunked(bank, std::move(new_pool));
      } catch (const ConfigError&) {
        throw;
      } catch (const Error& e) {
        throw Error("adaptation aborted at step " + std::to_string(step) + ": " + e.what());
      }
      result.metrics.max_bank_occupancy = std::max(result.metrics.max_bank_occupancy, bank.size());
      ++em.steps;
    }

    em.mean_ce = ce_sum / static_cast<double>(n);
    em.mean_ctr = ctr_sum / static_cast<double>(n);
    if (target.labeled()) {
      em.pseudo_label_accuracy = static_cast<double>(pseudo_correct) / static_cast<double>(n);
    }
    em.bank_occupancy = bank.size();
    record_epoch(em, params.net);
  }

  result.params = std::move(params);
  return result;
}

}  // namespace t3ar
