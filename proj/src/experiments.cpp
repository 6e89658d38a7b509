#include "t3ar/experiments.hpp"

#include <bit>
#include <cmath>
#include <exception>
#include <sstream>

namespace t3ar {
namespace {

// Runs fn(i) for i in [0, count) across OpenMP threads. Each job owns its
// outputs, so results do not depend on scheduling.
template <typename Fn>
void parallel_jobs(std::size_t count, Fn&& fn) {
  std::vector<std::exception_ptr> errors(count);
  const auto n = static_cast<std::int64_t>(count);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct PoolIndex {
  EmbeddingIndex index;
  std::size_t dropped = 0;
  NeighborTable neighbors;
};

PoolIndex index_pool(const ExperimentConfig& config, const Dataset& pool, const Dataset& target,
                     std::size_t max_n_r) {
  PoolIndex out;
  EmbeddingIndex::BuildReport report;
  out.index = EmbeddingIndex::build(embed_for_retrieval(pool, config.embed), pool.ids, pool.tags,
                                    config.dedup_threshold, &report);
  out.dropped = report.dropped_ids.size();
  if (max_n_r > 0) {
    out.neighbors = precompute_neighbors(out.index, embed_for_retrieval(target, config.embed),
                                         target.ids, max_n_r, config.adaptation.loss.r);
  }
  return out;
}

std::vector<PreparedExperiment> prepare_all(const ExperimentConfig& config, std::size_t max_n_r) {
  std::vector<PreparedExperiment> out(config.seeds.size());
  parallel_jobs(config.seeds.size(), [&](std::size_t i) {
    out[i] = prepare_experiment(config, config.seeds[i], max_n_r);
  });
  return out;
}

std::span<const PreparedExperiment> ensure_prepared(const ExperimentConfig& config,
                                                    std::span<const PreparedExperiment> given,
                                                    std::size_t max_n_r,
                                                    std::vector<PreparedExperiment>& storage) {
  if (!given.empty()) return given;
  storage = prepare_all(config, max_n_r);
  return storage;
}

std::uint64_t fraction_key(double f) { return std::bit_cast<std::uint64_t>(f); }

double final_accuracy(const AdaptResult& r) {
  const auto acc = r.metrics.final_accuracy();
  if (!acc) throw Error("evaluation set is unlabeled");
  return *acc;
}

}  // namespace

ExperimentConfig ExperimentConfig::reference() {
  ExperimentConfig c;
  c.source.mode = Mode::TrainTime;
  c.source.epochs = 5;
  c.source.base_lr = 0.01;
  c.source.loss.n_r = 0;
  // The library defaults (base_lr 0.1, drop 0.2) collapse the self-training
  // loop onto one class on this task; see docs/config.md.
  c.adaptation.mode = Mode::TestTime;
  c.adaptation.base_lr = 0.01;
  c.adaptation.augment.drop_prob = 0.1;
  c.seeds = {1, 2, 3, 4, 5};
  return c;
}

void ExperimentConfig::validate() const {
  shift.validate();
  source.validate();
  adaptation.validate();
  if (source.mode != Mode::TrainTime) throw ConfigError("source training must run in train-time mode");
  if (source.loss.n_r != 0) throw ConfigError("source training does not use retrieval");
  if (arch.input_dim != shift.input_dim) throw ConfigError("model input_dim must match the task");
  if (arch.num_classes != shift.num_classes) throw ConfigError("model num_classes must match the task");
  if (!(dedup_threshold > 0.0 && dedup_threshold <= 1.0)) {
    throw ConfigError("dedup_threshold must be in (0, 1]");
  }
  if (seeds.empty()) throw ConfigError("at least one seed is required");
}

PreparedExperiment prepare_experiment(const ExperimentConfig& config, std::uint64_t seed,
                                      std::size_t max_n_r) {
  config.validate();
  return prepare_from_task(config, seed, make_shifted_task(config.shift, config.sizes, seed),
                           max_n_r);
}

PreparedExperiment prepare_from_task(const ExperimentConfig& config, std::uint64_t seed,
                                     ShiftedTask task, std::size_t max_n_r) {
  config.validate();
  if (!task.source.labeled()) throw ConfigError("source split needs labels");
  if (!task.target.labeled()) throw ConfigError("target split needs (hidden) labels for evaluation");
  PreparedExperiment p;
  p.seed = seed;
  p.task = std::move(task);

  const AdaptationConfig src = config.source.with_seed(seed);
  AdaptationInputs inputs;
  inputs.target = &p.task.source;
  auto trained = adapt(src, init_params(config.arch, src.init_seed), inputs);
  p.source_params = std::move(trained.params);
  p.source_params.velocity = p.source_params.net.zeros_like();
  p.source_only_accuracy = evaluate(p.source_params.net, p.task.target);

  auto pool = index_pool(config, p.task.pool, p.task.target, max_n_r);
  p.index = std::move(pool.index);
  p.dropped_duplicates = pool.dropped;
  p.neighbors = std::move(pool.neighbors);
  return p;
}

AdaptResult run_target_adaptation(const ExperimentConfig& config,
                                  const PreparedExperiment& prepared,
                                  const RunOverrides& overrides) {
  AdaptationConfig cfg = config.adaptation.with_seed(prepared.seed);
  cfg.loss.n_r = overrides.n_r;
  cfg.target_fraction = overrides.fraction;
  cfg.retriever = overrides.retriever;
  cfg.validate();

  const Dataset& full_target = prepared.task.target;
  Dataset subsample;
  const Dataset* target = &full_target;
  if (overrides.fraction < 1.0) {
    subsample = stratified_subsample(
        full_target, overrides.fraction,
        Rng::derive(prepared.seed, {0xF4AC, fraction_key(overrides.fraction)}).next_u64());
    target = &subsample;
  }

  const Dataset* pool = overrides.pool != nullptr ? overrides.pool : &prepared.task.pool;
  const EmbeddingIndex* index = overrides.index != nullptr ? overrides.index : &prepared.index;
  const NeighborTable* base = overrides.neighbors != nullptr ? overrides.neighbors : &prepared.neighbors;

  NeighborTable table;
  AdaptationInputs inputs;
  inputs.target = target;
  inputs.eval = &full_target;
  if (cfg.loss.n_r > 0) {
    const std::size_t length = cfg.loss.r * cfg.loss.n_r;
    if (cfg.retriever == Retriever::Random) {
      table = random_neighbors(*index, full_target.ids, length,
                               Rng::derive(prepared.seed, {0x7A4D}).next_u64());
    } else {
      if (base->list_length() < std::min(length, index->alive_count())) {
        throw Error("prepared neighbor lists are shorter than r * n_r");
      }
      table = base->truncated(length);
    }
    inputs.pool = pool;
    inputs.index = index;
    inputs.neighbors = &table;
  }
  return adapt(cfg, prepared.source_params, inputs);
}

Table run_fraction_sweep(const ExperimentConfig& config, std::span<const double> fractions,
                         std::span<const PreparedExperiment> prepared) {
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("fractions must lie in (0, 1]");
  }
  std::vector<PreparedExperiment> storage;
  const auto ctx = ensure_prepared(config, prepared, config.adaptation.loss.n_r, storage);

  Table t{{"seed", "fraction", "n_target", "source_only", "no_retrieval", "retrieval"}, {}};
  t.rows.resize(ctx.size() * fractions.size());
  parallel_jobs(t.rows.size(), [&](std::size_t job) {
    const auto& p = ctx[job / fractions.size()];
    const double f = fractions[job % fractions.size()];
    const auto without = run_target_adaptation(config, p, {.fraction = f, .n_r = 0});
    const auto with = run_target_adaptation(
        config, p, {.fraction = f, .n_r = config.adaptation.loss.n_r});
    const auto n_target = f < 1.0 ? stratified_subsample(p.task.target, f,
                                                         Rng::derive(p.seed, {0xF4AC, fraction_key(f)}).next_u64())
                                        .size()
                                  : p.task.target.size();
    t.rows[job] = {static_cast<std::int64_t>(p.seed), f, static_cast<std::int64_t>(n_target),
                   p.source_only_accuracy, final_accuracy(without), final_accuracy(with)};
  });
  return t;
}

Table run_retriever_ablation(const ExperimentConfig& config,
                             std::span<const PreparedExperiment> prepared) {
  std::vector<PreparedExperiment> storage;
  const auto ctx = ensure_prepared(config, prepared, config.adaptation.loss.n_r, storage);
  const std::size_t n_r = config.adaptation.loss.n_r;
  if (n_r == 0) throw ConfigError("retriever ablation needs n_r >= 1");

  static const char* kNames[] = {"none", "embedding", "random"};
  Table t{{"seed", "retriever", "accuracy"}, {}};
  t.rows.resize(ctx.size() * 3);
  parallel_jobs(t.rows.size(), [&](std::size_t job) {
    const auto& p = ctx[job / 3];
    const std::size_t kind = job % 3;
    RunOverrides o;
    o.fraction = config.adaptation.target_fraction;
    o.n_r = kind == 0 ? 0 : n_r;
    o.retriever = kind == 2 ? Retriever::Random : Retriever::Embedding;
    t.rows[job] = {static_cast<std::int64_t>(p.seed), std::string(kNames[kind]),
                   final_accuracy(run_target_adaptation(config, p, o))};
  });
  return t;
}

bool PoolVariant::admits(std::uint16_t tag) const {
  const bool listed = std::find(tags.begin(), tags.end(), tag) != tags.end();
  return keep ? listed : !listed;
}

PoolVariant PoolVariant::parse(const std::string& text) {
  PoolVariant v;
  v.name = text;
  if (text == "all") return v;
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ConfigError("bad pool variant '" + text + "'");
  const auto kind = text.substr(0, colon);
  if (kind == "keep") {
    v.keep = true;
  } else if (kind != "drop") {
    throw ConfigError("pool variant must start with keep: or drop:, got '" + text + "'");
  }
  std::stringstream ss(text.substr(colon + 1));
  std::string item;
  while (std::getline(ss, item, '|')) {
    try {
      std::size_t used = 0;
      const auto tag = std::stoul(item, &used);
      if (used != item.size() || tag > 0xFFFF) throw std::invalid_argument(item);
      v.tags.push_back(static_cast<std::uint16_t>(tag));
    } catch (const std::exception&) {
      throw ConfigError("bad tag '" + item + "' in pool variant '" + text + "'");
    }
  }
  if (v.tags.empty()) throw ConfigError("pool variant '" + text + "' lists no tags");
  return v;
}

Table run_pool_ablations(const ExperimentConfig& config, std::span<const PoolVariant> variants,
                         std::span<const PreparedExperiment> prepared) {
  const std::size_t n_r = config.adaptation.loss.n_r;
  std::vector<PreparedExperiment> storage;
  const auto ctx = ensure_prepared(config, prepared, n_r, storage);

  // Job layout per seed: full pool first, then each variant.
  const std::size_t per_seed = variants.size() + 1;
  std::vector<double> accuracy(ctx.size() * per_seed);
  std::vector<std::size_t> pool_size(ctx.size() * per_seed);
  parallel_jobs(accuracy.size(), [&](std::size_t job) {
    const auto& p = ctx[job / per_seed];
    const std::size_t slot = job % per_seed;
    if (slot == 0) {
      pool_size[job] = p.task.pool.size();
      accuracy[job] = final_accuracy(run_target_adaptation(
          config, p, {.fraction = config.adaptation.target_fraction, .n_r = n_r}));
      return;
    }
    const auto& variant = variants[slot - 1];
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < p.task.pool.size(); ++i) {
      if (variant.admits(p.task.pool.tags[i])) rows.push_back(i);
    }
    if (rows.empty()) throw Error("pool variant '" + variant.name + "' leaves an empty pool");
    const Dataset filtered = p.task.pool.select(rows);
    const auto built = index_pool(config, filtered, p.task.target, n_r);
    RunOverrides o;
    o.fraction = config.adaptation.target_fraction;
    o.n_r = n_r;
    o.pool = &filtered;
    o.index = &built.index;
    o.neighbors = &built.neighbors;
    pool_size[job] = filtered.size();
    accuracy[job] = final_accuracy(run_target_adaptation(config, p, o));
  });

  Table t{{"seed", "variant", "pool_size", "accuracy", "delta"}, {}};
  for (std::size_t s = 0; s < ctx.size(); ++s) {
    const double full = accuracy[s * per_seed];
    for (std::size_t v = 0; v < variants.size(); ++v) {
      const std::size_t job = s * per_seed + v + 1;
      t.rows.push_back({static_cast<std::int64_t>(ctx[s].seed), variants[v].name,
                        static_cast<std::int64_t>(pool_size[job]), accuracy[job],
                        accuracy[job] - full});
    }
  }
  return t;
}

Table run_nn_sweep(const ExperimentConfig& config, std::span<const std::size_t> nr_values,
                   std::span<const PreparedExperiment> prepared) {
  if (!std::is_sorted(nr_values.begin(), nr_values.end())) {
    throw ConfigError("nr_values must be sorted ascending");
  }
  const std::size_t max_n_r = nr_values.empty() ? 0 : nr_values.back();
  std::vector<PreparedExperiment> storage;
  const auto ctx = ensure_prepared(config, prepared, max_n_r, storage);

  Table t{{"seed", "n_r", "accuracy"}, {}};
  t.rows.resize(ctx.size() * nr_values.size());
  parallel_jobs(t.rows.size(), [&](std::size_t job) {
    const auto& p = ctx[job / nr_values.size()];
    const std::size_t n_r = nr_values[job % nr_values.size()];
    t.rows[job] = {static_cast<std::int64_t>(p.seed), static_cast<std::int64_t>(n_r),
                   final_accuracy(run_target_adaptation(
                       config, p, {.fraction = config.adaptation.target_fraction, .n_r = n_r}))};
  });
  return t;
}

Table run_domain_gap_sweep(const ExperimentConfig& config, std::span<const double> mix_fractions) {
  for (double f : mix_fractions) {
    if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("mix fractions must lie in [0, 1]");
  }
  const std::size_t n_r = config.adaptation.loss.n_r;
  // Source and target splits do not depend on the pool mix, so the source
  // model is trained once per seed.
  const auto ctx = prepare_all(config, 0);

  Table t{{"seed", "mix_fraction", "pool_size", "dropped_duplicates", "accuracy"}, {}};
  t.rows.resize(ctx.size() * mix_fractions.size());
  parallel_jobs(t.rows.size(), [&](std::size_t job) {
    const auto& p = ctx[job / mix_fractions.size()];
    const double f = mix_fractions[job % mix_fractions.size()];
    ShiftSpec spec = config.shift;
    spec.pool_mix_fraction = f;
    const Dataset pool = make_shifted_task(spec, config.sizes, p.seed).pool;
    const auto built = index_pool(config, pool, p.task.target, n_r);
    RunOverrides o;
    o.fraction = config.adaptation.target_fraction;
    o.n_r = n_r;
    o.pool = &pool;
    o.index = &built.index;
    o.neighbors = &built.neighbors;
    t.rows[job] = {static_cast<std::int64_t>(p.seed), f, static_cast<std::int64_t>(pool.size()),
                   static_cast<std::int64_t>(built.dropped),
                   final_accuracy(run_target_adaptation(config, p, o))};
  });
  return t;
}

double domain_gap_trend(const Table& gap_table) {
  std::vector<double> x;
  std::vector<double> y;
  for (const auto& [key, mean] : gap_table.mean_by("mix_fraction", "accuracy")) {
    x.push_back(std::stod(key));
    y.push_back(mean);
  }
  return spearman(x, y);
}

}  // namespace t3ar
