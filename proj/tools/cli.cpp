#include "t3ar/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "t3ar/config.hpp"
#include "t3ar/container.hpp"
#include "t3ar/error.hpp"
#include "t3ar/experiments.hpp"

namespace t3ar {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

// Files written by the current command; removed again unless committed.
class OutputGuard {
 public:
  ~OutputGuard() {
    if (committed_) return;
    std::error_code ec;
    for (auto it = files_.rbegin(); it != files_.rend(); ++it) fs::remove(*it, ec);
    for (auto it = dirs_.rbegin(); it != dirs_.rend(); ++it) fs::remove(*it, ec);  // only if empty
  }
  void make_dir(const fs::path& dir) {
    if (dir.empty() || fs::exists(dir)) return;
    make_dir(dir.parent_path());
    fs::create_directory(dir);
    dirs_.push_back(dir);
  }
  void write(const fs::path& path, std::string_view text) {
    make_dir(path.parent_path());
    files_.push_back(path);
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  }
  void write(const fs::path& path, std::span<const std::uint8_t> bytes) {
    make_dir(path.parent_path());
    files_.push_back(path);
    write_file(path, bytes);
  }
  void save(const fs::path& path, const Dataset& ds) {
    make_dir(path.parent_path());
    files_.push_back(path);
    save_dataset(ds, path);
  }
  void commit() { committed_ = true; }

 private:
  std::vector<fs::path> files_;
  std::vector<fs::path> dirs_;
  bool committed_ = false;
};

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
};

RunConfig resolve_config(const CommonOptions& opts) {
  RunConfig cfg = opts.config_path.empty() ? parse_config("") : load_config(opts.config_path);
  if (opts.seed) {
    cfg.seed = *opts.seed;
    cfg.experiment.seeds = {*opts.seed};
  }
  return cfg;
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << h;
  return ss.str();
}

ShiftedTask load_task(const fs::path& dir) {
  ShiftedTask task;
  task.source = load_dataset(dir / "source.t3ar");
  task.target = load_dataset(dir / "target.t3ar");
  task.pool = load_dataset(dir / "pool.t3ar");
  return task;
}

std::vector<PreparedExperiment> prepare_for(const RunConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                            std::size_t max_n_r) {
  std::vector<PreparedExperiment> out;
  if (cfg.data_dir.empty()) {
    for (auto seed : seeds) out.push_back(prepare_experiment(cfg.experiment, seed, max_n_r));
  } else {
    const auto task = load_task(cfg.data_dir);
    for (auto seed : seeds) out.push_back(prepare_from_task(cfg.experiment, seed, task, max_n_r));
  }
  return out;
}

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::string metrics_jsonl(const RunConfig& cfg, const std::string& hash, const AdaptResult& result) {
  std::string out = Json{{"config_hash", hash}, {"seed", cfg.seed}}.dump() + "\n";
  for (const auto& m : result.metrics.epochs) {
    Json row;
    row["epoch"] = m.epoch;
    row["accuracy"] = optional_number(m.accuracy);
    row["mean_ce"] = m.mean_ce;
    row["mean_ctr"] = m.mean_ctr;
    row["pseudo_label_accuracy"] = optional_number(m.pseudo_label_accuracy);
    row["bank_occupancy"] = m.bank_occupancy;
    row["retrieved_negatives"] = m.retrieved_negatives;
    row["steps"] = m.steps;
    out += row.dump() + "\n";
  }
  return out;
}

int cmd_gen(const CommonOptions& opts, std::ostream& out) {
  const RunConfig cfg = resolve_config(opts);
  if (opts.out.empty()) throw ConfigError("gen needs --out");
  const auto task = make_shifted_task(cfg.experiment.shift, cfg.experiment.sizes, cfg.seed);
  const fs::path dir = opts.out;
  Json manifest;
  manifest["config_hash"] = config_hash(cfg);
  manifest["seed"] = cfg.seed;
  manifest["input_dim"] = cfg.experiment.shift.input_dim;
  manifest["num_classes"] = cfg.experiment.shift.num_classes;
  manifest["files"] = Json{{"source", {{"path", "source.t3ar"}, {"count", task.source.size()}}},
                           {"target", {{"path", "target.t3ar"}, {"count", task.target.size()}}},
                           {"pool", {{"path", "pool.t3ar"}, {"count", task.pool.size()}}}};
  OutputGuard guard;
  guard.save(dir / "source.t3ar", task.source);
  guard.save(dir / "target.t3ar", task.target);
  guard.save(dir / "pool.t3ar", task.pool);
  guard.write(dir / "manifest.json", manifest.dump(2) + "\n");
  guard.commit();
  out << "wrote " << task.source.size() << " source, " << task.target.size() << " target, "
      << task.pool.size() << " pool samples to " << dir.string() << "\n";
  return kExitOk;
}

int cmd_index(const std::string& pool_path, double threshold, const std::string& out_path,
              std::ostream& out) {
  if (out_path.empty()) throw ConfigError("index needs --out");
  if (!(threshold > 0.0 && threshold <= 1.0)) throw ConfigError("dedup threshold must be in (0, 1]");
  const Dataset pool = load_dataset(pool_path);
  EmbeddingIndex::BuildReport report;
  const auto index =
      EmbeddingIndex::build(embed_for_retrieval(pool), pool.ids, pool.tags, threshold, &report);
  Container c{index.embeddings(), std::vector<std::uint64_t>(index.ids().begin(), index.ids().end()),
              std::vector<std::uint16_t>(index.tags().begin(), index.tags().end()),
              std::vector<std::uint32_t>(index.size(), kUnlabeled)};
  OutputGuard guard;
  guard.write(out_path, encode_container(c));
  guard.commit();
  out << "indexed " << index.size() << " items, dropped " << report.dropped_ids.size()
      << " near-duplicates\n";
  return kExitOk;
}

int cmd_adapt(const CommonOptions& opts, std::ostream& out) {
  const RunConfig cfg = resolve_config(opts);
  const auto& exp = cfg.experiment;
  const std::size_t n_r = exp.adaptation.loss.n_r;
  const auto prepared = prepare_for(cfg, {cfg.seed}, n_r);
  const auto result = run_target_adaptation(
      exp, prepared.front(),
      {.fraction = exp.adaptation.target_fraction, .n_r = n_r, .retriever = exp.adaptation.retriever});
  const auto accuracy = result.metrics.final_accuracy();
  if (!accuracy) throw Error("target split has no labels to evaluate");

  if (!opts.out.empty()) {
    const fs::path dir = opts.out;
    OutputGuard guard;
    guard.write(dir / "metrics.jsonl", metrics_jsonl(cfg, config_hash(cfg), result));
    guard.write(dir / "model.t3ar", encode_checkpoint(result.params.net));
    guard.commit();
  }
  out << "source-only top-1: " << prepared.front().source_only_accuracy << "\n";
  out << "final top-1: " << *accuracy << "\n";
  return kExitOk;
}

int cmd_sweep(const CommonOptions& opts, const std::string& kind, std::ostream& out) {
  const RunConfig cfg = resolve_config(opts);
  const auto& exp = cfg.experiment;
  const std::size_t n_r = exp.adaptation.loss.n_r;
  std::vector<std::string> preamble = {"config_hash=" + config_hash(cfg), "sweep=" + kind};
  Table table;
  if (kind == "gap") {
    if (!cfg.data_dir.empty()) throw ConfigError("the gap sweep generates its own pools; unset data_dir");
    table = run_domain_gap_sweep(exp, cfg.mix_fractions);
    std::ostringstream rho;
    rho << "spearman_rho=" << format_cell(domain_gap_trend(table));
    preamble.push_back(rho.str());
  } else {
    std::size_t max_n_r = n_r;
    if (kind == "nn") max_n_r = cfg.nr_values.empty() ? 0 : cfg.nr_values.back();
    const auto prepared = prepare_for(cfg, exp.seeds, max_n_r);
    if (kind == "fraction") {
      table = run_fraction_sweep(exp, cfg.fractions, prepared);
    } else if (kind == "retriever") {
      table = run_retriever_ablation(exp, prepared);
    } else if (kind == "pool") {
      table = run_pool_ablations(exp, cfg.pool_variants, prepared);
    } else {
      table = run_nn_sweep(exp, cfg.nr_values, prepared);
    }
  }
  const std::string csv = table.to_csv(preamble);
  if (opts.out.empty()) {
    out << csv;
  } else {
    OutputGuard guard;
    guard.write(opts.out, csv);
    guard.commit();
    out << "wrote " << table.rows.size() << " rows to " << opts.out << "\n";
  }
  return kExitOk;
}

int cmd_eval_retriever(const std::string& pool_path, const std::string& labels_path,
                       const std::vector<std::size_t>& ks, const std::string& out_path,
                       std::ostream& out) {
  if (ks.empty()) throw ConfigError("--k needs at least one value");
  for (auto k : ks) {
    if (k == 0) throw ConfigError("k must be >= 1");
  }
  const Dataset pool = load_dataset(pool_path);
  const Dataset queries = load_dataset(labels_path);
  if (!pool.labeled()) throw Error("the retrieval pool needs labels for majority voting");
  if (!queries.labeled()) throw Error("the query set needs labels");
  const auto index = EmbeddingIndex::build(embed_for_retrieval(pool), pool.ids, pool.tags, 1.0);
  std::unordered_map<std::uint64_t, std::uint32_t> labels;
  for (std::size_t i = 0; i < pool.size(); ++i) labels.emplace(pool.ids[i], (*pool.labels)[i]);
  const auto embedded = embed_for_retrieval(queries);

  Table table{{"k", "accuracy"}, {}};
  for (auto k : ks) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < queries.size(); ++i) {
      if (index.knn_classify(labels, embedded.row(i), k) == (*queries.labels)[i]) ++correct;
    }
    table.rows.push_back({static_cast<std::int64_t>(k),
                          static_cast<double>(correct) / static_cast<double>(queries.size())});
  }
  std::string key = "pool=" + pool_path + "\nlabels=" + labels_path + "\nk=";
  for (auto k : ks) key += std::to_string(k) + ",";
  const std::vector<std::string> preamble = {"config_hash=" + fnv1a_hex(key)};
  const std::string csv = table.to_csv(preamble);
  if (out_path.empty()) {
    out << csv;
  } else {
    OutputGuard guard;
    guard.write(out_path, csv);
    guard.commit();
  }
  return kExitOk;
}

void add_common(CLI::App* cmd, CommonOptions& opts, const std::string& out_help) {
  cmd->add_option("--config", opts.config_path, "Config file (key = value)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", opts.seed, "Run seed; replaces the seeds list for sweeps");
  cmd->add_option("--out", opts.out, out_help);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Retrieval-augmented test-time adaptation on synthetic shifted data", "t3ar"};
  app.require_subcommand(1);

  CommonOptions gen_opts, adapt_opts, sweep_opts;
  auto* gen = app.add_subcommand("gen", "Write source/target/pool containers and a manifest");
  add_common(gen, gen_opts, "Output directory");

  std::string pool_path, index_out;
  double threshold = 0.999;
  auto* index = app.add_subcommand("index", "Build a deduplicated, normalized pool index");
  index->add_option("--pool", pool_path, "Pool container")->required()->check(CLI::ExistingFile);
  index->add_option("--dedup-threshold", threshold, "Cosine similarity treated as duplicate");
  index->add_option("--out", index_out, "Output container")->required();

  auto* adapt_cmd = app.add_subcommand("adapt", "Adapt the source model on the target split");
  add_common(adapt_cmd, adapt_opts, "Directory for metrics.jsonl and model.t3ar");

  std::string sweep_kind;
  auto* sweep = app.add_subcommand("sweep", "Run an ablation sweep and write a CSV table");
  sweep->add_option("kind", sweep_kind, "fraction | retriever | pool | nn | gap")
      ->required()
      ->check(CLI::IsMember({"fraction", "retriever", "pool", "nn", "gap"}));
  add_common(sweep, sweep_opts, "CSV path (stdout when omitted)");

  std::string eval_pool, eval_labels, eval_out;
  std::vector<std::size_t> ks = {1, 5, 10};
  auto* eval = app.add_subcommand("eval-retriever", "k-NN majority-vote accuracy of the retriever");
  eval->add_option("--pool", eval_pool, "Labeled container to retrieve from")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--labels", eval_labels, "Labeled query container")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--k", ks, "Neighbor counts")->delimiter(',');
  eval->add_option("--out", eval_out, "CSV path (stdout when omitted)");

  std::vector<std::string> argv_storage = {"t3ar"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_gen(gen_opts, out);
    if (index->parsed()) return cmd_index(pool_path, threshold, index_out, out);
    if (adapt_cmd->parsed()) return cmd_adapt(adapt_opts, out);
    if (sweep->parsed()) return cmd_sweep(sweep_opts, sweep_kind, out);
    return cmd_eval_retriever(eval_pool, eval_labels, ks, eval_out, out);
  } catch (const ConfigError& e) {
    err << "t3ar: config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "t3ar: error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace t3ar
