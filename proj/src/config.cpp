#include "t3ar/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "t3ar/error.hpp"

namespace t3ar {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError("expected a number, got '" + std::string(s) + "'");
  }
  return v;
}

std::uint64_t parse_u64(std::string_view s) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError("expected a non-negative integer, got '" + std::string(s) + "'");
  }
  return v;
}

bool parse_bool(std::string_view s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw ConfigError("expected true or false, got '" + std::string(s) + "'");
}

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}
std::string fmt(std::uint64_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

template <typename T, typename F>
std::string join(const std::vector<T>& values, F&& f) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += f(values[i]);
  }
  return out;
}

struct Field {
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

using Registry = std::map<std::string, Field, std::less<>>;

template <typename Access>
Field real_field(Access access) {
  return {[access](RunConfig& c, std::string_view v) { access(c) = parse_double(v); },
          [access](const RunConfig& c) { return fmt(access(const_cast<RunConfig&>(c))); }};
}

template <typename Access>
Field count_field(Access access) {
  return {[access](RunConfig& c, std::string_view v) {
            access(c) = static_cast<std::remove_reference_t<decltype(access(c))>>(parse_u64(v));
          },
          [access](const RunConfig& c) {
            return fmt(static_cast<std::uint64_t>(access(const_cast<RunConfig&>(c))));
          }};
}

template <typename Access>
Field bool_field(Access access) {
  return {[access](RunConfig& c, std::string_view v) { access(c) = parse_bool(v); },
          [access](const RunConfig& c) { return fmt(access(const_cast<RunConfig&>(c))); }};
}

template <typename Access>
Field real_list_field(Access access) {
  return {[access](RunConfig& c, std::string_view v) {
            auto& out = access(c);
            out.clear();
            for (auto item : split_list(v)) out.push_back(parse_double(item));
          },
          [access](const RunConfig& c) {
            return join(access(const_cast<RunConfig&>(c)), [](double x) { return fmt(x); });
          }};
}

template <typename Access>
Field count_list_field(Access access) {
  return {[access](RunConfig& c, std::string_view v) {
            auto& out = access(c);
            out.clear();
            for (auto item : split_list(v)) {
              out.push_back(static_cast<typename std::remove_reference_t<decltype(out)>::value_type>(
                  parse_u64(item)));
            }
          },
          [access](const RunConfig& c) {
            return join(access(const_cast<RunConfig&>(c)),
                        [](auto x) { return fmt(static_cast<std::uint64_t>(x)); });
          }};
}

template <typename Enum>
Field enum_field(std::function<Enum&(RunConfig&)> access,
                 std::vector<std::pair<std::string, Enum>> names) {
  return {[access, names](RunConfig& c, std::string_view v) {
            for (const auto& [name, value] : names) {
              if (name == v) {
                access(c) = value;
                return;
              }
            }
            throw ConfigError("unexpected value '" + std::string(v) + "'");
          },
          [access, names](const RunConfig& c) {
            const Enum value = access(const_cast<RunConfig&>(c));
            for (const auto& [name, candidate] : names) {
              if (candidate == value) return name;
            }
            return std::string("?");
          }};
}

// Adaptation fields shared by the "source_" and unprefixed key families.
void add_adaptation_fields(Registry& reg, const std::string& prefix,
                           AdaptationConfig& (*select)(RunConfig&)) {
  reg[prefix + "epochs"] = count_field([select](RunConfig& c) -> auto& { return select(c).epochs; });
  reg[prefix + "batch_size"] =
      count_field([select](RunConfig& c) -> auto& { return select(c).batch_size; });
  reg[prefix + "start_lr"] = real_field([select](RunConfig& c) -> auto& { return select(c).start_lr; });
  reg[prefix + "base_lr"] = real_field([select](RunConfig& c) -> auto& { return select(c).base_lr; });
  reg[prefix + "min_lr"] = real_field([select](RunConfig& c) -> auto& { return select(c).min_lr; });
  reg[prefix + "warmup_epochs"] =
      count_field([select](RunConfig& c) -> auto& { return select(c).warmup_epochs; });
  reg[prefix + "momentum"] = real_field([select](RunConfig& c) -> auto& { return select(c).momentum; });
  reg[prefix + "weight_decay"] =
      real_field([select](RunConfig& c) -> auto& { return select(c).weight_decay; });
  reg[prefix + "bank_capacity"] =
      count_field([select](RunConfig& c) -> auto& { return select(c).bank_capacity; });
  reg[prefix + "temperature"] =
      real_field([select](RunConfig& c) -> auto& { return select(c).loss.temperature; });
  reg[prefix + "lambda_ctr"] =
      real_field([select](RunConfig& c) -> auto& { return select(c).loss.lambda_ctr; });
  reg[prefix + "include_positive"] =
      bool_field([select](RunConfig& c) -> auto& { return select(c).loss.include_positive; });
  reg[prefix + "ce_updates_encoder"] =
      bool_field([select](RunConfig& c) -> auto& { return select(c).ce_updates_encoder; });
  reg[prefix + "weak_sigma"] =
      real_field([select](RunConfig& c) -> auto& { return select(c).augment.weak_sigma; });
  reg[prefix + "strong_sigma"] =
      real_field([select](RunConfig& c) -> auto& { return select(c).augment.strong_sigma; });
  reg[prefix + "drop_prob"] =
      real_field([select](RunConfig& c) -> auto& { return select(c).augment.drop_prob; });
  reg[prefix + "weak_drop_prob"] =
      real_field([select](RunConfig& c) -> auto& { return select(c).augment.weak_drop_prob; });
  reg[prefix + "data_scale"] =
      real_field([select](RunConfig& c) -> auto& { return select(c).augment.data_scale; });
}

AdaptationConfig& adaptation_of(RunConfig& c) { return c.experiment.adaptation; }
AdaptationConfig& source_of(RunConfig& c) { return c.experiment.source; }

const Registry& registry() {
  static const Registry reg = [] {
    Registry r;
    // Task.
    r["num_classes"] = count_field([](RunConfig& c) -> auto& { return c.experiment.shift.num_classes; });
    r["input_dim"] = count_field([](RunConfig& c) -> auto& { return c.experiment.shift.input_dim; });
    r["separation"] = real_field([](RunConfig& c) -> auto& { return c.experiment.shift.separation; });
    r["within_scale"] = real_field([](RunConfig& c) -> auto& { return c.experiment.shift.within_scale; });
    r["rotation_angle"] =
        real_field([](RunConfig& c) -> auto& { return c.experiment.shift.rotation_angle; });
    r["translation"] =
        real_list_field([](RunConfig& c) -> auto& { return c.experiment.shift.translation; });
    r["distractor_clusters"] =
        count_field([](RunConfig& c) -> auto& { return c.experiment.shift.distractor_clusters; });
    r["distractor_scale"] =
        real_field([](RunConfig& c) -> auto& { return c.experiment.shift.distractor_scale; });
    r["distractor_distance"] =
        real_field([](RunConfig& c) -> auto& { return c.experiment.shift.distractor_distance; });
    r["pool_mix_fraction"] =
        real_field([](RunConfig& c) -> auto& { return c.experiment.shift.pool_mix_fraction; });
    r["duplicate_fraction"] =
        real_field([](RunConfig& c) -> auto& { return c.experiment.shift.duplicate_fraction; });
    r["duplicate_jitter"] =
        real_field([](RunConfig& c) -> auto& { return c.experiment.shift.duplicate_jitter; });
    r["n_source"] = count_field([](RunConfig& c) -> auto& { return c.experiment.sizes.source; });
    r["n_target"] = count_field([](RunConfig& c) -> auto& { return c.experiment.sizes.target; });
    r["n_pool"] = count_field([](RunConfig& c) -> auto& { return c.experiment.sizes.pool; });

    // Model. input_dim and num_classes follow the task.
    r["hidden_dims"] = count_list_field([](RunConfig& c) -> auto& { return c.experiment.arch.hidden; });
    r["feature_dim"] = count_field([](RunConfig& c) -> auto& { return c.experiment.arch.feature_dim; });

    // Adaptation and source pre-training.
    add_adaptation_fields(r, "", &adaptation_of);
    add_adaptation_fields(r, "source_", &source_of);
    r["mode"] = enum_field<Mode>([](RunConfig& c) -> Mode& { return c.experiment.adaptation.mode; },
                                 {{"test_time", Mode::TestTime}, {"train_time", Mode::TrainTime}});
    r["n_r"] = count_field([](RunConfig& c) -> auto& { return c.experiment.adaptation.loss.n_r; });
    r["r"] = count_field([](RunConfig& c) -> auto& { return c.experiment.adaptation.loss.r; });
    r["target_fraction"] =
        real_field([](RunConfig& c) -> auto& { return c.experiment.adaptation.target_fraction; });
    r["retriever"] = enum_field<Retriever>(
        [](RunConfig& c) -> Retriever& { return c.experiment.adaptation.retriever; },
        {{"embedding", Retriever::Embedding}, {"random", Retriever::Random}});

    // Retrieval.
    r["dedup_threshold"] = real_field([](RunConfig& c) -> auto& { return c.experiment.dedup_threshold; });
    r["embed_mode"] = enum_field<EmbedMode>(
        [](RunConfig& c) -> EmbedMode& { return c.experiment.embed.mode; },
        {{"identity", EmbedMode::Identity}, {"projection", EmbedMode::Projection}});
    r["embed_dim"] = count_field([](RunConfig& c) -> auto& { return c.experiment.embed.projection_dim; });
    r["embed_seed"] = count_field([](RunConfig& c) -> auto& { return c.experiment.embed.seed; });

    // Seeds, sweeps and paths.
    r["seed"] = count_field([](RunConfig& c) -> auto& { return c.seed; });
    r["seeds"] = count_list_field([](RunConfig& c) -> auto& { return c.experiment.seeds; });
    r["fractions"] = real_list_field([](RunConfig& c) -> auto& { return c.fractions; });
    r["nr_values"] = count_list_field([](RunConfig& c) -> auto& { return c.nr_values; });
    r["mix_fractions"] = real_list_field([](RunConfig& c) -> auto& { return c.mix_fractions; });
    r["pool_variants"] = Field{
        [](RunConfig& c, std::string_view v) {
          c.pool_variants.clear();
          for (auto item : split_list(v)) c.pool_variants.push_back(PoolVariant::parse(std::string(item)));
        },
        [](const RunConfig& c) {
          return join(c.pool_variants, [](const PoolVariant& p) { return p.name; });
        }};
    r["data_dir"] = Field{[](RunConfig& c, std::string_view v) { c.data_dir = std::string(v); },
                          [](const RunConfig& c) { return c.data_dir; }};
    return r;
  }();
  return reg;
}

}  // namespace

void RunConfig::validate() const {
  experiment.validate();
  if (experiment.adaptation.loss.n_r > 0 && experiment.adaptation.loss.r == 0) {
    throw ConfigError("r must be >= 1 when n_r > 0");
  }
  if (!std::is_sorted(nr_values.begin(), nr_values.end())) {
    throw ConfigError("nr_values must be sorted ascending");
  }
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("fractions must lie in (0, 1]");
  }
  for (double f : mix_fractions) {
    if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("mix_fractions must lie in [0, 1]");
  }
  if (!experiment.shift.translation.empty() &&
      experiment.shift.translation.size() != experiment.shift.input_dim) {
    throw ConfigError("translation must have input_dim entries");
  }
}

RunConfig parse_config(std::string_view text) {
  RunConfig config;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, eol == text.npos ? text.npos : eol - pos);
    pos = eol == text.npos ? text.size() + 1 : eol + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != line.npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto where = "line " + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == line.npos) throw ConfigError(where + "expected key = value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const auto it = registry().find(key);
    if (it == registry().end()) throw ConfigError(where + "unknown key '" + std::string(key) + "'");
    if (!seen.insert(std::string(key)).second) {
      throw ConfigError(where + "repeated key '" + std::string(key) + "'");
    }
    try {
      it->second.set(config, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + std::string(key) + ": " + e.what());
    }
  }
  // The model's outer dimensions always follow the task.
  config.experiment.arch.input_dim = config.experiment.shift.input_dim;
  config.experiment.arch.num_classes = config.experiment.shift.num_classes;
  config.validate();
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string canonical_text(const RunConfig& config) {
  std::string out;
  for (const auto& [key, field] : registry()) out += key + " = " + field.get(config) + "\n";
  return out;
}

std::string config_hash(const RunConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_text(config)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace t3ar
