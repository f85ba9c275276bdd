#include "rlmsad/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include "rlmsad/errors.hpp"

namespace rlmsad::config {

namespace fs = std::filesystem;

namespace {

std::uint64_t parse_uint(const std::string& key, const std::string& text) {
  std::uint64_t value = 0;
  const auto trimmed = boost::algorithm::trim_copy(text);
  const auto* end = trimmed.data() + trimmed.size();
  const auto [ptr, ec] = std::from_chars(trimmed.data(), end, value);
  if (ec != std::errc() || ptr != end || trimmed.empty()) {
    throw ConfigError(fmt::format("{}: expected a non-negative integer, got '{}'", key, text));
  }
  return value;
}

double parse_double(const std::string& key, const std::string& text) {
  const auto trimmed = boost::algorithm::trim_copy(text);
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(trimmed, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (trimmed.empty() || used != trimmed.size() || !std::isfinite(value)) {
    throw ConfigError(fmt::format("{}: expected a finite number, got '{}'", key, text));
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const auto v = boost::algorithm::to_lower_copy(boost::algorithm::trim_copy(text));
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(fmt::format("{}: expected true or false, got '{}'", key, text));
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> parts;
  boost::algorithm::split(parts, text, boost::algorithm::is_any_of(","));
  for (auto& p : parts) boost::algorithm::trim(p);
  if (parts.size() == 1 && parts.front().empty()) parts.clear();
  return parts;
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& key, const std::string& text, Parse parse) {
  std::vector<T> out;
  for (const auto& p : split_list(text)) out.push_back(static_cast<T>(parse(key, p)));
  if (out.empty()) throw ConfigError(fmt::format("{}: expected a non-empty list", key));
  return out;
}

std::string join_numbers(const std::vector<double>& values) {
  return fmt::format("{}", fmt::join(values, ","));
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

struct KeyEntry {
  KeyDoc doc;
  Setter set;
};

std::size_t as_size(const std::string& key, const std::string& v) {
  return static_cast<std::size_t>(parse_uint(key, v));
}

const std::vector<KeyEntry>& key_table() {
  static const std::vector<KeyEntry> table = [] {
    const RunConfig d;
    std::vector<KeyEntry> t;
    auto add = [&t](std::string section, std::string key, std::string def, std::string help,
                    Setter set) {
      t.push_back({{std::move(section), std::move(key), std::move(def), std::move(help)},
                   std::move(set)});
    };

    add("dataset", "source", "synth", "synth (generated benchmark) or csv (train_csv/test_csv)",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          if (v == "synth") c.source = DataSource::kSynth;
          else if (v == "csv") c.source = DataSource::kCsv;
          else throw ConfigError(fmt::format("{}: expected synth or csv, got '{}'", k, v));
        });
    add("dataset", "train_csv", "", "anomaly-free training CSV (source = csv)",
        [](RunConfig& c, const std::string&, const std::string& v) { c.train_csv = v; });
    add("dataset", "test_csv", "", "labelled test CSV (source = csv)",
        [](RunConfig& c, const std::string&, const std::string& v) { c.test_csv = v; });
    add("dataset", "label_column", d.label_column, "name of the ground-truth column",
        [](RunConfig& c, const std::string&, const std::string& v) { c.label_column = v; });
    add("dataset", "downsample", std::to_string(d.downsample),
        "block length for mean down-sampling (1 keeps every row)",
        [](RunConfig& c, const std::string& k, const std::string& v) { c.downsample = as_size(k, v); });
    add("dataset", "t_train", std::to_string(d.synth.t_train), "synthetic training length",
        [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.t_train = as_size(k, v); });
    add("dataset", "t_test", std::to_string(d.synth.t_test), "synthetic test length",
        [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.t_test = as_size(k, v); });
    add("dataset", "dims", std::to_string(d.synth.d), "synthetic feature count",
        [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.d = as_size(k, v); });
    add("dataset", "anomaly_rate", fmt::format("{}", d.synth.anomaly_rate),
        "fraction of anomalous synthetic test rows",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.synth.anomaly_rate = parse_double(k, v);
        });
    add("dataset", "segment_plan", data::format_segment_plan(d.synth.segment_plan),
        "relative share of spike, decouple and drift anomalies",
        [](RunConfig& c, const std::string&, const std::string& v) {
          c.synth.segment_plan = data::parse_segment_plan(v);
        });
    add("dataset", "synth_seed", std::to_string(d.synth.seed), "seed of the synthetic generator",
        [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.seed = parse_uint(k, v); });

    add("pool", "detectors", "iforest,ocsvm_sgd,ecod,copod,autoencoder",
        "ordered detector pool (the action space)",
        [](RunConfig& c, const std::string&, const std::string& v) {
          c.pool.clear();
          for (const auto& name : split_list(v)) c.pool.push_back(detect::parse_detector_kind(name));
        });
    add("pool", "seed", std::to_string(d.pool_seed), "seed for detector fitting",
        [](RunConfig& c, const std::string& k, const std::string& v) { c.pool_seed = parse_uint(k, v); });
    add("pool", "iforest_trees", std::to_string(d.hyper.iforest.trees), "isolation trees",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.hyper.iforest.trees = as_size(k, v);
        });
    add("pool", "iforest_subsample", std::to_string(d.hyper.iforest.subsample),
        "subsample size per tree (capped at the training size)",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.hyper.iforest.subsample = as_size(k, v);
        });
    add("pool", "ocsvm_nu", fmt::format("{}", d.hyper.ocsvm.nu), "one-class SVM nu",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.hyper.ocsvm.nu = parse_double(k, v);
        });
    add("pool", "ocsvm_learning_rate", fmt::format("{}", d.hyper.ocsvm.learning_rate),
        "one-class SVM SGD step size",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.hyper.ocsvm.learning_rate = parse_double(k, v);
        });
    add("pool", "ocsvm_epochs", std::to_string(d.hyper.ocsvm.epochs), "one-class SVM SGD epochs",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.hyper.ocsvm.epochs = as_size(k, v);
        });
    add("pool", "ae_hidden", std::to_string(d.hyper.autoencoder.hidden),
        "autoencoder hidden width",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.hyper.autoencoder.hidden = as_size(k, v);
        });
    add("pool", "ae_bottleneck", std::to_string(d.hyper.autoencoder.bottleneck),
        "autoencoder code width",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.hyper.autoencoder.bottleneck = as_size(k, v);
        });
    add("pool", "ae_epochs", std::to_string(d.hyper.autoencoder.epochs), "autoencoder epochs",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.hyper.autoencoder.epochs = as_size(k, v);
        });
    add("pool", "ae_batch_size", std::to_string(d.hyper.autoencoder.batch_size),
        "autoencoder minibatch size",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.hyper.autoencoder.batch_size = as_size(k, v);
        });
    add("pool", "ae_learning_rate", fmt::format("{}", d.hyper.autoencoder.learning_rate),
        "autoencoder Adam step size",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.hyper.autoencoder.learning_rate = parse_double(k, v);
        });

    add("env", "contamination", fmt::format("{}", d.contamination),
        "assumed anomaly fraction used to place thresholds",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.contamination = parse_double(k, v);
        });
    add("env", "window", std::to_string(d.hyper.autoencoder.window),
        "window length of windowed detectors (autoencoder)",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.hyper.autoencoder.window = as_size(k, v);
        });
    add("env", "reward_tp", fmt::format("{}", d.rewards.tp), "r1, reward for a true positive",
        [](RunConfig& c, const std::string& k, const std::string& v) { c.rewards.tp = parse_double(k, v); });
    add("env", "reward_tn", fmt::format("{}", d.rewards.tn), "r2, reward for a true negative",
        [](RunConfig& c, const std::string& k, const std::string& v) { c.rewards.tn = parse_double(k, v); });
    add("env", "penalty_fp", fmt::format("{}", d.rewards.fp),
        "r3, penalty magnitude for a false positive",
        [](RunConfig& c, const std::string& k, const std::string& v) { c.rewards.fp = parse_double(k, v); });
    add("env", "penalty_fn", fmt::format("{}", d.rewards.fn),
        "r4, penalty magnitude for a false negative",
        [](RunConfig& c, const std::string& k, const std::string& v) { c.rewards.fn = parse_double(k, v); });
    add("env", "mask", d.mask, "state features: full, drop_dt or drop_pc",
        [](RunConfig& c, const std::string&, const std::string& v) { c.mask = v; });

    add("agent", "hidden", "64,64", "Q-network hidden layer widths",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.agent.hidden = parse_list<std::size_t>(k, v, parse_uint);
        });
    add("agent", "learning_rate", fmt::format("{}", d.agent.learning_rate), "Adam step size",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.agent.learning_rate = parse_double(k, v);
        });
    add("agent", "replay_capacity", std::to_string(d.agent.replay_capacity),
        "replay buffer size",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.agent.replay_capacity = as_size(k, v);
        });
    add("agent", "batch_size", std::to_string(d.agent.batch_size), "minibatch size",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.agent.batch_size = as_size(k, v);
        });
    add("agent", "warmup_steps", std::to_string(d.agent.warmup_steps),
        "environment steps before learning starts",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.agent.warmup_steps = as_size(k, v);
        });
    add("agent", "train_frequency", std::to_string(d.agent.train_frequency),
        "environment steps per gradient step",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.agent.train_frequency = as_size(k, v);
        });
    add("agent", "target_sync_interval", std::to_string(d.agent.target_sync_interval),
        "environment steps between target-network syncs",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.agent.target_sync_interval = as_size(k, v);
        });
    add("agent", "epsilon_start", fmt::format("{}", d.agent.epsilon_start),
        "initial exploration rate",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.agent.epsilon_start = parse_double(k, v);
        });
    add("agent", "epsilon_final", fmt::format("{}", d.agent.epsilon_final),
        "final exploration rate",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.agent.epsilon_final = parse_double(k, v);
        });
    add("agent", "exploration_fraction", fmt::format("{}", d.agent.exploration_fraction),
        "fraction of total_steps over which epsilon anneals",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.agent.exploration_fraction = parse_double(k, v);
        });
    add("agent", "huber_delta", fmt::format("{}", d.agent.huber_delta), "Huber loss threshold",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.agent.huber_delta = parse_double(k, v);
        });
    add("agent", "total_steps", std::to_string(d.agent.total_steps),
        "environment steps per training run",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.agent.total_steps = as_size(k, v);
        });

    add("experiment", "seeds", "0,1,2,3,4,5,6,7,8,9", "agent seeds, one training run each",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.seeds = parse_list<std::uint64_t>(k, v, parse_uint);
        });
    add("experiment", "output", d.output.string(), "output directory",
        [](RunConfig& c, const std::string&, const std::string& v) { c.output = v; });
    add("experiment", "jobs", std::to_string(d.jobs), "worker threads for seeds and sweep cells",
        [](RunConfig& c, const std::string& k, const std::string& v) { c.jobs = as_size(k, v); });
    add("experiment", "format", d.format, "report format: csv or markdown",
        [](RunConfig& c, const std::string&, const std::string& v) { c.format = v; });
    add("experiment", "random_draws", std::to_string(d.random_draws),
        "draws averaged by the random-policy baseline",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.random_draws = as_size(k, v);
        });
    add("experiment", "keep_traces", d.keep_traces ? "true" : "false",
        "write per-seed evaluation traces",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.keep_traces = parse_bool(k, v);
        });
    add("experiment", "sweep_fn", join_numbers(d.sweep.fn_values),
        "FN penalty magnitudes for the sweep grid",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.sweep.fn_values = parse_list<double>(k, v, parse_double);
        });
    add("experiment", "sweep_fp", join_numbers(d.sweep.fp_values),
        "FP penalty magnitudes for the sweep grid",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.sweep.fp_values = parse_list<double>(k, v, parse_double);
        });
    return t;
  }();
  return table;
}

fs::path resolve(const fs::path& dir, const fs::path& p) {
  if (p.empty() || p.is_absolute()) return p;
  return (dir / p).lexically_normal();
}

}  // namespace

const std::vector<KeyDoc>& documented_keys() {
  static const std::vector<KeyDoc> docs = [] {
    std::vector<KeyDoc> out;
    for (const auto& e : key_table()) out.push_back(e.doc);
    return out;
  }();
  return docs;
}

std::string keys_help() {
  std::string out = "Config keys (INI sections):\n";
  std::string section;
  for (const auto& k : documented_keys()) {
    if (k.section != section) {
      section = k.section;
      out += fmt::format("  [{}]\n", section);
    }
    out += fmt::format("    {:<22} {} (default: {})\n", k.key, k.help,
                       k.default_value.empty() ? "none" : k.default_value);
  }
  return out;
}

RunConfig parse_run_config(const std::string& text, const fs::path& config_dir) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("cannot parse config: {}", e.message()));
  }
  RunConfig config;
  config.config_dir = config_dir;
  for (const auto& [section, node] : tree) {
    if (node.empty() && !node.data().empty()) {
      throw ConfigError(fmt::format("key '{}' must sit inside a section", section));
    }
    for (const auto& [key, value] : node) {
      const std::string full = section + "." + key;
      const auto& table = key_table();
      const auto it = std::find_if(table.begin(), table.end(), [&](const KeyEntry& e) {
        return e.doc.section == section && e.doc.key == key;
      });
      if (it == table.end()) throw ConfigError(fmt::format("unknown config key '{}'", full));
      try {
        it->set(config, full, value.data());
      } catch (const ConfigError&) {
        throw;
      } catch (const Error& e) {
        throw ConfigError(fmt::format("{}: {}", full, e.what()));
      }
    }
  }
  config.train_csv = resolve(config_dir, config.train_csv);
  config.test_csv = resolve(config_dir, config.test_csv);
  config.output = resolve(config_dir, config.output);
  config.validate(true);
  return config;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot read config file {}", path.string()));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  return parse_run_config(buffer.str(), dir);
}

void RunConfig::validate(bool check_paths) const {
  if (source == DataSource::kCsv) {
    if (train_csv.empty() || test_csv.empty()) {
      throw ConfigError("dataset.source = csv needs dataset.train_csv and dataset.test_csv");
    }
    if (check_paths) {
      for (const auto& p : {train_csv, test_csv}) {
        if (!fs::is_regular_file(p)) {
          throw ConfigError(fmt::format("dataset file not found: {}", p.string()));
        }
      }
    }
  } else {
    synth.validate();
  }
  if (downsample == 0) throw ConfigError("dataset.downsample must be >= 1");
  if (label_column.empty()) throw ConfigError("dataset.label_column must not be empty");
  detect::validate_pool(pool);
  hyper.validate();
  if (!(contamination > 0.0 && contamination < 0.5)) {
    throw ConfigError("env.contamination must lie in (0, 0.5)");
  }
  if (const auto v = mdp::validate_reward_config(rewards); !v.empty()) {
    throw ConfigError(fmt::format("env reward config violates {}", v.front()));
  }
  (void)mdp::FeatureMask::parse(mask);
  agent.validate();
  if (seeds.empty()) throw ConfigError("experiment.seeds must list at least one seed");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ConfigError("experiment.seeds must not repeat");
  }
  if (jobs == 0) throw ConfigError("experiment.jobs must be >= 1");
  (void)eval::parse_report_format(format);
  if (random_draws == 0) throw ConfigError("experiment.random_draws must be >= 1");
  if (output.empty()) throw ConfigError("experiment.output must not be empty");
  if (sweep.fn_values.empty() || sweep.fp_values.empty()) {
    throw ConfigError("experiment.sweep_fn and experiment.sweep_fp must be non-empty");
  }
  eval::SweepGrid grid = sweep;
  grid.tp = rewards.tp;
  grid.tn = rewards.tn;
  for (const auto& cell : grid.cells()) {
    if (const auto v = mdp::validate_reward_config(cell); !v.empty()) {
      throw ConfigError(
          fmt::format("sweep cell {} violates {}", eval::sweep_cell_name(cell), v.front()));
    }
  }
}

nlohmann::json RunConfig::to_json() const {
  std::vector<std::string> kinds;
  for (auto k : pool) kinds.push_back(detect::to_string(k));
  nlohmann::json dataset = {{"source", source == DataSource::kSynth ? "synth" : "csv"},
                            {"label_column", label_column},
                            {"downsample", downsample}};
  if (source == DataSource::kSynth) {
    dataset["t_train"] = synth.t_train;
    dataset["t_test"] = synth.t_test;
    dataset["dims"] = synth.d;
    dataset["anomaly_rate"] = synth.anomaly_rate;
    dataset["segment_plan"] = data::format_segment_plan(synth.segment_plan);
    dataset["synth_seed"] = synth.seed;
  } else {
    dataset["train_csv"] = train_csv.filename().string();
    dataset["test_csv"] = test_csv.filename().string();
  }
  nlohmann::json agent_json = agent.to_json();
  agent_json.erase("seed");
  return {{"dataset", dataset},
          {"pool",
           {{"detectors", kinds},
            {"seed", pool_seed},
            {"iforest_trees", hyper.iforest.trees},
            {"iforest_subsample", hyper.iforest.subsample},
            {"ocsvm_nu", hyper.ocsvm.nu},
            {"ocsvm_learning_rate", hyper.ocsvm.learning_rate},
            {"ocsvm_epochs", hyper.ocsvm.epochs},
            {"ae_hidden", hyper.autoencoder.hidden},
            {"ae_bottleneck", hyper.autoencoder.bottleneck},
            {"ae_epochs", hyper.autoencoder.epochs},
            {"ae_batch_size", hyper.autoencoder.batch_size},
            {"ae_learning_rate", hyper.autoencoder.learning_rate}}},
          {"env",
           {{"contamination", contamination},
            {"window", hyper.autoencoder.window},
            {"reward_tp", rewards.tp},
            {"reward_tn", rewards.tn},
            {"penalty_fp", rewards.fp},
            {"penalty_fn", rewards.fn},
            {"mask", mask}}},
          {"agent", agent_json},
          {"experiment",
           {{"seeds", seeds},
            {"random_draws", random_draws},
            {"sweep_fn", sweep.fn_values},
            {"sweep_fp", sweep.fp_values}}}};
}

eval::ExperimentSpec RunConfig::experiment_spec() const {
  eval::ExperimentSpec spec;
  spec.rewards = rewards;
  spec.agent = agent;
  spec.mask = mdp::FeatureMask::parse(mask);
  spec.seeds = seeds;
  spec.jobs = jobs;
  spec.random_draws = random_draws;
  spec.baseline_seed = pool_seed;
  spec.keep_traces = keep_traces;
  return spec;
}

}  // namespace rlmsad::config
