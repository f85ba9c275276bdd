#ifndef RLMSAD_CONFIG_HPP_
#define RLMSAD_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rlmsad/dataio.hpp"
#include "rlmsad/detectors.hpp"
#include "rlmsad/dqnagent.hpp"
#include "rlmsad/evalharness.hpp"
#include "rlmsad/mdpenv.hpp"

namespace rlmsad::config {

enum class DataSource { kSynth, kCsv };

// Everything one pipeline run needs, read from an INI file with sections
// [dataset], [pool], [env], [agent] and [experiment].
struct RunConfig {
  std::filesystem::path config_dir;

  // [dataset]
  DataSource source = DataSource::kSynth;
  std::filesystem::path train_csv;
  std::filesystem::path test_csv;
  std::string label_column = "label";
  std::size_t downsample = 1;
  data::SynthConfig synth;

  // [pool]
  std::vector<detect::DetectorKind> pool = detect::all_detector_kinds();
  detect::DetectorHyper hyper;
  std::uint64_t pool_seed = 0;

  // [env]
  double contamination = 0.12;
  mdp::RewardConfig rewards;
  std::string mask = "full";

  // [agent]
  dqn::AgentConfig agent;

  // [experiment]
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::filesystem::path output = "rlmsad_out";
  std::size_t jobs = 1;
  std::string format = "csv";
  std::size_t random_draws = 10;
  bool keep_traces = true;
  eval::SweepGrid sweep = {{1.0, 1.2, 1.5, 2.0}, {0.2, 0.3, 0.4, 0.5, 0.6}, 1.0, 0.1};

  // Throws ConfigError on any invalid value; with check_paths, also requires
  // csv inputs to exist.
  void validate(bool check_paths = true) const;
  nlohmann::json to_json() const;

  eval::ExperimentSpec experiment_spec() const;
};

struct KeyDoc {
  std::string section;
  std::string key;
  std::string default_value;
  std::string help;
};

// Every accepted key, in file order.
const std::vector<KeyDoc>& documented_keys();
std::string keys_help();

// Unknown sections or keys are ConfigErrors; relative paths resolve against
// the config file's directory.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& config_dir);

}  // namespace rlmsad::config

#endif  // RLMSAD_CONFIG_HPP_
