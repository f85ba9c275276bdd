#ifndef RLMSAD_PIPELINE_HPP_
#define RLMSAD_PIPELINE_HPP_

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "rlmsad/config.hpp"
#include "rlmsad/dataio.hpp"
#include "rlmsad/detectors.hpp"

// Glue between the stages: dataset preparation, pool fitting and the
// columnar score file.
namespace rlmsad::pipeline {

// Files of one run, all under RunConfig::output.
struct Layout {
  std::filesystem::path root;

  std::filesystem::path data_dir() const { return root / "data"; }
  std::filesystem::path train_csv() const { return data_dir() / "train.csv"; }
  std::filesystem::path test_csv() const { return data_dir() / "test.csv"; }
  std::filesystem::path models_dir() const { return root / "models"; }
  std::filesystem::path model_file(detect::DetectorKind kind) const;
  std::filesystem::path scaler_file() const { return models_dir() / "scaler.json"; }
  std::filesystem::path scores_csv() const { return root / "scores.csv"; }
  std::filesystem::path policies_dir() const { return root / "policies"; }
  std::filesystem::path policy_file(std::uint64_t seed) const;
  std::filesystem::path report_dir() const { return root / "report"; }
  std::filesystem::path sweep_dir() const { return root / "sweep"; }
  std::filesystem::path ablation_dir() const { return root / "ablation"; }
};

// Training and test inputs named by the config (generated files for
// source = synth).
std::filesystem::path train_path(const config::RunConfig& config);
std::filesystem::path test_path(const config::RunConfig& config);

// Loads a CSV, treating `label_column` as ground truth when present. With
// require_labels, a missing column is a DataError.
data::TimeSeries load_series(const std::filesystem::path& path, const std::string& label_column,
                             bool require_labels);

struct FittedPool {
  data::FeatureScaler scaler;
  std::vector<std::unique_ptr<detect::Detector>> models;
};

// Down-samples, fits the scaler on training data, then fits every pool member
// on windows of the scaled training series.
FittedPool fit_pool(const data::TimeSeries& train, const std::vector<detect::DetectorKind>& kinds,
                    const detect::DetectorHyper& hyper, std::size_t downsample,
                    std::uint64_t seed);

// Scores the down-sampled, scaled test series with a fitted pool.
detect::ScoredPool score_with(const FittedPool& pool, const data::TimeSeries& test,
                              std::size_t downsample, double contamination);

// Columnar score file: a header block of "# key,value..." lines (contamination
// and per-detector thresholds) followed by timestep,truth and, per detector,
// <kind>_raw,<kind>_scaled,<kind>_label columns.
std::string format_scores(const detect::ScoredPool& pool);
void write_scores(const detect::ScoredPool& pool, const std::filesystem::path& path);
// Rebuilds the pool from raw scores and raw thresholds and checks that the
// stored labels and scaled values agree with them.
detect::ScoredPool read_scores(const std::filesystem::path& path);
detect::ScoredPool parse_scores(const std::string& text, const std::string& source = "scores");

}  // namespace rlmsad::pipeline

#endif  // RLMSAD_PIPELINE_HPP_
