#ifndef RLMSAD_DATAIO_HPP_
#define RLMSAD_DATAIO_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

namespace rlmsad {

using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Labels = std::vector<int>;

}  // namespace rlmsad

namespace rlmsad::data {

// Ordered multivariate sequence, T rows by d features, with optional
// per-timestep binary ground truth. Immutable once constructed.
class TimeSeries {
 public:
  TimeSeries(Matrix values, std::vector<std::string> feature_names,
             std::optional<Labels> labels = std::nullopt,
             std::vector<std::int64_t> timestep_index = {});

  std::size_t length() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t dims() const { return static_cast<std::size_t>(values_.cols()); }
  const Matrix& values() const { return values_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  bool has_labels() const { return labels_.has_value(); }
  const std::optional<Labels>& labels() const { return labels_; }
  const std::vector<std::int64_t>& timestep_index() const { return index_; }

  // Rows [begin, end).
  TimeSeries slice(std::size_t begin, std::size_t end) const;
  TimeSeries with_values(Matrix values) const;

 private:
  Matrix values_;
  std::vector<std::string> feature_names_;
  std::optional<Labels> labels_;
  std::vector<std::int64_t> index_;
};

// Stride-1 sliding windows. Row i of `windows` is the flattened window whose
// last timestep is targets_index[i]; rows of the window are stored oldest
// first, so the last `dims` entries are the target instance itself.
struct WindowedDataset {
  Matrix windows;
  std::vector<std::size_t> targets_index;
  std::optional<Labels> target_labels;
  std::size_t window_length = 1;
  std::size_t dims = 0;

  std::size_t size() const { return static_cast<std::size_t>(windows.rows()); }
  std::size_t flattened_dim() const { return window_length * dims; }
};

// Per-feature min-max scaling fitted on training data.
class FeatureScaler {
 public:
  static constexpr double kClampLow = -0.05;
  static constexpr double kClampHigh = 1.05;

  FeatureScaler(Vector minimum, Vector maximum);

  const Vector& minimum() const { return min_; }
  const Vector& maximum() const { return max_; }

  TimeSeries apply(const TimeSeries& series) const;
  Matrix apply(const Matrix& values) const;
  // Inverse of apply for non-degenerate features; constant features map back
  // to their training value.
  Matrix invert(const Matrix& scaled) const;

  nlohmann::json to_json() const;
  static FeatureScaler from_json(const nlohmann::json& doc);

 private:
  Vector min_;
  Vector max_;
};

TimeSeries load_csv(const std::filesystem::path& path,
                    const std::optional<std::string>& label_column = std::nullopt);

// Writes a header row, one row per timestep, and the labels (when present)
// as a trailing column named `label_column`.
void write_csv(const TimeSeries& series, const std::filesystem::path& path,
               const std::string& label_column = "label");

// Non-overlapping block means; a trailing partial block is dropped. A block
// label is 1 if any member label is 1.
TimeSeries downsample(const TimeSeries& series, std::size_t block);

WindowedDataset make_windows(const TimeSeries& series, std::size_t window_length);

FeatureScaler fit_scaler(const TimeSeries& train);
TimeSeries apply_scaler(const FeatureScaler& scaler, const TimeSeries& series);

// --- synthetic benchmark -----------------------------------------------------

enum class AnomalyProfile {
  kSpike,     // global point spikes on a few features
  kDecouple,  // local density shift: a correlated pair breaks its relation
  kDrift,     // correlated multivariate drift of all features
};

std::string to_string(AnomalyProfile profile);
AnomalyProfile parse_anomaly_profile(const std::string& name);

struct SegmentShare {
  AnomalyProfile profile;
  double weight;
};

struct SynthConfig {
  std::size_t t_train = 5000;
  std::size_t t_test = 5000;
  std::size_t d = 6;
  double anomaly_rate = 0.12;
  std::vector<SegmentShare> segment_plan = {{AnomalyProfile::kSpike, 1.0},
                                            {AnomalyProfile::kDecouple, 1.0},
                                            {AnomalyProfile::kDrift, 1.0}};
  std::uint64_t seed = 7;

  // Throws ConfigError on invalid parameters.
  void validate() const;
};

// "spike:1,decouple:1,drift:1"
std::vector<SegmentShare> parse_segment_plan(const std::string& text);
std::string format_segment_plan(const std::vector<SegmentShare>& plan);

// Reads the plain-text key/value format (t_train, t_test, d, anomaly_rate,
// segment_plan, seed).
SynthConfig load_synth_config(const std::filesystem::path& path);

struct SyntheticDataset {
  TimeSeries train;
  TimeSeries test;
  // Profile per test timestep, -1 for normal rows.
  std::vector<int> test_profile;
};

SyntheticDataset generate_synthetic(const SynthConfig& config, std::uint64_t seed);

}  // namespace rlmsad::data

#endif  // RLMSAD_DATAIO_HPP_
