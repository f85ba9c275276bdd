#ifndef RLMSAD_DETECTORS_HPP_
#define RLMSAD_DETECTORS_HPP_

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rlmsad/dataio.hpp"
#include "rlmsad/neuralcore.hpp"

namespace rlmsad::detect {

inline constexpr int kModelFormatVersion = 1;
inline constexpr std::size_t kMinTrainingRows = 8;

enum class DetectorKind { kIForest, kOcsvmSgd, kEcod, kCopod, kAutoencoder };

std::string to_string(DetectorKind kind);
DetectorKind parse_detector_kind(const std::string& name);
const std::vector<DetectorKind>& all_detector_kinds();

// Throws ConfigError unless the pool has at least two distinct kinds.
void validate_pool(const std::vector<DetectorKind>& pool);

struct IForestParams {
  std::size_t trees = 100;
  std::size_t subsample = 256;
};

struct OcsvmParams {
  double nu = 0.5;
  double learning_rate = 0.01;
  std::size_t epochs = 20;
};

struct AutoencoderParams {
  std::size_t window = 12;
  std::size_t hidden = 32;
  std::size_t bottleneck = 6;
  std::size_t epochs = 15;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
};

struct DetectorHyper {
  IForestParams iforest;
  OcsvmParams ocsvm;
  AutoencoderParams autoencoder;

  // Window length consumed by `kind`; instance-based detectors use 1.
  std::size_t window_for(DetectorKind kind) const;
  void validate() const;
};

// A fitted detector. Scores are higher for more anomalous instances.
class Detector {
 public:
  virtual ~Detector() = default;

  virtual DetectorKind kind() const = 0;
  virtual std::size_t window_length() const = 0;
  virtual std::size_t dims() const = 0;

  // One finite score per window of `test`.
  virtual std::vector<double> score(const data::WindowedDataset& test) const = 0;

  virtual nlohmann::json to_json() const = 0;

 protected:
  void check_input(const data::WindowedDataset& test) const;
};

// --- concrete models -----------------------------------------------------------

class IsolationForest final : public Detector {
 public:
  struct Node {
    // feature < 0 marks an external node holding `size` training points.
    int feature = -1;
    double split = 0.0;
    int left = -1;
    int right = -1;
    std::size_t size = 0;
  };
  using Tree = std::vector<Node>;

  static IsolationForest fit(const data::WindowedDataset& train, const IForestParams& params,
                             std::uint64_t seed);

  IsolationForest(std::size_t dims, std::size_t subsample, std::vector<Tree> trees);

  DetectorKind kind() const override { return DetectorKind::kIForest; }
  std::size_t window_length() const override { return 1; }
  std::size_t dims() const override { return dims_; }
  std::vector<double> score(const data::WindowedDataset& test) const override;
  nlohmann::json to_json() const override;
  static IsolationForest from_json(const nlohmann::json& doc);

  // Average path-length normaliser: c(1)=0, c(2)=1, 2H(n-1)-2(n-1)/n otherwise.
  static double average_path_length(std::size_t n);
  double path_length(std::span<const double> x, const Tree& tree) const;

  std::size_t subsample() const { return subsample_; }
  std::size_t height_limit() const;
  const std::vector<Tree>& trees() const { return trees_; }

 private:
  std::size_t dims_;
  std::size_t subsample_;
  std::vector<Tree> trees_;
};

// Linear one-class SVM (no kernel) trained by averaged SGD on the primal
//   1/2 |w|^2 - rho + 1/(nu n) sum_i max(0, rho - w.x_i).
class LinearOcsvm final : public Detector {
 public:
  static LinearOcsvm fit(const data::WindowedDataset& train, const OcsvmParams& params,
                         std::uint64_t seed);

  LinearOcsvm(Vector weights, double offset, double nu);

  DetectorKind kind() const override { return DetectorKind::kOcsvmSgd; }
  std::size_t window_length() const override { return 1; }
  std::size_t dims() const override { return static_cast<std::size_t>(weights_.size()); }
  std::vector<double> score(const data::WindowedDataset& test) const override;
  nlohmann::json to_json() const override;
  static LinearOcsvm from_json(const nlohmann::json& doc);

  const Vector& weights() const { return weights_; }
  double offset() const { return offset_; }

 private:
  Vector weights_;
  double offset_;
  double nu_;
};

// Sorted per-feature training values plus the training skewness sign.
struct EcdfTables {
  std::vector<std::vector<double>> sorted;
  std::vector<int> skew_sign;  // -1 or +1

  static EcdfTables build(const Matrix& train);
  std::size_t count() const { return sorted.empty() ? 0 : sorted.front().size(); }
  // P(X <= x) and P(X >= x), floored at 1/(n+1).
  double left_tail(std::size_t feature, double x) const;
  double right_tail(std::size_t feature, double x) const;
};

// ECOD (max of left, right and two-sided tail aggregations) and COPOD
// (skewness-corrected aggregation) share the same ECDF tables.
class EcdfDetector final : public Detector {
 public:
  static EcdfDetector fit(DetectorKind kind, const data::WindowedDataset& train);

  EcdfDetector(DetectorKind kind, EcdfTables tables);

  DetectorKind kind() const override { return kind_; }
  std::size_t window_length() const override { return 1; }
  std::size_t dims() const override { return tables_.sorted.size(); }
  std::vector<double> score(const data::WindowedDataset& test) const override;
  double score_one(std::span<const double> x) const;
  nlohmann::json to_json() const override;
  static EcdfDetector from_json(const nlohmann::json& doc);

  const EcdfTables& tables() const { return tables_; }

 private:
  DetectorKind kind_;
  EcdfTables tables_;
};

// Dense reconstruction autoencoder over flattened windows; score is the mean
// squared reconstruction error. Inputs are centred on the training mean
// before encoding.
class ReconstructionAutoencoder final : public Detector {
 public:
  static ReconstructionAutoencoder fit(const data::WindowedDataset& train,
                                       const AutoencoderParams& params, std::uint64_t seed);

  ReconstructionAutoencoder(std::size_t window, std::size_t dims, Vector input_mean,
                            nn::DenseNetwork network);

  DetectorKind kind() const override { return DetectorKind::kAutoencoder; }
  std::size_t window_length() const override { return window_; }
  std::size_t dims() const override { return dims_; }
  std::vector<double> score(const data::WindowedDataset& test) const override;
  nlohmann::json to_json() const override;
  static ReconstructionAutoencoder from_json(const nlohmann::json& doc);

  const nn::DenseNetwork& network() const { return network_; }
  const Vector& input_mean() const { return input_mean_; }

 private:
  std::size_t window_;
  std::size_t dims_;
  Vector input_mean_;
  nn::DenseNetwork network_;
};

std::unique_ptr<Detector> fit(DetectorKind kind, const data::WindowedDataset& train,
                              const DetectorHyper& hyper, std::uint64_t seed);

nlohmann::json serialize(const Detector& model);
std::unique_ptr<Detector> deserialize(const nlohmann::json& doc);
std::unique_ptr<Detector> deserialize(const std::string& text);

// --- thresholding --------------------------------------------------------------

struct DetectorOutput {
  std::vector<double> raw_scores;
  double threshold_raw = 0.0;
  std::vector<double> scaled_scores;
  double threshold_scaled = 0.0;
  Labels labels;
  double score_min = 0.0;
  double score_max = 0.0;

  std::size_t size() const { return raw_scores.size(); }
};

// (1 - contamination) quantile with linear interpolation between order
// statistics; an instance is flagged iff its score strictly exceeds it.
DetectorOutput threshold_scores(std::span<const double> raw_scores, double contamination);

// Linear-interpolated empirical quantile, q in [0, 1].
double empirical_quantile(std::span<const double> values, double q);

// Rebuilds the derived fields from raw scores and a raw threshold.
DetectorOutput make_output(std::vector<double> raw_scores, double threshold_raw);

// --- pool ------------------------------------------------------------------------

// Thresholded outputs of every pool member over a common, aligned range of
// test timesteps. Windowed detectors cannot score the first W-1 rows, so all
// members are evaluated from row (max W - 1) onward.
struct ScoredPool {
  std::vector<DetectorKind> kinds;
  std::vector<DetectorOutput> outputs;
  std::vector<std::int64_t> timesteps;
  Labels truth;
  double contamination = 0.12;

  std::size_t size() const { return kinds.size(); }
  std::size_t length() const { return timesteps.size(); }
  void validate() const;
};

ScoredPool score_pool(const std::vector<const Detector*>& models, const data::TimeSeries& test,
                      double contamination);

}  // namespace rlmsad::detect

#endif  // RLMSAD_DETECTORS_HPP_
