#ifndef RLMSAD_EVALHARNESS_HPP_
#define RLMSAD_EVALHARNESS_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rlmsad/dataio.hpp"
#include "rlmsad/detectors.hpp"
#include "rlmsad/dqnagent.hpp"
#include "rlmsad/mdpenv.hpp"
#include "rlmsad/random.hpp"

namespace rlmsad::eval {

// --- metrics -------------------------------------------------------------------

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t tn = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + tn + fp + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

ConfusionCounts confusion(std::span<const int> predictions, std::span<const int> truth);

struct MetricsRecord {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_undefined = false;  // TP + FP == 0
  bool recall_undefined = false;     // TP + FN == 0
  std::uint64_t seed = 0;
};

MetricsRecord metrics(const ConfusionCounts& counts);

// r1*TP + r2*TN - r3*FP - r4*FN, correctly rounded.
double confusion_return(const ConfusionCounts& counts, const mdp::RewardConfig& rewards);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample (n-1) standard deviation; 0 for a single value
};

MeanStd mean_std(std::span<const double> values);

// Spearman rank correlation with average ranks for ties; nullopt when fewer
// than two points or either side has no rank variance.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

// --- baselines -------------------------------------------------------------------

// 1 iff at least ceil(M/2) detectors flag the timestep.
Labels majority_vote(const detect::ScoredPool& pool);
// Picks a detector agreeing with the ground truth whenever one exists.
Labels oracle_selection(const detect::ScoredPool& pool);
// Uniformly random detector per timestep.
Labels random_selection(const detect::ScoredPool& pool, Rng& rng);

// --- experiments -------------------------------------------------------------------

struct ExperimentSpec {
  mdp::RewardConfig rewards;
  dqn::AgentConfig agent;
  mdp::FeatureMask mask;
  std::vector<std::uint64_t> seeds;
  std::size_t jobs = 1;
  std::size_t random_draws = 10;
  std::uint64_t baseline_seed = 0;
  bool keep_traces = false;
};

struct SeedResult {
  std::uint64_t seed = 0;
  ConfusionCounts counts;
  MetricsRecord metrics;
  double episode_return = 0.0;
  dqn::TrainingStats training;
  std::vector<mdp::Transition> trace;  // only with keep_traces
};

struct ReportRow {
  std::string model;
  MeanStd precision;
  MeanStd recall;
  MeanStd f1;
  std::size_t seeds = 1;
};

struct RunReport {
  std::vector<ReportRow> baselines;  // single detectors, majority, random, oracle
  ReportRow rlmsad;
  std::vector<SeedResult> per_seed;
  nlohmann::json config;

  const ReportRow& row(const std::string& model) const;
  std::vector<ReportRow> rows() const;  // baselines then rlmsad
};

ReportRow row_from_records(const std::string& model, std::span<const MetricsRecord> records);

// Baseline rows only (deterministic given baseline_seed).
std::vector<ReportRow> baseline_rows(const detect::ScoredPool& pool, std::size_t random_draws,
                                     std::uint64_t baseline_seed);

// Greedy evaluation of one policy, with the return cross-checked against the
// confusion-weighted sum.
SeedResult evaluate_seed(const dqn::Policy& policy, std::shared_ptr<const detect::ScoredPool> pool,
                         const mdp::RewardConfig& rewards, const mdp::FeatureMask& mask,
                         std::uint64_t seed, bool keep_trace);

// Assembles the report from evaluated seeds (in seed order).
RunReport assemble_report(const detect::ScoredPool& pool, const ExperimentSpec& spec,
                          std::vector<SeedResult> per_seed);

// For each seed: train, greedy-evaluate, score; plus baselines.
RunReport run_experiment(std::shared_ptr<const detect::ScoredPool> pool,
                         const ExperimentSpec& spec);

// Runs fn(0..count-1) on up to `jobs` threads; rethrows the lowest-index failure.
void parallel_for(std::size_t count, std::size_t jobs,
                  const std::function<void(std::size_t)>& fn);

// --- sweeps and ablation -------------------------------------------------------------

// Cartesian grid of FN x FP penalty magnitudes with fixed TP/TN rewards.
struct SweepGrid {
  std::vector<double> fn_values;
  std::vector<double> fp_values;
  double tp = 1.0;
  double tn = 0.1;

  std::vector<mdp::RewardConfig> cells() const;
};

struct SweepCell {
  mdp::RewardConfig rewards;
  RunReport report;
};

struct TrendRow {
  std::string varied;  // "fp" or "fn"
  double fixed_value = 0.0;  // the other penalty's magnitude
  std::optional<double> precision_rho;
  std::optional<double> recall_rho;
};

struct SweepReport {
  std::vector<SweepCell> cells;
  std::vector<TrendRow> trends;
};

// Rejects the whole grid before training if any cell breaks a constraint.
SweepReport sweep(std::shared_ptr<const detect::ScoredPool> pool, const SweepGrid& grid,
                  const ExperimentSpec& base);

struct AblationVariant {
  std::string name;
  mdp::FeatureMask mask;
  RunReport report;
};

struct AblationReport {
  std::vector<AblationVariant> variants;  // full, drop_pc, drop_dt
};

AblationReport ablate(std::shared_ptr<const detect::ScoredPool> pool, const ExperimentSpec& base);

// --- reports ---------------------------------------------------------------------

enum class ReportFormat { kCsv, kMarkdown };
ReportFormat parse_report_format(const std::string& name);

inline constexpr const char* kSummaryCsvHeader =
    "model,precision_mean,precision_std,recall_mean,recall_std,f1_mean,f1_std,seeds";

std::string summary_csv(const RunReport& report);
std::string summary_markdown(const RunReport& report, const std::string& title = "");
std::string per_seed_csv(const RunReport& report);
std::string trace_csv(std::span<const mdp::Transition> trace);
std::string sweep_trends_csv(const SweepReport& report);
std::string sweep_cells_csv(const SweepReport& report);
std::string sweep_markdown(const SweepReport& report);
std::string ablation_csv(const AblationReport& report);
std::string ablation_markdown(const AblationReport& report);

// "81.05 (4.14)" for multi-seed rows, "68.14" otherwise; values in percent.
std::string format_percent(const MeanStd& value, bool with_std);

// Writes the report files into `dir` (created if needed).
void emit_report(const RunReport& report, const std::filesystem::path& dir, ReportFormat format);
void emit_sweep(const SweepReport& report, const std::filesystem::path& dir, ReportFormat format);
void emit_ablation(const AblationReport& report, const std::filesystem::path& dir,
                   ReportFormat format);

void write_text(const std::filesystem::path& path, const std::string& text);

// Git blob hash (SHA-1 over "blob <size>\0" + bytes) of a file's content.
std::string content_hash(const std::filesystem::path& path);

std::string sweep_cell_name(const mdp::RewardConfig& rewards);

}  // namespace rlmsad::eval

#endif  // RLMSAD_EVALHARNESS_HPP_
