#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "rlmsad/detectors.hpp"
#include "rlmsad/errors.hpp"

namespace rlmsad::detect {

EcdfTables EcdfTables::build(const Matrix& train) {
  EcdfTables tables;
  const auto n = static_cast<double>(train.rows());
  for (Eigen::Index j = 0; j < train.cols(); ++j) {
    std::vector<double> column(static_cast<std::size_t>(train.rows()));
    for (Eigen::Index i = 0; i < train.rows(); ++i) {
      column[static_cast<std::size_t>(i)] = train(i, j);
    }
    std::sort(column.begin(), column.end());

    // Fisher-Pearson skewness; a constant column counts as non-negative.
    double mean = 0.0;
    for (double v : column) mean += v;
    mean /= n;
    double m2 = 0.0;
    double m3 = 0.0;
    for (double v : column) {
      const double c = v - mean;
      m2 += c * c;
      m3 += c * c * c;
    }
    m2 /= n;
    m3 /= n;
    const double skew = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
    tables.skew_sign.push_back(skew < 0.0 ? -1 : 1);
    tables.sorted.push_back(std::move(column));
  }
  return tables;
}

double EcdfTables::left_tail(std::size_t feature, double x) const {
  const auto& col = sorted[feature];
  const auto n = static_cast<double>(col.size());
  const auto below = static_cast<double>(std::upper_bound(col.begin(), col.end(), x) - col.begin());
  return std::max(below / n, 1.0 / (n + 1.0));
}

double EcdfTables::right_tail(std::size_t feature, double x) const {
  const auto& col = sorted[feature];
  const auto n = static_cast<double>(col.size());
  const auto above =
      static_cast<double>(col.end() - std::lower_bound(col.begin(), col.end(), x));
  return std::max(above / n, 1.0 / (n + 1.0));
}

EcdfDetector::EcdfDetector(DetectorKind kind, EcdfTables tables)
    : kind_(kind), tables_(std::move(tables)) {
  if (kind_ != DetectorKind::kEcod && kind_ != DetectorKind::kCopod) {
    throw ConfigError("ECDF detector kind must be ecod or copod");
  }
  if (tables_.sorted.empty() || tables_.sorted.size() != tables_.skew_sign.size()) {
    throw DataError("ECDF tables are empty or inconsistent");
  }
  const std::size_t n = tables_.sorted.front().size();
  for (const auto& col : tables_.sorted) {
    if (col.size() != n || n == 0) throw DataError("ECDF columns differ in length");
    if (!std::is_sorted(col.begin(), col.end())) throw DataError("ECDF column is not sorted");
  }
}

EcdfDetector EcdfDetector::fit(DetectorKind kind, const data::WindowedDataset& train) {
  return EcdfDetector(kind, EcdfTables::build(train.windows));
}

double EcdfDetector::score_one(std::span<const double> x) const {
  double left_sum = 0.0;
  double right_sum = 0.0;
  double two_sided = 0.0;
  double copod = 0.0;
  for (std::size_t j = 0; j < tables_.sorted.size(); ++j) {
    const double u_left = -std::log(tables_.left_tail(j, x[j]));
    const double u_right = -std::log(tables_.right_tail(j, x[j]));
    left_sum += u_left;
    right_sum += u_right;
    two_sided += std::max(u_left, u_right);
    const double u_skew = tables_.skew_sign[j] < 0 ? u_left : u_right;
    copod += std::max(u_skew, 0.5 * (u_left + u_right));
  }
  if (kind_ == DetectorKind::kEcod) return std::max({left_sum, right_sum, two_sided});
  return copod;
}

std::vector<double> EcdfDetector::score(const data::WindowedDataset& test) const {
  check_input(test);
  const auto d = static_cast<std::size_t>(test.windows.cols());
  std::vector<double> scores(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    scores[i] = score_one(std::span<const double>(test.windows.data() + i * d, d));
  }
  return scores;
}

nlohmann::json EcdfDetector::to_json() const {
  return {{"format_version", kModelFormatVersion},
          {"kind", to_string(kind_)},
          {"sorted", tables_.sorted},
          {"skew_sign", tables_.skew_sign}};
}

EcdfDetector EcdfDetector::from_json(const nlohmann::json& doc) {
  EcdfTables tables;
  tables.sorted = doc.at("sorted").get<std::vector<std::vector<double>>>();
  tables.skew_sign = doc.at("skew_sign").get<std::vector<int>>();
  return EcdfDetector(parse_detector_kind(doc.at("kind").get<std::string>()), std::move(tables));
}

}  // namespace rlmsad::detect
