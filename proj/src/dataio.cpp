#include "rlmsad/dataio.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "rlmsad/errors.hpp"

namespace rlmsad::data {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream stream(line);
  while (std::getline(stream, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\"");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\"");
  return s.substr(begin, end - begin + 1);
}

bool parse_double(const std::string& text, double& out) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

}  // namespace

TimeSeries::TimeSeries(Matrix values, std::vector<std::string> feature_names,
                       std::optional<Labels> labels,
                       std::vector<std::int64_t> timestep_index)
    : values_(std::move(values)),
      feature_names_(std::move(feature_names)),
      labels_(std::move(labels)),
      index_(std::move(timestep_index)) {
  if (values_.rows() < 1 || values_.cols() < 1) {
    throw DataError(fmt::format("time series must have T >= 1 and d >= 1 (got {}x{})",
                                values_.rows(), values_.cols()));
  }
  if (!values_.allFinite()) {
    throw DataError("time series contains non-finite values");
  }
  if (feature_names_.empty()) {
    for (Eigen::Index j = 0; j < values_.cols(); ++j) {
      feature_names_.push_back(fmt::format("f{}", j));
    }
  }
  if (feature_names_.size() != dims()) {
    throw DataError(fmt::format("{} feature names for {} features",
                                feature_names_.size(), dims()));
  }
  if (labels_) {
    if (labels_->size() != length()) {
      throw DataError(fmt::format("labels have length {} but series has {} rows",
                                  labels_->size(), length()));
    }
    for (int v : *labels_) {
      if (v != 0 && v != 1) throw DataError("labels must be 0 or 1");
    }
  }
  if (index_.empty()) {
    index_.resize(length());
    for (std::size_t t = 0; t < length(); ++t) index_[t] = static_cast<std::int64_t>(t);
  }
  if (index_.size() != length()) {
    throw DataError("timestep index length does not match series length");
  }
  for (std::size_t t = 1; t < index_.size(); ++t) {
    if (index_[t] <= index_[t - 1]) throw DataError("timestep index must be increasing");
  }
}

TimeSeries TimeSeries::slice(std::size_t begin, std::size_t end) const {
  if (begin >= end || end > length()) {
    throw DataError(fmt::format("invalid slice [{}, {}) of {} rows", begin, end, length()));
  }
  const auto n = static_cast<Eigen::Index>(end - begin);
  Matrix values = values_.middleRows(static_cast<Eigen::Index>(begin), n);
  std::optional<Labels> labels;
  if (labels_) labels = Labels(labels_->begin() + begin, labels_->begin() + end);
  std::vector<std::int64_t> index(index_.begin() + begin, index_.begin() + end);
  return TimeSeries(std::move(values), feature_names_, std::move(labels), std::move(index));
}

TimeSeries TimeSeries::with_values(Matrix values) const {
  if (values.rows() != values_.rows() || values.cols() != values_.cols()) {
    throw DataError("replacement values must keep the series shape");
  }
  return TimeSeries(std::move(values), feature_names_, labels_, index_);
}

// --- CSV ------------------------------------------------------------------------

TimeSeries load_csv(const std::filesystem::path& path,
                    const std::optional<std::string>& label_column) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open CSV file '{}'", path.string()));

  std::string line;
  if (!std::getline(in, line)) {
    throw DataError(fmt::format("{}: missing header row", path.string()));
  }
  std::vector<std::string> header = split_csv_line(line);
  for (auto& h : header) h = trim(h);

  std::optional<std::size_t> label_pos;
  if (label_column) {
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (header[j] == *label_column) label_pos = j;
    }
    if (!label_pos) {
      throw DataError(fmt::format("{}: label column '{}' not found in header",
                                  path.string(), *label_column));
    }
  }
  const std::size_t columns = header.size();
  const std::size_t feature_count = columns - (label_pos ? 1 : 0);
  if (feature_count == 0) {
    throw DataError(fmt::format("{}: no feature columns", path.string()));
  }

  std::vector<std::string> names;
  for (std::size_t j = 0; j < columns; ++j) {
    if (!label_pos || j != *label_pos) names.push_back(header[j]);
  }

  std::vector<double> cells;
  Labels labels;
  std::size_t row = 1;  // header is row 1
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto parts = split_csv_line(line);
    if (parts.size() != columns) {
      throw DataError(fmt::format("{}: row {} has {} columns, expected {}", path.string(),
                                  row, parts.size(), columns));
    }
    for (std::size_t j = 0; j < columns; ++j) {
      const std::string text = trim(parts[j]);
      double value = 0.0;
      if (!parse_double(text, value) || !std::isfinite(value)) {
        throw DataError(fmt::format("{}: row {}, column {} ('{}'): non-numeric or non-finite "
                                    "value '{}'",
                                    path.string(), row, j + 1, header[j], text));
      }
      if (label_pos && j == *label_pos) {
        if (value != 0.0 && value != 1.0) {
          throw DataError(fmt::format("{}: row {}, column {} ('{}'): label '{}' is not 0 or 1",
                                      path.string(), row, j + 1, header[j], text));
        }
        labels.push_back(static_cast<int>(value));
      } else {
        cells.push_back(value);
      }
    }
  }
  const std::size_t rows = cells.size() / feature_count;
  if (rows == 0) throw DataError(fmt::format("{}: no data rows", path.string()));

  Matrix values(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(feature_count));
  std::copy(cells.begin(), cells.end(), values.data());
  std::optional<Labels> maybe_labels;
  if (label_pos) maybe_labels = std::move(labels);
  return TimeSeries(std::move(values), std::move(names), std::move(maybe_labels));
}

void write_csv(const TimeSeries& series, const std::filesystem::path& path,
               const std::string& label_column) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write CSV file '{}'", path.string()));
  const auto& names = series.feature_names();
  for (std::size_t j = 0; j < names.size(); ++j) {
    out << (j ? "," : "") << names[j];
  }
  if (series.has_labels()) out << "," << label_column;
  out << "\n";
  const Matrix& v = series.values();
  for (Eigen::Index t = 0; t < v.rows(); ++t) {
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
      out << (j ? "," : "") << fmt::format("{}", v(t, j));
    }
    if (series.has_labels()) out << "," << (*series.labels())[static_cast<std::size_t>(t)];
    out << "\n";
  }
  if (!out) throw DataError(fmt::format("failed writing '{}'", path.string()));
}

// --- transforms ------------------------------------------------------------------

TimeSeries downsample(const TimeSeries& series, std::size_t block) {
  if (block == 0) throw ConfigError("downsample block must be >= 1");
  const std::size_t out_len = series.length() / block;
  if (out_len == 0) {
    throw DataError(fmt::format("downsample block {} exceeds series length {}", block,
                                series.length()));
  }
  if (block == 1) return series;
  const auto d = static_cast<Eigen::Index>(series.dims());
  Matrix values(static_cast<Eigen::Index>(out_len), d);
  std::optional<Labels> labels;
  if (series.has_labels()) labels = Labels(out_len, 0);
  std::vector<std::int64_t> index(out_len);
  for (std::size_t b = 0; b < out_len; ++b) {
    const auto start = static_cast<Eigen::Index>(b * block);
    values.row(static_cast<Eigen::Index>(b)) =
        series.values().middleRows(start, static_cast<Eigen::Index>(block)).colwise().mean();
    if (labels) {
      for (std::size_t k = 0; k < block; ++k) {
        if ((*series.labels())[b * block + k] == 1) (*labels)[b] = 1;
      }
    }
    index[b] = series.timestep_index()[b * block];
  }
  return TimeSeries(std::move(values), series.feature_names(), std::move(labels),
                    std::move(index));
}

WindowedDataset make_windows(const TimeSeries& series, std::size_t window_length) {
  if (window_length == 0) throw ConfigError("window length must be >= 1");
  if (window_length > series.length()) {
    throw DataError(fmt::format("window length {} exceeds series length {}", window_length,
                                series.length()));
  }
  const std::size_t n = series.length() - window_length + 1;
  const std::size_t d = series.dims();
  WindowedDataset out;
  out.window_length = window_length;
  out.dims = d;
  out.windows.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(window_length * d));
  out.targets_index.resize(n);
  const Matrix& v = series.values();
  for (std::size_t i = 0; i < n; ++i) {
    // Row-major storage makes a window a contiguous block of the series.
    std::copy_n(v.data() + i * d, window_length * d,
                out.windows.data() + i * window_length * d);
    out.targets_index[i] = i + window_length - 1;
  }
  if (series.has_labels()) {
    out.target_labels = Labels(series.labels()->begin() + (window_length - 1),
                               series.labels()->end());
  }
  return out;
}

// --- scaling ---------------------------------------------------------------------

FeatureScaler::FeatureScaler(Vector minimum, Vector maximum)
    : min_(std::move(minimum)), max_(std::move(maximum)) {
  if (min_.size() == 0 || min_.size() != max_.size()) {
    throw DataError("scaler bounds must be non-empty and of equal size");
  }
  for (Eigen::Index j = 0; j < min_.size(); ++j) {
    if (!(max_[j] >= min_[j]) || !std::isfinite(min_[j]) || !std::isfinite(max_[j])) {
      throw DataError(fmt::format("invalid scaler bounds for feature {}", j));
    }
  }
}

Matrix FeatureScaler::apply(const Matrix& values) const {
  if (values.cols() != min_.size()) {
    throw DataError(fmt::format("scaler fitted on {} features, got {}", min_.size(),
                                values.cols()));
  }
  Matrix out(values.rows(), values.cols());
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    const double range = max_[j] - min_[j];
    for (Eigen::Index t = 0; t < values.rows(); ++t) {
      if (range == 0.0) {
        out(t, j) = 0.5;
      } else {
        out(t, j) = std::clamp((values(t, j) - min_[j]) / range, kClampLow, kClampHigh);
      }
    }
  }
  return out;
}

TimeSeries FeatureScaler::apply(const TimeSeries& series) const {
  return series.with_values(apply(series.values()));
}

Matrix FeatureScaler::invert(const Matrix& scaled) const {
  Matrix out(scaled.rows(), scaled.cols());
  for (Eigen::Index j = 0; j < scaled.cols(); ++j) {
    const double range = max_[j] - min_[j];
    for (Eigen::Index t = 0; t < scaled.rows(); ++t) {
      out(t, j) = range == 0.0 ? min_[j] : scaled(t, j) * range + min_[j];
    }
  }
  return out;
}

nlohmann::json FeatureScaler::to_json() const {
  return {{"format_version", 1},
          {"kind", "minmax_scaler"},
          {"minimum", std::vector<double>(min_.data(), min_.data() + min_.size())},
          {"maximum", std::vector<double>(max_.data(), max_.data() + max_.size())}};
}

FeatureScaler FeatureScaler::from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format_version").get<int>() != 1) {
      throw DataError("unsupported scaler format_version");
    }
    const auto lo = doc.at("minimum").get<std::vector<double>>();
    const auto hi = doc.at("maximum").get<std::vector<double>>();
    return FeatureScaler(Eigen::Map<const Vector>(lo.data(), static_cast<Eigen::Index>(lo.size())),
                         Eigen::Map<const Vector>(hi.data(), static_cast<Eigen::Index>(hi.size())));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("corrupt scaler document: {}", e.what()));
  }
}

FeatureScaler fit_scaler(const TimeSeries& train) {
  const Matrix& v = train.values();
  return FeatureScaler(v.colwise().minCoeff().transpose(), v.colwise().maxCoeff().transpose());
}

TimeSeries apply_scaler(const FeatureScaler& scaler, const TimeSeries& series) {
  return scaler.apply(series);
}

}  // namespace rlmsad::data
