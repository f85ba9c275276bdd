#include "rlmsad/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <fmt/format.h>

#include "rlmsad/errors.hpp"
#include "rlmsad/evalharness.hpp"
#include "rlmsad/random.hpp"

namespace rlmsad::pipeline {

namespace fs = std::filesystem;

fs::path Layout::model_file(detect::DetectorKind kind) const {
  return models_dir() / (detect::to_string(kind) + ".json");
}

fs::path Layout::policy_file(std::uint64_t seed) const {
  return policies_dir() / fmt::format("seed_{}.json", seed);
}

fs::path train_path(const config::RunConfig& config) {
  return config.source == config::DataSource::kCsv ? config.train_csv
                                                   : Layout{config.output}.train_csv();
}

fs::path test_path(const config::RunConfig& config) {
  return config.source == config::DataSource::kCsv ? config.test_csv
                                                   : Layout{config.output}.test_csv();
}

data::TimeSeries load_series(const fs::path& path, const std::string& label_column,
                             bool require_labels) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  std::string header;
  std::getline(in, header);
  std::vector<std::string> names;
  boost::algorithm::split(names, header, boost::algorithm::is_any_of(","));
  for (auto& n : names) boost::algorithm::trim(n);
  const bool has_labels = std::find(names.begin(), names.end(), label_column) != names.end();
  if (require_labels && !has_labels) {
    throw DataError(
        fmt::format("{}: label column '{}' not found in header", path.string(), label_column));
  }
  return data::load_csv(path, has_labels ? std::optional<std::string>(label_column) : std::nullopt);
}

FittedPool fit_pool(const data::TimeSeries& train, const std::vector<detect::DetectorKind>& kinds,
                    const detect::DetectorHyper& hyper, std::size_t downsample,
                    std::uint64_t seed) {
  detect::validate_pool(kinds);
  hyper.validate();
  const data::TimeSeries reduced = data::downsample(train, downsample);
  FittedPool pool{data::fit_scaler(reduced), {}};
  const data::TimeSeries scaled = data::apply_scaler(pool.scaler, reduced);
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    const auto kind = kinds[i];
    try {
      const auto windows = data::make_windows(scaled, hyper.window_for(kind));
      pool.models.push_back(detect::fit(kind, windows, hyper, derive_seed(seed, i)));
    } catch (const Error& e) {
      throw Error(e.kind(), fmt::format("fitting {}: {}", detect::to_string(kind), e.what()));
    }
  }
  return pool;
}

detect::ScoredPool score_with(const FittedPool& pool, const data::TimeSeries& test,
                              std::size_t downsample, double contamination) {
  const data::TimeSeries scaled =
      data::apply_scaler(pool.scaler, data::downsample(test, downsample));
  std::vector<const detect::Detector*> models;
  for (const auto& m : pool.models) models.push_back(m.get());
  return detect::score_pool(models, scaled, contamination);
}

std::string format_scores(const detect::ScoredPool& pool) {
  pool.validate();
  std::string out = fmt::format("# contamination,{:.17g}\n", pool.contamination);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto& o = pool.outputs[i];
    out += fmt::format("# threshold,{},{:.17g},{:.17g}\n", detect::to_string(pool.kinds[i]),
                       o.threshold_raw, o.threshold_scaled);
  }
  out += "timestep,truth";
  for (auto kind : pool.kinds) {
    const auto name = detect::to_string(kind);
    out += fmt::format(",{0}_raw,{0}_scaled,{0}_label", name);
  }
  out += "\n";
  for (std::size_t t = 0; t < pool.length(); ++t) {
    out += fmt::format("{},{}", pool.timesteps[t], pool.truth[t]);
    for (const auto& o : pool.outputs) {
      out += fmt::format(",{:.17g},{:.17g},{}", o.raw_scores[t], o.scaled_scores[t], o.labels[t]);
    }
    out += "\n";
  }
  return out;
}

void write_scores(const detect::ScoredPool& pool, const fs::path& path) {
  eval::write_text(path, format_scores(pool));
}

namespace {

template <typename T>
T parse_field(const std::string& field, const std::string& where) {
  T value{};
  const char* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw DataError(fmt::format("{}: cannot parse '{}'", where, field));
  }
  return value;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> parts;
  boost::algorithm::split(parts, line, boost::algorithm::is_any_of(","));
  return parts;
}

}  // namespace

detect::ScoredPool parse_scores(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  detect::ScoredPool pool;
  std::vector<std::pair<double, double>> thresholds;  // raw, scaled
  bool have_contamination = false;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.rfind("# ", 0) != 0) break;
    const auto parts = split(line.substr(2));
    const std::string where = fmt::format("{}:{}", source, line_no);
    if (parts.size() == 2 && parts[0] == "contamination") {
      pool.contamination = parse_field<double>(parts[1], where);
      have_contamination = true;
    } else if (parts.size() == 4 && parts[0] == "threshold") {
      pool.kinds.push_back(detect::parse_detector_kind(parts[1]));
      thresholds.emplace_back(parse_field<double>(parts[2], where),
                              parse_field<double>(parts[3], where));
    } else {
      throw DataError(fmt::format("{}: unrecognised header line", where));
    }
  }
  if (!have_contamination || pool.kinds.empty()) {
    throw DataError(fmt::format("{}: missing contamination or threshold header lines", source));
  }
  const std::size_t m = pool.kinds.size();
  const auto header = split(line);
  if (header.size() != 2 + 3 * m || header[0] != "timestep" || header[1] != "truth") {
    throw DataError(fmt::format("{}:{}: column header does not match {} detectors", source,
                                line_no, m));
  }
  for (std::size_t i = 0; i < m; ++i) {
    const auto name = detect::to_string(pool.kinds[i]);
    if (header[2 + 3 * i] != name + "_raw" || header[3 + 3 * i] != name + "_scaled" ||
        header[4 + 3 * i] != name + "_label") {
      throw DataError(fmt::format("{}:{}: columns for {} out of order", source, line_no, name));
    }
  }

  std::vector<std::vector<double>> raw(m), scaled(m);
  std::vector<Labels> labels(m);
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split(line);
    const std::string where = fmt::format("{}:{}", source, line_no);
    if (fields.size() != header.size()) {
      throw DataError(fmt::format("{}: expected {} fields, got {}", where, header.size(),
                                  fields.size()));
    }
    pool.timesteps.push_back(parse_field<std::int64_t>(fields[0], where));
    pool.truth.push_back(parse_field<int>(fields[1], where));
    for (std::size_t i = 0; i < m; ++i) {
      raw[i].push_back(parse_field<double>(fields[2 + 3 * i], where));
      scaled[i].push_back(parse_field<double>(fields[3 + 3 * i], where));
      labels[i].push_back(parse_field<int>(fields[4 + 3 * i], where));
    }
  }
  if (pool.timesteps.empty()) throw DataError(fmt::format("{}: no score rows", source));

  for (std::size_t i = 0; i < m; ++i) {
    pool.outputs.push_back(detect::make_output(std::move(raw[i]), thresholds[i].first));
    const auto& o = pool.outputs.back();
    const auto name = detect::to_string(pool.kinds[i]);
    if (o.labels != labels[i]) {
      throw DataError(fmt::format("{}: {} labels disagree with the stored threshold", source, name));
    }
    if (o.threshold_scaled != thresholds[i].second || o.scaled_scores != scaled[i]) {
      throw DataError(fmt::format("{}: {} scaled values disagree with the raw scores", source, name));
    }
  }
  for (int v : pool.truth) {
    if (v != 0 && v != 1) throw DataError(fmt::format("{}: truth must be 0 or 1", source));
  }
  pool.validate();
  return pool;
}

detect::ScoredPool read_scores(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open score file {}", path.string()));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_scores(buffer.str(), path.string());
}

}  // namespace rlmsad::pipeline
