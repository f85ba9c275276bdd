// Synthetic benchmark with complementary anomaly regimes.
//
// Normal rows are noisy linear mixtures of three latent signals (two
// sinusoids and a slow AR(1) process). Test anomalies come in contiguous
// segments of three profiles that favour different detector families:
//   spike    - a few features jump far outside their training range
//   decouple - one feature follows the sign-flipped latent mix, so its marginal
//              stays plausible while its relation to the other features breaks
//   drift    - every feature ramps in a common direction by a moderate amount

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "rlmsad/dataio.hpp"
#include "rlmsad/errors.hpp"
#include "rlmsad/random.hpp"

namespace rlmsad::data {

namespace {

constexpr std::size_t kLatents = 3;
constexpr double kNoiseSd = 0.1;
constexpr double kArCoefficient = 0.97;
constexpr double kArInnovationSd = 0.1;
constexpr std::size_t kMinGap = 8;
constexpr std::size_t kLeadIn = 24;

struct LengthRange {
  std::size_t lo;
  std::size_t hi;
};

LengthRange segment_lengths(AnomalyProfile profile) {
  switch (profile) {
    case AnomalyProfile::kSpike: return {1, 4};
    case AnomalyProfile::kDecouple: return {15, 40};
    case AnomalyProfile::kDrift: return {20, 50};
  }
  return {1, 1};
}

struct Segment {
  AnomalyProfile profile;
  std::size_t length;
  std::size_t start = 0;
};

// Normal-process generator shared by train and test so both follow the same
// latent structure.
class LatentMixture {
 public:
  LatentMixture(std::size_t d, Rng& rng) : loadings_(d, kLatents), offsets_(d) {
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t k = 0; k < kLatents; ++k) {
        loadings_(j, k) = 2.0 * uniform01(rng) - 1.0;
      }
      if (loadings_.row(j).norm() < 0.5) loadings_.row(j) *= 0.5 / loadings_.row(j).norm();
      offsets_[j] = 2.0 * uniform01(rng) - 1.0;
    }
  }

  Vector latents(std::size_t t, double ar_state) const {
    Vector z(kLatents);
    const double tt = static_cast<double>(t);
    z[0] = std::sin(2.0 * std::numbers::pi * tt / periods_[0]);
    z[1] = std::sin(2.0 * std::numbers::pi * tt / periods_[1] + 0.7);
    z[2] = ar_state;
    return z;
  }

  const Matrix& loadings() const { return loadings_; }
  const Vector& offsets() const { return offsets_; }

 private:
  Matrix loadings_;
  Vector offsets_;
  double periods_[2] = {40.0, 97.0};
};

Matrix simulate_normal(const LatentMixture& mix, std::size_t t0, std::size_t length,
                       Rng& rng, Matrix* latent_out) {
  const auto d = mix.loadings().rows();
  Matrix values(static_cast<Eigen::Index>(length), d);
  if (latent_out) latent_out->resize(static_cast<Eigen::Index>(length), kLatents);
  const double stationary_sd =
      kArInnovationSd / std::sqrt(1.0 - kArCoefficient * kArCoefficient);
  double ar = stationary_sd * standard_normal(rng);
  for (std::size_t t = 0; t < length; ++t) {
    ar = kArCoefficient * ar + kArInnovationSd * standard_normal(rng);
    const Vector z = mix.latents(t0 + t, ar);
    const auto row = static_cast<Eigen::Index>(t);
    if (latent_out) latent_out->row(row) = z.transpose();
    for (Eigen::Index j = 0; j < d; ++j) {
      values(row, j) = mix.offsets()[j] + mix.loadings().row(j).dot(z) +
                       kNoiseSd * standard_normal(rng);
    }
  }
  return values;
}

std::vector<Segment> plan_segments(const SynthConfig& config, std::size_t anomalous,
                                   Rng& rng) {
  double total_weight = 0.0;
  for (const auto& share : config.segment_plan) total_weight += share.weight;

  std::vector<Segment> segments;
  std::size_t assigned = 0;
  for (std::size_t p = 0; p < config.segment_plan.size(); ++p) {
    const auto& share = config.segment_plan[p];
    std::size_t quota =
        p + 1 == config.segment_plan.size()
            ? anomalous - assigned
            : static_cast<std::size_t>(
                  std::llround(share.weight / total_weight * static_cast<double>(anomalous)));
    quota = std::min(quota, anomalous - assigned);
    assigned += quota;
    const LengthRange range = segment_lengths(share.profile);
    std::size_t filled = 0;
    while (filled < quota) {
      std::size_t len = range.lo + uniform_index(rng, range.hi - range.lo + 1);
      len = std::min(len, quota - filled);
      segments.push_back({share.profile, len});
      filled += len;
    }
  }
  // Fisher-Yates with the portable index draw.
  for (std::size_t i = segments.size(); i > 1; --i) {
    std::swap(segments[i - 1], segments[uniform_index(rng, i)]);
  }
  return segments;
}

void place_segments(std::vector<Segment>& segments, std::size_t t_test, std::size_t anomalous,
                    Rng& rng) {
  const std::size_t gaps = segments.size() + 1;
  const std::size_t normal = t_test - anomalous;
  const std::size_t reserved = kLeadIn + kMinGap * (gaps - 1);
  if (normal < reserved) {
    throw ConfigError(fmt::format(
        "t_test={} too short for {} anomaly segments (need at least {} normal rows)", t_test,
        segments.size(), reserved));
  }
  std::vector<double> weights(gaps);
  for (auto& w : weights) w = uniform01(rng) + 0.05;
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  const std::size_t spare = normal - reserved;
  std::vector<std::size_t> gap(gaps);
  std::size_t used = 0;
  for (std::size_t g = 0; g < gaps; ++g) {
    gap[g] = static_cast<std::size_t>(std::floor(weights[g] / sum * static_cast<double>(spare)));
    used += gap[g];
  }
  gap.back() += spare - used;
  gap[0] += kLeadIn;
  for (std::size_t g = 1; g < gaps; ++g) gap[g] += kMinGap;

  std::size_t cursor = 0;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    cursor += gap[s];
    segments[s].start = cursor;
    cursor += segments[s].length;
  }
}

void inject(const Segment& segment, const LatentMixture& mix, const Matrix& latents,
            const Vector& feature_sd, Matrix& values, Rng& rng) {
  const auto d = values.cols();
  const auto begin = static_cast<Eigen::Index>(segment.start);
  const auto len = static_cast<Eigen::Index>(segment.length);
  switch (segment.profile) {
    case AnomalyProfile::kSpike: {
      const Eigen::Index count = 1 + static_cast<Eigen::Index>(uniform_index(rng, 2));
      std::vector<Eigen::Index> features(static_cast<std::size_t>(d));
      std::iota(features.begin(), features.end(), 0);
      for (Eigen::Index k = 0; k < count; ++k) {
        const auto pick = k + static_cast<Eigen::Index>(
                                  uniform_index(rng, static_cast<std::size_t>(d - k)));
        std::swap(features[static_cast<std::size_t>(k)], features[static_cast<std::size_t>(pick)]);
        const Eigen::Index j = features[static_cast<std::size_t>(k)];
        const double sign = uniform01(rng) < 0.5 ? -1.0 : 1.0;
        const double magnitude = 4.0 + 3.0 * uniform01(rng);
        for (Eigen::Index t = begin; t < begin + len; ++t) {
          values(t, j) += sign * magnitude * feature_sd[j];
        }
      }
      break;
    }
    case AnomalyProfile::kDecouple: {
      const auto j = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(d)));
      // Mirror the feature around its offset: the latents are symmetric, so the
      // marginal is unchanged while every cross-feature relation inverts.
      const Vector flipped = -mix.loadings().row(j).transpose();
      for (Eigen::Index t = begin; t < begin + len; ++t) {
        values(t, j) = mix.offsets()[j] + latents.row(t).dot(flipped) +
                       kNoiseSd * standard_normal(rng);
      }
      break;
    }
    case AnomalyProfile::kDrift: {
      const double depth = 1.2 + 0.8 * uniform01(rng);
      for (Eigen::Index t = begin; t < begin + len; ++t) {
        // Quick ramp in and out so the whole segment is displaced.
        const double pos = static_cast<double>(t - begin + 1) / static_cast<double>(len + 1);
        const double envelope = std::min(1.0, 4.0 * std::min(pos, 1.0 - pos));
        for (Eigen::Index j = 0; j < d; ++j) {
          values(t, j) -= depth * envelope * feature_sd[j];
        }
      }
      break;
    }
  }
}

std::vector<std::string> feature_names(std::size_t d) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < d; ++j) names.push_back(fmt::format("sensor_{}", j));
  return names;
}

}  // namespace

std::string to_string(AnomalyProfile profile) {
  switch (profile) {
    case AnomalyProfile::kSpike: return "spike";
    case AnomalyProfile::kDecouple: return "decouple";
    case AnomalyProfile::kDrift: return "drift";
  }
  return "unknown";
}

AnomalyProfile parse_anomaly_profile(const std::string& name) {
  if (name == "spike") return AnomalyProfile::kSpike;
  if (name == "decouple") return AnomalyProfile::kDecouple;
  if (name == "drift") return AnomalyProfile::kDrift;
  throw ConfigError(fmt::format("unknown anomaly profile '{}' (expected spike, decouple, drift)",
                                name));
}

std::vector<SegmentShare> parse_segment_plan(const std::string& text) {
  std::vector<SegmentShare> plan;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const std::string item =
        text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    const auto colon = item.find(':');
    std::string name = item.substr(0, colon);
    name.erase(std::remove_if(name.begin(), name.end(), ::isspace), name.end());
    double weight = 1.0;
    if (colon != std::string::npos) {
      try {
        weight = std::stod(item.substr(colon + 1));
      } catch (const std::exception&) {
        throw ConfigError(fmt::format("bad segment_plan weight in '{}'", item));
      }
    }
    if (!name.empty()) plan.push_back({parse_anomaly_profile(name), weight});
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return plan;
}

std::string format_segment_plan(const std::vector<SegmentShare>& plan) {
  std::string out;
  for (const auto& share : plan) {
    if (!out.empty()) out += ",";
    out += fmt::format("{}:{}", to_string(share.profile), share.weight);
  }
  return out;
}

void SynthConfig::validate() const {
  if (!(anomaly_rate > 0.0 && anomaly_rate < 0.5)) {
    throw ConfigError(fmt::format("anomaly_rate must lie in (0, 0.5), got {}", anomaly_rate));
  }
  if (d < 2) throw ConfigError(fmt::format("d must be >= 2, got {}", d));
  if (t_train < 16) throw ConfigError("t_train must be >= 16");
  if (t_test < 16) throw ConfigError("t_test must be >= 16");
  if (segment_plan.empty()) throw ConfigError("segment_plan must name at least one profile");
  for (const auto& share : segment_plan) {
    if (!(share.weight > 0.0) || !std::isfinite(share.weight)) {
      throw ConfigError("segment_plan weights must be positive");
    }
  }
}

SynthConfig load_synth_config(const std::filesystem::path& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("cannot read synth config: {}", e.what()));
  }
  // Accept both a flat file and one with a [synth] section.
  const pt::ptree& node = tree.get_child_optional("synth") ? tree.get_child("synth") : tree;
  SynthConfig config;
  try {
    config.t_train = node.get<std::size_t>("t_train", config.t_train);
    config.t_test = node.get<std::size_t>("t_test", config.t_test);
    config.d = node.get<std::size_t>("d", config.d);
    config.anomaly_rate = node.get<double>("anomaly_rate", config.anomaly_rate);
    config.seed = node.get<std::uint64_t>("seed", config.seed);
    if (auto plan = node.get_optional<std::string>("segment_plan")) {
      config.segment_plan = parse_segment_plan(*plan);
    }
  } catch (const pt::ptree_bad_data& e) {
    throw ConfigError(fmt::format("bad synth config value: {}", e.what()));
  }
  config.validate();
  return config;
}

SyntheticDataset generate_synthetic(const SynthConfig& config, std::uint64_t seed) {
  config.validate();
  Rng structure_rng = make_rng(seed, 1);
  Rng train_rng = make_rng(seed, 2);
  Rng test_rng = make_rng(seed, 3);
  Rng anomaly_rng = make_rng(seed, 4);

  const LatentMixture mix(config.d, structure_rng);
  Matrix train_values = simulate_normal(mix, 0, config.t_train, train_rng, nullptr);
  Matrix latents;
  Matrix test_values =
      simulate_normal(mix, config.t_train, config.t_test, test_rng, &latents);

  const Vector mean = train_values.colwise().mean().transpose();
  Vector feature_sd(train_values.cols());
  for (Eigen::Index j = 0; j < train_values.cols(); ++j) {
    feature_sd[j] = std::sqrt((train_values.col(j).array() - mean[j]).square().mean());
  }

  const auto anomalous = static_cast<std::size_t>(
      std::llround(config.anomaly_rate * static_cast<double>(config.t_test)));
  std::vector<Segment> segments = plan_segments(config, anomalous, anomaly_rng);
  place_segments(segments, config.t_test, anomalous, anomaly_rng);

  Labels labels(config.t_test, 0);
  std::vector<int> profile(config.t_test, -1);
  for (const auto& segment : segments) {
    inject(segment, mix, latents, feature_sd, test_values, anomaly_rng);
    for (std::size_t t = segment.start; t < segment.start + segment.length; ++t) {
      labels[t] = 1;
      profile[t] = static_cast<int>(segment.profile);
    }
  }

  std::vector<std::int64_t> test_index(config.t_test);
  std::iota(test_index.begin(), test_index.end(), static_cast<std::int64_t>(config.t_train));
  return {TimeSeries(std::move(train_values), feature_names(config.d), Labels(config.t_train, 0)),
          TimeSeries(std::move(test_values), feature_names(config.d), std::move(labels),
                     std::move(test_index)),
          std::move(profile)};
}

}  // namespace rlmsad::data
