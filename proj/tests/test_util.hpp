#ifndef RLMSAD_TESTS_TEST_UTIL_HPP_
#define RLMSAD_TESTS_TEST_UTIL_HPP_

#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "rlmsad/detectors.hpp"
#include "rlmsad/random.hpp"

namespace rlmsad::testing {

// Fresh directory under the build tree's temp area, removed on destruction.
class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    std::string name = info ? std::string(info->test_suite_name()) + "_" + info->name() : "rlmsad";
    for (auto& c : name) {
      if (c == '/') c = '_';
    }
    path_ = std::filesystem::temp_directory_path() / ("rlmsad_test_" + name);
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline std::vector<int> random_labels(Rng& rng, std::size_t n, double p = 0.5) {
  std::vector<int> labels(n);
  for (auto& v : labels) v = uniform01(rng) < p ? 1 : 0;
  return labels;
}

// Pool built directly from raw scores and truth, bypassing any fitted model.
inline detect::ScoredPool make_pool(const std::vector<std::vector<double>>& raw, Labels truth,
                                    double contamination = 0.12) {
  detect::ScoredPool pool;
  pool.contamination = contamination;
  const auto& kinds = detect::all_detector_kinds();
  for (std::size_t i = 0; i < raw.size(); ++i) {
    pool.kinds.push_back(kinds[i]);
    pool.outputs.push_back(detect::threshold_scores(raw[i], contamination));
  }
  for (std::size_t t = 0; t < truth.size(); ++t) pool.timesteps.push_back(static_cast<std::int64_t>(t));
  pool.truth = std::move(truth);
  pool.validate();
  return pool;
}

// Random pool of `m` members over `n` timesteps with mildly informative scores.
inline detect::ScoredPool random_pool(Rng& rng, std::size_t m, std::size_t n) {
  Labels truth = random_labels(rng, n, 0.15);
  std::vector<std::vector<double>> raw(m, std::vector<double>(n));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t t = 0; t < n; ++t) {
      raw[i][t] = standard_normal(rng) + (truth[t] ? 1.5 * uniform01(rng) : 0.0);
    }
  }
  return make_pool(raw, std::move(truth));
}

}  // namespace rlmsad::testing

#endif  // RLMSAD_TESTS_TEST_UTIL_HPP_
