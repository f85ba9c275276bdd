#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "rlmsad/detectors.hpp"
#include "rlmsad/errors.hpp"
#include "rlmsad/random.hpp"

namespace rlmsad::detect {

namespace {

constexpr double kEulerGamma = 0.5772156649;

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& data, std::size_t height_limit, Rng& rng)
      : data_(data), height_limit_(height_limit), rng_(rng) {}

  IsolationForest::Tree build(std::vector<std::size_t> rows) {
    tree_.clear();
    grow(rows, 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<std::size_t>& rows, std::size_t depth) {
    const int id = static_cast<int>(tree_.size());
    tree_.push_back({});
    tree_[static_cast<std::size_t>(id)].size = rows.size();
    if (depth >= height_limit_ || rows.size() <= 1) return id;

    // Random feature order; skip features that are constant within the node.
    const auto d = static_cast<std::size_t>(data_.cols());
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = 0; i < d; ++i) {
      std::swap(order[i], order[i + uniform_index(rng_, d - i)]);
      const auto f = static_cast<Eigen::Index>(order[i]);
      double lo = data_(static_cast<Eigen::Index>(rows[0]), f);
      double hi = lo;
      for (std::size_t r : rows) {
        lo = std::min(lo, data_(static_cast<Eigen::Index>(r), f));
        hi = std::max(hi, data_(static_cast<Eigen::Index>(r), f));
      }
      if (hi <= lo) continue;
      double split = lo + uniform01(rng_) * (hi - lo);
      if (split <= lo) split = std::nextafter(lo, hi);

      std::vector<std::size_t> left;
      std::vector<std::size_t> right;
      for (std::size_t r : rows) {
        (data_(static_cast<Eigen::Index>(r), f) < split ? left : right).push_back(r);
      }
      const int l = grow(left, depth + 1);
      const int rr = grow(right, depth + 1);
      auto& node = tree_[static_cast<std::size_t>(id)];
      node.feature = static_cast<int>(f);
      node.split = split;
      node.left = l;
      node.right = rr;
      return id;
    }
    return id;
  }

  const Matrix& data_;
  std::size_t height_limit_;
  Rng& rng_;
  IsolationForest::Tree tree_;
};

}  // namespace

double IsolationForest::average_path_length(std::size_t n) {
  if (n <= 1) return 0.0;
  if (n == 2) return 1.0;
  const double m = static_cast<double>(n - 1);
  const double harmonic = std::log(m) + kEulerGamma;
  return 2.0 * harmonic - 2.0 * m / static_cast<double>(n);
}

IsolationForest::IsolationForest(std::size_t dims, std::size_t subsample,
                                 std::vector<Tree> trees)
    : dims_(dims), subsample_(subsample), trees_(std::move(trees)) {
  if (trees_.empty()) throw ConfigError("isolation forest needs at least one tree");
  if (subsample_ < 2) throw ConfigError("isolation forest subsample must be >= 2");
}

std::size_t IsolationForest::height_limit() const {
  return static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(subsample_))));
}

IsolationForest IsolationForest::fit(const data::WindowedDataset& train,
                                     const IForestParams& params, std::uint64_t seed) {
  if (params.trees == 0) throw ConfigError("iforest.trees must be >= 1");
  if (params.subsample < 2) throw ConfigError("iforest.subsample must be >= 2");
  const std::size_t n = train.size();
  const std::size_t psi = std::min(params.subsample, n);
  const auto limit =
      static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(psi))));

  Rng rng = make_rng(seed, 0x69666f72);
  TreeBuilder builder(train.windows, limit, rng);
  std::vector<Tree> trees;
  trees.reserve(params.trees);
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  for (std::size_t t = 0; t < params.trees; ++t) {
    std::vector<std::size_t> rows;
    if (psi == n) {
      rows = all;
    } else {
      // Partial Fisher-Yates: first psi entries form the subsample.
      std::vector<std::size_t> pool = all;
      for (std::size_t i = 0; i < psi; ++i) {
        std::swap(pool[i], pool[i + uniform_index(rng, n - i)]);
      }
      rows.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(psi));
    }
    trees.push_back(builder.build(std::move(rows)));
  }
  return IsolationForest(train.dims, psi, std::move(trees));
}

double IsolationForest::path_length(std::span<const double> x, const Tree& tree) const {
  std::size_t node = 0;
  double depth = 0.0;
  while (tree[node].feature >= 0) {
    const auto& n = tree[node];
    node = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] < n.split ? n.left
                                                                                     : n.right);
    depth += 1.0;
  }
  return depth + average_path_length(tree[node].size);
}

std::vector<double> IsolationForest::score(const data::WindowedDataset& test) const {
  check_input(test);
  const double norm = average_path_length(subsample_);
  std::vector<double> scores(test.size());
  const auto d = static_cast<std::size_t>(test.windows.cols());
  for (std::size_t i = 0; i < test.size(); ++i) {
    std::span<const double> x(test.windows.data() + i * d, d);
    double total = 0.0;
    for (const auto& tree : trees_) total += path_length(x, tree);
    const double mean = total / static_cast<double>(trees_.size());
    scores[i] = std::pow(2.0, -mean / norm);
  }
  return scores;
}

nlohmann::json IsolationForest::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : trees_) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : tree) nodes.push_back({n.feature, n.split, n.left, n.right, n.size});
    trees.push_back(std::move(nodes));
  }
  return {{"format_version", kModelFormatVersion},
          {"kind", to_string(kind())},
          {"dims", dims_},
          {"subsample", subsample_},
          {"trees", std::move(trees)}};
}

IsolationForest IsolationForest::from_json(const nlohmann::json& doc) {
  std::vector<Tree> trees;
  for (const auto& jt : doc.at("trees")) {
    Tree tree;
    for (const auto& jn : jt) {
      Node n;
      n.feature = jn.at(0).get<int>();
      n.split = jn.at(1).get<double>();
      n.left = jn.at(2).get<int>();
      n.right = jn.at(3).get<int>();
      n.size = jn.at(4).get<std::size_t>();
      tree.push_back(n);
    }
    const auto count = static_cast<int>(tree.size());
    for (const auto& n : tree) {
      if (n.feature >= static_cast<int>(doc.at("dims").get<std::size_t>())) {
        throw DataError("isolation tree splits on an unknown feature");
      }
      if (n.feature >= 0 && (n.left <= 0 || n.right <= 0 || n.left >= count || n.right >= count)) {
        throw DataError("isolation tree has an out-of-range child index");
      }
    }
    if (tree.empty()) throw DataError("isolation tree is empty");
    trees.push_back(std::move(tree));
  }
  return IsolationForest(doc.at("dims").get<std::size_t>(),
                         doc.at("subsample").get<std::size_t>(), std::move(trees));
}

}  // namespace rlmsad::detect
