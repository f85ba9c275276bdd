#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "rlmsad/errors.hpp"
#include "rlmsad/evalharness.hpp"
#include "rlmsad/exact_sum.hpp"

namespace rlmsad::eval {

ConfusionCounts confusion(std::span<const int> predictions, std::span<const int> truth) {
  if (predictions.size() != truth.size()) {
    throw DataError(fmt::format("confusion: {} predictions vs {} labels", predictions.size(),
                                truth.size()));
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool p = predictions[i] == 1;
    const bool t = truth[i] == 1;
    if (p && t) ++c.tp;
    else if (!p && !t) ++c.tn;
    else if (p) ++c.fp;
    else ++c.fn;
  }
  return c;
}

MetricsRecord metrics(const ConfusionCounts& c) {
  MetricsRecord m;
  const auto tp = static_cast<double>(c.tp);
  m.precision_undefined = c.tp + c.fp == 0;
  m.recall_undefined = c.tp + c.fn == 0;
  m.precision = m.precision_undefined ? 0.0 : tp / static_cast<double>(c.tp + c.fp);
  m.recall = m.recall_undefined ? 0.0 : tp / static_cast<double>(c.tp + c.fn);
  // 2PR/(P+R) reduces to 2TP/(2TP+FP+FN); a single division keeps it exact.
  m.f1 = c.tp == 0 ? 0.0 : 2.0 * tp / static_cast<double>(2 * c.tp + c.fp + c.fn);
  return m;
}

double confusion_return(const ConfusionCounts& c, const mdp::RewardConfig& r) {
  ExactSum sum;
  sum.add_product(r.tp, static_cast<double>(c.tp));
  sum.add_product(r.tn, static_cast<double>(c.tn));
  sum.add_product(-r.fp, static_cast<double>(c.fp));
  sum.add_product(-r.fn, static_cast<double>(c.fn));
  return sum.value();
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  const auto n = static_cast<double>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / (n - 1.0));
  }
  return out;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("spearman: inputs differ in length");
  if (x.size() < 2) return std::nullopt;
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const auto mx = mean_std(rx).mean;
  const auto my = mean_std(ry).mean;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

Labels majority_vote(const detect::ScoredPool& pool) {
  const std::size_t m = pool.size();
  const std::size_t quorum = (m + 1) / 2;
  Labels out(pool.length(), 0);
  for (std::size_t t = 0; t < pool.length(); ++t) {
    std::size_t votes = 0;
    for (const auto& o : pool.outputs) votes += static_cast<std::size_t>(o.labels[t]);
    out[t] = votes >= quorum ? 1 : 0;
  }
  return out;
}

Labels oracle_selection(const detect::ScoredPool& pool) {
  Labels out(pool.length(), 0);
  for (std::size_t t = 0; t < pool.length(); ++t) {
    // Default to detector 0 when nobody is right.
    out[t] = pool.outputs.front().labels[t];
    for (const auto& o : pool.outputs) {
      if (o.labels[t] == pool.truth[t]) {
        out[t] = o.labels[t];
        break;
      }
    }
  }
  return out;
}

Labels random_selection(const detect::ScoredPool& pool, Rng& rng) {
  Labels out(pool.length(), 0);
  for (std::size_t t = 0; t < pool.length(); ++t) {
    out[t] = pool.outputs[uniform_index(rng, pool.size())].labels[t];
  }
  return out;
}

}  // namespace rlmsad::eval
