#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "rlmsad/errors.hpp"
#include "rlmsad/evalharness.hpp"

namespace rlmsad::eval {

namespace {

// Re-raises an error with context while keeping its exit-code category.
[[noreturn]] void rethrow_with_context(const std::exception_ptr& error, const std::string& context) {
  try {
    std::rethrow_exception(error);
  } catch (const Error& e) {
    throw Error(e.kind(), fmt::format("{}: {}", context, e.what()));
  } catch (const std::exception& e) {
    throw RuntimeFailure(fmt::format("{}: {}", context, e.what()));
  }
}

std::vector<double> column(std::span<const MetricsRecord> records, double MetricsRecord::*field) {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.*field);
  return out;
}

}  // namespace

void parallel_for(std::size_t count, std::size_t jobs,
                  const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(count);
  const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
        break;
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      threads.emplace_back([&] {
        for (std::size_t i = next++; i < count && !failed; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
            failed = true;
          }
        }
      });
    }
    for (auto& t : threads) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

ReportRow row_from_records(const std::string& model, std::span<const MetricsRecord> records) {
  if (records.empty()) throw RuntimeFailure(fmt::format("no records for row '{}'", model));
  ReportRow row;
  row.model = model;
  row.precision = mean_std(column(records, &MetricsRecord::precision));
  row.recall = mean_std(column(records, &MetricsRecord::recall));
  row.f1 = mean_std(column(records, &MetricsRecord::f1));
  row.seeds = records.size();
  return row;
}

const ReportRow& RunReport::row(const std::string& model) const {
  if (model == rlmsad.model) return rlmsad;
  for (const auto& r : baselines) {
    if (r.model == model) return r;
  }
  throw RuntimeFailure(fmt::format("report has no row '{}'", model));
}

std::vector<ReportRow> RunReport::rows() const {
  std::vector<ReportRow> out = baselines;
  out.push_back(rlmsad);
  return out;
}

std::vector<ReportRow> baseline_rows(const detect::ScoredPool& pool, std::size_t random_draws,
                                     std::uint64_t baseline_seed) {
  pool.validate();
  std::vector<ReportRow> rows;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const MetricsRecord m = metrics(confusion(pool.outputs[i].labels, pool.truth));
    rows.push_back(row_from_records(detect::to_string(pool.kinds[i]), std::span(&m, 1)));
  }
  const MetricsRecord vote = metrics(confusion(majority_vote(pool), pool.truth));
  rows.push_back(row_from_records("majority_vote", std::span(&vote, 1)));

  if (random_draws == 0) throw ConfigError("random baseline needs at least one draw");
  std::vector<MetricsRecord> draws;
  for (std::size_t d = 0; d < random_draws; ++d) {
    Rng rng = make_rng(baseline_seed, 0x72616e64 + d);
    draws.push_back(metrics(confusion(random_selection(pool, rng), pool.truth)));
    draws.back().seed = d;
  }
  rows.push_back(row_from_records("random", draws));

  const MetricsRecord oracle = metrics(confusion(oracle_selection(pool), pool.truth));
  rows.push_back(row_from_records("oracle", std::span(&oracle, 1)));
  return rows;
}

SeedResult evaluate_seed(const dqn::Policy& policy, std::shared_ptr<const detect::ScoredPool> pool,
                         const mdp::RewardConfig& rewards, const mdp::FeatureMask& mask,
                         std::uint64_t seed, bool keep_trace) {
  mdp::DetectorSelectionEnv env(pool, rewards, mask);
  dqn::EpisodeTrace trace = dqn::evaluate_policy(policy, env);

  Labels predictions;
  Labels truth;
  predictions.reserve(trace.transitions.size());
  truth.reserve(trace.transitions.size());
  for (const auto& tr : trace.transitions) {
    predictions.push_back(tr.info.prediction);
    truth.push_back(tr.info.truth);
  }
  SeedResult out;
  out.seed = seed;
  out.counts = confusion(predictions, truth);
  if (out.counts.total() != pool->length()) {
    throw RuntimeFailure(fmt::format("evaluation covered {} of {} timesteps", out.counts.total(),
                                     pool->length()));
  }
  out.metrics = metrics(out.counts);
  out.metrics.seed = seed;
  out.episode_return = trace.episode_return;
  const double expected = confusion_return(out.counts, rewards);
  if (out.episode_return != expected || env.episode_return() != expected) {
    throw RuntimeFailure(fmt::format(
        "episode return {:.17g} disagrees with confusion-weighted sum {:.17g}",
        out.episode_return, expected));
  }
  if (keep_trace) out.trace = std::move(trace.transitions);
  return out;
}

RunReport assemble_report(const detect::ScoredPool& pool, const ExperimentSpec& spec,
                          std::vector<SeedResult> per_seed) {
  RunReport report;
  report.baselines = baseline_rows(pool, spec.random_draws, spec.baseline_seed);
  std::vector<MetricsRecord> records;
  for (const auto& r : per_seed) records.push_back(r.metrics);
  report.rlmsad = row_from_records("rlmsad", records);
  report.per_seed = std::move(per_seed);

  report.config = {{"rewards", {{"tp", spec.rewards.tp},
                                {"tn", spec.rewards.tn},
                                {"fp", spec.rewards.fp},
                                {"fn", spec.rewards.fn}}},
                   {"agent", spec.agent.to_json()},
                   {"mask", spec.mask.name()},
                   {"seeds", spec.seeds},
                   {"random_draws", spec.random_draws},
                   {"baseline_seed", spec.baseline_seed},
                   {"contamination", pool.contamination},
                   {"timesteps", pool.length()}};
  report.config["agent"].erase("seed");
  return report;
}

RunReport run_experiment(std::shared_ptr<const detect::ScoredPool> pool,
                         const ExperimentSpec& spec) {
  if (!pool) throw ConfigError("experiment needs a scored pool");
  if (spec.seeds.empty()) throw ConfigError("experiment.seeds must list at least one seed");
  pool->validate();
  spec.agent.validate();
  if (const auto violations = mdp::validate_reward_config(spec.rewards); !violations.empty()) {
    throw ConfigError(fmt::format("reward config violates {}", violations.front()));
  }

  std::vector<SeedResult> results(spec.seeds.size());
  parallel_for(spec.seeds.size(), spec.jobs, [&](std::size_t i) {
    const std::uint64_t seed = spec.seeds[i];
    try {
      dqn::AgentConfig agent = spec.agent;
      agent.seed = seed;
      const auto trained = dqn::train(
          [&] { return std::make_unique<mdp::DetectorSelectionEnv>(pool, spec.rewards, spec.mask); },
          agent);
      results[i] = evaluate_seed(trained.policy, pool, spec.rewards, spec.mask, seed,
                                 spec.keep_traces);
      results[i].training = trained.stats;
      spdlog::info("seed {}: precision {:.4f} recall {:.4f} f1 {:.4f}", seed,
                   results[i].metrics.precision, results[i].metrics.recall, results[i].metrics.f1);
    } catch (...) {
      rethrow_with_context(std::current_exception(), fmt::format("seed {}", seed));
    }
  });
  return assemble_report(*pool, spec, std::move(results));
}

std::vector<mdp::RewardConfig> SweepGrid::cells() const {
  std::vector<mdp::RewardConfig> out;
  for (double fn : fn_values) {
    for (double fp : fp_values) out.push_back({tp, tn, fp, fn});
  }
  return out;
}

namespace {

std::vector<TrendRow> trend_rows(const SweepGrid& grid, const std::vector<SweepCell>& cells) {
  const std::size_t cols = grid.fp_values.size();
  auto at = [&](std::size_t r, std::size_t c) -> const ReportRow& {
    return cells[r * cols + c].report.rlmsad;
  };
  std::vector<TrendRow> trends;
  // Fixed FN, varying FP.
  for (std::size_t r = 0; r < grid.fn_values.size(); ++r) {
    std::vector<double> x, p, rec;
    for (std::size_t c = 0; c < cols; ++c) {
      x.push_back(std::abs(grid.fp_values[c]));
      p.push_back(at(r, c).precision.mean);
      rec.push_back(at(r, c).recall.mean);
    }
    trends.push_back({"fp", grid.fn_values[r], spearman(x, p), spearman(x, rec)});
  }
  // Fixed FP, varying FN.
  for (std::size_t c = 0; c < cols; ++c) {
    std::vector<double> x, p, rec;
    for (std::size_t r = 0; r < grid.fn_values.size(); ++r) {
      x.push_back(std::abs(grid.fn_values[r]));
      p.push_back(at(r, c).precision.mean);
      rec.push_back(at(r, c).recall.mean);
    }
    trends.push_back({"fn", grid.fp_values[c], spearman(x, p), spearman(x, rec)});
  }
  return trends;
}

}  // namespace

SweepReport sweep(std::shared_ptr<const detect::ScoredPool> pool, const SweepGrid& grid,
                  const ExperimentSpec& base) {
  if (grid.fn_values.empty() || grid.fp_values.empty()) {
    throw ConfigError("sweep grid needs at least one FN and one FP value");
  }
  const auto rewards = grid.cells();
  for (const auto& r : rewards) {
    if (const auto v = mdp::validate_reward_config(r); !v.empty()) {
      throw ConfigError(fmt::format("sweep cell {} violates {}", sweep_cell_name(r), v.front()));
    }
  }
  if (base.seeds.empty()) throw ConfigError("experiment.seeds must list at least one seed");
  base.agent.validate();
  if (!pool) throw ConfigError("sweep needs a scored pool");
  pool->validate();

  // Cells x seeds are flattened into one work list; assembly stays sequential.
  const std::size_t per_cell = base.seeds.size();
  std::vector<SeedResult> results(rewards.size() * per_cell);
  parallel_for(results.size(), base.jobs, [&](std::size_t k) {
    const auto& cell = rewards[k / per_cell];
    const std::uint64_t seed = base.seeds[k % per_cell];
    try {
      dqn::AgentConfig agent = base.agent;
      agent.seed = seed;
      const auto trained = dqn::train(
          [&] { return std::make_unique<mdp::DetectorSelectionEnv>(pool, cell, base.mask); },
          agent);
      results[k] = evaluate_seed(trained.policy, pool, cell, base.mask, seed, base.keep_traces);
      results[k].training = trained.stats;
    } catch (...) {
      rethrow_with_context(std::current_exception(),
                           fmt::format("cell {} seed {}", sweep_cell_name(cell), seed));
    }
  });

  SweepReport report;
  for (std::size_t c = 0; c < rewards.size(); ++c) {
    ExperimentSpec spec = base;
    spec.rewards = rewards[c];
    std::vector<SeedResult> cell_results(std::make_move_iterator(results.begin() + c * per_cell),
                                         std::make_move_iterator(results.begin() + (c + 1) * per_cell));
    report.cells.push_back({rewards[c], assemble_report(*pool, spec, std::move(cell_results))});
    spdlog::info("sweep cell {}: precision {:.4f} recall {:.4f}", sweep_cell_name(rewards[c]),
                 report.cells.back().report.rlmsad.precision.mean,
                 report.cells.back().report.rlmsad.recall.mean);
  }
  report.trends = trend_rows(grid, report.cells);
  return report;
}

AblationReport ablate(std::shared_ptr<const detect::ScoredPool> pool, const ExperimentSpec& base) {
  const std::vector<std::string> names{"full", "drop_pc", "drop_dt"};
  AblationReport report;
  for (const auto& name : names) {
    ExperimentSpec spec = base;
    spec.mask = mdp::FeatureMask::parse(name);
    try {
      report.variants.push_back({name, spec.mask, run_experiment(pool, spec)});
    } catch (...) {
      rethrow_with_context(std::current_exception(), fmt::format("variant {}", name));
    }
  }
  return report;
}

std::string sweep_cell_name(const mdp::RewardConfig& r) {
  return fmt::format("cell_fn{}_fp{}", r.fn, r.fp);
}

}  // namespace rlmsad::eval
