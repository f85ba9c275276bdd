#include "rlmsad/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "rlmsad/config.hpp"
#include "rlmsad/errors.hpp"
#include "rlmsad/evalharness.hpp"
#include "rlmsad/pipeline.hpp"

namespace rlmsad::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::optional<std::string> output;
  std::optional<std::size_t> jobs;
  std::optional<std::uint64_t> seed_override;
  std::optional<std::string> format;
};

struct Context {
  config::RunConfig config;
  pipeline::Layout layout;
  eval::ReportFormat format;
  std::ostream& out;
};

std::string kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kData: return "data";
    case ErrorKind::kRuntime: return "runtime";
  }
  return "runtime";
}

void configure_logging() {
  const char* env = std::getenv("RLMSAD_LOG");
  const std::string level = env ? env : "info";
  auto logger = std::make_shared<spdlog::logger>(
      "rlmsad", std::make_shared<spdlog::sinks::stderr_sink_mt>());
  logger->set_pattern("[%l] %v");
  if (level == "error") logger->set_level(spdlog::level::err);
  else if (level == "info") logger->set_level(spdlog::level::info);
  else if (level == "debug") logger->set_level(spdlog::level::debug);
  else throw ConfigError(fmt::format("RLMSAD_LOG must be error, info or debug, got '{}'", level));
  spdlog::set_default_logger(logger);
}

Context load_context(const Options& opts, std::ostream& out) {
  config::RunConfig cfg = config::load_run_config(opts.config);
  if (opts.output) cfg.output = *opts.output;
  if (opts.jobs) cfg.jobs = *opts.jobs;
  if (opts.format) cfg.format = *opts.format;
  if (opts.seed_override) {
    cfg.synth.seed = *opts.seed_override;
    cfg.pool_seed = *opts.seed_override;
    cfg.seeds = {*opts.seed_override};
  }
  cfg.validate(true);
  const auto format = eval::parse_report_format(cfg.format);
  return {cfg, pipeline::Layout{cfg.output}, format, out};
}

void require_file(const fs::path& path, const std::string& what) {
  if (!fs::is_regular_file(path)) {
    throw DataError(fmt::format("{} not found: {}", what, path.string()));
  }
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_json(const fs::path& path, const nlohmann::json& doc) {
  eval::write_text(path, doc.dump(1) + "\n");
}

// Inputs are named relative to the output root so the manifest does not
// depend on where the run lives.
void write_manifest(const Context& ctx, const std::string& subcommand,
                    const std::vector<fs::path>& inputs, const fs::path& dir) {
  nlohmann::json hashes = nlohmann::json::object();
  for (const auto& p : inputs) {
    std::string name = p.lexically_relative(ctx.layout.root).generic_string();
    if (name.empty() || name.rfind("..", 0) == 0) name = p.filename().string();
    hashes[name] = eval::content_hash(p);
  }
  const nlohmann::json manifest = {
      {"subcommand", subcommand},
      {"config", ctx.config.to_json()},
      {"agent_seeds", ctx.config.seeds},
      {"detector_seed", ctx.config.pool_seed},
      {"seed_roles",
       "agent_seeds initialise each DQN run; detector_seed fits the pool once for all runs"},
      {"inputs", hashes}};
  write_json(dir / "manifest.json", manifest);
}

// --- subcommands -----------------------------------------------------------------

void cmd_synth(Context& ctx) {
  if (ctx.config.source != config::DataSource::kSynth) {
    throw ConfigError("synth needs dataset.source = synth");
  }
  const auto ds = data::generate_synthetic(ctx.config.synth, ctx.config.synth.seed);
  fs::create_directories(ctx.layout.data_dir());
  data::write_csv(ds.train, ctx.layout.train_csv(), ctx.config.label_column);
  data::write_csv(ds.test, ctx.layout.test_csv(), ctx.config.label_column);
  std::map<std::string, std::size_t> per_profile;
  std::size_t anomalies = 0;
  for (int p : ds.test_profile) {
    if (p < 0) continue;
    ++anomalies;
    ++per_profile[data::to_string(static_cast<data::AnomalyProfile>(p))];
  }
  std::string breakdown;
  for (const auto& [name, count] : per_profile) {
    breakdown += fmt::format("{}{}={}", breakdown.empty() ? "" : " ", name, count);
  }
  ctx.out << fmt::format("labels: train={} test={} anomalies={} rate={:.4f} {}\n",
                         ds.train.length(), ds.test.length(), anomalies,
                         static_cast<double>(anomalies) / static_cast<double>(ds.test.length()),
                         breakdown);
}

void cmd_pretrain(Context& ctx) {
  const fs::path train = pipeline::train_path(ctx.config);
  require_file(train, "training data");
  const auto series = pipeline::load_series(train, ctx.config.label_column, false);
  if (series.has_labels()) {
    for (int v : *series.labels()) {
      if (v != 0) spdlog::info("training data contains labelled anomalies; they are used as-is");
      if (v != 0) break;
    }
  }
  const data::TimeSeries reduced = data::downsample(series, ctx.config.downsample);
  const data::FeatureScaler scaler = data::fit_scaler(reduced);
  const data::TimeSeries scaled = data::apply_scaler(scaler, reduced);

  std::vector<std::pair<fs::path, nlohmann::json>> artifacts;
  for (std::size_t i = 0; i < ctx.config.pool.size(); ++i) {
    const auto kind = ctx.config.pool[i];
    const auto start = std::chrono::steady_clock::now();
    std::unique_ptr<detect::Detector> model;
    try {
      const auto windows = data::make_windows(scaled, ctx.config.hyper.window_for(kind));
      model = detect::fit(kind, windows, ctx.config.hyper, derive_seed(ctx.config.pool_seed, i));
    } catch (const Error& e) {
      throw Error(e.kind(), fmt::format("fitting {}: {}", detect::to_string(kind), e.what()));
    }
    const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
    ctx.out << fmt::format("fit {} in {:.2f} s\n", detect::to_string(kind), took.count());
    artifacts.emplace_back(ctx.layout.model_file(kind), detect::serialize(*model));
  }
  write_json(ctx.layout.scaler_file(), scaler.to_json());
  for (const auto& [path, doc] : artifacts) write_json(path, doc);
}

void cmd_score(Context& ctx) {
  const fs::path test = pipeline::test_path(ctx.config);
  require_file(test, "test data");
  require_file(ctx.layout.scaler_file(), "scaler artifact");
  for (auto kind : ctx.config.pool) require_file(ctx.layout.model_file(kind), "model artifact");

  pipeline::FittedPool fitted{
      data::FeatureScaler::from_json(read_json(ctx.layout.scaler_file())), {}};
  for (auto kind : ctx.config.pool) {
    auto model = detect::deserialize(read_json(ctx.layout.model_file(kind)));
    if (model->kind() != kind) {
      throw ConfigError(fmt::format("artifact {} holds a {} model, config expects {}",
                                    ctx.layout.model_file(kind).string(),
                                    detect::to_string(model->kind()), detect::to_string(kind)));
    }
    if (model->window_length() != ctx.config.hyper.window_for(kind)) {
      throw ConfigError(fmt::format("artifact for {} uses window {}, config says {}",
                                    detect::to_string(kind), model->window_length(),
                                    ctx.config.hyper.window_for(kind)));
    }
    fitted.models.push_back(std::move(model));
  }
  const auto series = pipeline::load_series(test, ctx.config.label_column, true);
  const auto pool =
      pipeline::score_with(fitted, series, ctx.config.downsample, ctx.config.contamination);
  pipeline::write_scores(pool, ctx.layout.scores_csv());
  ctx.out << fmt::format("scored {} detectors over {} timesteps\n", pool.size(), pool.length());
}

std::shared_ptr<const detect::ScoredPool> load_pool(const Context& ctx) {
  require_file(ctx.layout.scores_csv(), "score file");
  auto pool = std::make_shared<detect::ScoredPool>(pipeline::read_scores(ctx.layout.scores_csv()));
  if (pool->kinds != ctx.config.pool) {
    throw ConfigError("score file detectors do not match pool.detectors; rerun score");
  }
  return pool;
}

void cmd_train(Context& ctx) {
  const auto pool = load_pool(ctx);
  const auto spec = ctx.config.experiment_spec();
  std::vector<std::optional<dqn::TrainResult>> results(spec.seeds.size());
  eval::parallel_for(spec.seeds.size(), spec.jobs, [&](std::size_t i) {
    dqn::AgentConfig agent = spec.agent;
    agent.seed = spec.seeds[i];
    try {
      results[i] = dqn::train(
          [&] { return std::make_unique<mdp::DetectorSelectionEnv>(pool, spec.rewards, spec.mask); },
          agent);
    } catch (const Error& e) {
      throw Error(e.kind(), fmt::format("seed {}: {}", agent.seed, e.what()));
    }
  });
  std::string summary = "seed,episodes,gradient_steps,target_syncs,last_loss\n";
  for (std::size_t i = 0; i < results.size(); ++i) {
    auto& r = *results[i];
    nlohmann::json pool_order = nlohmann::json::array();
    for (auto kind : pool->kinds) pool_order.push_back(detect::to_string(kind));
    r.policy.metadata()["pool"] = pool_order;
    r.policy.metadata()["mask"] = spec.mask.name();
    r.policy.metadata()["config"] = [&] {
      dqn::AgentConfig agent = spec.agent;
      agent.seed = spec.seeds[i];
      return agent.to_json();
    }();
    r.policy.metadata()["rewards"] = {{"tp", spec.rewards.tp},
                                      {"tn", spec.rewards.tn},
                                      {"fp", spec.rewards.fp},
                                      {"fn", spec.rewards.fn}};
    write_json(ctx.layout.policy_file(spec.seeds[i]), r.policy.to_json());
    summary += fmt::format("{},{},{},{},{:.17g}\n", spec.seeds[i], r.stats.episode_returns.size(),
                           r.stats.gradient_steps, r.stats.target_syncs, r.stats.last_loss);
  }
  eval::write_text(ctx.layout.policies_dir() / "training.csv", summary);
  ctx.out << fmt::format("trained {} policies\n", results.size());
}

void cmd_eval(Context& ctx) {
  const auto pool = load_pool(ctx);
  const auto spec = ctx.config.experiment_spec();
  for (auto seed : spec.seeds) require_file(ctx.layout.policy_file(seed), "policy");
  std::vector<dqn::Policy> policies;
  nlohmann::json pool_order = nlohmann::json::array();
  for (auto kind : pool->kinds) pool_order.push_back(detect::to_string(kind));
  for (auto seed : spec.seeds) {
    const auto path = ctx.layout.policy_file(seed);
    auto policy = dqn::Policy::from_json(read_json(path));
    const auto& meta = policy.metadata();
    if (meta.value("pool", pool_order) != pool_order ||
        meta.value("mask", spec.mask.name()) != spec.mask.name()) {
      throw ConfigError(fmt::format("{} was trained for another pool or mask; rerun train",
                                    path.string()));
    }
    policies.push_back(std::move(policy));
  }
  std::vector<eval::SeedResult> results(spec.seeds.size());
  eval::parallel_for(spec.seeds.size(), spec.jobs, [&](std::size_t i) {
    try {
      results[i] = eval::evaluate_seed(policies[i], pool, spec.rewards, spec.mask, spec.seeds[i],
                                       spec.keep_traces);
    } catch (const Error& e) {
      throw Error(e.kind(), fmt::format("seed {}: {}", spec.seeds[i], e.what()));
    }
  });
  const auto report = eval::assemble_report(*pool, spec, std::move(results));
  eval::emit_report(report, ctx.layout.report_dir(), ctx.format);
  std::vector<fs::path> inputs{ctx.layout.scores_csv()};
  for (auto seed : spec.seeds) inputs.push_back(ctx.layout.policy_file(seed));
  write_manifest(ctx, "eval", inputs, ctx.layout.report_dir());
  ctx.out << eval::summary_markdown(report);
}

void cmd_sweep(Context& ctx) {
  const auto pool = load_pool(ctx);
  eval::SweepGrid grid = ctx.config.sweep;
  grid.tp = ctx.config.rewards.tp;
  grid.tn = ctx.config.rewards.tn;
  const auto report = eval::sweep(pool, grid, ctx.config.experiment_spec());
  eval::emit_sweep(report, ctx.layout.sweep_dir(), ctx.format);
  write_manifest(ctx, "sweep", {ctx.layout.scores_csv()}, ctx.layout.sweep_dir());
  ctx.out << eval::sweep_markdown(report);
}

void cmd_ablate(Context& ctx) {
  const auto pool = load_pool(ctx);
  const auto report = eval::ablate(pool, ctx.config.experiment_spec());
  eval::emit_ablation(report, ctx.layout.ablation_dir(), ctx.format);
  write_manifest(ctx, "ablate", {ctx.layout.scores_csv()}, ctx.layout.ablation_dir());
  ctx.out << eval::ablation_markdown(report);
}

void error_line(std::ostream& err, ErrorKind kind, const std::string& subcommand,
                const std::string& message) {
  const nlohmann::json line = {{"exit_code", static_cast<int>(kind)},
                               {"kind", kind_name(kind)},
                               {"subcommand", subcommand},
                               {"message", message}};
  err << "rlmsad-error " << line.dump() << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reinforcement-learning model selection over a pool of anomaly detectors."};
  app.require_subcommand(1);
  app.footer(config::keys_help() +
             "\nEnvironment: RLMSAD_LOG = error | info | debug (default info)\n"
             "Exit codes: 0 ok, 2 config error, 3 data error, 4 runtime failure");

  Options opts;
  using Handler = std::function<void(Context&)>;
  const std::vector<std::tuple<std::string, std::string, Handler>> commands{
      {"synth", "write the synthetic train/test CSVs", cmd_synth},
      {"pretrain", "fit every pool member on the training data", cmd_pretrain},
      {"score", "score the test data and write scores.csv", cmd_score},
      {"train", "train one DQN policy per seed", cmd_train},
      {"eval", "evaluate the trained policies against the baselines", cmd_eval},
      {"sweep", "train and evaluate over the FN x FP penalty grid", cmd_sweep},
      {"ablate", "compare the full state with each confidence score removed", cmd_ablate},
  };
  std::map<CLI::App*, Handler> handlers;
  for (const auto& [name, help, handler] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opts.config, "INI run configuration")->required();
    sub->add_option("--output", opts.output, "output directory (overrides experiment.output)");
    sub->add_option("--jobs", opts.jobs, "worker threads (overrides experiment.jobs)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--seed-override", opts.seed_override,
                    "use this seed for the generator, the detectors and a single agent run");
    sub->add_option("--format", opts.format, "report format")
        ->check(CLI::IsMember({"csv", "markdown"}));
    sub->footer(config::keys_help());
    handlers[sub] = handler;
  }

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    const auto parsed = app.get_subcommands();
    error_line(err, ErrorKind::kConfig, parsed.empty() ? "" : parsed.front()->get_name(), e.what());
    return static_cast<int>(ErrorKind::kConfig);
  }

  CLI::App* chosen = app.get_subcommands().front();
  const std::string name = chosen->get_name();
  try {
    configure_logging();
    Context ctx = load_context(opts, out);
    handlers.at(chosen)(ctx);
    return 0;
  } catch (const Error& e) {
    error_line(err, e.kind(), name, e.what());
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    error_line(err, ErrorKind::kRuntime, name, e.what());
    return static_cast<int>(ErrorKind::kRuntime);
  }
}

}  // namespace rlmsad::cli
