#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "rlmsad/errors.hpp"
#include "rlmsad/evalharness.hpp"

namespace rlmsad::eval {

namespace fs = std::filesystem;

namespace {

std::string fraction(double v) { return fmt::format("{:.6f}", v); }

std::string rho(const std::optional<double>& v) {
  return v ? fmt::format("{:.6f}", *v) : std::string("undefined");
}

std::string markdown_table(const std::vector<ReportRow>& rows) {
  std::string out = "| Model | Precision (%) | Recall (%) | F1 (%) |\n|---|---|---|---|\n";
  for (const auto& r : rows) {
    const bool with_std = r.seeds > 1;
    out += fmt::format("| {} | {} | {} | {} |\n", r.model, format_percent(r.precision, with_std),
                       format_percent(r.recall, with_std), format_percent(r.f1, with_std));
  }
  return out;
}

}  // namespace

ReportFormat parse_report_format(const std::string& name) {
  if (name == "csv") return ReportFormat::kCsv;
  if (name == "markdown") return ReportFormat::kMarkdown;
  throw ConfigError(fmt::format("unknown report format '{}' (expected csv or markdown)", name));
}

std::string format_percent(const MeanStd& value, bool with_std) {
  if (!with_std) return fmt::format("{:.2f}", 100.0 * value.mean);
  return fmt::format("{:.2f} ({:.2f})", 100.0 * value.mean, 100.0 * value.std);
}

std::string summary_csv(const RunReport& report) {
  std::string out = std::string(kSummaryCsvHeader) + "\n";
  for (const auto& r : report.rows()) {
    out += fmt::format("{},{},{},{},{},{},{},{}\n", r.model, fraction(r.precision.mean),
                       fraction(r.precision.std), fraction(r.recall.mean), fraction(r.recall.std),
                       fraction(r.f1.mean), fraction(r.f1.std), r.seeds);
  }
  return out;
}

std::string summary_markdown(const RunReport& report, const std::string& title) {
  std::string out;
  if (!title.empty()) out += fmt::format("## {}\n\n", title);
  return out + markdown_table(report.rows());
}

std::string per_seed_csv(const RunReport& report) {
  std::string out =
      "seed,tp,tn,fp,fn,precision,recall,f1,precision_undefined,recall_undefined,episode_return\n";
  for (const auto& s : report.per_seed) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{:.17g}\n", s.seed, s.counts.tp,
                       s.counts.tn, s.counts.fp, s.counts.fn, fraction(s.metrics.precision),
                       fraction(s.metrics.recall), fraction(s.metrics.f1),
                       int(s.metrics.precision_undefined), int(s.metrics.recall_undefined),
                       s.episode_return);
  }
  return out;
}

std::string trace_csv(std::span<const mdp::Transition> trace) {
  std::string out = "timestep,action,reward,truth,prediction\n";
  for (const auto& tr : trace) {
    out += fmt::format("{},{},{:.17g},{},{}\n", tr.info.timestep, tr.action, tr.reward,
                       tr.info.truth, tr.info.prediction);
  }
  return out;
}

std::string sweep_trends_csv(const SweepReport& report) {
  std::string out = "varied,fixed_value,precision_spearman,recall_spearman\n";
  for (const auto& t : report.trends) {
    out += fmt::format("{},{},{},{}\n", t.varied, t.fixed_value, rho(t.precision_rho),
                       rho(t.recall_rho));
  }
  return out;
}

std::string sweep_cells_csv(const SweepReport& report) {
  std::string out = "fn,fp,precision_mean,precision_std,recall_mean,recall_std,f1_mean,f1_std,seeds\n";
  for (const auto& c : report.cells) {
    const auto& r = c.report.rlmsad;
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", c.rewards.fn, c.rewards.fp,
                       fraction(r.precision.mean), fraction(r.precision.std),
                       fraction(r.recall.mean), fraction(r.recall.std), fraction(r.f1.mean),
                       fraction(r.f1.std), r.seeds);
  }
  return out;
}

std::string sweep_markdown(const SweepReport& report) {
  std::string out = "| FN | FP | Precision (%) | Recall (%) | F1 (%) |\n|---|---|---|---|---|\n";
  for (const auto& c : report.cells) {
    const auto& r = c.report.rlmsad;
    const bool with_std = r.seeds > 1;
    out += fmt::format("| -{} | -{} | {} | {} | {} |\n", c.rewards.fn, c.rewards.fp,
                       format_percent(r.precision, with_std), format_percent(r.recall, with_std),
                       format_percent(r.f1, with_std));
  }
  out += "\n| Varied | Fixed | Spearman (precision) | Spearman (recall) |\n|---|---|---|---|\n";
  for (const auto& t : report.trends) {
    out += fmt::format("| {} | -{} | {} | {} |\n", t.varied, t.fixed_value, rho(t.precision_rho),
                       rho(t.recall_rho));
  }
  return out;
}

std::string ablation_csv(const AblationReport& report) {
  std::string out = std::string("variant,") + kSummaryCsvHeader + "\n";
  for (const auto& v : report.variants) {
    const auto& r = v.report.rlmsad;
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", v.name, r.model, fraction(r.precision.mean),
                       fraction(r.precision.std), fraction(r.recall.mean), fraction(r.recall.std),
                       fraction(r.f1.mean), fraction(r.f1.std), r.seeds);
  }
  return out;
}

std::string ablation_markdown(const AblationReport& report) {
  std::vector<ReportRow> rows;
  for (const auto& v : report.variants) {
    rows.push_back(v.report.rlmsad);
    rows.back().model = v.name;
  }
  return markdown_table(rows);
}

void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure(fmt::format("cannot write {}", path.string()));
  out << text;
  out.close();
  if (!out) throw RuntimeFailure(fmt::format("failed writing {}", path.string()));
}

void emit_report(const RunReport& report, const fs::path& dir, ReportFormat format) {
  if (format == ReportFormat::kCsv) {
    write_text(dir / "summary.csv", summary_csv(report));
  } else {
    write_text(dir / "summary.md", summary_markdown(report));
  }
  write_text(dir / "per_seed.csv", per_seed_csv(report));
  write_text(dir / "report_config.json", report.config.dump(2) + "\n");
  for (const auto& s : report.per_seed) {
    if (!s.trace.empty()) {
      write_text(dir / "traces" / fmt::format("seed_{}.csv", s.seed), trace_csv(s.trace));
    }
  }
}

void emit_sweep(const SweepReport& report, const fs::path& dir, ReportFormat format) {
  for (const auto& c : report.cells) {
    emit_report(c.report, dir / sweep_cell_name(c.rewards), format);
  }
  if (format == ReportFormat::kCsv) {
    write_text(dir / "cells.csv", sweep_cells_csv(report));
    write_text(dir / "trends.csv", sweep_trends_csv(report));
  } else {
    write_text(dir / "sweep.md", sweep_markdown(report));
  }
}

void emit_ablation(const AblationReport& report, const fs::path& dir, ReportFormat format) {
  for (const auto& v : report.variants) emit_report(v.report, dir / v.name, format);
  if (format == ReportFormat::kCsv) {
    write_text(dir / "ablation.csv", ablation_csv(report));
  } else {
    write_text(dir / "ablation.md", ablation_markdown(report));
  }
}

std::string content_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot read {}", path.string()));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const std::string body = buffer.str();
  const std::string header = fmt::format("blob {}", body.size());

  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  const bool ok = ctx != nullptr && EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size() + 1) == 1 &&
                  EVP_DigestUpdate(ctx, body.data(), body.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &length) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw RuntimeFailure("SHA-1 digest failed");
  std::string hex;
  for (unsigned int i = 0; i < length; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

}  // namespace rlmsad::eval
