#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tiersim/energy.hpp"
#include "tiersim/node.hpp"
#include "tiersim/trace.hpp"

namespace tiersim {

struct ExperimentConfig {
  // A file is replayed verbatim every run; a spec is regenerated with
  // seed = base_seed + run index.
  std::variant<std::filesystem::path, TraceSpec> trace_source = reference_profile();
  std::vector<Tier> tiers = {Tier::kTier1, Tier::kTier2, Tier::kTier3};
  std::uint32_t runs = 3;
  std::uint64_t base_seed = 1;
  EnergyParams params = paper_calibrated();
  std::string params_label = "paper_calibrated";
  NodeConfig node;  // tier is overridden per run
  // Per-run stores go to <store_dir>/tier<T>-run<R>; in-memory when absent.
  std::optional<std::filesystem::path> store_dir;
  bool parallel = true;

  void validate() const;
};

struct RunRow {
  std::uint32_t run = 0;  // 1-based
  std::uint64_t seed = 0;
  std::uint64_t duration_ms = 0;
  std::uint64_t n_samples = 0;
  std::uint64_t n_tx_data = 0;
  std::uint64_t n_tx_alarm = 0;
  EnergyReport energy;
  double send_rate_ms = 0.0;
  // Pipeline observations.
  std::uint64_t acked_ok = 0;
  std::uint64_t alarms_persisted = 0;
  std::uint64_t camera_events = 0;
  std::uint64_t sip_events = 0;
  // Fall events in the trace and how many drew at least one alarm.
  std::uint64_t falls_in_trace = 0;
  std::uint64_t falls_alarmed = 0;

  std::uint64_t n_tx() const { return n_tx_data + n_tx_alarm; }
};

// One line of the per-tier table.
struct SummaryRow {
  double total_ws = 0.0;
  double power_w = 0.0;
  double data = 0.0;
  double send_rate_ms = 0.0;
  double samples = 0.0;
  double ws_per_sample = 0.0;
  double duration_ms = 0.0;
};

struct TierResult {
  Tier tier = Tier::kTier1;
  std::vector<RunRow> runs;
  SummaryRow max, min, average;

  // Average row expressed as a report, for compare().
  EnergyReport average_report() const;
};

struct RunResult {
  std::string trace_source;
  std::string params_label;
  EnergyParams params;
  std::vector<TierResult> tiers;  // sorted by tier
  std::optional<ComparisonReport> comparison;

  const TierResult* find(Tier tier) const;
};

RunResult run_experiment(const ExperimentConfig& config);

SummaryRow summarize_row(const RunRow& row);
// Fills max/min/average from the run rows.
void summarize(TierResult& tier);

enum class ReportFormat { kTable, kCsv };
std::string emit_report(const RunResult& result, ReportFormat format);

struct Check {
  std::string name;
  double measured = 0.0;
  std::string target;
  bool passed = false;
};

/// The quantitative claims for tiers 1-3 on the reference profile.
std::vector<Check> verify_against_paper(const RunResult& result);
std::string format_checks(const std::vector<Check>& checks);

// JSON results file consumed by `report` and `verify`.
std::string result_to_json(const RunResult& result);
RunResult result_from_json(std::string_view text);
void write_result(const RunResult& result, const std::filesystem::path& path);
RunResult load_result(const std::filesystem::path& path);

}  // namespace tiersim
