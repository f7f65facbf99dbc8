#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "tiersim/node.hpp"

namespace tiersim {

/// Per-operation energy constants of the affine node model
///
///   E = duration * (p_listen + p_base) + n_samples * e_sample + n_tx * e_tx
///
/// The radio never sleeps, so p_listen is paid for the whole run.
struct EnergyParams {
  double p_listen_mw = 0.0;
  double p_base_mw = 0.0;
  double e_sample_mws = 0.0;
  double e_tx_mws = 0.0;

  void validate() const;
  bool operator==(const EnergyParams&) const = default;
};

struct EnergyReport {
  double total_ws = 0.0;
  double power_w = 0.0;
  std::uint64_t n_tx = 0;
  std::uint64_t n_samples = 0;
  std::uint64_t duration_ms = 0;
  double ws_per_sample = 0.0;  // mWs

  double duration_s() const { return static_cast<double>(duration_ms) / 1000.0; }
  // Transmissions per minute; 0 for an empty run.
  double tx_per_minute() const;
};

struct CalibrationTargets {
  double p1_w = 0.0;
  double p2_w = 0.0;
  double n_tx1 = 0.0;  // per minute; also the tier-1 samples per minute
  double n_tx2 = 0.0;
  double comm_share = 0.8;
  double cpu_split = 0.5;
};

// 0.1834 W / 0.1601 W, 746.8 / 37.2 tx per minute.
CalibrationTargets paper_targets();

EnergyReport account(const NodeLog& log, const EnergyParams& params);

EnergyParams calibrate(const CalibrationTargets& targets);

// calibrate(paper_targets()), computed once.
const EnergyParams& paper_calibrated();

struct TierPairStats {
  Tier from = Tier::kTier1;
  Tier to = Tier::kTier2;
  double power_reduction_pct = 0.0;
  double data_reduction_pct = 0.0;
  double ws_per_sample_from = 0.0;
  double ws_per_sample_to = 0.0;
  double ws_per_sample_reduction_pct = 0.0;
};

struct ComparisonReport {
  std::vector<TierPairStats> pairs;  // every ordered pair (a, b) with a < b

  const TierPairStats* find(Tier from, Tier to) const;
};

ComparisonReport compare(const std::map<Tier, EnergyReport>& reports);

// key=value lines: e_tx_mws, p_listen_mw, p_base_mw, e_sample_mws.
std::string format_params(const EnergyParams& params);
EnergyParams parse_params(std::string_view text);
void write_params(const EnergyParams& params, const std::filesystem::path& path);
EnergyParams load_params(const std::filesystem::path& path);

// "paper" / "paper_calibrated" select the preset; anything else is a path.
EnergyParams resolve_params(std::string_view source);

}  // namespace tiersim
