#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

#include "tiersim/classify.hpp"
#include "tiersim/trace.hpp"

namespace tiersim {

enum class Tier : std::uint8_t { kTier1 = 1, kTier2 = 2, kTier3 = 3, kNeural = 4 };

std::string_view to_string(Tier t);
// Accepts "1", "2", "3", "neural" (and "tier1".. "tier3").
std::optional<Tier> parse_tier(std::string_view s);

// Alarm code sent by the threshold fall detector.
inline constexpr std::uint16_t kFallAlarmCode = 1;

struct NodeConfig {
  Tier tier = Tier::kTier1;
  double t_move = 2.0;  // g^2
  double t_fall = 6.0;  // g^2
  std::uint64_t refractory_ms = 2000;
  std::uint64_t node_address = 1;
  // Required for Tier::kNeural.
  std::shared_ptr<const WindowDetector> detector;

  void validate() const;
};

enum class DecisionKind : std::uint8_t { kSilent, kTransmitData, kTransmitAlarm };

struct Decision {
  using Payload = std::variant<std::monostate, AccelSample, std::uint16_t>;

  Payload payload;

  static Decision silent() { return {}; }
  static Decision data(const AccelSample& s) { return {s}; }
  static Decision alarm(std::uint16_t code) { return {code}; }

  DecisionKind kind() const { return static_cast<DecisionKind>(payload.index()); }
  bool transmits() const { return kind() != DecisionKind::kSilent; }
  bool operator==(const Decision&) const = default;
};

/// A decision together with the time of the sample that caused it.
struct TimedDecision {
  std::uint64_t t_ms = 0;
  Decision decision;
  bool operator==(const TimedDecision&) const = default;
};

/// One body-worn node executing a tier policy sample by sample.
class NodeSimulator {
 public:
  explicit NodeSimulator(NodeConfig config);

  // Throws OrderError unless sample.t_ms exceeds the previous sample's.
  Decision decide(const AccelSample& sample);

  const NodeConfig& config() const { return config_; }
  std::size_t samples_seen() const { return seen_; }

 private:
  Decision decide_neural(const AccelSample& sample);

  NodeConfig config_;
  std::optional<std::uint64_t> last_t_;
  std::optional<std::uint64_t> last_alarm_t_;
  std::size_t seen_ = 0;
  std::deque<AccelSample> window_;
};

struct NodeLog {
  std::uint64_t duration_ms = 0;
  std::uint64_t n_samples = 0;
  std::uint64_t n_tx_data = 0;
  std::uint64_t n_tx_alarm = 0;
  std::optional<std::vector<TimedDecision>> decisions;  // transmissions only
  NodeConfig config;

  std::uint64_t n_tx() const { return n_tx_data + n_tx_alarm; }
};

/// Folds NodeSimulator::decide over the trace. With `record_decisions`, the log
/// keeps every transmitting decision in order (silent ones are implied).
NodeLog run_node(const Trace& trace, const NodeConfig& config, bool record_decisions = false);

// Counter-wise sum of two logs, as if the runs were back to back.
NodeLog concat(const NodeLog& a, const NodeLog& b);

}  // namespace tiersim
