#include "tiersim/node.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "tiersim/errors.hpp"

namespace tiersim {

std::string_view to_string(Tier t) {
  switch (t) {
    case Tier::kTier1: return "1";
    case Tier::kTier2: return "2";
    case Tier::kTier3: return "3";
    case Tier::kNeural: return "neural";
  }
  return "?";
}

std::optional<Tier> parse_tier(std::string_view s) {
  if (s == "1" || s == "tier1") return Tier::kTier1;
  if (s == "2" || s == "tier2") return Tier::kTier2;
  if (s == "3" || s == "tier3") return Tier::kTier3;
  if (s == "neural" || s == "NEURAL") return Tier::kNeural;
  return std::nullopt;
}

void NodeConfig::validate() const {
  if (!(t_move > 0.0)) throw SpecError("t_move must be > 0");
  if (!(t_fall >= t_move)) throw SpecError("t_fall must be >= t_move");
  if (tier == Tier::kNeural && !detector) throw SpecError("NEURAL tier needs a trained detector");
}

NodeSimulator::NodeSimulator(NodeConfig config) : config_(std::move(config)) { config_.validate(); }

Decision NodeSimulator::decide(const AccelSample& sample) {
  if (last_t_ && sample.t_ms <= *last_t_) {
    throw OrderError("sample at t_ms=" + std::to_string(sample.t_ms) + " does not follow t_ms=" +
                     std::to_string(*last_t_));
  }
  last_t_ = sample.t_ms;
  ++seen_;

  switch (config_.tier) {
    case Tier::kTier1:
      return Decision::data(sample);
    case Tier::kTier2:
      return magnitude_sq(sample) >= config_.t_move ? Decision::data(sample) : Decision::silent();
    case Tier::kTier3: {
      if (magnitude_sq(sample) < config_.t_fall) return Decision::silent();
      if (last_alarm_t_ && sample.t_ms - *last_alarm_t_ < config_.refractory_ms) return Decision::silent();
      last_alarm_t_ = sample.t_ms;
      return Decision::alarm(kFallAlarmCode);
    }
    case Tier::kNeural:
      return decide_neural(sample);
  }
  return Decision::silent();
}

// Windows start at sample indices 0, stride, 2*stride, ...; the decision for a
// window is attached to its last sample.
Decision NodeSimulator::decide_neural(const AccelSample& sample) {
  const WindowSpec& spec = config_.detector->window;
  window_.push_back(sample);
  if (window_.size() > spec.width) window_.pop_front();
  if (seen_ < spec.width || (seen_ - spec.width) % spec.stride != 0) return Decision::silent();

  std::vector<AccelSample> slice(window_.begin(), window_.end());
  const Activity cls = config_.detector->classify(window_features(slice, spec.feature));
  if (cls != Activity::kFall) return Decision::silent();
  return Decision::alarm(static_cast<std::uint16_t>(cls));
}

NodeLog run_node(const Trace& trace, const NodeConfig& config, bool record_decisions) {
  if (trace.samples.empty()) throw FormatError("empty trace");
  NodeSimulator node(config);
  NodeLog log;
  log.config = config;
  if (record_decisions) log.decisions.emplace();
  for (const auto& s : trace.samples) {
    Decision d = node.decide(s);
    switch (d.kind()) {
      case DecisionKind::kSilent: continue;
      case DecisionKind::kTransmitData: ++log.n_tx_data; break;
      case DecisionKind::kTransmitAlarm: ++log.n_tx_alarm; break;
    }
    if (log.decisions) log.decisions->push_back({s.t_ms, std::move(d)});
  }
  log.n_samples = trace.samples.size();
  const auto step = static_cast<std::uint64_t>(std::llround(trace.sample_interval_ms));
  log.duration_ms = trace.samples.back().t_ms - trace.samples.front().t_ms + step;
  return log;
}

NodeLog concat(const NodeLog& a, const NodeLog& b) {
  NodeLog out;
  out.config = a.config;
  out.duration_ms = a.duration_ms + b.duration_ms;
  out.n_samples = a.n_samples + b.n_samples;
  out.n_tx_data = a.n_tx_data + b.n_tx_data;
  out.n_tx_alarm = a.n_tx_alarm + b.n_tx_alarm;
  return out;
}

}  // namespace tiersim
