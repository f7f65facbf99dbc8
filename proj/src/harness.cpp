#include "tiersim/harness.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cmath>
#include <future>
#include <map>

#include "tiersim/errors.hpp"
#include "tiersim/station.hpp"
#include "tiersim/store.hpp"

namespace tiersim {

namespace fs = std::filesystem;

namespace {

std::string describe(const ExperimentConfig& c) {
  if (const auto* p = std::get_if<fs::path>(&c.trace_source)) return "file:" + p->string();
  const auto& s = std::get<TraceSpec>(c.trace_source);
  char buf[256];
  std::snprintf(buf, sizeof buf, "generated:duration_min=%g,interval_ms=%g,activity=%g,falls=%u,base_seed=%llu",
                s.duration_min, s.sample_interval_ms, s.activity_fraction, s.fall_count,
                static_cast<unsigned long long>(c.base_seed));
  return buf;
}

double mean_interval(std::uint64_t first, std::uint64_t last, std::uint64_t count) {
  if (count < 2) return 0.0;
  return static_cast<double>(last - first) / static_cast<double>(count - 1);
}

struct Pipeline {
  std::uint64_t acked_ok = 0;
  std::uint64_t alarms = 0;
  std::uint64_t camera = 0;
  std::uint64_t sip = 0;
};

// Node -> frame bytes -> base station -> line protocol -> ingestion -> store.
Pipeline push_through_station(const NodeLog& log, const NodeConfig& node, Store& store) {
  const RowId type = store.upsert(SensorType{0, "accelerometer"});
  store.upsert(SensorNode{0, address_hex(node.node_address), "body node", type, std::nullopt});

  NotificationLog notifications;
  Ingestor ingestor(store, notifications, IngestOptions{node.t_move, false});
  Pipeline p;
  std::uint32_t seq = 0;
  for (const TimedDecision& d : *log.decisions) {
    const auto bytes = encode_frame(frame_for(node.node_address, seq++, d));
    const IngestRecord record = forward(parse_frame(bytes));
    if (ingestor.handle_post(format_record(record)) == Ack::kOk) {
      ++p.acked_ok;
      if (record.kind == FrameKind::kAlarm) ++p.alarms;
    }
  }
  for (const auto& e : notifications.events()) {
    (e.kind == NotificationKind::kCameraSnapshotRequested ? p.camera : p.sip)++;
  }
  return p;
}

RunRow simulate_run(const ExperimentConfig& config, const Trace& trace, Tier tier, std::uint32_t run) {
  NodeConfig node = config.node;
  node.tier = tier;
  NodeLog log = run_node(trace, node, true);

  RunRow row;
  row.run = run;
  row.seed = trace.seed.value_or(0);
  row.duration_ms = log.duration_ms;
  row.n_samples = log.n_samples;
  row.n_tx_data = log.n_tx_data;
  row.n_tx_alarm = log.n_tx_alarm;
  row.energy = account(log, config.params);

  const auto& tx = *log.decisions;
  if (tier == Tier::kTier1) {
    row.send_rate_ms = tx.empty() ? 0.0 : mean_interval(tx.front().t_ms, tx.back().t_ms, tx.size());
  } else {
    row.send_rate_ms = mean_interval(trace.samples.front().t_ms, trace.samples.back().t_ms, trace.samples.size());
  }

  const auto events = fall_events(trace);
  row.falls_in_trace = events.size();
  for (const auto& ev : events) {
    const std::uint64_t from = trace.samples[ev.start].t_ms;
    // A window classifier reports at the end of its window, shortly after.
    const std::uint64_t to = trace.samples[ev.start + ev.length - 1].t_ms + node.refractory_ms;
    const bool hit = std::any_of(tx.begin(), tx.end(), [&](const TimedDecision& d) {
      return d.decision.kind() == DecisionKind::kTransmitAlarm && d.t_ms >= from && d.t_ms <= to;
    });
    if (hit) ++row.falls_alarmed;
  }

  Store store = Store::in_memory();
  if (config.store_dir) {
    const fs::path dir = *config.store_dir / ("tier" + std::string(to_string(tier)) + "-run" + std::to_string(run));
    fs::remove_all(dir);
    store = Store::open(dir, Durability::kFlush);
  }
  const Pipeline p = push_through_station(log, node, store);
  row.acked_ok = p.acked_ok;
  row.alarms_persisted = p.alarms;
  row.camera_events = p.camera;
  row.sip_events = p.sip;
  return row;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (runs < 1) throw SpecError("runs must be >= 1");
  if (tiers.empty()) throw SpecError("at least one tier is required");
  params.validate();
  for (Tier t : tiers) {
    NodeConfig probe = node;
    probe.tier = t;
    probe.validate();
  }
  if (const auto* spec = std::get_if<TraceSpec>(&trace_source)) spec->validate();
}

EnergyReport TierResult::average_report() const {
  EnergyReport r;
  r.total_ws = average.total_ws;
  r.power_w = average.power_w;
  r.ws_per_sample = average.ws_per_sample;
  r.duration_ms = static_cast<std::uint64_t>(std::llround(average.duration_ms));
  r.n_samples = static_cast<std::uint64_t>(std::llround(average.samples));
  r.n_tx = static_cast<std::uint64_t>(std::llround(average.data));
  return r;
}

const TierResult* RunResult::find(Tier tier) const {
  for (const auto& t : tiers) {
    if (t.tier == tier) return &t;
  }
  return nullptr;
}

SummaryRow summarize_row(const RunRow& row) {
  return {row.energy.total_ws,
          row.energy.power_w,
          static_cast<double>(row.n_tx()),
          row.send_rate_ms,
          static_cast<double>(row.n_samples),
          row.energy.ws_per_sample,
          static_cast<double>(row.duration_ms)};
}

void summarize(TierResult& tier) {
  if (tier.runs.empty()) return;
  auto fields = [](SummaryRow& r) {
    return std::array<double*, 7>{&r.total_ws, &r.power_w, &r.data, &r.send_rate_ms, &r.samples, &r.ws_per_sample,
                                  &r.duration_ms};
  };
  tier.max = tier.min = summarize_row(tier.runs.front());
  SummaryRow sum{};
  for (const auto& run : tier.runs) {
    SummaryRow r = summarize_row(run);
    auto v = fields(r);
    auto mx = fields(tier.max);
    auto mn = fields(tier.min);
    auto s = fields(sum);
    for (std::size_t i = 0; i < v.size(); ++i) {
      *mx[i] = std::max(*mx[i], *v[i]);
      *mn[i] = std::min(*mn[i], *v[i]);
      *s[i] += *v[i];
    }
  }
  auto s = fields(sum);
  auto avg = fields(tier.average);
  for (std::size_t i = 0; i < s.size(); ++i) *avg[i] = *s[i] / static_cast<double>(tier.runs.size());
}

RunResult run_experiment(const ExperimentConfig& config) {
  config.validate();

  std::optional<Trace> file_trace;
  if (const auto* path = std::get_if<fs::path>(&config.trace_source)) file_trace = load_trace(*path);

  // Traces are shared between tiers of the same run index.
  std::vector<std::shared_future<Trace>> traces;
  for (std::uint32_t r = 0; r < config.runs; ++r) {
    if (file_trace) {
      std::promise<Trace> p;
      p.set_value(*file_trace);
      traces.push_back(p.get_future().share());
    } else {
      const auto& spec = std::get<TraceSpec>(config.trace_source);
      const auto policy = config.parallel ? std::launch::async : std::launch::deferred;
      traces.push_back(std::async(policy, generate_trace, spec, config.base_seed + r).share());
    }
  }

  struct Job {
    Tier tier;
    std::uint32_t run;
    std::future<RunRow> row;
  };
  std::vector<Job> jobs;
  for (Tier tier : config.tiers) {
    for (std::uint32_t r = 0; r < config.runs; ++r) {
      auto task = [&config, trace = traces[r], tier, r] { return simulate_run(config, trace.get(), tier, r + 1); };
      jobs.push_back({tier, r + 1, std::async(config.parallel ? std::launch::async : std::launch::deferred, task)});
    }
  }

  std::map<Tier, TierResult> by_tier;
  for (auto& job : jobs) {
    TierResult& t = by_tier[job.tier];
    t.tier = job.tier;
    t.runs.push_back(job.row.get());
  }

  RunResult result;
  result.trace_source = describe(config);
  result.params_label = config.params_label;
  result.params = config.params;
  std::map<Tier, EnergyReport> averages;
  for (auto& [tier, t] : by_tier) {
    std::sort(t.runs.begin(), t.runs.end(), [](const RunRow& a, const RunRow& b) { return a.run < b.run; });
    summarize(t);
    averages[tier] = t.average_report();
    result.tiers.push_back(std::move(t));
  }
  if (averages.contains(Tier::kTier1) && averages.contains(Tier::kTier2)) result.comparison = compare(averages);
  return result;
}

}  // namespace tiersim
