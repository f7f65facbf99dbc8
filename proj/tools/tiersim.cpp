// tiersim command line: trace generation, tier simulation, reports, calibration,
// the ingestion server and store maintenance.

#include <csignal>
#include <cstdio>
#include <iostream>
#include <memory>

#include "CLI11.hpp"
#include "tiersim/classify.hpp"
#include "tiersim/energy.hpp"
#include "tiersim/errors.hpp"
#include "tiersim/harness.hpp"
#include "tiersim/station.hpp"
#include "tiersim/store.hpp"
#include "tiersim/trace.hpp"

namespace {

using namespace tiersim;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

void emit(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << text;
    return;
  }
  std::FILE* f = std::fopen(out.c_str(), "wb");
  if (!f) throw IoError("cannot open " + out + " for writing");
  const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size();
  if (std::fclose(f) != 0 || !ok) throw IoError("write to " + out + " failed");
}

struct TracesGen {
  std::string profile = "reference";
  double duration_min = 1.0;
  double interval_ms = 80.59;
  double activity = 0.0;
  std::uint32_t falls = 0;
  std::uint64_t seed = 1;
  std::string out;
};

int run_traces_gen(const TracesGen& o, const CLI::App& cmd) {
  TraceSpec spec = reference_profile();
  if (o.profile == "custom") {
    spec = TraceSpec{};
    spec.duration_min = o.duration_min;
    spec.sample_interval_ms = o.interval_ms;
    spec.activity_fraction = o.activity;
    spec.fall_count = o.falls;
  } else {
    // Explicit flags refine the reference profile.
    if (cmd.count("--duration-min")) spec.duration_min = o.duration_min;
    if (cmd.count("--interval-ms")) spec.sample_interval_ms = o.interval_ms;
    if (cmd.count("--activity")) spec.activity_fraction = o.activity;
    if (cmd.count("--falls")) spec.fall_count = o.falls;
  }
  const Trace trace = generate_trace(spec, o.seed);
  emit(format_trace(trace), o.out);
  std::fprintf(stderr, "%zu samples, %zu falls\n", trace.samples.size(), fall_events(trace).size());
  return kExitOk;
}

struct Simulate {
  std::vector<std::string> tiers{"1", "2", "3"};
  std::string trace;
  std::string profile = "reference";
  std::uint32_t runs = 3;
  std::uint64_t seed = 1;
  std::string params = "paper";
  std::string store;
  std::string out;
  std::string model;
  double t_move = 2.0;
  double t_fall = 6.0;
  std::uint64_t refractory_ms = 2000;
  bool serial = false;
};

int run_simulate(const Simulate& o) {
  ExperimentConfig config;
  config.tiers.clear();
  for (const auto& name : o.tiers) {
    const auto tier = parse_tier(name);
    if (!tier) throw SpecError("unknown tier '" + name + "'");
    config.tiers.push_back(*tier);
  }
  if (!o.trace.empty()) {
    config.trace_source = std::filesystem::path(o.trace);
  } else if (o.profile != "reference") {
    throw SpecError("unknown profile '" + o.profile + "'");
  }
  config.runs = o.runs;
  config.base_seed = o.seed;
  config.params = resolve_params(o.params);
  config.params_label = o.params == "paper" ? "paper_calibrated" : o.params;
  config.node.t_move = o.t_move;
  config.node.t_fall = o.t_fall;
  config.node.refractory_ms = o.refractory_ms;
  if (!o.model.empty()) config.node.detector = std::make_shared<const WindowDetector>(load_detector(o.model));
  if (!o.store.empty()) config.store_dir = std::filesystem::path(o.store);
  config.parallel = !o.serial;

  const RunResult result = run_experiment(config);
  if (o.out.empty()) {
    std::cout << emit_report(result, ReportFormat::kTable);
  } else {
    write_result(result, o.out);
  }
  return kExitOk;
}

int run_verify(const std::string& in) {
  const auto checks = verify_against_paper(load_result(in));
  std::cout << format_checks(checks);
  for (const auto& c : checks) {
    if (!c.passed) return kExitCheckFailed;
  }
  return kExitOk;
}

struct Calibrate {
  CalibrationTargets targets = paper_targets();
  std::string out;
};

struct Serve {
  int port = default_port();
  std::string host = "0.0.0.0";
  std::string store;
  double risk_threshold = 2.0;
};

int run_serve(const Serve& o) {
  // Block termination signals before the server spawns threads, then wait for
  // one on the main thread.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  Store store = o.store.empty() ? Store::in_memory() : Store::open(o.store, Durability::kFsync);
  NotificationLog notifications;
  Ingestor ingestor(store, notifications, IngestOptions{o.risk_threshold, true});
  IngestServer server(ingestor, o.host, o.port);
  const int port = server.start();
  std::fprintf(stderr, "listening on %s:%d\n", o.host.c_str(), port);

  int sig = 0;
  sigwait(&signals, &sig);
  server.stop();
  std::fprintf(stderr, "stopped; %zu notification events\n", notifications.size());
  return kExitOk;
}

struct Upsert {
  std::string store;
  std::string entity;
  std::vector<std::string> fields;
};

int run_upsert(const Upsert& o) {
  std::map<std::string, std::string> fields;
  for (const auto& kv : o.fields) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw SpecError("expected key=value, got '" + kv + "'");
    fields[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  Store store = Store::open(o.store, Durability::kFsync);
  std::cout << store.upsert_entity(o.entity, fields) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tiered body sensor node simulator"};
  app.require_subcommand(1);

  auto* traces = app.add_subcommand("traces", "Trace files");
  traces->require_subcommand(1);
  TracesGen gen;
  auto* gen_cmd = traces->add_subcommand("gen", "Generate a synthetic accelerometer trace");
  gen_cmd->add_option("--profile", gen.profile)->check(CLI::IsMember({"reference", "custom"}));
  gen_cmd->add_option("--duration-min", gen.duration_min);
  gen_cmd->add_option("--interval-ms", gen.interval_ms);
  gen_cmd->add_option("--activity", gen.activity);
  gen_cmd->add_option("--falls", gen.falls);
  gen_cmd->add_option("--seed", gen.seed);
  gen_cmd->add_option("--out", gen.out, "Output CSV (stdout if omitted)");

  Simulate sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Run tiers over a trace, three runs each by default");
  sim_cmd->add_option("--tier", sim.tiers, "1, 2, 3 or neural; repeat or comma-separate")->delimiter(',');
  auto* trace_opt = sim_cmd->add_option("--trace", sim.trace, "Replay this trace file every run");
  sim_cmd->add_option("--profile", sim.profile)->excludes(trace_opt)->check(CLI::IsMember({"reference"}));
  sim_cmd->add_option("--runs", sim.runs)->check(CLI::PositiveNumber);
  sim_cmd->add_option("--seed", sim.seed);
  sim_cmd->add_option("--params", sim.params, "Params file or 'paper'");
  sim_cmd->add_option("--store", sim.store, "Persist per-run stores under this directory");
  sim_cmd->add_option("--out", sim.out, "Results JSON (table to stdout if omitted)");
  sim_cmd->add_option("--model", sim.model, "Detector model for the neural tier");
  sim_cmd->add_option("--t-move", sim.t_move);
  sim_cmd->add_option("--t-fall", sim.t_fall);
  sim_cmd->add_option("--refractory-ms", sim.refractory_ms);
  sim_cmd->add_flag("--serial", sim.serial, "Run tiers and runs one at a time");

  std::string report_in, report_format = "table";
  auto* report_cmd = app.add_subcommand("report", "Print tables from a results file");
  report_cmd->add_option("--in", report_in)->required();
  report_cmd->add_option("--format", report_format)->check(CLI::IsMember({"table", "csv"}));

  std::string verify_in;
  auto* verify_cmd = app.add_subcommand("verify", "Check a reference results file against the published figures");
  verify_cmd->add_option("--in", verify_in)->required();

  Calibrate cal;
  auto* cal_cmd = app.add_subcommand("calibrate", "Fit energy params to two measured tiers");
  cal_cmd->add_option("--p1", cal.targets.p1_w, "Tier-1 power (W)");
  cal_cmd->add_option("--p2", cal.targets.p2_w, "Tier-2 power (W)");
  cal_cmd->add_option("--ntx1", cal.targets.n_tx1, "Tier-1 transmissions per minute");
  cal_cmd->add_option("--ntx2", cal.targets.n_tx2, "Tier-2 transmissions per minute");
  cal_cmd->add_option("--share", cal.targets.comm_share);
  cal_cmd->add_option("--split", cal.targets.cpu_split);
  cal_cmd->add_option("--out", cal.out);

  Serve serve;
  auto* serve_cmd = app.add_subcommand("serve", "Run the ingestion endpoint until SIGINT");
  serve_cmd->add_option("--port", serve.port)->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--host", serve.host);
  serve_cmd->add_option("--store", serve.store, "Store directory (in-memory if omitted)");
  serve_cmd->add_option("--risk-threshold", serve.risk_threshold);

  int selftest_port = default_port();
  std::string selftest_host = "127.0.0.1";
  auto* selftest_cmd = app.add_subcommand("selftest", "Post a loopback record to a running server");
  selftest_cmd->add_option("--port", selftest_port)->check(CLI::Range(1, 65535));
  selftest_cmd->add_option("--host", selftest_host);

  std::string train_out;
  auto* train_cmd = app.add_subcommand("train", "Train the window detector used by the neural tier");
  train_cmd->add_option("--out", train_out)->required();

  std::string dump_store, dump_entity;
  bool dump_csv = true;
  auto* dump_cmd = app.add_subcommand("dump", "Export one entity of a store");
  dump_cmd->add_option("--store", dump_store)->required();
  dump_cmd->add_option("--entity", dump_entity)->required();
  dump_cmd->add_flag("--csv", dump_csv);

  Upsert upsert;
  auto* upsert_cmd = app.add_subcommand("upsert", "Insert or update one row: upsert --store D --entity E k=v...");
  upsert_cmd->add_option("--store", upsert.store)->required();
  upsert_cmd->add_option("--entity", upsert.entity)->required();
  upsert_cmd->add_option("fields", upsert.fields)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) return run_traces_gen(gen, *gen_cmd);
    if (sim_cmd->parsed()) return run_simulate(sim);
    if (report_cmd->parsed()) {
      const auto format = report_format == "csv" ? ReportFormat::kCsv : ReportFormat::kTable;
      std::cout << emit_report(load_result(report_in), format);
      return kExitOk;
    }
    if (verify_cmd->parsed()) return run_verify(verify_in);
    if (cal_cmd->parsed()) {
      emit(format_params(calibrate(cal.targets)), cal.out);
      return kExitOk;
    }
    if (serve_cmd->parsed()) return run_serve(serve);
    if (selftest_cmd->parsed()) {
      const auto r = self_test(selftest_host, selftest_port);
      std::cout << to_string(r) << "\n";
      return r == SelfTestResult::kSuccess ? kExitOk : kExitCheckFailed;
    }
    if (train_cmd->parsed()) {
      save_model(train_detector(default_detector_training()), train_out);
      return kExitOk;
    }
    if (dump_cmd->parsed()) {
      std::cout << Store::open(dump_store, Durability::kFlush).dump_csv(dump_entity);
      return kExitOk;
    }
    if (upsert_cmd->parsed()) return run_upsert(upsert);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}
