#include <cmath>
#include <cstdio>

#include "json.hpp"
#include "text_util.hpp"
#include "tiersim/errors.hpp"
#include "tiersim/harness.hpp"

namespace tiersim {

namespace {

using nlohmann::json;

std::string tier_label(Tier t) { return t == Tier::kNeural ? "TN" : "T" + std::string(to_string(t)); }

std::string tier_title(Tier t) {
  return t == Tier::kNeural ? std::string("Tier neural") : "Tier " + std::string(to_string(t));
}

std::string count_cell(double v) {
  if (v == std::floor(v)) return detail::fixed(v, 0);
  return detail::fixed(v, 1);
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string lpad(std::string s, std::size_t width) {
  if (s.size() < width) s.insert(0, width - s.size(), ' ');
  return s;
}

void table_row(std::string& out, const std::string& label, const SummaryRow& r) {
  out += pad(label, 12);
  out += lpad(detail::fixed(r.total_ws, 2) + " Ws", 14);
  out += lpad(detail::fixed(r.power_w, 4) + " W", 12);
  out += lpad(count_cell(r.data), 10);
  out += lpad(detail::fixed(r.send_rate_ms, 2) + " ms", 12);
  out += lpad(count_cell(r.samples), 10);
  out += "\n";
}

void csv_row(std::string& out, Tier tier, const std::string& label, const SummaryRow& r) {
  out += std::string(to_string(tier)) + "," + label + "," + detail::fixed(r.total_ws, 6) + "," +
         detail::fixed(r.power_w, 6) + "," + count_cell(r.data) + "," + detail::fixed(r.send_rate_ms, 4) + "," +
         count_cell(r.samples) + "\n";
}

Check band_check(std::string name, double measured, double lo, double hi, std::string target) {
  return {std::move(name), measured, std::move(target), measured >= lo && measured <= hi};
}

Check missing(std::string name, std::string target) { return {std::move(name), NAN, std::move(target), false}; }

}  // namespace

std::string emit_report(const RunResult& result, ReportFormat format) {
  std::string out;
  if (format == ReportFormat::kCsv) {
    for (const auto& t : result.tiers) {
      out += "tier,row,total_ws,power_w,data,send_rate_ms,samples\n";
      for (const auto& run : t.runs) csv_row(out, t.tier, "Run" + std::to_string(run.run), summarize_row(run));
      csv_row(out, t.tier, "max", t.max);
      csv_row(out, t.tier, "min", t.min);
      csv_row(out, t.tier, "average", t.average);
    }
    if (result.comparison) {
      out += "from,to,power_reduction_pct,data_reduction_pct,ws_per_sample_from_mws,ws_per_sample_to_mws,"
             "ws_per_sample_reduction_pct\n";
      for (const auto& p : result.comparison->pairs) {
        out += std::string(to_string(p.from)) + "," + std::string(to_string(p.to)) + "," +
               detail::fixed(p.power_reduction_pct, 4) + "," + detail::fixed(p.data_reduction_pct, 4) + "," +
               detail::fixed(p.ws_per_sample_from, 4) + "," + detail::fixed(p.ws_per_sample_to, 4) + "," +
               detail::fixed(p.ws_per_sample_reduction_pct, 4) + "\n";
      }
    }
    return out;
  }

  out += "trace: " + result.trace_source + "\n";
  out += "params: " + result.params_label + "\n\n";
  for (const auto& t : result.tiers) {
    out += tier_title(t.tier) + "\n";
    out += pad("", 12) + lpad("Total", 14) + lpad("per minute", 12) + lpad("data", 10) + lpad("send rate", 12) +
           lpad("samples", 10) + "\n";
    for (const auto& run : t.runs) table_row(out, "Run" + std::to_string(run.run), summarize_row(run));
    table_row(out, "max", t.max);
    table_row(out, "min", t.min);
    table_row(out, "average", t.average);
    out += "\n";
  }
  if (result.comparison) {
    out += "Comparison\n";
    for (const auto& p : result.comparison->pairs) {
      const std::string arrow = tier_label(p.from) + "→" + tier_label(p.to);
      out += "power reduction " + arrow + ": " + detail::fixed(p.power_reduction_pct, 2) + "%\n";
      out += "data reduction " + arrow + ": " + detail::fixed(p.data_reduction_pct, 2) + "%\n";
      out += "mWs/sample " + arrow + ": " + detail::fixed(p.ws_per_sample_from, 4) + " → " +
             detail::fixed(p.ws_per_sample_to, 4) + " mWs (" + detail::fixed(p.ws_per_sample_reduction_pct, 2) +
             "% reduction)\n";
    }
  }
  return out;
}

std::vector<Check> verify_against_paper(const RunResult& result) {
  std::vector<Check> checks;
  const TierResult* t1 = result.find(Tier::kTier1);
  const TierResult* t2 = result.find(Tier::kTier2);
  const TierResult* t3 = result.find(Tier::kTier3);
  const ComparisonReport* cmp = result.comparison ? &*result.comparison : nullptr;
  const TierPairStats* p12 = cmp ? cmp->find(Tier::kTier1, Tier::kTier2) : nullptr;
  const TierPairStats* p23 = cmp ? cmp->find(Tier::kTier2, Tier::kTier3) : nullptr;

  if (p12) {
    checks.push_back(band_check("power reduction T1->T2 (%)", p12->power_reduction_pct, 12.2, 13.2, "12.7 +/- 0.5"));
    checks.push_back(band_check("data reduction T1->T2 (%)", p12->data_reduction_pct, 94.5, 96.5, "[94.5, 96.5]"));
  } else {
    checks.push_back(missing("power reduction T1->T2 (%)", "12.7 +/- 0.5"));
    checks.push_back(missing("data reduction T1->T2 (%)", "[94.5, 96.5]"));
  }

  if (t3) {
    bool all_eight = true;
    for (const auto& r : t3->runs) all_eight = all_eight && r.n_tx() == 8;
    checks.push_back({"tier-3 transmissions per run", t3->average.data, "8 in every run", all_eight});
  } else {
    checks.push_back(missing("tier-3 transmissions per run", "8 in every run"));
  }
  if (p23) {
    checks.push_back(band_check("data reduction T2->T3 (%)", p23->data_reduction_pct, 99.5, 100.0, ">= 99.5"));
  } else {
    checks.push_back(missing("data reduction T2->T3 (%)", ">= 99.5"));
  }
  if (t3) {
    const double rel = std::abs(t3->average.power_w - 0.1627) / 0.1627;
    checks.push_back({"tier-3 power (W)", t3->average.power_w, "0.1627 within 3%", rel <= 0.03});
  } else {
    checks.push_back(missing("tier-3 power (W)", "0.1627 within 3%"));
  }

  if (t1) {
    const double v = t1->average.ws_per_sample;
    checks.push_back({"tier-1 energy per sample (mWs)", v, "14.7942 +/- 1%", std::abs(v - 14.7942) <= 0.01 * 14.7942});
  } else {
    checks.push_back(missing("tier-1 energy per sample (mWs)", "14.7942 +/- 1%"));
  }
  if (t2) {
    const double v = t2->average.ws_per_sample;
    checks.push_back({"tier-2 energy per sample (mWs)", v, "8.1662 +/- 2%", std::abs(v - 8.1662) <= 0.02 * 8.1662});
  } else {
    checks.push_back(missing("tier-2 energy per sample (mWs)", "8.1662 +/- 2%"));
  }
  if (p12) {
    checks.push_back(band_check("energy-per-sample reduction T1->T2 (%)", p12->ws_per_sample_reduction_pct, 43.8, 45.8,
                                "44.8 +/- 1"));
  } else {
    checks.push_back(missing("energy-per-sample reduction T1->T2 (%)", "44.8 +/- 1"));
  }

  bool conserved = !result.tiers.empty();
  double mismatches = 0;
  for (const auto& t : result.tiers) {
    for (const auto& r : t.runs) {
      const bool ok = r.acked_ok == r.n_tx() && r.camera_events == r.alarms_persisted &&
                      r.sip_events == r.alarms_persisted && r.alarms_persisted == r.n_tx_alarm;
      if (!ok) {
        conserved = false;
        ++mismatches;
      }
    }
  }
  checks.push_back({"pipeline conservation (runs violating)", mismatches, "0", conserved});
  return checks;
}

std::string format_checks(const std::vector<Check>& checks) {
  std::string out;
  for (const auto& c : checks) {
    out += c.passed ? "PASS  " : "FAIL  ";
    out += c.name + ": measured " + (std::isnan(c.measured) ? std::string("n/a") : detail::fixed(c.measured, 4)) +
           ", target " + c.target + "\n";
  }
  return out;
}

// --- JSON -----------------------------------------------------------------------

namespace {

json to_json(const SummaryRow& r) {
  return {{"total_ws", r.total_ws},         {"power_w", r.power_w},         {"data", r.data},
          {"send_rate_ms", r.send_rate_ms}, {"samples", r.samples},         {"ws_per_sample", r.ws_per_sample},
          {"duration_ms", r.duration_ms}};
}

SummaryRow summary_from(const json& j) {
  return {j.at("total_ws").get<double>(),     j.at("power_w").get<double>(), j.at("data").get<double>(),
          j.at("send_rate_ms").get<double>(), j.at("samples").get<double>(), j.at("ws_per_sample").get<double>(),
          j.at("duration_ms").get<double>()};
}

json to_json(const EnergyReport& e) {
  return {{"total_ws", e.total_ws},       {"power_w", e.power_w},         {"n_tx", e.n_tx},
          {"n_samples", e.n_samples},     {"duration_ms", e.duration_ms}, {"ws_per_sample", e.ws_per_sample}};
}

EnergyReport energy_from(const json& j) {
  EnergyReport e;
  e.total_ws = j.at("total_ws").get<double>();
  e.power_w = j.at("power_w").get<double>();
  e.n_tx = j.at("n_tx").get<std::uint64_t>();
  e.n_samples = j.at("n_samples").get<std::uint64_t>();
  e.duration_ms = j.at("duration_ms").get<std::uint64_t>();
  e.ws_per_sample = j.at("ws_per_sample").get<double>();
  return e;
}

json to_json(const RunRow& r) {
  return {{"run", r.run},
          {"seed", r.seed},
          {"duration_ms", r.duration_ms},
          {"n_samples", r.n_samples},
          {"n_tx_data", r.n_tx_data},
          {"n_tx_alarm", r.n_tx_alarm},
          {"energy", to_json(r.energy)},
          {"send_rate_ms", r.send_rate_ms},
          {"acked_ok", r.acked_ok},
          {"alarms_persisted", r.alarms_persisted},
          {"camera_events", r.camera_events},
          {"sip_events", r.sip_events},
          {"falls_in_trace", r.falls_in_trace},
          {"falls_alarmed", r.falls_alarmed}};
}

RunRow run_from(const json& j) {
  RunRow r;
  r.run = j.at("run").get<std::uint32_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.duration_ms = j.at("duration_ms").get<std::uint64_t>();
  r.n_samples = j.at("n_samples").get<std::uint64_t>();
  r.n_tx_data = j.at("n_tx_data").get<std::uint64_t>();
  r.n_tx_alarm = j.at("n_tx_alarm").get<std::uint64_t>();
  r.energy = energy_from(j.at("energy"));
  r.send_rate_ms = j.at("send_rate_ms").get<double>();
  r.acked_ok = j.at("acked_ok").get<std::uint64_t>();
  r.alarms_persisted = j.at("alarms_persisted").get<std::uint64_t>();
  r.camera_events = j.at("camera_events").get<std::uint64_t>();
  r.sip_events = j.at("sip_events").get<std::uint64_t>();
  r.falls_in_trace = j.at("falls_in_trace").get<std::uint64_t>();
  r.falls_alarmed = j.at("falls_alarmed").get<std::uint64_t>();
  return r;
}

Tier tier_from(const json& j) {
  auto t = parse_tier(j.get<std::string>());
  if (!t) throw FormatError("results file: unknown tier " + j.dump());
  return *t;
}

}  // namespace

std::string result_to_json(const RunResult& result) {
  json tiers = json::array();
  for (const auto& t : result.tiers) {
    json runs = json::array();
    for (const auto& r : t.runs) runs.push_back(to_json(r));
    tiers.push_back({{"tier", std::string(to_string(t.tier))},
                     {"runs", runs},
                     {"max", to_json(t.max)},
                     {"min", to_json(t.min)},
                     {"average", to_json(t.average)}});
  }
  json j = {{"format", "tiersim-results"},
            {"version", 1},
            {"trace_source", result.trace_source},
            {"params_label", result.params_label},
            {"params",
             {{"e_tx_mws", result.params.e_tx_mws},
              {"p_listen_mw", result.params.p_listen_mw},
              {"p_base_mw", result.params.p_base_mw},
              {"e_sample_mws", result.params.e_sample_mws}}},
            {"tiers", tiers}};
  if (result.comparison) {
    json pairs = json::array();
    for (const auto& p : result.comparison->pairs) {
      pairs.push_back({{"from", std::string(to_string(p.from))},
                       {"to", std::string(to_string(p.to))},
                       {"power_reduction_pct", p.power_reduction_pct},
                       {"data_reduction_pct", p.data_reduction_pct},
                       {"ws_per_sample_from", p.ws_per_sample_from},
                       {"ws_per_sample_to", p.ws_per_sample_to},
                       {"ws_per_sample_reduction_pct", p.ws_per_sample_reduction_pct}});
    }
    j["comparison"] = pairs;
  }
  return j.dump(2) + "\n";
}

RunResult result_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    if (j.at("format") != "tiersim-results" || j.at("version") != 1) throw FormatError("not a tiersim results file");
    RunResult r;
    r.trace_source = j.at("trace_source").get<std::string>();
    r.params_label = j.at("params_label").get<std::string>();
    const auto& p = j.at("params");
    r.params = {p.at("p_listen_mw").get<double>(), p.at("p_base_mw").get<double>(), p.at("e_sample_mws").get<double>(),
                p.at("e_tx_mws").get<double>()};
    for (const auto& t : j.at("tiers")) {
      TierResult tr;
      tr.tier = tier_from(t.at("tier"));
      for (const auto& run : t.at("runs")) tr.runs.push_back(run_from(run));
      tr.max = summary_from(t.at("max"));
      tr.min = summary_from(t.at("min"));
      tr.average = summary_from(t.at("average"));
      r.tiers.push_back(std::move(tr));
    }
    if (j.contains("comparison")) {
      ComparisonReport cmp;
      for (const auto& pj : j.at("comparison")) {
        TierPairStats s;
        s.from = tier_from(pj.at("from"));
        s.to = tier_from(pj.at("to"));
        s.power_reduction_pct = pj.at("power_reduction_pct").get<double>();
        s.data_reduction_pct = pj.at("data_reduction_pct").get<double>();
        s.ws_per_sample_from = pj.at("ws_per_sample_from").get<double>();
        s.ws_per_sample_to = pj.at("ws_per_sample_to").get<double>();
        s.ws_per_sample_reduction_pct = pj.at("ws_per_sample_reduction_pct").get<double>();
        cmp.pairs.push_back(s);
      }
      r.comparison = std::move(cmp);
    }
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("results file: ") + e.what());
  }
}

void write_result(const RunResult& result, const std::filesystem::path& path) {
  detail::write_file(path, result_to_json(result));
}

RunResult load_result(const std::filesystem::path& path) { return result_from_json(detail::read_file(path)); }

}  // namespace tiersim
