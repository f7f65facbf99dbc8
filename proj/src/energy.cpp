#include "tiersim/energy.hpp"

#include <cmath>
#include <set>

#include "text_util.hpp"
#include "tiersim/errors.hpp"

namespace tiersim {

namespace {

double reduction_pct(double before, double after) {
  if (before == 0.0) return 0.0;
  return 100.0 * (1.0 - after / before);
}

}  // namespace

void EnergyParams::validate() const {
  for (double v : {p_listen_mw, p_base_mw, e_sample_mws, e_tx_mws}) {
    if (!std::isfinite(v) || v < 0.0) throw ValidationError("energy parameters must be finite and >= 0");
  }
}

double EnergyReport::tx_per_minute() const {
  if (duration_ms == 0) return 0.0;
  return static_cast<double>(n_tx) * 60000.0 / static_cast<double>(duration_ms);
}

CalibrationTargets paper_targets() { return {0.1834, 0.1601, 746.8, 37.2, 0.8, 0.5}; }

EnergyReport account(const NodeLog& log, const EnergyParams& params) {
  params.validate();
  EnergyReport r;
  r.n_tx = log.n_tx();
  r.n_samples = log.n_samples;
  r.duration_ms = log.duration_ms;
  const double duration_s = r.duration_s();
  r.total_ws = (duration_s * (params.p_listen_mw + params.p_base_mw) +
                static_cast<double>(log.n_samples) * params.e_sample_mws +
                static_cast<double>(r.n_tx) * params.e_tx_mws) /
               1000.0;
  r.power_w = duration_s > 0.0 ? r.total_ws / duration_s : 0.0;
  r.ws_per_sample = log.n_samples > 0 ? 1000.0 * r.total_ws / static_cast<double>(log.n_samples) : 0.0;
  return r;
}

// Per minute of tier-1 operation the budget is 60*p1 Ws. comm_share of it is
// radio (listen + tx), the rest is split between per-sample and static CPU.
// Tier 2 differs from tier 1 only in its transmission count, which fixes e_tx.
EnergyParams calibrate(const CalibrationTargets& t) {
  for (double v : {t.p1_w, t.p2_w, t.n_tx1, t.n_tx2, t.comm_share, t.cpu_split}) {
    if (!std::isfinite(v)) throw CalibrationError("calibration targets must be finite");
  }
  if (!(t.p1_w > t.p2_w)) throw CalibrationError("tier-1 power must exceed tier-2 power");
  if (!(t.n_tx1 > t.n_tx2)) throw CalibrationError("tier-1 transmissions must exceed tier-2 transmissions");
  if (t.p2_w < 0.0 || t.n_tx2 < 0.0) throw CalibrationError("targets must be non-negative");
  if (!(t.comm_share > 0.0 && t.comm_share < 1.0)) throw CalibrationError("comm_share must lie in (0, 1)");
  if (!(t.cpu_split >= 0.0 && t.cpu_split <= 1.0)) throw CalibrationError("cpu_split must lie in [0, 1]");

  EnergyParams p;
  p.e_tx_mws = 60.0 * (t.p1_w - t.p2_w) / (t.n_tx1 - t.n_tx2) * 1000.0;
  p.p_listen_mw = t.comm_share * t.p1_w * 1000.0 - t.n_tx1 * p.e_tx_mws / 60.0;
  const double budget_ws = 60.0 * t.p1_w * (1.0 - t.comm_share);
  p.e_sample_mws = 1000.0 * t.cpu_split * budget_ws / t.n_tx1;
  p.p_base_mw = 1000.0 * (1.0 - t.cpu_split) * budget_ws / 60.0;
  if (p.p_listen_mw < 0.0) {
    throw CalibrationError("transmission energy exceeds the communication budget (p_listen would be " +
                           detail::fixed(p.p_listen_mw, 3) + " mW)");
  }
  return p;
}

const EnergyParams& paper_calibrated() {
  static const EnergyParams preset = calibrate(paper_targets());
  return preset;
}

const TierPairStats* ComparisonReport::find(Tier from, Tier to) const {
  for (const auto& p : pairs) {
    if (p.from == from && p.to == to) return &p;
  }
  return nullptr;
}

ComparisonReport compare(const std::map<Tier, EnergyReport>& reports) {
  if (!reports.contains(Tier::kTier1)) throw ComparisonError("comparison needs a tier-1 report");
  if (!reports.contains(Tier::kTier2)) throw ComparisonError("comparison needs a tier-2 report");
  ComparisonReport out;
  for (auto a = reports.begin(); a != reports.end(); ++a) {
    for (auto b = std::next(a); b != reports.end(); ++b) {
      const EnergyReport& ra = a->second;
      const EnergyReport& rb = b->second;
      TierPairStats s;
      s.from = a->first;
      s.to = b->first;
      s.power_reduction_pct = reduction_pct(ra.power_w, rb.power_w);
      s.data_reduction_pct = reduction_pct(ra.tx_per_minute(), rb.tx_per_minute());
      s.ws_per_sample_from = ra.ws_per_sample;
      s.ws_per_sample_to = rb.ws_per_sample;
      s.ws_per_sample_reduction_pct = reduction_pct(ra.ws_per_sample, rb.ws_per_sample);
      out.pairs.push_back(s);
    }
  }
  return out;
}

std::string format_params(const EnergyParams& p) {
  std::string out;
  out += "e_tx_mws=" + detail::exact(p.e_tx_mws) + "\n";
  out += "p_listen_mw=" + detail::exact(p.p_listen_mw) + "\n";
  out += "p_base_mw=" + detail::exact(p.p_base_mw) + "\n";
  out += "e_sample_mws=" + detail::exact(p.e_sample_mws) + "\n";
  return out;
}

EnergyParams parse_params(std::string_view text) {
  EnergyParams p;
  std::set<std::string_view> seen;
  std::size_t line_no = 0;
  for (std::string_view line : detail::split_lines(text)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected key=value");
    const std::string_view key = line.substr(0, eq);
    double value = 0.0;
    if (!detail::parse_number(line.substr(eq + 1), value)) throw ParseError(line_no, "bad number");
    double* slot = nullptr;
    if (key == "e_tx_mws") slot = &p.e_tx_mws;
    else if (key == "p_listen_mw") slot = &p.p_listen_mw;
    else if (key == "p_base_mw") slot = &p.p_base_mw;
    else if (key == "e_sample_mws") slot = &p.e_sample_mws;
    else throw ParseError(line_no, "unknown key '" + std::string(key) + "'");
    *slot = value;
    seen.insert(key);
  }
  if (seen.size() != 4) throw FormatError("params file must define e_tx_mws, p_listen_mw, p_base_mw, e_sample_mws");
  p.validate();
  return p;
}

void write_params(const EnergyParams& params, const std::filesystem::path& path) {
  detail::write_file(path, format_params(params));
}

EnergyParams load_params(const std::filesystem::path& path) { return parse_params(detail::read_file(path)); }

EnergyParams resolve_params(std::string_view source) {
  if (source == "paper" || source == "paper_calibrated") return paper_calibrated();
  return load_params(std::filesystem::path(std::string(source)));
}

}  // namespace tiersim
