#include "tiersim/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "rng.hpp"
#include "tiersim/errors.hpp"
#include "text_util.hpp"

namespace tiersim {

namespace {

constexpr std::string_view kHeader = "t_ms,ax_g,ay_g,az_g,label";
constexpr double kMinFallSeparationMs = 10000.0;

double quantize6(double v) {
  double q = std::round(v * 1e6) / 1e6;
  return q == 0.0 ? 0.0 : q;  // no negative zero in the CSV
}

void require(bool ok, const char* what) {
  if (!ok) throw SpecError(what);
}

std::vector<std::size_t> fall_starts(const TraceSpec& spec, std::size_t n) {
  std::vector<std::size_t> starts;
  if (spec.fall_count == 0) return starts;
  const double spacing = static_cast<double>(n) / spec.fall_count;
  const std::size_t fd = spec.fall_duration_samples;
  for (std::uint32_t k = 0; k < spec.fall_count; ++k) {
    auto centre = static_cast<std::int64_t>(std::floor((k + 0.5) * spacing));
    std::int64_t start = centre - static_cast<std::int64_t>(fd / 2);
    start = std::clamp<std::int64_t>(start, 0, static_cast<std::int64_t>(n - fd));
    starts.push_back(static_cast<std::size_t>(start));
  }
  return starts;
}

}  // namespace

std::string_view to_string(Activity a) {
  switch (a) {
    case Activity::kRest: return "REST";
    case Activity::kWalk: return "WALK";
    case Activity::kFall: return "FALL";
  }
  return "?";
}

std::optional<Activity> parse_activity(std::string_view s) {
  if (s == "REST") return Activity::kRest;
  if (s == "WALK") return Activity::kWalk;
  if (s == "FALL") return Activity::kFall;
  return std::nullopt;
}

std::uint64_t TraceSpec::sample_count() const {
  return static_cast<std::uint64_t>(std::llround(duration_min * 60000.0 / sample_interval_ms));
}

Band TraceSpec::band_for(Activity a) const {
  switch (a) {
    case Activity::kRest: return rest_band;
    case Activity::kWalk: return walk_band;
    case Activity::kFall: return Band{fall_floor, fall_ceiling};
  }
  return rest_band;
}

void TraceSpec::validate() const {
  require(std::isfinite(duration_min) && duration_min > 0, "duration_min must be > 0");
  require(std::isfinite(sample_interval_ms) && sample_interval_ms >= 0.5,
          "sample_interval_ms must be >= 0.5");
  require(activity_fraction >= 0.0 && activity_fraction <= 1.0,
          "activity_fraction must lie in [0, 1]");
  require(fall_duration_samples >= 1, "fall_duration_samples must be >= 1");
  require(walk_bout_samples >= 1, "walk_bout_samples must be >= 1");
  require(rest_band.lo >= 0 && rest_band.lo < rest_band.hi, "rest_band must be a non-empty band >= 0");
  require(walk_band.lo < walk_band.hi, "walk_band must be non-empty");
  require(fall_floor < fall_ceiling, "fall band must be non-empty");
  require(walk_band.lo >= rest_band.hi, "walk_band lower bound must be >= rest_band upper bound");
  require(fall_floor >= walk_band.hi, "fall_floor must be >= walk_band upper bound");

  const auto n = sample_count();
  require(n >= 1, "trace would contain no samples");
  const double fall_samples = static_cast<double>(fall_count) * fall_duration_samples;
  require(activity_fraction + fall_samples / static_cast<double>(n) <= 1.0,
          "activity_fraction + fall sample fraction must be <= 1");

  if (fall_count > 1) {
    const auto step = static_cast<double>(std::llround(sample_interval_ms));
    const auto starts = fall_starts(*this, n);
    for (std::size_t k = 1; k < starts.size(); ++k) {
      const double gap_samples = static_cast<double>(starts[k]) -
                                 static_cast<double>(starts[k - 1] + fall_duration_samples - 1);
      require(gap_samples * step > kMinFallSeparationMs, "falls must be separated by more than 10 s");
    }
  }
}

TraceSpec reference_profile() {
  TraceSpec spec;
  spec.duration_min = 233.0;
  spec.sample_interval_ms = 80.59;
  spec.activity_fraction = 0.0498;
  spec.fall_count = 8;
  spec.fall_duration_samples = 3;
  return spec;
}

Trace generate_trace(const TraceSpec& spec, std::uint64_t seed) {
  spec.validate();
  detail::Rng rng(seed);

  const auto n = static_cast<std::size_t>(spec.sample_count());
  const auto step = static_cast<std::uint64_t>(std::llround(spec.sample_interval_ms));
  std::vector<Activity> labels(n, Activity::kRest);

  for (std::size_t start : fall_starts(spec, n)) {
    std::fill_n(labels.begin() + static_cast<std::ptrdiff_t>(start), spec.fall_duration_samples,
                Activity::kFall);
  }

  // Walking is laid out in bouts, one per equal segment, at a seeded offset.
  const auto walk_target = static_cast<std::size_t>(std::llround(spec.activity_fraction * n));
  std::size_t walked = 0;
  if (walk_target > 0) {
    const std::size_t bout = spec.walk_bout_samples;
    const std::size_t n_bouts = (walk_target + bout - 1) / bout;
    const double segment = static_cast<double>(n) / n_bouts;
    for (std::size_t j = 0; j < n_bouts && walked < walk_target; ++j) {
      const double slack = std::max(0.0, segment - static_cast<double>(bout));
      auto i = static_cast<std::size_t>(j * segment + rng.uniform01() * slack);
      std::size_t placed = 0;
      for (; i < n && placed < bout && walked < walk_target; ++i) {
        if (labels[i] != Activity::kRest) continue;
        labels[i] = Activity::kWalk;
        ++placed;
        ++walked;
      }
    }
    for (std::size_t i = 0; i < n && walked < walk_target; ++i) {
      if (labels[i] == Activity::kRest) {
        labels[i] = Activity::kWalk;
        ++walked;
      }
    }
  }

  Trace trace;
  trace.sample_interval_ms = spec.sample_interval_ms;
  trace.seed = seed;
  trace.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Band band = spec.band_for(labels[i]);
    AccelSample s;
    s.t_ms = i * step;
    s.label = labels[i];
    // Quantisation to 6 decimals can push a draw across a band edge; redraw.
    do {
      const double m2 = rng.uniform(band.lo, band.hi);
      const double z = rng.uniform(-1.0, 1.0);
      const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double rxy = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double r = std::sqrt(m2);
      s.ax = quantize6(r * rxy * std::cos(phi));
      s.ay = quantize6(r * rxy * std::sin(phi));
      s.az = quantize6(r * z);
    } while (!band.contains(magnitude_sq(s)));
    trace.samples.push_back(s);
  }
  return trace;
}

std::string format_trace(const Trace& trace) {
  if (trace.samples.empty()) throw FormatError("empty trace");
  std::string out;
  out.reserve(48 * (trace.samples.size() + 1));
  out.append(kHeader).push_back('\n');
  char buf[160];
  std::uint64_t prev = 0;
  bool first = true;
  for (const auto& s : trace.samples) {
    if (!first && s.t_ms <= prev) {
      throw FormatError("t_ms not strictly increasing at t_ms=" + std::to_string(s.t_ms));
    }
    first = false;
    prev = s.t_ms;
    const int len = std::snprintf(buf, sizeof buf, "%llu,%.6f,%.6f,%.6f,%s\n",
                                  static_cast<unsigned long long>(s.t_ms), s.ax, s.ay, s.az,
                                  to_string(s.label).data());
    out.append(buf, static_cast<std::size_t>(len));
  }
  return out;
}

Trace parse_trace(std::string_view text) {
  Trace trace;
  trace.seed.reset();
  std::size_t line_no = 0;
  bool saw_header = false;
  for (std::string_view line : detail::split_lines(text)) {
    ++line_no;
    if (!saw_header) {
      if (line != kHeader) throw ParseError(line_no, "expected header '" + std::string(kHeader) + "'");
      saw_header = true;
      continue;
    }
    const auto fields = detail::split(line, ',');
    if (fields.size() != 5) {
      throw ParseError(line_no, "expected 5 fields, got " + std::to_string(fields.size()));
    }
    AccelSample s;
    if (!detail::parse_number(fields[0], s.t_ms)) throw ParseError(line_no, "bad t_ms");
    if (!detail::parse_number(fields[1], s.ax) || !detail::parse_number(fields[2], s.ay) ||
        !detail::parse_number(fields[3], s.az)) {
      throw ParseError(line_no, "bad acceleration value");
    }
    auto label = parse_activity(fields[4]);
    if (!label) throw ParseError(line_no, "unknown label '" + std::string(fields[4]) + "'");
    s.label = *label;
    if (!trace.samples.empty() && s.t_ms <= trace.samples.back().t_ms) {
      throw FormatError("t_ms not strictly increasing at line " + std::to_string(line_no));
    }
    trace.samples.push_back(s);
  }
  if (trace.samples.empty()) throw FormatError("empty trace");

  const auto& v = trace.samples;
  if (v.size() >= 2) {
    trace.sample_interval_ms =
        static_cast<double>(v.back().t_ms - v.front().t_ms) / static_cast<double>(v.size() - 1);
    const std::uint64_t gap = v[1].t_ms - v[0].t_ms;
    trace.regular_spacing = std::adjacent_find(v.begin(), v.end(), [gap](const auto& a, const auto& b) {
                              return b.t_ms - a.t_ms != gap;
                            }) == v.end();
  }
  return trace;
}

void write_trace(const Trace& trace, const std::filesystem::path& path) {
  const std::string text = format_trace(trace);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

Trace load_trace(const std::filesystem::path& path) {
  return parse_trace(detail::read_file(path));
}

std::vector<FallEvent> fall_events(const Trace& trace) {
  std::vector<FallEvent> events;
  const auto& v = trace.samples;
  for (std::size_t i = 0; i < v.size();) {
    if (v[i].label != Activity::kFall) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < v.size() && v[j].label == Activity::kFall) ++j;
    events.push_back({i, j - i});
    i = j;
  }
  return events;
}

}  // namespace tiersim
