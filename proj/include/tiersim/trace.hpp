#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tiersim {

enum class Activity : std::uint8_t { kRest = 0, kWalk = 1, kFall = 2 };

std::string_view to_string(Activity a);
std::optional<Activity> parse_activity(std::string_view s);

struct AccelSample {
  std::uint64_t t_ms = 0;
  double ax = 0.0;
  double ay = 0.0;
  double az = 0.0;
  Activity label = Activity::kRest;

  bool operator==(const AccelSample&) const = default;
};

/// A timestamped triaxial acceleration stream.
///
/// Generated traces carry their seed and are evenly spaced by
/// round(sample_interval_ms). Imported traces have no seed; their interval is
/// the mean spacing of the file and `regular_spacing` records whether every
/// gap matched it.
struct Trace {
  double sample_interval_ms = 80.59;
  std::vector<AccelSample> samples;
  std::optional<std::uint64_t> seed;
  bool regular_spacing = true;
};

struct Band {
  double lo = 0.0;
  double hi = 0.0;  // exclusive
  bool contains(double v) const { return v >= lo && v < hi; }
};

struct TraceSpec {
  double duration_min = 1.0;
  double sample_interval_ms = 80.59;
  double activity_fraction = 0.0;
  std::uint32_t fall_count = 0;
  std::uint32_t fall_duration_samples = 3;
  Band rest_band{0.8, 1.2};
  Band walk_band{2.0, 6.0};
  double fall_floor = 6.0;
  double fall_ceiling = 12.0;
  std::uint32_t walk_bout_samples = 50;

  /// Throws SpecError naming the first violated constraint.
  void validate() const;
  std::uint64_t sample_count() const;
  Band band_for(Activity a) const;
};

/// 233 min at 80.59 ms, 4.98 % walking, eight 3-sample falls.
TraceSpec reference_profile();

Trace generate_trace(const TraceSpec& spec, std::uint64_t seed);

/// CSV with header `t_ms,ax_g,ay_g,az_g,label`, reals at 6 decimals.
std::string format_trace(const Trace& trace);
Trace parse_trace(std::string_view text);

void write_trace(const Trace& trace, const std::filesystem::path& path);
Trace load_trace(const std::filesystem::path& path);

inline double magnitude_sq(const AccelSample& s) {
  return s.ax * s.ax + s.ay * s.ay + s.az * s.az;
}

/// [start, start + length) index ranges of contiguous FALL-labelled runs.
struct FallEvent {
  std::size_t start = 0;
  std::size_t length = 0;
};
std::vector<FallEvent> fall_events(const Trace& trace);

}  // namespace tiersim
