#include <fstream>
#include <random>

#include "doctest.h"
#include "test_util.hpp"
#include "tiersim/errors.hpp"
#include "tiersim/trace.hpp"

using namespace tiersim;

namespace {

TraceSpec one_minute() {
  TraceSpec s;
  s.duration_min = 1.0;
  return s;
}

std::size_t count_label(const Trace& t, Activity a) {
  std::size_t n = 0;
  for (const auto& s : t.samples) n += s.label == a;
  return n;
}

}  // namespace

TEST_CASE("quiet minute is 745 REST samples") {
  const Trace t = generate_trace(one_minute(), 1);
  CHECK(t.samples.size() == 745);
  CHECK(count_label(t, Activity::kRest) == 745);
  CHECK(t.seed == 1);
}

TEST_CASE("two falls of three samples give six FALL samples") {
  TraceSpec s = one_minute();
  s.fall_count = 2;
  const Trace t = generate_trace(s, 3);
  CHECK(count_label(t, Activity::kFall) == 6);
  const auto events = fall_events(t);
  REQUIRE(events.size() == 2);
  CHECK(events[0].length == 3);
  CHECK(events[1].length == 3);
}

TEST_CASE("reference profile counts") {
  const Trace t = generate_trace(reference_profile(), 1);
  // Recount the samples with a separate loop instead of the generator's own bookkeeping.
  std::size_t walk = 0, fall = 0, above = 0;
  for (const auto& s : t.samples) {
    walk += s.label == Activity::kWalk;
    fall += s.label == Activity::kFall;
    above += magnitude_sq(s) >= 2.0;
  }
  CHECK(t.samples.size() == 173471);
  CHECK(walk == 8639);
  CHECK(fall == 24);
  CHECK(fall_events(t).size() == 8);

  const double frac = static_cast<double>(above) / static_cast<double>(t.samples.size());
  const double expected = 0.0498 + 24.0 / static_cast<double>(t.samples.size());
  CHECK(std::abs(frac - expected) <= 0.003);
}

TEST_CASE("falls are spaced more than ten seconds apart") {
  const Trace t = generate_trace(reference_profile(), 2);
  const auto events = fall_events(t);
  for (std::size_t i = 1; i < events.size(); ++i) {
    const auto prev_end = t.samples[events[i - 1].start + events[i - 1].length - 1].t_ms;
    CHECK(t.samples[events[i].start].t_ms - prev_end > 10000);
  }
}

TEST_CASE("generated traces are evenly spaced and labels match bands") {
  TraceSpec s;
  s.duration_min = 5.0;
  s.activity_fraction = 0.3;
  s.fall_count = 4;
  const Trace t = generate_trace(s, 99);
  for (std::size_t i = 0; i < t.samples.size(); ++i) {
    if (i > 0) CHECK(t.samples[i].t_ms - t.samples[i - 1].t_ms == 81);
    const double m2 = magnitude_sq(t.samples[i]);
    const Band b = s.band_for(t.samples[i].label);
    CHECK(b.contains(m2));
  }
}

TEST_CASE("generation is a pure function of spec and seed") {
  TraceSpec s = one_minute();
  s.activity_fraction = 0.2;
  s.fall_count = 1;
  CHECK(generate_trace(s, 5).samples == generate_trace(s, 5).samples);
  CHECK(generate_trace(s, 5).samples != generate_trace(s, 6).samples);
}

TEST_CASE("spec validation") {
  TraceSpec s = one_minute();
  s.duration_min = 0;
  CHECK_THROWS_AS(s.validate(), SpecError);

  s = one_minute();
  s.walk_band = {1.0, 6.0};  // overlaps REST
  CHECK_THROWS_AS(s.validate(), SpecError);

  s = one_minute();
  s.fall_floor = 5.0;  // below the WALK ceiling
  CHECK_THROWS_AS(s.validate(), SpecError);

  s = one_minute();
  s.activity_fraction = 0.999;
  s.fall_count = 2;
  CHECK_THROWS_AS(s.validate(), SpecError);

  s = one_minute();
  s.fall_count = 10;  // cannot keep 10 s between falls in one minute
  CHECK_THROWS_AS(generate_trace(s, 1), SpecError);
}

TEST_CASE("file round trip over random specs and seeds") {
  test::TempDir dir;
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 12; ++i) {
    TraceSpec s;
    s.duration_min = 0.5 + static_cast<double>(rng() % 40) / 10.0;
    s.sample_interval_ms = 20.0 + static_cast<double>(rng() % 100);
    s.activity_fraction = static_cast<double>(rng() % 50) / 100.0;
    s.fall_count = static_cast<std::uint32_t>(rng() % 3);
    const Trace t = generate_trace(s, rng());
    const auto path = dir / ("t" + std::to_string(i) + ".csv");
    write_trace(t, path);
    const Trace back = load_trace(path);
    CHECK(back.samples == t.samples);
    CHECK_FALSE(back.seed.has_value());
    CHECK(back.regular_spacing);
  }
}

TEST_CASE("two-sample trace file layout") {
  Trace t;
  t.samples = {{0, 0.0, 0.0, 1.0, Activity::kRest}, {81, 1.0, 2.0, 2.0, Activity::kWalk}};
  const std::string text = format_trace(t);
  CHECK(text ==
        "t_ms,ax_g,ay_g,az_g,label\n"
        "0,0.000000,0.000000,1.000000,REST\n"
        "81,1.000000,2.000000,2.000000,WALK\n");
  CHECK(format_trace(t) == text);
}

TEST_CASE("writer refuses a timestamp regression") {
  Trace t;
  t.samples = {{100, 0, 0, 1, Activity::kRest}, {50, 0, 0, 1, Activity::kRest}};
  CHECK_THROWS_AS(format_trace(t), FormatError);
}

TEST_CASE("parse errors") {
  CHECK_THROWS_AS(parse_trace(""), FormatError);
  try {
    parse_trace("");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()) == "empty trace");
  }
  CHECK_THROWS_AS(parse_trace("t_ms,ax_g,ay_g,az_g,label\n"), FormatError);

  try {
    parse_trace("t_ms,ax_g,ay_g,az_g,label\n0,0,0,1,REST\n81,0,0\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse_trace("t_ms,ax_g,ay_g,az_g,label\n0,0,0,1,JOG\n"), ParseError);
  CHECK_THROWS_AS(parse_trace("t_ms,ax_g,ay_g,az_g,label\n0,0,0,x,REST\n"), ParseError);
  CHECK_THROWS_AS(parse_trace("time,x,y,z,label\n0,0,0,1,REST\n"), ParseError);
  CHECK_THROWS_AS(parse_trace("t_ms,ax_g,ay_g,az_g,label\n5,0,0,1,REST\n5,0,0,1,REST\n"), FormatError);
}

TEST_CASE("irregular imported spacing is flagged") {
  const Trace t = parse_trace("t_ms,ax_g,ay_g,az_g,label\n0,0,0,1,REST\n80,0,0,1,REST\n200,0,0,1,REST\n");
  CHECK_FALSE(t.regular_spacing);
  CHECK(t.sample_interval_ms == doctest::Approx(100.0));
}

TEST_CASE("CRLF input is accepted") {
  const Trace t = parse_trace("t_ms,ax_g,ay_g,az_g,label\r\n0,0,0,1,REST\r\n81,0,0,1,FALL\r\n");
  REQUIRE(t.samples.size() == 2);
  CHECK(t.samples[1].label == Activity::kFall);
}

TEST_CASE("missing file is an IoError") {
  CHECK_THROWS_AS(load_trace("/nonexistent/trace.csv"), IoError);
}
