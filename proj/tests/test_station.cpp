#include <random>
#include <thread>

#include "doctest.h"
#include "tiersim/errors.hpp"
#include "tiersim/station.hpp"
#include "tiersim/store.hpp"

using namespace tiersim;

namespace {

RadioFrame random_frame(std::mt19937_64& rng) {
  RadioFrame f;
  f.node_address = rng();
  f.seq = static_cast<std::uint32_t>(rng());
  f.t_ms = rng();
  if (rng() % 2) {
    AccelPayload p;
    for (float& g : p.g) g = std::bit_cast<float>(static_cast<std::uint32_t>(rng()));
    f.payload = p;
  } else {
    f.payload = AlarmPayload{static_cast<std::uint16_t>(rng())};
  }
  return f;
}

struct Station {
  Store store = Store::in_memory();
  NotificationLog log;
  RowId node = 0;

  explicit Station(bool with_camera = true) {
    const RowId type = store.upsert(SensorType{0, "accelerometer"});
    const RowId person = store.upsert(Person{0, "Ada", "Muster"});
    node = store.upsert(SensorNode{0, address_hex(1), "wrist", type, person});
    if (with_camera) {
      const RowId room = store.upsert(Room{0, "bedroom"});
      store.link(PersonRoom{person, room});
      store.upsert(Camera{0, "ceiling", "10.0.0.5", "http://10.0.0.5/snap", room});
    }
  }
};

IngestRecord alarm_record(std::uint64_t address, std::uint32_t seq) {
  IngestRecord r;
  r.node_address = address;
  r.seq = seq;
  r.t_ms = 5000;
  r.kind = FrameKind::kAlarm;
  r.code = 1;
  return r;
}

}  // namespace

TEST_CASE("frame codec round trip") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 5000; ++i) {
    const RadioFrame f = random_frame(rng);
    const auto bytes = encode_frame(f);
    CHECK(bytes.size() == (f.kind() == FrameKind::kData ? kDataFrameSize : kAlarmFrameSize));
    const RadioFrame back = parse_frame(bytes);
    CHECK(back == f);
    CHECK(encode_frame(back) == bytes);
  }
}

TEST_CASE("accepted byte strings re-encode identically") {
  std::mt19937_64 rng(2);
  int accepted = 0;
  for (int i = 0; i < 20000; ++i) {
    std::vector<std::uint8_t> b(rng() % 2 ? kDataFrameSize : kAlarmFrameSize);
    for (auto& v : b) v = static_cast<std::uint8_t>(rng());
    b[20] = static_cast<std::uint8_t>(rng() % 4);
    try {
      const RadioFrame f = parse_frame(b);
      CHECK(encode_frame(f) == b);
      ++accepted;
    } catch (const FrameError&) {
    }
  }
  CHECK(accepted > 1000);
}

TEST_CASE("frame layout") {
  RadioFrame f;
  f.node_address = 0x0102030405060708ULL;
  f.seq = 7;
  f.t_ms = 1000;
  f.payload = AlarmPayload{0x0201};
  const std::vector<std::uint8_t> expected{1, 2, 3, 4, 5, 6, 7, 8, 0, 0, 0, 7, 0, 0, 0, 0, 0, 0, 0x03, 0xe8, 0x02, 0x01, 0x02};
  CHECK(encode_frame(f) == expected);
}

TEST_CASE("malformed frames") {
  RadioFrame f;
  f.payload = AccelPayload{{0, 0, 1}};
  auto bytes = encode_frame(f);
  CHECK_THROWS_AS(parse_frame(std::span(bytes).first(20)), FrameError);
  CHECK_THROWS_AS(parse_frame(std::span(bytes).first(kAlarmFrameSize)), FrameError);
  bytes[20] = 0x03;
  CHECK_THROWS_AS(parse_frame(bytes), FrameError);
  bytes[20] = 0x00;
  CHECK_THROWS_AS(parse_frame(bytes), FrameError);
}

TEST_CASE("forwarding to the line protocol") {
  RadioFrame f;
  f.node_address = 1;
  f.seq = 7;
  f.t_ms = 1000;
  f.payload = AccelPayload{{0, 0, 1}};
  CHECK(format_record(forward(f)) == "node=0000000000000001 seq=7 t_ms=1000 kind=DATA x=0.000000 y=0.000000 z=1.000000");
  f.payload = AlarmPayload{1};
  CHECK(format_record(forward(f)) == "node=0000000000000001 seq=7 t_ms=1000 kind=ALARM code=1");
}

TEST_CASE("forward, format and parse compose to identity") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> g(-16.0f, 16.0f);
  for (int i = 0; i < 2000; ++i) {
    RadioFrame f = random_frame(rng);
    if (f.kind() == FrameKind::kData) {
      // The line carries 6 decimals; use values that survive that exactly.
      AccelPayload p;
      for (float& v : p.g) v = std::round(g(rng) * 64.0f) / 64.0f;
      f.payload = p;
    }
    const IngestRecord r = forward(parse_frame(encode_frame(f)));
    const auto back = parse_record(format_record(r));
    REQUIRE(back.has_value());
    CHECK(*back == r);
  }
}

TEST_CASE("line grammar") {
  CHECK(parse_record("node=0000000000000001 seq=7 t_ms=1000 kind=DATA x=0.1 y=-2 z=1.000000").has_value());
  CHECK(parse_record("node=0000000000000001 seq=7 t_ms=1000 kind=ALARM code=1\r").has_value());
  CHECK_FALSE(parse_record("node=0000000000000001 seq=7 kind=DATA x=0 y=0 z=1").has_value());
  CHECK_FALSE(parse_record("node=000000000000001 seq=7 t_ms=1000 kind=ALARM code=1").has_value());
  CHECK_FALSE(parse_record("node=000000000000000G seq=7 t_ms=1000 kind=ALARM code=1").has_value());
  CHECK_FALSE(parse_record("node=00000000000000AB seq=7 t_ms=1000 kind=ALARM code=1").has_value());
  CHECK_FALSE(parse_record("node=0000000000000001 seq=-7 t_ms=1000 kind=ALARM code=1").has_value());
  CHECK_FALSE(parse_record("node=0000000000000001 seq=4294967296 t_ms=1000 kind=ALARM code=1").has_value());
  CHECK_FALSE(parse_record("node=0000000000000001 seq=7 t_ms=1000 kind=ALARM code=65536").has_value());
  CHECK_FALSE(parse_record("node=0000000000000001 seq=7 t_ms=1000 kind=DATA code=1").has_value());
  CHECK_FALSE(parse_record("node=0000000000000001 seq=7 t_ms=1000 kind=DATA x=nan y=0 z=0").has_value());
  CHECK_FALSE(parse_record("node=0000000000000001 t_ms=1000 seq=7 kind=ALARM code=1").has_value());
  CHECK_FALSE(parse_record("").has_value());
}

TEST_CASE("ingestion acks") {
  Station st;
  NotificationLog notes;
  Ingestor in(st.store, notes);
  CHECK(in.handle_post("node=0000000000000001 seq=1 t_ms=1000 kind=DATA x=0.000000 y=0.000000 z=1.000000") == Ack::kOk);
  const auto rows = st.store.query_measurements(st.node, 0, 2000, false);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].values == std::vector<double>{0, 0, 1});
  CHECK_FALSE(rows[0].measurement.risk);

  CHECK(in.handle_post("node=0000000000000001 seq=2 kind=DATA x=0 y=0 z=1") == Ack::kBadRequest);
  CHECK(in.handle_post("node=00000000000000ff seq=2 t_ms=1 kind=DATA x=0 y=0 z=1") == Ack::kUnknownNode);
  CHECK(in.handle_post("node=0000000000000001 seq=1 t_ms=1000 kind=DATA x=0 y=0 z=1") == Ack::kOkDuplicate);
  CHECK(st.store.count("SensorMeasurements") == 1);

  CHECK(in.handle_post("node=0000000000000001 seq=3 t_ms=1100 kind=DATA x=1.5 y=0 z=1.5") == Ack::kOk);
  CHECK(st.store.query_measurements(st.node, 0, 2000, true).size() == 1);
  CHECK(notes.size() == 0);
}

TEST_CASE("request bodies carry one ack per line") {
  Station st;
  NotificationLog notes;
  Ingestor in(st.store, notes);
  const auto acks = in.handle_body(
      "node=0000000000000001 seq=1 t_ms=1 kind=DATA x=0 y=0 z=1\n"
      "bogus\n"
      "node=0000000000000001 seq=1 t_ms=1 kind=DATA x=0 y=0 z=1\n");
  CHECK(acks == std::vector<Ack>{Ack::kOk, Ack::kBadRequest, Ack::kOkDuplicate});
  CHECK(in.handle_body("") == std::vector<Ack>{Ack::kBadRequest});
  for (Ack a : {Ack::kOk, Ack::kOkDuplicate, Ack::kBadRequest, Ack::kUnknownNode}) CHECK(parse_ack(to_string(a)) == a);
}

TEST_CASE("alarms notify camera and SIP") {
  Station st;
  NotificationLog notes;
  Ingestor in(st.store, notes);
  CHECK(in.handle_post(format_record(alarm_record(1, 9))) == Ack::kOk);
  const auto events = notes.events();
  REQUIRE(events.size() == 2);
  CHECK(events[0].kind == NotificationKind::kCameraSnapshotRequested);
  CHECK(events[1].kind == NotificationKind::kSipCallInitiated);
  CHECK(events[0].target() == "camera:1");
  CHECK(events[1].target() == "camera:1");
  const auto rows = st.store.query_measurements(st.node, 0, 10000, true);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].values == std::vector<double>{1});

  // A repeated alarm is not stored or announced again.
  CHECK(in.handle_post(format_record(alarm_record(1, 9))) == Ack::kOkDuplicate);
  CHECK(notes.size() == 2);
}

TEST_CASE("alarm without a room is unresolved") {
  Station st(false);
  NotificationLog notes;
  notify(alarm_record(1, 1), st.store, notes);
  const auto events = notes.events();
  REQUIRE(events.size() == 2);
  CHECK(events[0].target() == "UNRESOLVED");
  CHECK(events[1].target() == "UNRESOLVED");

  IngestRecord data = alarm_record(1, 2);
  data.kind = FrameKind::kData;
  CHECK_THROWS_AS(notify(data, st.store, notes), DataError);
  CHECK(notes.size() == 2);
}

TEST_CASE("concurrent posts are each stored once") {
  Station st;
  NotificationLog notes;
  Ingestor in(st.store, notes);
  std::vector<std::thread> threads;
  std::atomic<int> ok{0}, dup{0};
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&] {
      for (std::uint32_t seq = 0; seq < 200; ++seq) {
        IngestRecord r = alarm_record(1, seq);
        r.kind = seq % 10 ? FrameKind::kData : FrameKind::kAlarm;
        r.z = 1.0;
        const Ack a = in.handle_post(format_record(r));
        (a == Ack::kOk ? ok : dup)++;
      }
    });
  }
  for (auto& t : threads) t.join();
  CHECK(ok == 200);
  CHECK(dup == 7 * 200);
  CHECK(st.store.count("SensorMeasurements") == 200);
  CHECK(notes.size() == 2 * 20);
}

TEST_CASE("self test against a live endpoint") {
  Store store = Store::in_memory();
  NotificationLog notes;
  Ingestor in(store, notes, IngestOptions{2.0, true});
  auto server = std::make_unique<IngestServer>(in, "127.0.0.1", 0);
  const int port = server->start();
  REQUIRE(port > 0);
  CHECK(self_test("127.0.0.1", port) == SelfTestResult::kSuccess);
  CHECK(store.count("SensorMeasurements") == 1);

  // Some other port with nothing listening.
  int wrong = port == 65535 ? port - 1 : port + 1;
  CHECK(self_test("127.0.0.1", wrong, std::chrono::milliseconds(500)) == SelfTestResult::kFailed);

  server->stop();
  CHECK(self_test("127.0.0.1", port, std::chrono::milliseconds(500)) == SelfTestResult::kFailed);
}

TEST_CASE("default port") {
  unsetenv("TIERSIM_PORT");
  CHECK(default_port() == 8080);
  setenv("TIERSIM_PORT", "9123", 1);
  CHECK(default_port() == 9123);
  setenv("TIERSIM_PORT", "junk", 1);
  CHECK(default_port() == 8080);
  unsetenv("TIERSIM_PORT");
}
