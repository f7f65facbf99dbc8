#include "tiersim/station.hpp"

#include <bit>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>

#include "text_util.hpp"
#include "tiersim/errors.hpp"

namespace tiersim {

namespace {

void put_be(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = bytes - 1; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_be(std::span<const std::uint8_t> b, std::size_t at, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v = (v << 8) | b[at + static_cast<std::size_t>(i)];
  return v;
}

std::uint64_t get_le(std::span<const std::uint8_t> b, std::size_t at, int bytes) {
  std::uint64_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | b[at + static_cast<std::size_t>(i)];
  return v;
}

bool take_field(std::string_view token, std::string_view key, std::string_view& value) {
  if (token.size() <= key.size() || token.substr(0, key.size()) != key || token[key.size()] != '=') return false;
  value = token.substr(key.size() + 1);
  return true;
}

bool parse_hex_address(std::string_view s, std::uint64_t& out) {
  if (s.size() != 16) return false;
  for (char c : s) {
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  }
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out, 16);
  return ec == std::errc() && ptr == s.data() + s.size();
}

template <typename T>
bool parse_uint_field(std::string_view token, std::string_view key, T& out) {
  std::string_view value;
  if (!take_field(token, key, value)) return false;
  if (value.empty() || value.front() == '-') return false;
  return detail::parse_number(value, out);
}

bool parse_real_field(std::string_view token, std::string_view key, double& out) {
  std::string_view value;
  return take_field(token, key, value) && detail::parse_number(value, out) && std::isfinite(out);
}

}  // namespace

bool AccelPayload::operator==(const AccelPayload& o) const {
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (std::bit_cast<std::uint32_t>(g[i]) != std::bit_cast<std::uint32_t>(o.g[i])) return false;
  }
  return true;
}

std::vector<std::uint8_t> encode_frame(const RadioFrame& frame) {
  std::vector<std::uint8_t> out;
  out.reserve(kDataFrameSize);
  put_be(out, frame.node_address, 8);
  put_be(out, frame.seq, 4);
  put_be(out, frame.t_ms, 8);
  out.push_back(static_cast<std::uint8_t>(frame.kind()));
  if (const auto* accel = std::get_if<AccelPayload>(&frame.payload)) {
    for (float v : accel->g) put_le(out, std::bit_cast<std::uint32_t>(v), 4);
  } else {
    put_le(out, std::get<AlarmPayload>(frame.payload).code, 2);
  }
  return out;
}

RadioFrame parse_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFrameHeaderSize + 1) {
    throw FrameError("frame of " + std::to_string(bytes.size()) + " bytes is shorter than any valid frame");
  }
  RadioFrame f;
  f.node_address = get_be(bytes, 0, 8);
  f.seq = static_cast<std::uint32_t>(get_be(bytes, 8, 4));
  f.t_ms = get_be(bytes, 12, 8);
  const std::uint8_t kind = bytes[20];
  if (kind == static_cast<std::uint8_t>(FrameKind::kData)) {
    if (bytes.size() != kDataFrameSize) {
      throw FrameError("DATA frame must be " + std::to_string(kDataFrameSize) + " bytes, got " +
                       std::to_string(bytes.size()));
    }
    AccelPayload p;
    for (std::size_t i = 0; i < 3; ++i) {
      p.g[i] = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(bytes, kFrameHeaderSize + 4 * i, 4)));
    }
    f.payload = p;
  } else if (kind == static_cast<std::uint8_t>(FrameKind::kAlarm)) {
    if (bytes.size() != kAlarmFrameSize) {
      throw FrameError("ALARM frame must be " + std::to_string(kAlarmFrameSize) + " bytes, got " +
                       std::to_string(bytes.size()));
    }
    f.payload = AlarmPayload{static_cast<std::uint16_t>(get_le(bytes, kFrameHeaderSize, 2))};
  } else {
    char buf[8];
    std::snprintf(buf, sizeof buf, "0x%02x", kind);
    throw FrameError(std::string("unknown frame kind ") + buf);
  }
  return f;
}

RadioFrame frame_for(std::uint64_t node_address, std::uint32_t seq, const TimedDecision& decision) {
  RadioFrame f;
  f.node_address = node_address;
  f.seq = seq;
  f.t_ms = decision.t_ms;
  if (const auto* s = std::get_if<AccelSample>(&decision.decision.payload)) {
    f.payload = AccelPayload{{static_cast<float>(s->ax), static_cast<float>(s->ay), static_cast<float>(s->az)}};
  } else if (const auto* code = std::get_if<std::uint16_t>(&decision.decision.payload)) {
    f.payload = AlarmPayload{*code};
  } else {
    throw DataError("silent decisions are not transmitted");
  }
  return f;
}

std::string address_hex(std::uint64_t address) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, address);
  return std::string(buf, 16);
}

IngestRecord forward(const RadioFrame& frame) {
  IngestRecord r;
  r.node_address = frame.node_address;
  r.seq = frame.seq;
  r.t_ms = frame.t_ms;
  r.kind = frame.kind();
  if (const auto* accel = std::get_if<AccelPayload>(&frame.payload)) {
    r.x = accel->g[0];
    r.y = accel->g[1];
    r.z = accel->g[2];
  } else {
    r.code = std::get<AlarmPayload>(frame.payload).code;
  }
  return r;
}

std::string format_record(const IngestRecord& r) {
  std::string out = "node=" + address_hex(r.node_address) + " seq=" + std::to_string(r.seq) +
                    " t_ms=" + std::to_string(r.t_ms);
  if (r.kind == FrameKind::kData) {
    out += " kind=DATA x=" + detail::fixed(r.x, 6) + " y=" + detail::fixed(r.y, 6) + " z=" + detail::fixed(r.z, 6);
  } else {
    out += " kind=ALARM code=" + std::to_string(r.code);
  }
  return out;
}

std::optional<IngestRecord> parse_record(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  const auto tokens = detail::split(line, ' ');
  if (tokens.size() != 5 && tokens.size() != 7) return std::nullopt;
  IngestRecord r;
  std::string_view value;
  if (!take_field(tokens[0], "node", value) || !parse_hex_address(value, r.node_address)) return std::nullopt;
  if (!parse_uint_field(tokens[1], "seq", r.seq)) return std::nullopt;
  if (!parse_uint_field(tokens[2], "t_ms", r.t_ms)) return std::nullopt;
  if (!take_field(tokens[3], "kind", value)) return std::nullopt;
  if (value == "DATA" && tokens.size() == 7) {
    r.kind = FrameKind::kData;
    if (!parse_real_field(tokens[4], "x", r.x) || !parse_real_field(tokens[5], "y", r.y) ||
        !parse_real_field(tokens[6], "z", r.z)) {
      return std::nullopt;
    }
  } else if (value == "ALARM" && tokens.size() == 5) {
    r.kind = FrameKind::kAlarm;
    if (!parse_uint_field(tokens[4], "code", r.code)) return std::nullopt;
  } else {
    return std::nullopt;
  }
  return r;
}

std::string_view to_string(NotificationKind kind) {
  return kind == NotificationKind::kCameraSnapshotRequested ? "CAMERA_SNAPSHOT_REQUESTED" : "SIP_CALL_INITIATED";
}

std::string NotificationEvent::target() const {
  return camera_id ? "camera:" + std::to_string(*camera_id) : std::string("UNRESOLVED");
}

void NotificationLog::append_pair(NotificationEvent snapshot, NotificationEvent call) {
  std::lock_guard lock(mu_);
  events_.push_back(std::move(snapshot));
  events_.push_back(std::move(call));
}

std::vector<NotificationEvent> NotificationLog::events() const {
  std::lock_guard lock(mu_);
  return events_;
}

std::size_t NotificationLog::size() const {
  std::lock_guard lock(mu_);
  return events_.size();
}

void notify(const IngestRecord& alarm, const Store& store, NotificationLog& log) {
  if (alarm.kind != FrameKind::kAlarm) throw DataError("notify needs an ALARM record");
  std::optional<RowId> camera;
  if (auto node = store.find_node(address_hex(alarm.node_address))) {
    if (auto targets = store.resolve_alarm_targets(*node)) camera = targets->camera_id;
  }
  log.append_pair({alarm.t_ms, NotificationKind::kCameraSnapshotRequested, alarm.node_address, camera},
                  {alarm.t_ms, NotificationKind::kSipCallInitiated, alarm.node_address, camera});
}

std::string_view to_string(Ack ack) {
  switch (ack) {
    case Ack::kOk: return "OK";
    case Ack::kOkDuplicate: return "OK_DUPLICATE";
    case Ack::kBadRequest: return "BAD_REQUEST";
    case Ack::kUnknownNode: return "UNKNOWN_NODE";
  }
  return "?";
}

std::optional<Ack> parse_ack(std::string_view s) {
  for (Ack a : {Ack::kOk, Ack::kOkDuplicate, Ack::kBadRequest, Ack::kUnknownNode}) {
    if (to_string(a) == s) return a;
  }
  return std::nullopt;
}

Ingestor::Ingestor(Store& store, NotificationLog& notifications, IngestOptions options)
    : store_(store), notifications_(notifications), options_(options) {
  if (options_.register_self_test_node && !store_.find_node(address_hex(kSelfTestNodeAddress))) {
    const RowId type = store_.upsert(SensorType{0, "loopback"});
    store_.upsert(SensorNode{0, address_hex(kSelfTestNodeAddress), "self-test", type, std::nullopt});
  }
}

Ack Ingestor::handle_post(std::string_view line) {
  const auto record = parse_record(line);
  if (!record) return Ack::kBadRequest;

  std::lock_guard lock(write_mu_);
  const auto node = store_.find_node(address_hex(record->node_address));
  if (!node) return Ack::kUnknownNode;
  if (store_.has_sequence(*node, record->seq)) return Ack::kOkDuplicate;

  if (record->kind == FrameKind::kData) {
    const double values[] = {record->x, record->y, record->z};
    const double m2 = record->x * record->x + record->y * record->y + record->z * record->z;
    store_.insert_measurement(*node, record->t_ms, values, m2 >= options_.risk_threshold, record->seq);
  } else {
    const double values[] = {static_cast<double>(record->code)};
    store_.insert_measurement(*node, record->t_ms, values, true, record->seq);
    notify(*record, store_, notifications_);
  }
  return Ack::kOk;
}

std::vector<Ack> Ingestor::handle_body(std::string_view body) {
  std::vector<Ack> acks;
  for (auto line : detail::split_lines(body)) {
    if (line.empty()) continue;
    acks.push_back(handle_post(line));
  }
  if (acks.empty()) acks.push_back(Ack::kBadRequest);
  return acks;
}

std::string_view to_string(SelfTestResult r) { return r == SelfTestResult::kSuccess ? "SUCCESS" : "FAILED"; }

int default_port() {
  if (const char* env = std::getenv("TIERSIM_PORT")) {
    int port = 0;
    if (detail::parse_number(std::string_view(env), port) && port > 0 && port < 65536) return port;
  }
  return kDefaultPort;
}

}  // namespace tiersim
