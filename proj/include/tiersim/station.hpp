#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tiersim/node.hpp"
#include "tiersim/store.hpp"

namespace tiersim {

// ---------------------------------------------------------------------------
// Radio frames
//
//   offset  size  field
//   0       8     node address, big-endian
//   8       4     seq, big-endian
//   12      8     t_ms, big-endian
//   20      1     kind: 0x01 DATA, 0x02 ALARM
//   21      12    DATA: x, y, z as IEEE-754 float32, little-endian
//   21      2     ALARM: code, little-endian
// ---------------------------------------------------------------------------

enum class FrameKind : std::uint8_t { kData = 0x01, kAlarm = 0x02 };

inline constexpr std::size_t kFrameHeaderSize = 21;
inline constexpr std::size_t kDataFrameSize = kFrameHeaderSize + 12;
inline constexpr std::size_t kAlarmFrameSize = kFrameHeaderSize + 2;

struct AccelPayload {
  std::array<float, 3> g{};
  // Bitwise, so NaN payloads compare equal to themselves.
  bool operator==(const AccelPayload& o) const;
};

struct AlarmPayload {
  std::uint16_t code = 0;
  bool operator==(const AlarmPayload&) const = default;
};

struct RadioFrame {
  std::uint64_t node_address = 0;
  std::uint32_t seq = 0;
  std::uint64_t t_ms = 0;
  std::variant<AccelPayload, AlarmPayload> payload;

  FrameKind kind() const { return payload.index() == 0 ? FrameKind::kData : FrameKind::kAlarm; }
  bool operator==(const RadioFrame&) const = default;
};

std::vector<std::uint8_t> encode_frame(const RadioFrame& frame);
// Throws FrameError on a wrong length or unknown kind byte.
RadioFrame parse_frame(std::span<const std::uint8_t> bytes);

// Builds the frame a node sends for a transmitting decision.
RadioFrame frame_for(std::uint64_t node_address, std::uint32_t seq, const TimedDecision& decision);

// ---------------------------------------------------------------------------
// Line protocol
//
//   node=<16 hex> seq=<u32> t_ms=<u64> kind=DATA x=<f> y=<f> z=<f>
//   node=<16 hex> seq=<u32> t_ms=<u64> kind=ALARM code=<u16>
// ---------------------------------------------------------------------------

struct IngestRecord {
  std::uint64_t node_address = 0;
  std::uint32_t seq = 0;
  std::uint64_t t_ms = 0;
  FrameKind kind = FrameKind::kData;
  double x = 0.0, y = 0.0, z = 0.0;  // DATA
  std::uint16_t code = 0;            // ALARM

  bool operator==(const IngestRecord&) const = default;
};

std::string address_hex(std::uint64_t address);

/// The base-station conversion from a radio frame to a wired record.
IngestRecord forward(const RadioFrame& frame);

std::string format_record(const IngestRecord& record);
std::optional<IngestRecord> parse_record(std::string_view line);

// ---------------------------------------------------------------------------
// Notifications
// ---------------------------------------------------------------------------

enum class NotificationKind : std::uint8_t { kCameraSnapshotRequested, kSipCallInitiated };
std::string_view to_string(NotificationKind kind);

struct NotificationEvent {
  std::uint64_t t_ms = 0;
  NotificationKind kind = NotificationKind::kCameraSnapshotRequested;
  std::uint64_t node_address = 0;
  std::optional<RowId> camera_id;  // absent: UNRESOLVED

  std::string target() const;
};

/// Thread-safe append-only event list standing in for the camera and SIP
/// clients.
class NotificationLog {
 public:
  void append_pair(NotificationEvent snapshot, NotificationEvent call);
  std::vector<NotificationEvent> events() const;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::vector<NotificationEvent> events_;
};

/// Appends CAMERA_SNAPSHOT_REQUESTED then SIP_CALL_INITIATED for an alarm,
/// targeting the camera reached via node -> person -> room -> camera.
/// Throws DataError for a non-ALARM record.
void notify(const IngestRecord& alarm, const Store& store, NotificationLog& log);

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

enum class Ack : std::uint8_t { kOk, kOkDuplicate, kBadRequest, kUnknownNode };
std::string_view to_string(Ack ack);
std::optional<Ack> parse_ack(std::string_view s);

inline constexpr std::uint64_t kSelfTestNodeAddress = 0xffffffffffffffffULL;

struct IngestOptions {
  double risk_threshold = 2.0;  // DATA rows with magnitude^2 >= this are flagged
  bool register_self_test_node = false;
};

/// Accepts posted records. Mutations are serialised; each ack is produced only
/// after the store append returned.
class Ingestor {
 public:
  Ingestor(Store& store, NotificationLog& notifications, IngestOptions options = {});

  Ack handle_post(std::string_view line);
  // One ack per non-empty line of the body.
  std::vector<Ack> handle_body(std::string_view body);

  Store& store() { return store_; }

 private:
  Store& store_;
  NotificationLog& notifications_;
  IngestOptions options_;
  std::mutex write_mu_;
};

/// HTTP endpoint: POST /ingest with one record per line; the response body
/// holds one ack per line. GET /health answers "OK".
class IngestServer {
 public:
  IngestServer(Ingestor& ingestor, std::string host, int port);
  ~IngestServer();
  IngestServer(const IngestServer&) = delete;
  IngestServer& operator=(const IngestServer&) = delete;

  // Binds and serves on a background thread; returns the bound port.
  int start();
  // Serves on the calling thread until stop() is called from elsewhere.
  void run();
  void stop();
  int port() const { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_;
};

enum class SelfTestResult { kSuccess, kFailed };
std::string_view to_string(SelfTestResult r);

/// Posts a loopback record for the self-test node; SUCCESS iff an OK ack
/// (OK or OK_DUPLICATE) comes back within the timeout.
SelfTestResult self_test(const std::string& host, int port,
                         std::chrono::milliseconds timeout = std::chrono::milliseconds(5000));

inline constexpr int kDefaultPort = 8080;
// TIERSIM_PORT from the environment, else 8080.
int default_port();

}  // namespace tiersim
