#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tiersim {

using RowId = std::int64_t;

struct SensorType {
  RowId id = 0;
  std::string description;
};

// Natural key: ieee_address. A node is carried by zero or one person.
struct SensorNode {
  RowId id = 0;
  std::string ieee_address;
  std::string name;
  RowId type_id = 0;
  std::optional<RowId> person_id;
};

struct Person {
  RowId id = 0;
  std::string first_name;
  std::string last_name;
};

struct Room {
  RowId id = 0;
  std::string name;
};

struct PersonRoom {
  RowId person_id = 0;
  RowId room_id = 0;
};

struct Camera {
  RowId id = 0;
  std::string name;
  std::string ip;
  std::string url;
  std::optional<RowId> room_id;
};

struct CameraImage {
  RowId id = 0;
  std::uint64_t timestamp = 0;
  std::vector<std::uint8_t> data;
  RowId camera_id = 0;
};

// Timestamps are not unique and are never keys. `seq` is the radio sequence
// number the record arrived with, kept for duplicate suppression.
struct SensorMeasurement {
  RowId id = 0;
  std::uint64_t timestamp = 0;
  bool risk = false;
  RowId node_id = 0;
  std::optional<std::uint32_t> seq;
};

struct SensorDatum {
  RowId id = 0;
  double value = 0.0;
  RowId measurement_id = 0;
};

struct MeasurementView {
  SensorMeasurement measurement;
  std::vector<double> values;
};

struct AlarmTargets {
  RowId person_id = 0;
  std::optional<RowId> room_id;
  std::optional<RowId> camera_id;
  bool operator==(const AlarmTargets&) const = default;
};

enum class Durability {
  kFlush,  // each append is handed to the OS before returning
  kFsync,  // each append is fsync'ed before returning
};

inline constexpr int kSchemaVersion = 1;

/// Persistence for the sensor/person/room/camera schema.
///
/// A directory store keeps one append-only log per entity plus a MANIFEST;
/// the in-memory index is rebuilt from the logs on open. Every write is
/// validated first, then logged, then applied, so a failed call leaves the
/// store unchanged. Writers are serialised; readers share a lock.
class Store {
 public:
  static Store in_memory();
  static Store open(const std::filesystem::path& dir, Durability durability = Durability::kFsync);

  Store(Store&&) noexcept;
  Store& operator=(Store&&) noexcept;
  ~Store();

  // id == 0 assigns a new id; nodes are matched on ieee_address first.
  RowId upsert(const SensorType& row);
  RowId upsert(const SensorNode& row);
  RowId upsert(const Person& row);
  RowId upsert(const Room& row);
  RowId upsert(const Camera& row);
  RowId upsert(const CameraImage& row);
  void link(const PersonRoom& row);

  /// Generic entry point keyed by entity name (e.g. "SensorNodes") with
  /// string-valued fields named as in dump_csv's header.
  RowId upsert_entity(std::string_view entity, const std::map<std::string, std::string>& fields);

  /// One measurement plus one SensorData row per value, all or nothing.
  RowId insert_measurement(RowId node_id, std::uint64_t timestamp, std::span<const double> values, bool risk,
                           std::optional<std::uint32_t> seq = std::nullopt);

  std::vector<MeasurementView> query_measurements(RowId node_id, std::uint64_t t_from, std::uint64_t t_to,
                                                  bool risk_only) const;

  std::optional<AlarmTargets> resolve_alarm_targets(RowId node_id) const;

  std::optional<RowId> find_node(std::string_view ieee_address) const;
  std::optional<SensorNode> node(RowId id) const;
  bool has_sequence(RowId node_id, std::uint32_t seq) const;

  std::size_t count(std::string_view entity) const;
  std::string dump_csv(std::string_view entity) const;

  // Entity names in schema order.
  static std::span<const std::string_view> entities();

 private:
  struct Impl;
  explicit Store(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

}  // namespace tiersim
