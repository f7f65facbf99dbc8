#include "tiersim/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <functional>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <unordered_map>
#include <utility>

#include "text_util.hpp"
#include "tiersim/errors.hpp"

namespace tiersim {

namespace fs = std::filesystem;

namespace {

enum Entity : std::size_t {
  kSensorTypes,
  kSensorNodes,
  kSensorMeasurements,
  kSensorData,
  kPersons,
  kRooms,
  kPersonRoom,
  kCameras,
  kCameraImages,
  kEntityCount
};

constexpr std::array<std::string_view, kEntityCount> kEntityNames = {
    "SensorTypes", "SensorNodes", "SensorMeasurements", "SensorData", "Persons",
    "Rooms",       "PersonRoom",  "Cameras",            "CameraImages"};

// Parents before children so foreign keys resolve during replay.
constexpr std::array<Entity, kEntityCount> kReplayOrder = {
    kSensorTypes, kPersons,     kRooms,   kPersonRoom,        kCameras,
    kCameraImages, kSensorNodes, kSensorMeasurements, kSensorData};

Entity entity_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kEntityCount; ++i) {
    if (kEntityNames[i] == name) return static_cast<Entity>(i);
  }
  throw ValidationError("unknown entity '" + std::string(name) + "'");
}

void check_length(std::string_view field, const std::string& value, std::size_t max) {
  if (value.size() > max) {
    throw ValidationError(std::string(field) + " exceeds " + std::to_string(max) + " characters (" +
                          std::to_string(value.size()) + ")");
  }
}

// --- record text ------------------------------------------------------------

bool plain_char(unsigned char c) {
  return std::isalnum(c) || c == '.' || c == '_' || c == '-' || c == ':' || c == '/';
}

std::string escape(std::string_view s) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (plain_char(c)) {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 15]);
    }
  }
  return out;
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

std::optional<std::string> unescape(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '%') {
      out.push_back(s[i]);
      continue;
    }
    if (i + 2 >= s.size()) return std::nullopt;
    const int hi = hex_value(s[i + 1]);
    const int lo = hex_value(s[i + 2]);
    if (hi < 0 || lo < 0) return std::nullopt;
    out.push_back(static_cast<char>(hi * 16 + lo));
    i += 2;
  }
  return out;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 15]);
  }
  return out;
}

std::optional<std::vector<std::uint8_t>> from_hex(std::string_view s) {
  if (s.size() % 2 != 0) return std::nullopt;
  std::vector<std::uint8_t> out;
  out.reserve(s.size() / 2);
  for (std::size_t i = 0; i < s.size(); i += 2) {
    const int hi = hex_value(s[i]);
    const int lo = hex_value(s[i + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    out.push_back(static_cast<std::uint8_t>(hi * 16 + lo));
  }
  return out;
}

class RecordWriter {
 public:
  RecordWriter& add(std::string_view key, std::string_view raw) {
    if (!text_.empty()) text_.push_back(' ');
    text_.append(key).push_back('=');
    text_.append(raw);
    return *this;
  }
  RecordWriter& str(std::string_view key, std::string_view value) { return add(key, escape(value)); }
  RecordWriter& num(std::string_view key, std::int64_t v) { return add(key, std::to_string(v)); }
  RecordWriter& unum(std::string_view key, std::uint64_t v) { return add(key, std::to_string(v)); }
  RecordWriter& real(std::string_view key, double v) { return add(key, detail::exact(v)); }
  template <typename T>
  RecordWriter& opt(std::string_view key, const std::optional<T>& v) {
    if (v) add(key, std::to_string(*v));
    return *this;
  }
  std::string line() const { return text_ + "\n"; }

 private:
  std::string text_;
};

// Parsed key=value record. Field accessors throw ValidationError; replay turns
// that into a FormatError naming the file.
class Record {
 public:
  explicit Record(std::map<std::string, std::string> fields) : fields_(std::move(fields)) {}

  static Record parse(std::string_view line) {
    std::map<std::string, std::string> fields;
    for (auto tok : detail::split(line, ' ')) {
      const auto eq = tok.find('=');
      if (eq == std::string_view::npos || eq == 0) throw ValidationError("malformed field '" + std::string(tok) + "'");
      auto value = unescape(tok.substr(eq + 1));
      if (!value) throw ValidationError("bad escape in '" + std::string(tok) + "'");
      fields[std::string(tok.substr(0, eq))] = std::move(*value);
    }
    return Record(std::move(fields));
  }

  void allow(std::initializer_list<std::string_view> keys) const {
    for (const auto& [k, v] : fields_) {
      if (std::find(keys.begin(), keys.end(), k) == keys.end()) throw ValidationError("unknown field '" + k + "'");
    }
  }
  bool has(const std::string& key) const { return fields_.contains(key); }
  std::string str(const std::string& key, std::string fallback = {}) const {
    auto it = fields_.find(key);
    return it == fields_.end() ? fallback : it->second;
  }
  template <typename T>
  T num(const std::string& key, std::optional<T> fallback = std::nullopt) const {
    auto it = fields_.find(key);
    if (it == fields_.end()) {
      if (fallback) return *fallback;
      throw ValidationError("missing field '" + key + "'");
    }
    T v{};
    if (!detail::parse_number(std::string_view(it->second), v)) {
      throw ValidationError("field '" + key + "' is not a number: '" + it->second + "'");
    }
    return v;
  }
  template <typename T>
  std::optional<T> opt(const std::string& key) const {
    auto it = fields_.find(key);
    if (it == fields_.end() || it->second.empty()) return std::nullopt;
    return num<T>(key);
  }
  bool flag(const std::string& key) const {
    const std::string v = str(key, "0");
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw ValidationError("field '" + key + "' is not a boolean: '" + v + "'");
  }

 private:
  std::map<std::string, std::string> fields_;
};

class AppendLog {
 public:
  AppendLog() = default;
  explicit AppendLog(const fs::path& path) : path_(path) {
    fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) throw IoError("cannot open " + path.string() + ": " + std::strerror(errno));
  }
  AppendLog(AppendLog&& o) noexcept : fd_(std::exchange(o.fd_, -1)), path_(std::move(o.path_)) {}
  AppendLog& operator=(AppendLog&& o) noexcept {
    if (this != &o) {
      close();
      fd_ = std::exchange(o.fd_, -1);
      path_ = std::move(o.path_);
    }
    return *this;
  }
  ~AppendLog() { close(); }

  void append(std::string_view text, Durability durability) {
    while (!text.empty()) {
      const ssize_t n = ::write(fd_, text.data(), text.size());
      if (n < 0) {
        if (errno == EINTR) continue;
        throw IoError("append to " + path_.string() + " failed: " + std::strerror(errno));
      }
      text.remove_prefix(static_cast<std::size_t>(n));
    }
    if (durability == Durability::kFsync && ::fsync(fd_) != 0) {
      throw IoError("fsync of " + path_.string() + " failed: " + std::strerror(errno));
    }
  }

 private:
  void close() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }
  int fd_ = -1;
  fs::path path_;
};

std::string csv_cell(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

template <typename T>
std::string opt_str(const std::optional<T>& v) {
  return v ? std::to_string(*v) : std::string();
}

}  // namespace

struct Store::Impl {
  struct MeasurementRow {
    SensorMeasurement m;
    std::uint32_t expected_values = 0;
    std::vector<RowId> data;
  };

  std::optional<fs::path> dir;
  Durability durability = Durability::kFsync;
  std::array<AppendLog, kEntityCount> logs;
  std::array<RowId, kEntityCount> max_id{};
  mutable std::shared_mutex mu;

  std::map<RowId, SensorType> types;
  std::map<RowId, SensorNode> nodes;
  std::unordered_map<std::string, RowId> node_by_address;
  std::map<RowId, Person> persons;
  std::map<RowId, Room> rooms;
  std::set<std::pair<RowId, RowId>> person_rooms;
  std::map<RowId, Camera> cameras;
  std::map<RowId, CameraImage> images;
  std::unordered_map<RowId, MeasurementRow> measurements;
  std::unordered_map<RowId, SensorDatum> data;
  std::unordered_map<RowId, std::multimap<std::uint64_t, RowId>> by_node;
  std::set<std::pair<RowId, std::uint32_t>> sequences;

  void log(Entity e, std::string_view line) {
    if (dir) logs[e].append(line, durability);
  }

  RowId assign(Entity e, RowId requested) {
    if (requested < 0) throw ValidationError("ids must be positive");
    return requested == 0 ? max_id[e] + 1 : requested;
  }
  void bump(Entity e, RowId id) { max_id[e] = std::max(max_id[e], id); }

  // --- validation (no mutation) ---------------------------------------------

  void check(const SensorType& r) const { check_length("description", r.description, 64); }
  void check(const SensorNode& r) const {
    check_length("ieee_address", r.ieee_address, 64);
    check_length("name", r.name, 64);
    if (r.ieee_address.empty()) throw ValidationError("ieee_address is required");
    if (!types.contains(r.type_id)) {
      throw IntegrityError("SensorNodes.type_id " + std::to_string(r.type_id) + " does not resolve to a SensorTypes row");
    }
    if (r.person_id && !persons.contains(*r.person_id)) {
      throw IntegrityError("SensorNodes.person_id " + std::to_string(*r.person_id) + " does not resolve to a Persons row");
    }
  }
  void check(const Person& r) const {
    check_length("first_name", r.first_name, 64);
    check_length("last_name", r.last_name, 64);
  }
  void check(const Room& r) const { check_length("name", r.name, 64); }
  void check(const Camera& r) const {
    check_length("name", r.name, 64);
    check_length("ip", r.ip, 16);
    check_length("url", r.url, 128);
    if (r.room_id && !rooms.contains(*r.room_id)) {
      throw IntegrityError("Cameras.room_id " + std::to_string(*r.room_id) + " does not resolve to a Rooms row");
    }
  }
  void check(const CameraImage& r) const {
    if (!cameras.contains(r.camera_id)) {
      throw IntegrityError("CameraImages.camera_id " + std::to_string(r.camera_id) + " does not resolve to a Cameras row");
    }
  }
  void check(const PersonRoom& r) const {
    if (!persons.contains(r.person_id)) throw IntegrityError("PersonRoom.person_id " + std::to_string(r.person_id) + " does not resolve");
    if (!rooms.contains(r.room_id)) throw IntegrityError("PersonRoom.room_id " + std::to_string(r.room_id) + " does not resolve");
  }
  void check_node_exists(RowId node_id) const {
    if (!nodes.contains(node_id)) throw IntegrityError("SensorNodes id " + std::to_string(node_id) + " does not exist");
  }

  // --- record encoding -------------------------------------------------------

  static std::string encode(const SensorType& r) { return RecordWriter().num("id", r.id).str("description", r.description).line(); }
  static std::string encode(const SensorNode& r) {
    return RecordWriter()
        .num("id", r.id)
        .str("ieee_address", r.ieee_address)
        .str("name", r.name)
        .num("type_id", r.type_id)
        .opt("person_id", r.person_id)
        .line();
  }
  static std::string encode(const Person& r) {
    return RecordWriter().num("id", r.id).str("first_name", r.first_name).str("last_name", r.last_name).line();
  }
  static std::string encode(const Room& r) { return RecordWriter().num("id", r.id).str("name", r.name).line(); }
  static std::string encode(const PersonRoom& r) {
    return RecordWriter().num("person_id", r.person_id).num("room_id", r.room_id).line();
  }
  static std::string encode(const Camera& r) {
    return RecordWriter()
        .num("id", r.id)
        .str("name", r.name)
        .str("ip", r.ip)
        .str("url", r.url)
        .opt("room_id", r.room_id)
        .line();
  }
  static std::string encode(const CameraImage& r) {
    return RecordWriter()
        .num("id", r.id)
        .unum("timestamp", r.timestamp)
        .add("data", to_hex(r.data))
        .num("camera_id", r.camera_id)
        .line();
  }
  static std::string encode(const SensorMeasurement& r, std::size_t n_values) {
    return RecordWriter()
        .num("id", r.id)
        .unum("timestamp", r.timestamp)
        .add("risk", r.risk ? "1" : "0")
        .num("node_id", r.node_id)
        .unum("n", n_values)
        .opt("seq", r.seq)
        .line();
  }
  static std::string encode(const SensorDatum& r) {
    return RecordWriter().num("id", r.id).real("value", r.value).num("measurement_id", r.measurement_id).line();
  }

  // --- apply (mutation only, after validation and logging) -------------------

  void apply(const SensorType& r) {
    types[r.id] = r;
    bump(kSensorTypes, r.id);
  }
  void apply(const SensorNode& r) {
    if (auto it = nodes.find(r.id); it != nodes.end()) node_by_address.erase(it->second.ieee_address);
    nodes[r.id] = r;
    node_by_address[r.ieee_address] = r.id;
    bump(kSensorNodes, r.id);
  }
  void apply(const Person& r) {
    persons[r.id] = r;
    bump(kPersons, r.id);
  }
  void apply(const Room& r) {
    rooms[r.id] = r;
    bump(kRooms, r.id);
  }
  void apply(const PersonRoom& r) { person_rooms.insert({r.person_id, r.room_id}); }
  void apply(const Camera& r) {
    cameras[r.id] = r;
    bump(kCameras, r.id);
  }
  void apply(const CameraImage& r) {
    images[r.id] = r;
    bump(kCameraImages, r.id);
  }
  void apply(const SensorMeasurement& m, std::uint32_t n_values) {
    measurements[m.id] = MeasurementRow{m, n_values, {}};
    by_node[m.node_id].emplace(m.timestamp, m.id);
    if (m.seq) sequences.insert({m.node_id, *m.seq});
    bump(kSensorMeasurements, m.id);
  }
  void apply(const SensorDatum& d) {
    data[d.id] = d;
    measurements.at(d.measurement_id).data.push_back(d.id);
    bump(kSensorData, d.id);
  }
  void drop_measurement(RowId id) {
    auto it = measurements.find(id);
    if (it == measurements.end()) return;
    for (RowId d : it->second.data) data.erase(d);
    auto& index = by_node[it->second.m.node_id];
    for (auto [lo, hi] = index.equal_range(it->second.m.timestamp); lo != hi; ++lo) {
      if (lo->second == id) {
        index.erase(lo);
        break;
      }
    }
    if (it->second.m.seq) sequences.erase({it->second.m.node_id, *it->second.m.seq});
    measurements.erase(it);
  }

  template <typename Row>
  RowId upsert(Entity e, Row row) {
    std::unique_lock lock(mu);
    row.id = assign(e, row.id);
    check(row);
    log(e, encode(row));
    apply(row);
    return row.id;
  }

  RowId upsert_node(SensorNode row) {
    std::unique_lock lock(mu);
    if (auto it = node_by_address.find(row.ieee_address); it != node_by_address.end()) {
      if (row.id != 0 && row.id != it->second) {
        throw ValidationError("ieee_address " + row.ieee_address + " already belongs to node " + std::to_string(it->second));
      }
      row.id = it->second;
    }
    row.id = assign(kSensorNodes, row.id);
    check(row);
    log(kSensorNodes, encode(row));
    apply(row);
    return row.id;
  }

  // --- replay ------------------------------------------------------------------

  void replay_record(Entity e, const Record& r) {
    switch (e) {
      case kSensorTypes: apply(SensorType{r.num<RowId>("id"), r.str("description")}); break;
      case kSensorNodes: {
        SensorNode n{r.num<RowId>("id"), r.str("ieee_address"), r.str("name"), r.num<RowId>("type_id"),
                     r.opt<RowId>("person_id")};
        check(n);
        apply(n);
        break;
      }
      case kPersons: apply(Person{r.num<RowId>("id"), r.str("first_name"), r.str("last_name")}); break;
      case kRooms: apply(Room{r.num<RowId>("id"), r.str("name")}); break;
      case kPersonRoom: {
        PersonRoom pr{r.num<RowId>("person_id"), r.num<RowId>("room_id")};
        check(pr);
        apply(pr);
        break;
      }
      case kCameras: {
        Camera c{r.num<RowId>("id"), r.str("name"), r.str("ip"), r.str("url"), r.opt<RowId>("room_id")};
        check(c);
        apply(c);
        break;
      }
      case kCameraImages: {
        auto bytes = from_hex(r.str("data"));
        if (!bytes) throw ValidationError("bad image data");
        CameraImage img{r.num<RowId>("id"), r.num<std::uint64_t>("timestamp"), std::move(*bytes), r.num<RowId>("camera_id")};
        check(img);
        apply(img);
        break;
      }
      case kSensorMeasurements: {
        SensorMeasurement m{r.num<RowId>("id"), r.num<std::uint64_t>("timestamp"), r.flag("risk"), r.num<RowId>("node_id"),
                            r.opt<std::uint32_t>("seq")};
        check_node_exists(m.node_id);
        apply(m, r.num<std::uint32_t>("n"));
        break;
      }
      case kSensorData: {
        SensorDatum d{r.num<RowId>("id"), r.num<double>("value"), r.num<RowId>("measurement_id")};
        bump(kSensorData, d.id);
        // Rows of an insert whose measurement line never landed are dropped.
        if (measurements.contains(d.measurement_id)) apply(d);
        break;
      }
      default: break;
    }
  }

  void replay(Entity e) {
    const fs::path path = *dir / (std::string(kEntityNames[e]) + ".log");
    if (!fs::exists(path)) return;
    const std::string text = detail::read_file(path);
    auto lines = detail::split_lines(text);
    // An unterminated final line is a torn append.
    if (!text.empty() && text.back() != '\n' && !lines.empty()) lines.pop_back();
    std::size_t line_no = 0;
    for (auto line : lines) {
      ++line_no;
      if (line.empty()) continue;
      try {
        replay_record(e, Record::parse(line));
      } catch (const Error& err) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + err.what());
      }
    }
  }

  void open_dir(const fs::path& d) {
    dir = d;
    std::error_code ec;
    fs::create_directories(d, ec);
    if (ec) throw IoError("cannot create store directory " + d.string() + ": " + ec.message());
    const fs::path manifest = d / "MANIFEST";
    if (fs::exists(manifest)) {
      const std::string text = detail::read_file(manifest);
      const std::string want = "schema_version=" + std::to_string(kSchemaVersion);
      if (detail::split_lines(text).empty() || detail::split_lines(text).front() != want) {
        throw FormatError("store " + d.string() + " has an unsupported MANIFEST (want " + want + ")");
      }
    } else {
      detail::write_file(manifest, "schema_version=" + std::to_string(kSchemaVersion) + "\n");
    }
    for (Entity e : kReplayOrder) replay(e);
    std::vector<RowId> incomplete;
    for (const auto& [id, row] : measurements) {
      if (row.data.size() != row.expected_values) incomplete.push_back(id);
    }
    for (RowId id : incomplete) drop_measurement(id);
    for (std::size_t e = 0; e < kEntityCount; ++e) {
      logs[e] = AppendLog(d / (std::string(kEntityNames[e]) + ".log"));
    }
  }
};

Store::Store(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
Store::Store(Store&&) noexcept = default;
Store& Store::operator=(Store&&) noexcept = default;
Store::~Store() = default;

Store Store::in_memory() { return Store(std::make_unique<Impl>()); }

Store Store::open(const fs::path& dir, Durability durability) {
  auto impl = std::make_unique<Impl>();
  impl->durability = durability;
  impl->open_dir(dir);
  return Store(std::move(impl));
}

std::span<const std::string_view> Store::entities() { return kEntityNames; }

RowId Store::upsert(const SensorType& row) { return impl_->upsert(kSensorTypes, row); }
RowId Store::upsert(const SensorNode& row) { return impl_->upsert_node(row); }
RowId Store::upsert(const Person& row) { return impl_->upsert(kPersons, row); }
RowId Store::upsert(const Room& row) { return impl_->upsert(kRooms, row); }
RowId Store::upsert(const Camera& row) { return impl_->upsert(kCameras, row); }
RowId Store::upsert(const CameraImage& row) { return impl_->upsert(kCameraImages, row); }

void Store::link(const PersonRoom& row) {
  std::unique_lock lock(impl_->mu);
  impl_->check(row);
  if (impl_->person_rooms.contains({row.person_id, row.room_id})) return;
  impl_->log(kPersonRoom, Impl::encode(row));
  impl_->apply(row);
}

RowId Store::upsert_entity(std::string_view entity, const std::map<std::string, std::string>& fields) {
  const Record r(fields);
  const auto id = r.num<RowId>("id", RowId{0});
  switch (entity_from_name(entity)) {
    case kSensorTypes:
      r.allow({"id", "description"});
      return upsert(SensorType{id, r.str("description")});
    case kSensorNodes:
      r.allow({"id", "ieee_address", "name", "type_id", "person_id"});
      return upsert(SensorNode{id, r.str("ieee_address"), r.str("name"), r.num<RowId>("type_id"), r.opt<RowId>("person_id")});
    case kPersons:
      r.allow({"id", "first_name", "last_name"});
      return upsert(Person{id, r.str("first_name"), r.str("last_name")});
    case kRooms:
      r.allow({"id", "name"});
      return upsert(Room{id, r.str("name")});
    case kPersonRoom:
      r.allow({"person_id", "room_id"});
      link(PersonRoom{r.num<RowId>("person_id"), r.num<RowId>("room_id")});
      return 0;
    case kCameras:
      r.allow({"id", "name", "ip", "url", "room_id"});
      return upsert(Camera{id, r.str("name"), r.str("ip"), r.str("url"), r.opt<RowId>("room_id")});
    case kCameraImages: {
      r.allow({"id", "timestamp", "data", "camera_id"});
      auto bytes = from_hex(r.str("data"));
      if (!bytes) throw ValidationError("CameraImages.data must be hex");
      return upsert(CameraImage{id, r.num<std::uint64_t>("timestamp"), std::move(*bytes), r.num<RowId>("camera_id")});
    }
    case kSensorMeasurements:
    case kSensorData:
      throw ValidationError("measurements are written with insert_measurement");
    default:
      break;
  }
  throw ValidationError("unknown entity '" + std::string(entity) + "'");
}

RowId Store::insert_measurement(RowId node_id, std::uint64_t timestamp, std::span<const double> values, bool risk,
                                std::optional<std::uint32_t> seq) {
  Impl& s = *impl_;
  std::unique_lock lock(s.mu);
  s.check_node_exists(node_id);
  if (values.empty()) throw ValidationError("a measurement needs at least one data value");
  for (double v : values) {
    if (!std::isfinite(v)) throw ValidationError("data values must be finite");
  }

  SensorMeasurement m{s.max_id[kSensorMeasurements] + 1, timestamp, risk, node_id, seq};
  std::vector<SensorDatum> rows;
  std::string data_text;
  RowId next = s.max_id[kSensorData];
  for (double v : values) {
    rows.push_back({++next, v, m.id});
    data_text += Impl::encode(rows.back());
  }
  // Data first: a measurement line on disk implies all of its data rows are.
  s.log(kSensorData, data_text);
  s.log(kSensorMeasurements, Impl::encode(m, values.size()));
  s.apply(m, static_cast<std::uint32_t>(values.size()));
  for (const auto& d : rows) s.apply(d);
  return m.id;
}

std::vector<MeasurementView> Store::query_measurements(RowId node_id, std::uint64_t t_from, std::uint64_t t_to,
                                                       bool risk_only) const {
  const Impl& s = *impl_;
  std::shared_lock lock(s.mu);
  s.check_node_exists(node_id);
  if (t_from > t_to) throw ValidationError("t_from must be <= t_to");
  std::vector<MeasurementView> out;
  auto index = s.by_node.find(node_id);
  if (index == s.by_node.end()) return out;
  for (auto it = index->second.lower_bound(t_from); it != index->second.end() && it->first <= t_to; ++it) {
    const auto& row = s.measurements.at(it->second);
    if (risk_only && !row.m.risk) continue;
    MeasurementView view{row.m, {}};
    view.values.reserve(row.data.size());
    for (RowId d : row.data) view.values.push_back(s.data.at(d).value);
    out.push_back(std::move(view));
  }
  return out;
}

std::optional<AlarmTargets> Store::resolve_alarm_targets(RowId node_id) const {
  const Impl& s = *impl_;
  std::shared_lock lock(s.mu);
  s.check_node_exists(node_id);
  const SensorNode& node = s.nodes.at(node_id);
  if (!node.person_id) return std::nullopt;
  AlarmTargets t;
  t.person_id = *node.person_id;
  // Lowest room that has a camera; otherwise the lowest room.
  for (auto it = s.person_rooms.lower_bound({t.person_id, 0}); it != s.person_rooms.end() && it->first == t.person_id; ++it) {
    if (!t.room_id) t.room_id = it->second;
    for (const auto& [cam_id, cam] : s.cameras) {
      if (cam.room_id == it->second) {
        t.room_id = it->second;
        t.camera_id = cam_id;
        return t;
      }
    }
  }
  return t;
}

std::optional<RowId> Store::find_node(std::string_view ieee_address) const {
  std::shared_lock lock(impl_->mu);
  auto it = impl_->node_by_address.find(std::string(ieee_address));
  if (it == impl_->node_by_address.end()) return std::nullopt;
  return it->second;
}

std::optional<SensorNode> Store::node(RowId id) const {
  std::shared_lock lock(impl_->mu);
  auto it = impl_->nodes.find(id);
  if (it == impl_->nodes.end()) return std::nullopt;
  return it->second;
}

bool Store::has_sequence(RowId node_id, std::uint32_t seq) const {
  std::shared_lock lock(impl_->mu);
  return impl_->sequences.contains({node_id, seq});
}

std::size_t Store::count(std::string_view entity) const {
  const Impl& s = *impl_;
  std::shared_lock lock(s.mu);
  switch (entity_from_name(entity)) {
    case kSensorTypes: return s.types.size();
    case kSensorNodes: return s.nodes.size();
    case kSensorMeasurements: return s.measurements.size();
    case kSensorData: return s.data.size();
    case kPersons: return s.persons.size();
    case kRooms: return s.rooms.size();
    case kPersonRoom: return s.person_rooms.size();
    case kCameras: return s.cameras.size();
    case kCameraImages: return s.images.size();
    default: return 0;
  }
}

std::string Store::dump_csv(std::string_view entity) const {
  const Impl& s = *impl_;
  std::shared_lock lock(s.mu);
  std::string out;
  auto row = [&out](std::initializer_list<std::string> cells) {
    bool first = true;
    for (const auto& c : cells) {
      if (!first) out.push_back(',');
      out += csv_cell(c);
      first = false;
    }
    out.push_back('\n');
  };
  auto sorted_ids = [](const auto& map) {
    std::vector<RowId> ids;
    for (const auto& [id, _] : map) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    return ids;
  };
  switch (entity_from_name(entity)) {
    case kSensorTypes:
      row({"id", "description"});
      for (const auto& [id, r] : s.types) row({std::to_string(id), r.description});
      break;
    case kSensorNodes:
      row({"id", "ieee_address", "name", "type_id", "person_id"});
      for (const auto& [id, r] : s.nodes) row({std::to_string(id), r.ieee_address, r.name, std::to_string(r.type_id), opt_str(r.person_id)});
      break;
    case kSensorMeasurements:
      row({"id", "timestamp", "risk", "node_id", "seq"});
      for (RowId id : sorted_ids(s.measurements)) {
        const auto& m = s.measurements.at(id).m;
        row({std::to_string(id), std::to_string(m.timestamp), m.risk ? "1" : "0", std::to_string(m.node_id), opt_str(m.seq)});
      }
      break;
    case kSensorData:
      row({"id", "value", "measurement_id"});
      for (RowId id : sorted_ids(s.data)) {
        const auto& d = s.data.at(id);
        row({std::to_string(id), detail::exact(d.value), std::to_string(d.measurement_id)});
      }
      break;
    case kPersons:
      row({"id", "first_name", "last_name"});
      for (const auto& [id, r] : s.persons) row({std::to_string(id), r.first_name, r.last_name});
      break;
    case kRooms:
      row({"id", "name"});
      for (const auto& [id, r] : s.rooms) row({std::to_string(id), r.name});
      break;
    case kPersonRoom:
      row({"person_id", "room_id"});
      for (const auto& [p, r] : s.person_rooms) row({std::to_string(p), std::to_string(r)});
      break;
    case kCameras:
      row({"id", "name", "ip", "url", "room_id"});
      for (const auto& [id, r] : s.cameras) row({std::to_string(id), r.name, r.ip, r.url, opt_str(r.room_id)});
      break;
    case kCameraImages:
      row({"id", "timestamp", "data", "camera_id"});
      for (const auto& [id, r] : s.images) row({std::to_string(id), std::to_string(r.timestamp), to_hex(r.data), std::to_string(r.camera_id)});
      break;
    default:
      break;
  }
  return out;
}

}  // namespace tiersim
