#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace wastetwin::telemetry {

enum class Channel : std::uint8_t {
    temperature,
    ph,
    pressure,
    gas_rate,
    gas_cumulative,
    level,
    rpm,
    heater_power,
};

inline constexpr std::array<Channel, 8> kAllChannels = {
    Channel::temperature, Channel::ph,    Channel::pressure, Channel::gas_rate,
    Channel::gas_cumulative, Channel::level, Channel::rpm,   Channel::heater_power,
};

enum class Quality : std::uint8_t { ok, sensor_fault };

std::string_view to_string(Channel c);
std::string_view to_string(Quality q);
std::optional<Channel> channel_from_string(std::string_view name);
std::optional<Quality> quality_from_string(std::string_view name);

struct TelemetryRecord {
    double t_min = 0.0;
    Channel channel = Channel::temperature;
    double value = 0.0;
    Quality quality = Quality::ok;

    friend bool operator==(const TelemetryRecord&, const TelemetryRecord&) = default;
};

/// Append-only in-memory log for one run. Records are kept in append order
/// and indexed per channel so time windows are cheap to extract.
class TelemetryStore {
public:
    explicit TelemetryStore(std::string run_id = "run");

    const std::string& run_id() const { return run_id_; }

    /// Throws OrderingError if `record.t_min` is earlier than the last
    /// record on the same channel, StateError once closed.
    void append(const TelemetryRecord& record);
    void append(std::span<const TelemetryRecord> records);

    /// Closed interval [t_from, t_to], channel-filtered, ordered by time
    /// with append order breaking ties. An empty channel list selects all.
    std::vector<TelemetryRecord> read_window(std::span<const Channel> channels, double t_from,
                                             double t_to) const;

    const std::vector<TelemetryRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }

    void close() { closed_ = true; }
    bool closed() const { return closed_; }

private:
    std::string run_id_;
    std::vector<TelemetryRecord> records_;
    // Per-channel positions into records_, in time order.
    std::array<std::vector<std::size_t>, kAllChannels.size()> by_channel_;
    bool closed_ = false;
};

void write_csv(std::ostream& out, std::span<const TelemetryRecord> records);
std::vector<TelemetryRecord> read_csv(std::istream& in);

/// Writes the run as `t_min,channel,value,quality` with 17 significant digits.
void export_csv(const TelemetryStore& store, const std::filesystem::path& path);
/// Throws ParseError (with 1-based line number) or SchemaError.
TelemetryStore import_csv(const std::filesystem::path& path, std::string run_id = "imported");

struct RunManifest {
    std::string run_id;
    std::map<std::string, std::uint64_t> seeds;
    std::string config_digest;
    double start_min = 0.0;
    double end_min = 0.0;
    std::string artifact_version;
};

/// SHA-256 (hex) of the canonical serialization of `config`: object keys
/// sorted, no whitespace. Stable under key reordering.
std::string config_digest(const nlohmann::json& config);

nlohmann::json to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const nlohmann::json& j);

}  // namespace wastetwin::telemetry
