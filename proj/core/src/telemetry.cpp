#include "wastetwin/telemetry.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <openssl/evp.h>

#include "wastetwin/error.hpp"
#include "wastetwin/util.hpp"

namespace wastetwin::telemetry {

namespace {

constexpr std::array<std::string_view, kAllChannels.size()> kChannelNames = {
    "temperature", "ph", "pressure", "gas_rate", "gas_cumulative", "level", "rpm", "heater_power",
};

std::size_t index_of(Channel c) { return static_cast<std::size_t>(c); }

}  // namespace

std::string_view to_string(Channel c) { return kChannelNames.at(index_of(c)); }

std::string_view to_string(Quality q) { return q == Quality::ok ? "ok" : "sensor_fault"; }

std::optional<Channel> channel_from_string(std::string_view name) {
    for (std::size_t i = 0; i < kChannelNames.size(); ++i) {
        if (kChannelNames[i] == name) return kAllChannels[i];
    }
    return std::nullopt;
}

std::optional<Quality> quality_from_string(std::string_view name) {
    if (name == "ok") return Quality::ok;
    if (name == "sensor_fault") return Quality::sensor_fault;
    return std::nullopt;
}

TelemetryStore::TelemetryStore(std::string run_id) : run_id_(std::move(run_id)) {}

void TelemetryStore::append(const TelemetryRecord& record) {
    if (closed_) throw StateError("telemetry: run '" + run_id_ + "' is closed");
    auto& index = by_channel_[index_of(record.channel)];
    if (!index.empty() && record.t_min < records_[index.back()].t_min) {
        throw OrderingError("telemetry: time regression on channel " +
                            std::string(to_string(record.channel)) + " (t=" +
                            format_double(record.t_min) + " < " +
                            format_double(records_[index.back()].t_min) + ")");
    }
    index.push_back(records_.size());
    records_.push_back(record);
}

void TelemetryStore::append(std::span<const TelemetryRecord> records) {
    for (const auto& r : records) append(r);
}

std::vector<TelemetryRecord> TelemetryStore::read_window(std::span<const Channel> channels,
                                                         double t_from, double t_to) const {
    if (t_from > t_to) {
        throw InputError("telemetry: inverted window [" + format_double(t_from) + ", " +
                         format_double(t_to) + "]");
    }
    std::vector<std::size_t> picked;
    auto take = [&](Channel c) {
        const auto& index = by_channel_[index_of(c)];
        auto lo = std::lower_bound(index.begin(), index.end(), t_from,
                                   [&](std::size_t i, double t) { return records_[i].t_min < t; });
        auto hi = std::upper_bound(lo, index.end(), t_to,
                                   [&](double t, std::size_t i) { return t < records_[i].t_min; });
        picked.insert(picked.end(), lo, hi);
    };
    if (channels.empty()) {
        for (Channel c : kAllChannels) take(c);
    } else {
        std::array<bool, kAllChannels.size()> seen{};
        for (Channel c : channels) {
            if (!seen[index_of(c)]) take(c);
            seen[index_of(c)] = true;
        }
    }
    std::sort(picked.begin(), picked.end(), [&](std::size_t a, std::size_t b) {
        if (records_[a].t_min != records_[b].t_min) return records_[a].t_min < records_[b].t_min;
        return a < b;
    });
    std::vector<TelemetryRecord> out;
    out.reserve(picked.size());
    for (std::size_t i : picked) out.push_back(records_[i]);
    return out;
}

void write_csv(std::ostream& out, std::span<const TelemetryRecord> records) {
    out << "t_min,channel,value,quality\n";
    for (const auto& r : records) {
        out << format_double(r.t_min) << ',' << to_string(r.channel) << ','
            << format_double(r.value) << ',' << to_string(r.quality) << '\n';
    }
}

std::vector<TelemetryRecord> read_csv(std::istream& in) {
    std::vector<TelemetryRecord> out;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!header_seen) {
            if (line != "t_min,channel,value,quality") {
                throw ParseError("telemetry csv: line 1: unexpected header '" + line + "'", line_no);
            }
            header_seen = true;
            continue;
        }
        if (line.empty()) continue;

        std::vector<std::string_view> fields;
        std::string_view rest(line);
        for (;;) {
            auto comma = rest.find(',');
            fields.push_back(rest.substr(0, comma));
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        const auto fail = [&](const std::string& why) {
            throw ParseError("telemetry csv: line " + std::to_string(line_no) + ": " + why, line_no);
        };
        if (fields.size() != 4) fail("expected 4 fields, got " + std::to_string(fields.size()));

        TelemetryRecord r;
        auto t = parse_double(fields[0]);
        if (!t) fail("bad t_min '" + std::string(fields[0]) + "'");
        auto ch = channel_from_string(fields[1]);
        if (!ch) {
            throw SchemaError("telemetry csv: line " + std::to_string(line_no) +
                              ": unknown channel '" + std::string(fields[1]) + "'");
        }
        auto v = parse_double(fields[2]);
        if (!v) fail("bad value '" + std::string(fields[2]) + "'");
        auto q = quality_from_string(fields[3]);
        if (!q) fail("bad quality '" + std::string(fields[3]) + "'");
        r.t_min = *t;
        r.channel = *ch;
        r.value = *v;
        r.quality = *q;
        out.push_back(r);
    }
    if (!header_seen) throw ParseError("telemetry csv: missing header", 1);
    return out;
}

void export_csv(const TelemetryStore& store, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("telemetry: cannot open '" + path.string() + "' for writing");
    write_csv(out, store.records());
    if (!out) throw Error("telemetry: write to '" + path.string() + "' failed");
}

TelemetryStore import_csv(const std::filesystem::path& path, std::string run_id) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("telemetry: cannot open '" + path.string() + "'");
    TelemetryStore store(std::move(run_id));
    store.append(read_csv(in));
    return store;
}

std::string config_digest(const nlohmann::json& config) {
    // nlohmann::json objects are std::map backed, so dump() emits sorted keys.
    const std::string canonical = config.dump();
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(canonical.data(), canonical.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("telemetry: sha256 failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string hex;
    hex.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        hex.push_back(kHex[md[i] >> 4]);
        hex.push_back(kHex[md[i] & 0xf]);
    }
    return hex;
}

nlohmann::json to_json(const RunManifest& m) {
    nlohmann::json seeds = nlohmann::json::object();
    for (const auto& [k, v] : m.seeds) seeds[k] = v;
    return {
        {"run_id", m.run_id},
        {"seeds", seeds},
        {"config_digest", m.config_digest},
        {"start_min", m.start_min},
        {"end_min", m.end_min},
        {"artifact_version", m.artifact_version},
    };
}

RunManifest manifest_from_json(const nlohmann::json& j) {
    RunManifest m;
    try {
        m.run_id = j.at("run_id").get<std::string>();
        for (const auto& [k, v] : j.at("seeds").items()) m.seeds[k] = v.get<std::uint64_t>();
        m.config_digest = j.at("config_digest").get<std::string>();
        m.start_min = j.at("start_min").get<double>();
        m.end_min = j.at("end_min").get<double>();
        m.artifact_version = j.at("artifact_version").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("manifest: ") + e.what());
    }
    return m;
}

}  // namespace wastetwin::telemetry
