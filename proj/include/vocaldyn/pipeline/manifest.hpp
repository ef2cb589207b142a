#pragma once

#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vocaldyn/error.hpp"

namespace vocaldyn::pipeline {

using Json = nlohmann::ordered_json;

enum class Status { pending, features_done, aligned, accepted, rejected, labeled };

std::string_view status_name(Status s);
std::optional<Status> parse_status(std::string_view name);

/// Unknown record id (HTTP 404).
class UnknownRecordError : public Error {
public:
    using Error::Error;
};

/// Operation not allowed in the record's current status (HTTP 409).
class StatusError : public Error {
public:
    using Error::Error;
};

/// A stage input file is missing.
class MissingInputError : public Error {
public:
    using Error::Error;
};

struct Decision {
    std::string by;
    std::string at;  // ISO 8601, UTC
    std::string note;
    bool operator==(const Decision&) const = default;
};

struct PerformanceRecord {
    std::string id;
    std::string score_path;
    std::string audio_path;  // original mix
    std::string stem_path;   // separated vocals, produced outside this tool
    Status status = Status::pending;
    std::optional<double> alignment_score;
    std::optional<Decision> decision;
    Json extra = Json::object();  // the record as loaded; unknown fields survive a save

    Json to_json() const;
    static PerformanceRecord from_json(const Json& j);
};

/// Allowed moves: pending -> features_done -> aligned -> accepted | rejected,
/// accepted -> labeled.
bool transition_allowed(Status from, Status to);

/// JSON array of records. Relative paths inside records resolve against
/// data_root(), which is $DYNAMICS_DATA_ROOT (or $VOCALDYN_DATA_ROOT) when set
/// and the manifest's directory otherwise.
class Manifest {
public:
    static Manifest load(const std::filesystem::path& path);
    static Manifest parse(std::string_view text, std::filesystem::path path = {});

    /// Atomic: temporary file then rename.
    void save() const;
    void save(const std::filesystem::path& path) const;
    std::string dump() const;

    PerformanceRecord& find(std::string_view id);
    const PerformanceRecord& find(std::string_view id) const;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path data_root() const;
    std::filesystem::path resolve(const std::string& p) const;
    std::filesystem::path artifact_dir(std::string_view id) const;

    std::vector<PerformanceRecord> records;

private:
    std::filesystem::path path_;
};

}  // namespace vocaldyn::pipeline
