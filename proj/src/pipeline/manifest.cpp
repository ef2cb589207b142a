#include "vocaldyn/pipeline/manifest.hpp"

#include <cstdlib>
#include <set>

#include "vocaldyn/io.hpp"

namespace vocaldyn::pipeline {
namespace {

std::string required_string(const Json& j, const char* key, const std::string& id) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_string())
        throw ParseError("manifest record '" + id + "' needs a string field '" + key + "'");
    return it->get<std::string>();
}

}  // namespace

std::string_view status_name(Status s) {
    switch (s) {
        case Status::pending: return "pending";
        case Status::features_done: return "features_done";
        case Status::aligned: return "aligned";
        case Status::accepted: return "accepted";
        case Status::rejected: return "rejected";
        case Status::labeled: return "labeled";
    }
    return "?";
}

std::optional<Status> parse_status(std::string_view name) {
    for (auto s : {Status::pending, Status::features_done, Status::aligned, Status::accepted, Status::rejected,
                   Status::labeled})
        if (status_name(s) == name) return s;
    return std::nullopt;
}

bool transition_allowed(Status from, Status to) {
    switch (from) {
        case Status::pending: return to == Status::features_done;
        case Status::features_done: return to == Status::aligned;
        case Status::aligned: return to == Status::accepted || to == Status::rejected;
        case Status::accepted: return to == Status::labeled;
        case Status::rejected:
        case Status::labeled: return false;
    }
    return false;
}

Json PerformanceRecord::to_json() const {
    Json j = extra;
    j["id"] = id;
    j["score_path"] = score_path;
    j["audio_path"] = audio_path;
    if (!stem_path.empty() || j.contains("stem_path")) j["stem_path"] = stem_path;
    j["status"] = std::string(status_name(status));
    if (alignment_score) j["alignment_score"] = *alignment_score;
    else if (j.contains("alignment_score")) j["alignment_score"] = nullptr;
    if (decision) j["decision"] = {{"by", decision->by}, {"at", decision->at}, {"note", decision->note}};
    else if (j.contains("decision")) j["decision"] = nullptr;
    return j;
}

PerformanceRecord PerformanceRecord::from_json(const Json& j) {
    if (!j.is_object()) throw ParseError("manifest entries must be objects");
    PerformanceRecord r;
    r.extra = j;
    r.id = required_string(j, "id", "?");
    // ids name artifact directories
    if (r.id.empty() || r.id == "." || r.id == ".." || r.id.find_first_of("/\\") != std::string::npos)
        throw ParseError("manifest record id '" + r.id + "' is not usable as a directory name");
    r.score_path = required_string(j, "score_path", r.id);
    r.audio_path = required_string(j, "audio_path", r.id);
    r.stem_path = j.contains("stem_path") && j["stem_path"].is_string() ? j["stem_path"].get<std::string>() : "";
    const auto st = j.contains("status") ? required_string(j, "status", r.id) : std::string("pending");
    const auto parsed = parse_status(st);
    if (!parsed) throw ParseError("manifest record '" + r.id + "' has unknown status '" + st + "'");
    r.status = *parsed;
    if (const auto it = j.find("alignment_score"); it != j.end() && !it->is_null()) {
        if (!it->is_number()) throw ParseError("manifest record '" + r.id + "': alignment_score must be a number");
        r.alignment_score = it->get<double>();
    }
    if (const auto it = j.find("decision"); it != j.end() && !it->is_null()) {
        if (!it->is_object()) throw ParseError("manifest record '" + r.id + "': decision must be an object");
        r.decision = Decision{it->value("by", ""), it->value("at", ""), it->value("note", "")};
    }
    return r;
}

Manifest Manifest::parse(std::string_view text, std::filesystem::path path) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("manifest is not valid JSON: ") + e.what());
    }
    if (!j.is_array()) throw ParseError("manifest must be a JSON array of records");
    Manifest m;
    m.path_ = std::move(path);
    std::set<std::string> seen;
    for (const auto& e : j) {
        auto r = PerformanceRecord::from_json(e);
        if (!seen.insert(r.id).second) throw ParseError("duplicate record id '" + r.id + "' in manifest");
        m.records.push_back(std::move(r));
    }
    return m;
}

Manifest Manifest::load(const std::filesystem::path& path) { return parse(io::read_text_file(path), path); }

std::string Manifest::dump() const {
    Json arr = Json::array();
    for (const auto& r : records) arr.push_back(r.to_json());
    return arr.dump(2) + "\n";
}

void Manifest::save() const {
    if (path_.empty()) throw InvalidArgument("manifest has no path to save to");
    save(path_);
}

void Manifest::save(const std::filesystem::path& path) const { io::write_file_atomic(path, dump()); }

PerformanceRecord& Manifest::find(std::string_view id) {
    for (auto& r : records)
        if (r.id == id) return r;
    throw UnknownRecordError("no performance with id '" + std::string(id) + "'");
}

const PerformanceRecord& Manifest::find(std::string_view id) const {
    return const_cast<Manifest*>(this)->find(id);
}

std::filesystem::path Manifest::data_root() const {
    for (const char* var : {"DYNAMICS_DATA_ROOT", "VOCALDYN_DATA_ROOT"})
        if (const char* v = std::getenv(var); v && *v) return v;
    const auto dir = path_.parent_path();
    return dir.empty() ? std::filesystem::path(".") : dir;
}

std::filesystem::path Manifest::resolve(const std::string& p) const {
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : data_root() / fp;
}

std::filesystem::path Manifest::artifact_dir(std::string_view id) const {
    return data_root() / "artifacts" / std::string(id);
}

}  // namespace vocaldyn::pipeline
