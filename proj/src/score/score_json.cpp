#include "vocaldyn/score/score_json.hpp"

namespace vocaldyn::score {
namespace {

template <class F>
auto guarded(const char* what, F&& f) {
    try {
        return f();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid ") + what + " JSON: " + e.what());
    }
}

DynamicCategory category_from(const Json& j) {
    const auto name = j.get<std::string>();
    const auto c = parse_category(name);
    if (!c) throw ParseError("unknown dynamic category '" + name + "'");
    return *c;
}

PartRole role_from(const Json& j) {
    const auto name = j.get<std::string>();
    const auto r = parse_part_role(name);
    if (!r) throw ParseError("unknown part '" + name + "'");
    return *r;
}

Json note_json(const NoteEvent& n) {
    return Json{{"pitch", n.pitch}, {"onset", n.onset}, {"duration", n.duration}, {"measure", n.measure}};
}

NoteEvent note_from(const Json& j, PartRole role) {
    NoteEvent n;
    n.pitch = j.at("pitch").get<int>();
    n.onset = j.at("onset").get<double>();
    n.duration = j.at("duration").get<double>();
    n.measure = j.value("measure", 1);
    n.part = role;
    if (!(n.duration > 0) || n.onset < 0) throw ParseError("note with negative onset or non-positive duration");
    return n;
}

}  // namespace

Json to_json(const ScoreDocument& s) {
    Json j;
    j["metadata"] = {{"composer", s.metadata.composer},
                     {"title", s.metadata.title},
                     {"catalogue_id", s.metadata.catalogue_id}};
    j["tempo_hint"] = s.tempo_hint ? Json(*s.tempo_hint) : Json(nullptr);
    Json parts = Json::array();
    for (const auto& p : s.parts) {
        Json notes = Json::array();
        for (const auto& n : p.notes) notes.push_back(note_json(n));
        parts.push_back({{"id", std::string(part_role_name(p.role))}, {"notes", std::move(notes)}});
    }
    j["parts"] = std::move(parts);
    Json marks = Json::array();
    for (const auto& m : s.markings)
        marks.push_back({{"category", std::string(category_name(m.category))},
                         {"offset", m.offset},
                         {"part", std::string(part_role_name(m.part))},
                         {"span_end", m.span_end}});
    j["markings"] = std::move(marks);
    j["measure_starts"] = s.measure_starts;
    return j;
}

ScoreDocument score_from_json(const Json& j) {
    return guarded("score", [&] {
        ScoreDocument s;
        if (j.contains("metadata")) {
            const auto& m = j.at("metadata");
            s.metadata.composer = m.value("composer", "");
            s.metadata.title = m.value("title", "");
            s.metadata.catalogue_id = m.value("catalogue_id", "");
        }
        if (j.contains("tempo_hint") && !j.at("tempo_hint").is_null()) s.tempo_hint = j.at("tempo_hint").get<double>();
        for (const auto& p : j.at("parts")) {
            const auto role = role_from(p.at("id"));
            auto& part = s.part(role);
            for (const auto& n : p.at("notes")) part.notes.push_back(note_from(n, role));
        }
        for (const auto& m : j.at("markings")) {
            DynamicMarking d;
            d.category = category_from(m.at("category"));
            d.offset = m.at("offset").get<double>();
            d.part = role_from(m.at("part"));
            d.span_end = m.value("span_end", d.offset);
            if (d.span_end < d.offset || (d.span_end > d.offset && !is_wedge(d.category)))
                throw ParseError("marking span_end inconsistent with category");
            if (!s.find_part(d.part)) throw ParseError("marking refers to a missing part");
            s.markings.push_back(d);
        }
        if (j.contains("measure_starts")) s.measure_starts = j.at("measure_starts").get<std::vector<double>>();
        s.normalize();
        return s;
    });
}

Json to_json(const std::vector<NoteDynamicLabel>& labels) {
    Json arr = Json::array();
    for (const auto& l : labels) {
        Json j{{"note_index", l.note_index},
               {"pitch", l.note.pitch},
               {"onset", l.note.onset},
               {"duration", l.note.duration},
               {"measure", l.note.measure},
               {"category", std::string(category_name(l.category))}};
        if (l.region) j["region"] = *l.region == WedgeRegion::crescendo ? "crescendo" : "diminuendo";
        else j["region"] = nullptr;
        arr.push_back(std::move(j));
    }
    return arr;
}

std::vector<NoteDynamicLabel> labels_from_json(const Json& j) {
    return guarded("labels", [&] {
        std::vector<NoteDynamicLabel> out;
        for (const auto& e : j) {
            NoteDynamicLabel l;
            l.note_index = e.at("note_index").get<std::size_t>();
            l.note = note_from(e, PartRole::vocal);
            l.category = category_from(e.at("category"));
            if (is_wedge(l.category)) throw ParseError("note label cannot be a wedge");
            if (e.contains("region") && !e.at("region").is_null()) {
                const auto r = e.at("region").get<std::string>();
                if (r == "crescendo") l.region = WedgeRegion::crescendo;
                else if (r == "diminuendo") l.region = WedgeRegion::diminuendo;
                else throw ParseError("unknown region '" + r + "'");
            }
            out.push_back(l);
        }
        return out;
    });
}

Json to_json(const CategoryCounts& counts) {
    Json j = Json::object();
    for (auto c : all_categories()) {
        auto it = counts.find(c);
        j[std::string(category_name(c))] = it == counts.end() ? 0 : it->second;
    }
    return j;
}

}  // namespace vocaldyn::score
