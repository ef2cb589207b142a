#include "vocaldyn/score/musicxml.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include "vocaldyn/io.hpp"
#include "xml_dom.hpp"

namespace vocaldyn::score {
namespace {

constexpr double kEps = 1e-7;
constexpr long long kWriteDivisions = 10080;

using xml::Node;

long long to_ll(const std::string& s, long line, const char* what) {
    long long v = 0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end) throw ParseError(std::string("invalid ") + what + " '" + s + "'", line);
    return v;
}

double to_double(const std::string& s, long line, const char* what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError(std::string("invalid ") + what + " '" + s + "'", line);
    }
}

int step_semitone(char step) {
    switch (step) {
        case 'C': return 0;
        case 'D': return 2;
        case 'E': return 4;
        case 'F': return 5;
        case 'G': return 7;
        case 'A': return 9;
        case 'B': return 11;
        default: return -1;
    }
}

enum class Mapping { vocal, piano, piano_lh, piano_rh, other, ignore };

Mapping parse_mapping(const std::string& v) {
    if (v == "vocal") return Mapping::vocal;
    if (v == "piano") return Mapping::piano;
    if (v == "piano_lh") return Mapping::piano_lh;
    if (v == "piano_rh") return Mapping::piano_rh;
    if (v == "other") return Mapping::other;
    if (v == "ignore") return Mapping::ignore;
    throw InvalidArgument("unknown part role '" + v + "'");
}

std::optional<PartRole> role_for(Mapping m, int staff) {
    switch (m) {
        case Mapping::vocal: return PartRole::vocal;
        case Mapping::piano: return staff >= 2 ? PartRole::piano_lh : PartRole::piano_rh;
        case Mapping::piano_lh: return PartRole::piano_lh;
        case Mapping::piano_rh: return PartRole::piano_rh;
        case Mapping::other: return PartRole::other;
        case Mapping::ignore: return std::nullopt;
    }
    return std::nullopt;
}

int max_staves(const Node& part) {
    int staves = 1;
    for (const auto& m : part.children) {
        if (m->name != "measure") continue;
        for (const auto& c : m->children)
            if (c->name == "attributes") {
                const auto s = c->child_text("staves");
                if (!s.empty()) staves = std::max(staves, static_cast<int>(to_ll(s, c->line, "staves")));
            }
    }
    return staves;
}

class PartReader {
public:
    PartReader(ScoreDocument& doc, Mapping mapping, bool record_measures)
        : doc_(doc), mapping_(mapping), record_measures_(record_measures) {}

    void read(const Node& part) {
        int index = 0;
        for (const auto& m : part.children) {
            if (m->name != "measure") continue;
            read_measure(*m, ++index);
        }
        // Wedges left open run to the end of the part.
        for (auto& [number, idx] : open_wedges_) doc_.markings[idx].span_end = std::max(position_q_, doc_.markings[idx].offset);
    }

private:
    double pos(long long ticks) const { return measure_start_ + static_cast<double>(ticks) / static_cast<double>(divisions_); }

    void read_measure(const Node& measure, int index) {
        if (record_measures_) doc_.measure_starts.push_back(measure_start_);
        long long cursor = 0, max_cursor = 0, chord_start = 0;
        for (const auto& c : measure.children) {
            const Node& el = *c;
            if (el.name == "attributes") {
                const auto d = el.child_text("divisions");
                if (!d.empty()) {
                    const long long nd = to_ll(d, el.line, "divisions");
                    if (nd <= 0) throw ParseError("divisions must be positive", el.line);
                    if (nd != divisions_) {
                        cursor = cursor * nd / divisions_;
                        max_cursor = max_cursor * nd / divisions_;
                        chord_start = chord_start * nd / divisions_;
                        divisions_ = nd;
                    }
                }
            } else if (el.name == "note") {
                if (el.has("grace")) continue;
                const auto dtext = el.child_text("duration");
                const long long dur = dtext.empty() ? 0 : to_ll(dtext, el.line, "duration");
                long long start;
                if (el.has("chord")) {
                    start = chord_start;
                } else {
                    start = cursor;
                    chord_start = cursor;
                    cursor += dur;
                }
                max_cursor = std::max(max_cursor, cursor);
                read_note(el, start, dur, index);
            } else if (el.name == "backup") {
                cursor = std::max<long long>(0, cursor - to_ll(el.child_text("duration"), el.line, "duration"));
            } else if (el.name == "forward") {
                cursor += to_ll(el.child_text("duration"), el.line, "duration");
                max_cursor = std::max(max_cursor, cursor);
            } else if (el.name == "direction") {
                read_direction(el, cursor);
            } else if (el.name == "sound") {
                read_sound(el);
            }
        }
        measure_start_ = pos(max_cursor);
        position_q_ = measure_start_;
    }

    void read_sound(const Node& sound) {
        const auto t = sound.attribute("tempo");
        if (!t.empty() && !doc_.tempo_hint) {
            const double v = to_double(std::string(t), sound.line, "tempo");
            if (v > 0) doc_.tempo_hint = v;
        }
    }

    int staff_of(const Node& el) const {
        const auto s = el.child_text("staff");
        return s.empty() ? 1 : static_cast<int>(to_ll(s, el.line, "staff"));
    }

    void add_marking(DynamicCategory c, double offset, PartRole role) {
        doc_.markings.push_back({c, offset, role, offset});
    }

    void read_dynamics(const Node& dyn, double offset, PartRole role) {
        for (const auto& d : dyn.children) {
            std::optional<DynamicCategory> c;
            if (d->name == "other-dynamics") c = parse_category(xml::trim(d->text));
            else c = parse_category(d->name);
            if (c && !is_wedge(*c)) add_marking(*c, offset, role);
        }
    }

    void read_direction(const Node& dir, long long cursor) {
        long long ticks = cursor;
        const auto off = dir.child_text("offset");
        if (!off.empty()) ticks = std::max<long long>(0, ticks + to_ll(off, dir.line, "offset"));
        const double at = pos(ticks);
        if (const Node* s = dir.child("sound")) read_sound(*s);
        const auto role = role_for(mapping_, staff_of(dir));
        if (!role) return;
        for (const auto& dt : dir.children) {
            if (dt->name != "direction-type") continue;
            for (const auto& item : dt->children) {
                if (item->name == "dynamics") {
                    read_dynamics(*item, at, *role);
                } else if (item->name == "wedge") {
                    const std::string type(item->attribute("type"));
                    std::string number(item->attribute("number"));
                    if (number.empty()) number = "1";
                    if (type == "crescendo" || type == "diminuendo") {
                        open_wedges_[number] = doc_.markings.size();
                        add_marking(type == "crescendo" ? DynamicCategory::crescendo : DynamicCategory::diminuendo, at,
                                    *role);
                    } else if (type == "stop") {
                        auto it = open_wedges_.find(number);
                        if (it != open_wedges_.end()) {
                            auto& m = doc_.markings[it->second];
                            m.span_end = std::max(at, m.offset);
                            open_wedges_.erase(it);
                        }
                    }
                }
            }
        }
    }

    void read_note(const Node& el, long long start, long long dur, int measure) {
        if (el.has("rest") || el.has("cue") || el.has("unpitched")) return;
        const Node* pitch = el.child("pitch");
        if (!pitch) return;
        const auto role = role_for(mapping_, staff_of(el));
        if (!role) return;

        const auto step = pitch->child_text("step");
        const int semis = step.size() == 1 ? step_semitone(step[0]) : -1;
        if (semis < 0) throw ParseError("invalid pitch step '" + step + "'", pitch->line);
        const auto alter_text = pitch->child_text("alter");
        const double alter = alter_text.empty() ? 0.0 : to_double(alter_text, pitch->line, "alter");
        const long long octave = to_ll(pitch->child_text("octave"), pitch->line, "octave");
        const int midi = static_cast<int>((octave + 1) * 12 + semis + std::lround(alter));

        const double onset = pos(start);
        const double duration = static_cast<double>(dur) / static_cast<double>(divisions_);
        if (const Node* notations = el.child("notations"))
            for (const auto& n : notations->children)
                if (n->name == "dynamics") read_dynamics(*n, onset, *role);
        if (dur <= 0) return;

        bool tie_start = false, tie_stop = false;
        for (const auto& c : el.children) {
            if (c->name == "tie") {
                const auto t = c->attribute("type");
                tie_start |= t == "start";
                tie_stop |= t == "stop";
            }
        }
        if (!tie_start && !tie_stop)
            if (const Node* notations = el.child("notations"))
                for (const auto& n : notations->children)
                    if (n->name == "tied") {
                        const auto t = n->attribute("type");
                        tie_start |= t == "start";
                        tie_stop |= t == "stop";
                    }

        auto& notes = doc_.part(*role).notes;
        const auto key = std::make_pair(*role, midi);
        if (tie_stop) {
            auto it = open_ties_.find(key);
            if (it != open_ties_.end()) {
                NoteEvent& prev = notes[it->second];
                if (std::abs(prev.end() - onset) < kEps) {
                    prev.duration = onset + duration - prev.onset;
                    if (!tie_start) open_ties_.erase(it);
                    return;
                }
                open_ties_.erase(it);
            }
        }
        notes.push_back({midi, onset, duration, *role, measure});
        if (tie_start) open_ties_[key] = notes.size() - 1;
    }

    ScoreDocument& doc_;
    Mapping mapping_;
    bool record_measures_;
    long long divisions_ = 1;
    double measure_start_ = 0.0;
    double position_q_ = 0.0;
    std::map<std::string, std::size_t> open_wedges_;
    std::map<std::pair<PartRole, int>, std::size_t> open_ties_;
};

void read_metadata(const Node& root, ScoreMetadata& meta) {
    if (const Node* work = root.child("work")) meta.title = work->child_text("work-title");
    if (meta.title.empty()) meta.title = root.child_text("movement-title");
    if (const Node* ident = root.child("identification")) {
        for (const auto& c : ident->children)
            if (c->name == "creator" && c->attribute("type") == "composer") meta.composer = xml::trim(c->text);
        if (const Node* misc = ident->child("miscellaneous"))
            for (const auto& f : misc->children)
                if (f->name == "miscellaneous-field" && f->attribute("name") == "catalogue-id")
                    meta.catalogue_id = xml::trim(f->text);
    }
}

// Keeps only the highest pitch among vocal notes sharing an onset.
void reduce_vocal_chords(ScoreDocument& doc) {
    for (auto& part : doc.parts) {
        if (part.role != PartRole::vocal) continue;
        std::vector<NoteEvent> kept;
        for (const auto& n : part.notes) {
            if (!kept.empty() && std::abs(kept.back().onset - n.onset) < kEps) {
                if (n.pitch > kept.back().pitch) kept.back() = n;
            } else {
                kept.push_back(n);
            }
        }
        part.notes = std::move(kept);
    }
}

}  // namespace

std::map<std::string, std::string> parse_part_role_overrides(std::string_view text) {
    std::map<std::string, std::string> out;
    std::string item;
    std::istringstream in{std::string(text)};
    while (std::getline(in, item, ',')) {
        item = xml::trim(item);
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == item.size())
            throw InvalidArgument("part role override must look like ID=ROLE: '" + item + "'");
        const std::string role = xml::trim(item.substr(eq + 1));
        parse_mapping(role);
        out[xml::trim(item.substr(0, eq))] = role;
    }
    return out;
}

ScoreDocument parse_musicxml(std::string_view document, const MusicXmlOptions& options) {
    const auto root = xml::parse(document);
    if (root->name == "score-timewise") throw ParseError("timewise MusicXML is not supported", root->line);
    if (root->name != "score-partwise") throw ParseError("root element is not score-partwise", root->line);

    ScoreDocument doc;
    read_metadata(*root, doc.metadata);

    std::vector<const Node*> parts;
    for (const auto& c : root->children)
        if (c->name == "part") parts.push_back(c.get());
    if (parts.empty()) throw EmptyScoreError("score has no parts");

    bool piano_taken = false;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const std::string id(parts[i]->attribute("id"));
        Mapping mapping;
        if (auto it = options.part_roles.find(id); it != options.part_roles.end()) {
            mapping = parse_mapping(it->second);
        } else if (i == 0) {
            mapping = Mapping::vocal;
        } else if (!piano_taken && max_staves(*parts[i]) >= 2) {
            mapping = Mapping::piano;
        } else {
            mapping = Mapping::other;
        }
        if (mapping == Mapping::piano) {
            piano_taken = true;
            doc.part(PartRole::piano_rh);
            doc.part(PartRole::piano_lh);
        } else if (auto r = role_for(mapping, 1)) {
            doc.part(*r);
        }
        PartReader(doc, mapping, i == 0).read(*parts[i]);
    }

    reduce_vocal_chords(doc);
    doc.normalize();
    return doc;
}

ScoreDocument read_musicxml(const std::filesystem::path& path, const MusicXmlOptions& options) {
    const auto ext = path.extension().string();
    if (ext == ".mxl") throw InvalidArgument("compressed MusicXML (.mxl) is not supported: " + path.string());
    return parse_musicxml(io::read_text_file(path), options);
}

// ---------------------------------------------------------------------------
// Writer

namespace {

struct Stream {
    PartRole role;
    int staff;
};

struct Group {
    double onset;
    double end;
    std::vector<int> pitches;
};

std::string fmt_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

long long ticks(double q) { return std::llround(q * static_cast<double>(kWriteDivisions)); }

void write_pitch(std::ostringstream& o, int midi) {
    static constexpr const char* steps[12] = {"C", "C", "D", "D", "E", "F", "F", "G", "G", "A", "A", "B"};
    static constexpr int alters[12] = {0, 1, 0, 1, 0, 0, 1, 0, 1, 0, 1, 0};
    const int pc = ((midi % 12) + 12) % 12;
    const int octave = (midi - pc) / 12 - 1;
    o << "        <pitch><step>" << steps[pc] << "</step>";
    if (alters[pc]) o << "<alter>" << alters[pc] << "</alter>";
    o << "<octave>" << octave << "</octave></pitch>\n";
}

// Greedy voice assignment over chord groups (same onset and duration).
std::vector<std::vector<Group>> voices_for(const std::vector<NoteEvent>& notes) {
    std::vector<Group> groups;
    for (const auto& n : notes) {
        auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
            return std::abs(g.onset - n.onset) < kEps && std::abs(g.end - n.end()) < kEps;
        });
        if (it != groups.end()) it->pitches.push_back(n.pitch);
        else groups.push_back({n.onset, n.end(), {n.pitch}});
    }
    std::stable_sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) { return a.onset < b.onset; });
    std::vector<std::vector<Group>> voices;
    for (auto& g : groups) {
        auto it = std::find_if(voices.begin(), voices.end(),
                               [&](const std::vector<Group>& v) { return v.back().end <= g.onset + kEps; });
        if (it != voices.end()) it->push_back(std::move(g));
        else voices.push_back({std::move(g)});
    }
    return voices;
}

void write_rest(std::ostringstream& o, long long dur, int voice, int staff, bool staves) {
    if (dur <= 0) return;
    o << "      <note><rest/><duration>" << dur << "</duration><voice>" << voice << "</voice>";
    if (staves) o << "<staff>" << staff << "</staff>";
    o << "</note>\n";
}

void write_time(std::ostringstream& o, double length) {
    for (int bt = 4; bt <= 1024; bt *= 2) {
        const double beats = length * bt / 4.0;
        if (std::abs(beats - std::round(beats)) < 1e-9 && beats >= 1) {
            o << "        <time><beats>" << std::llround(beats) << "</beats><beat-type>" << bt
              << "</beat-type></time>\n";
            return;
        }
    }
}

}  // namespace

std::string write_musicxml(const ScoreDocument& score) {
    std::vector<double> starts = score.measure_starts;
    const double end = score.end_offset();
    if (starts.empty()) {
        for (double s = 0; s < end - kEps || starts.empty(); s += 4.0) starts.push_back(s);
    }
    std::vector<double> ends(starts.size());
    for (std::size_t m = 0; m + 1 < starts.size(); ++m) ends[m] = starts[m + 1];
    const double last_len = starts.size() > 1 ? starts.back() - starts[starts.size() - 2] : 4.0;
    ends.back() = std::max(end, starts.back() + (last_len > 0 ? last_len : 4.0));

    struct XmlPart {
        std::string id, name;
        std::vector<Stream> streams;
    };
    std::vector<XmlPart> xparts;
    const bool has_piano = score.find_part(PartRole::piano_lh) || score.find_part(PartRole::piano_rh);
    if (score.find_part(PartRole::vocal)) xparts.push_back({"P1", "Voice", {{PartRole::vocal, 1}}});
    if (has_piano) xparts.push_back({"P2", "Piano", {{PartRole::piano_rh, 1}, {PartRole::piano_lh, 2}}});
    if (score.find_part(PartRole::other)) xparts.push_back({"P3", "Other", {{PartRole::other, 1}}});
    if (xparts.empty()) throw InvalidArgument("cannot write a score without parts");

    std::ostringstream o;
    o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    o << "<score-partwise version=\"3.1\">\n";
    if (!score.metadata.title.empty())
        o << "  <work><work-title>" << xml::escape(score.metadata.title) << "</work-title></work>\n";
    o << "  <identification>\n";
    if (!score.metadata.composer.empty())
        o << "    <creator type=\"composer\">" << xml::escape(score.metadata.composer) << "</creator>\n";
    if (!score.metadata.catalogue_id.empty())
        o << "    <miscellaneous><miscellaneous-field name=\"catalogue-id\">"
          << xml::escape(score.metadata.catalogue_id) << "</miscellaneous-field></miscellaneous>\n";
    o << "  </identification>\n";
    o << "  <part-list>\n";
    for (const auto& xp : xparts)
        o << "    <score-part id=\"" << xp.id << "\"><part-name>" << xp.name << "</part-name></score-part>\n";
    o << "  </part-list>\n";

    for (std::size_t pi = 0; pi < xparts.size(); ++pi) {
        const auto& xp = xparts[pi];
        const bool staves = xp.streams.size() > 1;
        o << "  <part id=\"" << xp.id << "\">\n";

        std::vector<std::vector<std::vector<Group>>> stream_voices;
        for (const auto& st : xp.streams) {
            const Part* p = score.find_part(st.role);
            stream_voices.push_back(p ? voices_for(p->notes) : std::vector<std::vector<Group>>{});
        }
        // Wedge numbers cycle per XML part so concurrent wedges stay distinct.
        std::vector<const DynamicMarking*> part_marks;
        for (const auto& m : score.markings)
            for (const auto& st : xp.streams)
                if (m.part == st.role) part_marks.push_back(&m);
        std::map<const DynamicMarking*, int> wedge_number;
        int next_number = 0;
        for (const auto* m : part_marks)
            if (is_wedge(m->category)) wedge_number[m] = 1 + (next_number++ % 6);

        double prev_len = -1;
        for (std::size_t mi = 0; mi < starts.size(); ++mi) {
            const double ms = starts[mi], me = ends[mi];
            const long long t0 = ticks(ms), t1 = ticks(me);
            const bool last = mi + 1 == starts.size();
            o << "    <measure number=\"" << (mi + 1) << "\">\n";
            const double len = me - ms;
            if (mi == 0 || std::abs(len - prev_len) > kEps) {
                o << "      <attributes>\n";
                if (mi == 0) {
                    o << "        <divisions>" << kWriteDivisions << "</divisions>\n";
                }
                write_time(o, len);
                if (mi == 0 && staves) o << "        <staves>2</staves>\n";
                o << "      </attributes>\n";
            }
            prev_len = len;
            if (mi == 0 && pi == 0 && score.tempo_hint)
                o << "      <sound tempo=\"" << fmt_double(*score.tempo_hint) << "\"/>\n";

            auto in_measure = [&](double at) {
                return (at >= ms - kEps && at < me - kEps) || (last && std::abs(at - me) < kEps);
            };
            auto emit_direction = [&](double at, int staff, const std::string& body) {
                const long long fwd = ticks(at) - t0;
                if (fwd > 0) o << "      <forward><duration>" << fwd << "</duration></forward>\n";
                o << "      <direction>\n        <direction-type>" << body << "</direction-type>\n";
                if (staves) o << "        <staff>" << staff << "</staff>\n";
                o << "      </direction>\n";
                if (fwd > 0) o << "      <backup><duration>" << fwd << "</duration></backup>\n";
            };
            for (const auto* m : part_marks) {
                int staff = 1;
                for (const auto& st : xp.streams)
                    if (st.role == m->part) staff = st.staff;
                if (is_wedge(m->category)) {
                    const int num = wedge_number[m];
                    if (in_measure(m->offset))
                        emit_direction(m->offset, staff,
                                       "<wedge type=\"" + std::string(category_name(m->category)) + "\" number=\"" +
                                           std::to_string(num) + "\"/>");
                    if (in_measure(m->span_end))
                        emit_direction(m->span_end, staff, "<wedge type=\"stop\" number=\"" + std::to_string(num) + "\"/>");
                } else if (in_measure(m->offset)) {
                    emit_direction(m->offset, staff, "<dynamics><" + std::string(category_name(m->category)) + "/></dynamics>");
                }
            }

            bool any_voice = false;
            for (std::size_t si = 0; si < xp.streams.size(); ++si) {
                const int staff = xp.streams[si].staff;
                const auto& voices = stream_voices[si];
                const std::size_t nvoices = std::max<std::size_t>(voices.size(), si == 0 ? 1 : 0);
                for (std::size_t vi = 0; vi < nvoices; ++vi) {
                    if (any_voice) o << "      <backup><duration>" << (t1 - t0) << "</duration></backup>\n";
                    any_voice = true;
                    const int voice = static_cast<int>((staff - 1) * 4 + vi + 1);
                    long long cursor = t0;
                    if (vi < voices.size()) {
                        for (const auto& g : voices[vi]) {
                            if (g.end <= ms + kEps || g.onset >= me - kEps) continue;
                            const long long a = std::max(ticks(g.onset), t0), b = std::min(ticks(g.end), t1);
                            write_rest(o, a - cursor, voice, staff, staves);
                            for (std::size_t k = 0; k < g.pitches.size(); ++k) {
                                o << "      <note>\n";
                                if (k > 0) o << "        <chord/>\n";
                                write_pitch(o, g.pitches[k]);
                                o << "        <duration>" << (b - a) << "</duration>\n";
                                const bool stop = ticks(g.onset) < t0, start = ticks(g.end) > t1;
                                if (stop) o << "        <tie type=\"stop\"/>\n";
                                if (start) o << "        <tie type=\"start\"/>\n";
                                o << "        <voice>" << voice << "</voice>\n";
                                if (staves) o << "        <staff>" << staff << "</staff>\n";
                                if (stop || start) {
                                    o << "        <notations>";
                                    if (stop) o << "<tied type=\"stop\"/>";
                                    if (start) o << "<tied type=\"start\"/>";
                                    o << "</notations>\n";
                                }
                                o << "      </note>\n";
                            }
                            cursor = b;
                        }
                    }
                    write_rest(o, t1 - cursor, voice, staff, staves);
                }
            }
            o << "    </measure>\n";
        }
        o << "  </part>\n";
    }
    o << "</score-partwise>\n";
    return o.str();
}

}  // namespace vocaldyn::score
