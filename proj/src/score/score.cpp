#include "vocaldyn/score/score.hpp"

#include <algorithm>
#include <cmath>

namespace vocaldyn::score {
namespace {

constexpr double kEps = 1e-9;

constexpr std::array<std::string_view, kDynamicCategoryCount> kCategoryNames = {
    "pppp", "ppp", "pp", "p", "mp", "mf", "f", "ff", "fff", "ffff", "sf", "crescendo", "diminuendo",
};

}  // namespace

std::string_view category_name(DynamicCategory c) {
    return kCategoryNames.at(static_cast<std::size_t>(c));
}

std::optional<DynamicCategory> parse_category(std::string_view name) {
    for (std::size_t i = 0; i < kCategoryNames.size(); ++i)
        if (kCategoryNames[i] == name) return static_cast<DynamicCategory>(i);
    static constexpr std::string_view accents[] = {"sfz", "sffz", "fz", "rf", "rfz", "sfp", "sfpp", "sfzp"};
    for (auto a : accents)
        if (a == name) return DynamicCategory::sf;
    if (name == "cresc") return DynamicCategory::crescendo;
    if (name == "dim" || name == "decresc" || name == "decrescendo") return DynamicCategory::diminuendo;
    return std::nullopt;
}

std::array<DynamicCategory, kDynamicCategoryCount> all_categories() {
    std::array<DynamicCategory, kDynamicCategoryCount> out{};
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<DynamicCategory>(i);
    return out;
}

std::string_view part_role_name(PartRole r) {
    switch (r) {
        case PartRole::vocal: return "vocal";
        case PartRole::piano_lh: return "piano_lh";
        case PartRole::piano_rh: return "piano_rh";
        case PartRole::other: return "other";
    }
    return "other";
}

std::optional<PartRole> parse_part_role(std::string_view name) {
    if (name == "vocal") return PartRole::vocal;
    if (name == "piano_lh") return PartRole::piano_lh;
    if (name == "piano_rh") return PartRole::piano_rh;
    if (name == "other") return PartRole::other;
    return std::nullopt;
}

const Part* ScoreDocument::find_part(PartRole role) const {
    for (const auto& p : parts)
        if (p.role == role) return &p;
    return nullptr;
}

Part& ScoreDocument::part(PartRole role) {
    for (auto& p : parts)
        if (p.role == role) return p;
    auto it = std::find_if(parts.begin(), parts.end(), [&](const Part& p) { return p.role > role; });
    return *parts.insert(it, Part{role, {}});
}

double ScoreDocument::end_offset() const {
    double end = 0.0;
    for (const auto& p : parts)
        for (const auto& n : p.notes) end = std::max(end, n.end());
    for (const auto& m : markings) end = std::max(end, m.span_end);
    return end;
}

void ScoreDocument::normalize() {
    std::stable_sort(parts.begin(), parts.end(), [](const Part& a, const Part& b) { return a.role < b.role; });
    for (auto& p : parts)
        std::stable_sort(p.notes.begin(), p.notes.end(), [](const NoteEvent& a, const NoteEvent& b) {
            if (a.onset != b.onset) return a.onset < b.onset;
            return a.pitch < b.pitch;
        });
    std::stable_sort(markings.begin(), markings.end(), [](const DynamicMarking& a, const DynamicMarking& b) {
        if (a.offset != b.offset) return a.offset < b.offset;
        return a.part < b.part;
    });
}

void assign_measures(ScoreDocument& score, double quarters_per_measure) {
    if (!(quarters_per_measure > 0)) throw InvalidArgument("measure length must be positive");
    const double end = score.end_offset();
    const auto count = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(end / quarters_per_measure - kEps)));
    score.measure_starts.resize(count);
    for (std::size_t m = 0; m < count; ++m) score.measure_starts[m] = static_cast<double>(m) * quarters_per_measure;
    for (auto& p : score.parts)
        for (auto& n : p.notes) n.measure = 1 + static_cast<int>(std::floor(n.onset / quarters_per_measure + kEps));
}

bool score_passes_filter(const ScoreDocument& score) {
    if (score.markings.size() <= 3) return false;
    if (score.parts.size() != 3) return false;
    return score.find_part(PartRole::vocal) && score.find_part(PartRole::piano_lh) &&
           score.find_part(PartRole::piano_rh);
}

UnlabeledPrefixError::UnlabeledPrefixError(std::vector<std::size_t> notes)
    : Error("no absolute dynamic marking before vocal note(s): " + [&] {
          std::string s;
          for (std::size_t i = 0; i < notes.size() && i < 16; ++i) s += (i ? "," : "") + std::to_string(notes[i]);
          if (notes.size() > 16) s += ",...";
          return s;
      }()),
      notes_(std::move(notes)) {}

std::vector<NoteDynamicLabel> propagate_note_dynamics(const ScoreDocument& score, const PropagationOptions& opt) {
    const Part* vocal = score.find_part(PartRole::vocal);
    if (!vocal || vocal->notes.empty()) throw InvalidArgument("score has no vocal notes");
    const auto& notes = vocal->notes;

    std::vector<DynamicMarking> absolute, accents, wedges;
    for (const auto& m : score.markings) {
        if (opt.vocal_markings_only && m.part != PartRole::vocal) continue;
        if (is_absolute(m.category)) absolute.push_back(m);
        else if (m.category == DynamicCategory::sf) accents.push_back(m);
        else wedges.push_back(m);
    }
    // At equal offsets the vocal marking is applied last so it wins the hold.
    std::stable_sort(absolute.begin(), absolute.end(), [](const DynamicMarking& a, const DynamicMarking& b) {
        if (a.offset != b.offset) return a.offset < b.offset;
        return (a.part == PartRole::vocal) < (b.part == PartRole::vocal);
    });

    // An accent belongs to the first note starting at or after it.
    std::vector<bool> accented(notes.size(), false);
    for (const auto& a : accents) {
        auto it = std::find_if(notes.begin(), notes.end(),
                               [&](const NoteEvent& n) { return n.onset >= a.offset - kEps; });
        if (it != notes.end()) accented[static_cast<std::size_t>(it - notes.begin())] = true;
    }

    std::vector<NoteDynamicLabel> out;
    out.reserve(notes.size());
    std::vector<std::size_t> prefix;
    std::size_t next = 0;
    std::optional<DynamicCategory> held;
    for (std::size_t i = 0; i < notes.size(); ++i) {
        const auto& n = notes[i];
        while (next < absolute.size() && absolute[next].offset <= n.onset + kEps) held = absolute[next++].category;

        NoteDynamicLabel label;
        label.note_index = i;
        label.note = n;
        if (!held) {
            prefix.push_back(i);
            if (opt.prefix == PrefixPolicy::drop || opt.prefix == PrefixPolicy::fail) continue;
            if (absolute.empty()) continue;
            label.category = absolute.front().category;
        } else {
            label.category = *held;
        }
        if (accented[i]) label.category = DynamicCategory::sf;
        for (const auto& w : wedges) {
            if (n.onset >= w.offset - kEps && n.onset < w.span_end - kEps) {
                label.region = w.category == DynamicCategory::crescendo ? WedgeRegion::crescendo
                                                                        : WedgeRegion::diminuendo;
            }
        }
        out.push_back(label);
    }
    if (!prefix.empty() && opt.prefix == PrefixPolicy::fail) throw UnlabeledPrefixError(std::move(prefix));
    return out;
}

CategoryCounts corpus_marking_statistics(const std::vector<ScoreDocument>& scores) {
    CategoryCounts counts;
    for (auto c : all_categories()) counts[c] = 0;
    for (const auto& s : scores)
        for (const auto& m : s.markings) ++counts[m.category];
    return counts;
}

}  // namespace vocaldyn::score
