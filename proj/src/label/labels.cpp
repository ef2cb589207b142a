#include "vocaldyn/label/labels.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "vocaldyn/io.hpp"

namespace vocaldyn::label {
namespace {

constexpr double kEps = 1e-9;
constexpr char kMagic[4] = {'D', 'Y', 'N', 'L'};

}  // namespace

std::uint8_t category_to_class(score::DynamicCategory c) {
    if (!score::is_absolute(c))
        throw UnresolvedCategoryError("category '" + std::string(score::category_name(c)) +
                                      "' has no class; resolve it to an absolute dynamic first");
    return static_cast<std::uint8_t>(c);
}

score::DynamicCategory class_to_category(std::uint8_t cls) {
    if (cls >= kNumClasses) throw InvalidArgument("class index out of range: " + std::to_string(cls));
    return static_cast<score::DynamicCategory>(cls);
}

std::size_t FrameLabelSequence::masked_in_count() const {
    return static_cast<std::size_t>(std::count_if(classes.begin(), classes.end(), [](auto c) { return c != kMaskedClass; }));
}

FrameLabelSequence frames_from_alignment(const std::vector<align::AlignedNote>& aligned,
                                         const std::vector<score::NoteDynamicLabel>& labels, double hop,
                                         std::size_t total_frames) {
    if (!(hop > 0)) throw InvalidArgument("hop must be positive");
    FrameLabelSequence out;
    out.hop_seconds = hop;
    out.classes.assign(total_frames, kMaskedClass);
    out.regions.assign(total_frames, RegionFlag::none);

    std::map<std::size_t, const score::NoteDynamicLabel*> by_note;
    for (const auto& l : labels) by_note[l.note_index] = &l;

    std::vector<const align::AlignedNote*> order;
    for (const auto& a : aligned) order.push_back(&a);
    std::stable_sort(order.begin(), order.end(),
                     [](const auto* x, const auto* y) { return x->onset_seconds < y->onset_seconds; });

    for (const auto* a : order) {
        const auto it = by_note.find(a->note_index);
        std::uint8_t cls = kMaskedClass;
        RegionFlag region = RegionFlag::none;
        if (it != by_note.end()) {
            const auto& l = *it->second;
            if (score::is_absolute(l.category)) cls = category_to_class(l.category);
            if (l.region)
                region = *l.region == score::WedgeRegion::crescendo ? RegionFlag::crescendo : RegionFlag::diminuendo;
        }
        const double k0 = std::max(0.0, std::ceil(a->onset_seconds / hop - kEps));
        const double k1 = std::max(0.0, std::ceil(a->offset_seconds / hop - kEps));
        const auto begin = static_cast<std::size_t>(std::min<double>(k0, static_cast<double>(total_frames)));
        const auto end = static_cast<std::size_t>(std::min<double>(k1, static_cast<double>(total_frames)));
        for (std::size_t t = begin; t < end; ++t) {
            out.classes[t] = cls;
            out.regions[t] = region;
        }
    }
    return out;
}

void check_hop(double label_hop, double feature_hop) {
    if (std::abs(label_hop - feature_hop) > kEps)
        throw HopMismatchError("label hop " + std::to_string(label_hop) + " s does not match feature hop " +
                               std::to_string(feature_hop) + " s");
}

FrameLabelSequence frames_for_features(const std::vector<align::AlignedNote>& aligned,
                                       const std::vector<score::NoteDynamicLabel>& labels, double hop,
                                       const dsp::FeatureMatrix& features) {
    check_hop(hop, features.hop_seconds);
    return frames_from_alignment(aligned, labels, hop, features.frames);
}

std::vector<std::uint8_t> encode_labels(const FrameLabelSequence& l) {
    if (l.classes.size() > UINT32_MAX) throw InvalidArgument("too many frames for DYNL");
    io::ByteWriter w;
    w.bytes(kMagic, 4);
    w.u32(kLabelFileVersion);
    w.u32(static_cast<std::uint32_t>(l.classes.size()));
    w.f64(l.hop_seconds);
    for (auto c : l.classes) {
        if (c >= kNumClasses && c != kMaskedClass) throw InvalidArgument("invalid class value " + std::to_string(c));
        w.u8(c);
    }
    return w.take();
}

FrameLabelSequence decode_labels(const std::vector<std::uint8_t>& bytes) {
    io::ByteReader r(bytes, "DYNL");
    if (r.str(4) != std::string_view(kMagic, 4)) throw ParseError("not a DYNL file (bad magic)");
    const auto version = r.u32();
    if (version != kLabelFileVersion) throw ParseError("unsupported DYNL version " + std::to_string(version));
    const auto frames = r.u32();
    FrameLabelSequence l;
    l.hop_seconds = r.f64();
    if (!(l.hop_seconds > 0) || !std::isfinite(l.hop_seconds)) throw ParseError("DYNL hop must be positive");
    if (r.remaining() != frames) throw ParseError("DYNL payload size does not match frame count");
    l.classes.resize(frames);
    for (auto& c : l.classes) {
        c = r.u8();
        if (c >= kNumClasses && c != kMaskedClass) throw ParseError("DYNL contains invalid class " + std::to_string(c));
    }
    l.regions.assign(frames, RegionFlag::none);
    return l;
}

void write_labels(const std::filesystem::path& path, const FrameLabelSequence& labels) {
    io::write_file_atomic(path, encode_labels(labels));
}

FrameLabelSequence read_labels(const std::filesystem::path& path) { return decode_labels(io::read_file(path)); }

nlohmann::ordered_json to_json(const FrameLabelSequence& l) {
    auto classes = nlohmann::ordered_json::array();
    auto names = nlohmann::ordered_json::array();
    auto regions = nlohmann::ordered_json::array();
    for (std::size_t t = 0; t < l.classes.size(); ++t) {
        if (l.valid(t)) {
            classes.push_back(l.classes[t]);
            names.push_back(std::string(score::category_name(class_to_category(l.classes[t]))));
        } else {
            classes.push_back(nullptr);
            names.push_back(nullptr);
        }
        const auto reg = t < l.regions.size() ? l.regions[t] : RegionFlag::none;
        if (reg == RegionFlag::none) regions.push_back(nullptr);
        else regions.push_back(reg == RegionFlag::crescendo ? "crescendo" : "diminuendo");
    }
    return {{"hop_seconds", l.hop_seconds}, {"classes", classes}, {"categories", names}, {"regions", regions}};
}

}  // namespace vocaldyn::label
