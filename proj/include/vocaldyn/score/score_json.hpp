#pragma once

#include <json.hpp>

#include "vocaldyn/score/score.hpp"

namespace vocaldyn::score {

using Json = nlohmann::ordered_json;

/// Stable layout: {metadata, tempo_hint, parts, markings, measure_starts}.
Json to_json(const ScoreDocument& score);
/// Throws ParseError on missing or mistyped fields.
ScoreDocument score_from_json(const Json& j);

Json to_json(const std::vector<NoteDynamicLabel>& labels);
std::vector<NoteDynamicLabel> labels_from_json(const Json& j);

Json to_json(const CategoryCounts& counts);

}  // namespace vocaldyn::score
