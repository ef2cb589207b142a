#pragma once

// DYNF feature file:
//   "DYNF" | version u32 | kind u8 | rows u32 | cols u32 | hop_seconds f64 |
//   source_rate u32 | rows*cols f32, row-major; all little-endian.

#include <filesystem>
#include <vector>

#include "vocaldyn/dsp/audio.hpp"

namespace vocaldyn::dsp {

inline constexpr std::uint32_t kFeatureFileVersion = 1;

std::vector<std::uint8_t> encode_features(const FeatureMatrix& features);
FeatureMatrix decode_features(const std::vector<std::uint8_t>& bytes);

void write_features(const std::filesystem::path& path, const FeatureMatrix& features);
FeatureMatrix read_features(const std::filesystem::path& path);

}  // namespace vocaldyn::dsp
