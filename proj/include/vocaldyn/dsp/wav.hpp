#pragma once

#include <filesystem>
#include <vector>

#include "vocaldyn/dsp/audio.hpp"

namespace vocaldyn::dsp {

enum class WavEncoding { pcm16, pcm24, float32 };

/// Reads RIFF/WAVE PCM (16/24/32-bit int) or IEEE float. Multi-channel input
/// is averaged down to mono.
AudioBuffer decode_wav(const std::vector<std::uint8_t>& bytes);
AudioBuffer read_wav(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_wav(const AudioBuffer& audio, WavEncoding encoding = WavEncoding::float32);
void write_wav(const std::filesystem::path& path, const AudioBuffer& audio,
               WavEncoding encoding = WavEncoding::float32);

}  // namespace vocaldyn::dsp
