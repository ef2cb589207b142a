#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vocaldyn/model/model.hpp"

namespace vocaldyn::model {

/// One training or evaluation item: frames x bins features and per-frame
/// labels (kIgnoreLabel where masked).
struct Sequence {
    std::vector<float> features;
    std::vector<std::uint8_t> labels;
    std::size_t frames = 0;
    std::string id;
};

struct TrainConfig {
    double learning_rate = 0.002;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t epochs = 100;
    std::size_t batch_size = 8;  // chunks per Adam step
    std::uint64_t seed = 0;      // shuffling
    // Set input_norm.* from the per-bin mean and standard deviation of the
    // training features before the first step.
    bool fit_input_normalization = true;
    // Weight each frame's loss by total / (present_classes * count(label)).
    bool class_weighting = false;
};

struct EpochStats {
    std::size_t epoch = 0;  // 1-based
    double loss = 0.0;      // mean over masked-in frames
    double masked_accuracy = 0.0;
    bool operator==(const EpochStats&) const = default;
};

nlohmann::ordered_json to_json(const EpochStats& s);

using EpochCallback = std::function<void(const EpochStats&)>;

/// A window [begin, begin + valid) of one sequence. Windows abut; the last
/// one of a sequence may be shorter than the sequence length.
struct Chunk {
    std::size_t sequence = 0;
    std::size_t begin = 0;
    std::size_t valid = 0;
};

std::vector<Chunk> make_chunks(std::span<const Sequence> data, std::size_t sequence_length);

/// Inverse-frequency weights over labelled frames; 0 for absent classes.
std::vector<double> inverse_frequency_weights(std::span<const Sequence> data);

/// Per-bin statistics written into input_norm.mean / input_norm.scale.
void fit_input_normalization(ModelParams<float>& params, std::span<const Sequence> data);

/// Adam over shuffled mini-batches of chunks. Returns per-epoch statistics.
/// Deterministic for a fixed config, data and seed.
std::vector<EpochStats> train(ModelParams<float>& params, std::span<const Sequence> data, const TrainConfig& config,
                              const EpochCallback& on_epoch = {});

/// Appends one JSON object per epoch.
EpochCallback jsonl_epoch_logger(const std::filesystem::path& path);

/// Frame logits for a whole sequence, computed in abutting windows of
/// config.sequence_length.
std::vector<float> predict_logits(const ModelParams<float>& params, std::span<const float> features,
                                  std::size_t frames);

/// Arg-max classes per frame.
std::vector<std::uint8_t> predict(const ModelParams<float>& params, std::span<const float> features,
                                  std::size_t frames);

// DYNM checkpoint:
//   "DYNM" | version u32 | config length u32 | config JSON
//   then per tensor: name length u16 | name | rank u8 | dims u32... | f32 data
inline constexpr std::uint32_t kCheckpointVersion = 1;
std::vector<std::uint8_t> encode_checkpoint(const ModelParams<float>& params);
ModelParams<float> decode_checkpoint(const std::vector<std::uint8_t>& bytes);
void save_checkpoint(const std::filesystem::path& path, const ModelParams<float>& params);
ModelParams<float> load_checkpoint(const std::filesystem::path& path);

}  // namespace vocaldyn::model
