#pragma once

// Frame-wise dynamics classifier.
//
//   x (T x bins) -> per-bin standardization (fixed statistics)
//   -> bin embedding, linear bins -> C0
//   -> multi-scale temporal conv, one C0 -> C0 conv per kernel size, GELU, concat (S*C0)
//   -> mean pooling over 3 frames, stride 1
//   -> temporal conv k=3, S*C0 -> C1, GELU
//   -> multi-head self-attention over time (D = attention_dim) + output projection, residual
//   -> linear head C1 -> 10
//
// Convolutions and pooling replicate the edge frames, so a constant input
// gives identical rows. Only the first `valid` frames of a window are
// computed; padded frames get zero logits and never act as attention keys.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <span>
#include <string>
#include <vector>

#include "vocaldyn/error.hpp"

namespace vocaldyn::model {

inline constexpr std::size_t kClasses = 10;
inline constexpr std::uint8_t kIgnoreLabel = 255;

struct ModelConfig {
    std::size_t input_bins = 128;
    std::vector<std::size_t> conv_scales = {3, 7, 15};
    std::vector<std::size_t> channels = {16, 32};
    std::size_t attention_heads = 4;
    std::size_t attention_dim = 64;
    std::size_t classes = kClasses;
    std::size_t sequence_length = 4096;
    std::uint64_t seed = 0;

    /// Throws InvalidArgument describing the first violated constraint.
    void validate() const;
    /// Trainable parameter count from the layer shapes.
    std::size_t parameter_count() const;
    bool operator==(const ModelConfig&) const = default;
};

nlohmann::ordered_json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::ordered_json& j);

template <class T>
struct Tensor {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<T> data;
    bool trainable = true;

    std::size_t size() const { return data.size(); }
    bool operator==(const Tensor&) const = default;
};

/// Named tensors in a fixed order. The "input_norm.*" tensors hold data
/// statistics and are not trained.
template <class T>
struct ModelParams {
    ModelConfig config;
    std::vector<Tensor<T>> tensors;

    Tensor<T>& at(std::string_view name);
    const Tensor<T>& at(std::string_view name) const;
    std::size_t trainable_count() const;
    bool operator==(const ModelParams&) const = default;

    template <class U>
    ModelParams<U> cast() const {
        ModelParams<U> out;
        out.config = config;
        for (const auto& t : tensors)
            out.tensors.push_back({t.name, t.shape, std::vector<U>(t.data.begin(), t.data.end()), t.trainable});
        return out;
    }
};

/// Same seed gives bit-identical parameters. Weights and biases are drawn
/// from U(-1/sqrt(fan_in), 1/sqrt(fan_in)); normalization is the identity.
template <class T>
ModelParams<T> init_model(const ModelConfig& config);

/// Logits for a window of `frames` x config.input_bins features of which the
/// first `valid` frames are real. Returns frames x 10, row-major.
template <class T>
std::vector<T> forward(const ModelParams<T>& params, std::span<const T> features, std::size_t frames,
                       std::size_t valid);

class UndefinedLossError : public Error {
public:
    using Error::Error;
};

/// Mean over frames with label != 255 of -log softmax(logits)[label].
/// Throws UndefinedLossError when every frame is masked.
template <class T>
double masked_cross_entropy(std::span<const T> logits, std::span<const std::uint8_t> labels);

template <class T>
struct LossAndGradients {
    double loss = 0.0;
    std::size_t counted = 0;  // masked-in frames
    ModelParams<T> gradients;  // same layout as params; zero for input_norm
};

/// Exact gradients of masked_cross_entropy(forward(...), labels). Labels of
/// frames at or beyond `valid` are ignored.
template <class T>
LossAndGradients<T> backward(const ModelParams<T>& params, std::span<const T> features, std::size_t frames,
                             std::size_t valid, std::span<const std::uint8_t> labels);

/// Adds d(loss_sum * scale)/d(params) into `gradients` (which must share the
/// layout of `params`) and returns the summed, unscaled loss over counted
/// frames together with their number. Used for mini-batches. With
/// `class_weights` (10 entries) each frame's loss is multiplied by the
/// weight of its label.
template <class T>
std::pair<double, std::size_t> accumulate_gradients(const ModelParams<T>& params, std::span<const T> features,
                                                    std::size_t frames, std::size_t valid,
                                                    std::span<const std::uint8_t> labels, double scale,
                                                    ModelParams<T>& gradients,
                                                    std::span<const double> class_weights = {});

/// Zero-filled tensors with the layout of `params`.
template <class T>
ModelParams<T> zeros_like(const ModelParams<T>& params);

/// Arg-max per frame; ties go to the lowest class index.
std::vector<std::uint8_t> argmax_rows(std::span<const float> logits, std::size_t classes = kClasses);
std::vector<std::uint8_t> argmax_rows(std::span<const double> logits, std::size_t classes = kClasses);

}  // namespace vocaldyn::model
