#include "vocaldyn/model/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <random>

#include "vocaldyn/io.hpp"

namespace vocaldyn::model {
namespace {

constexpr char kMagic[4] = {'D', 'Y', 'N', 'M'};
constexpr double kMinStd = 1e-6;

void check_sequence(const Sequence& s, std::size_t bins) {
    if (s.features.size() != s.frames * bins)
        throw ShapeError("sequence '" + s.id + "' has " + std::to_string(s.features.size()) + " feature values, expected " +
                         std::to_string(s.frames) + " x " + std::to_string(bins));
    if (s.labels.size() != s.frames)
        throw ShapeError("sequence '" + s.id + "' has " + std::to_string(s.labels.size()) + " labels for " +
                         std::to_string(s.frames) + " frames");
}

struct Adam {
    std::vector<std::vector<double>> m, v;
    std::size_t step = 0;

    explicit Adam(const ModelParams<float>& p) {
        for (const auto& t : p.tensors) {
            m.emplace_back(t.size(), 0.0);
            v.emplace_back(t.size(), 0.0);
        }
    }

    void apply(ModelParams<float>& p, const ModelParams<float>& g, const TrainConfig& c) {
        ++step;
        const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(step));
        const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(step));
        for (std::size_t i = 0; i < p.tensors.size(); ++i) {
            auto& t = p.tensors[i];
            if (!t.trainable) continue;
            const auto& gt = g.tensors[i].data;
            for (std::size_t k = 0; k < t.size(); ++k) {
                const double gk = gt[k];
                m[i][k] = c.beta1 * m[i][k] + (1.0 - c.beta1) * gk;
                v[i][k] = c.beta2 * v[i][k] + (1.0 - c.beta2) * gk * gk;
                const double mh = m[i][k] / bc1, vh = v[i][k] / bc2;
                t.data[k] = static_cast<float>(t.data[k] - c.learning_rate * mh / (std::sqrt(vh) + c.epsilon));
            }
        }
    }
};

std::size_t count_labelled(const Sequence& s, const Chunk& c) {
    std::size_t n = 0;
    for (std::size_t t = 0; t < c.valid; ++t) n += s.labels[c.begin + t] != kIgnoreLabel;
    return n;
}

double label_weight(const Sequence& s, const Chunk& c, std::span<const double> w) {
    if (w.empty()) return static_cast<double>(count_labelled(s, c));
    double sum = 0.0;
    for (std::size_t t = 0; t < c.valid; ++t)
        if (const auto y = s.labels[c.begin + t]; y != kIgnoreLabel) sum += w[y];
    return sum;
}

}  // namespace

nlohmann::ordered_json to_json(const EpochStats& s) {
    return {{"epoch", s.epoch}, {"loss", s.loss}, {"masked_accuracy", s.masked_accuracy}};
}

std::vector<Chunk> make_chunks(std::span<const Sequence> data, std::size_t sequence_length) {
    if (sequence_length == 0) throw InvalidArgument("sequence_length must be positive");
    std::vector<Chunk> out;
    for (std::size_t i = 0; i < data.size(); ++i)
        for (std::size_t b = 0; b < data[i].frames; b += sequence_length)
            out.push_back({i, b, std::min(sequence_length, data[i].frames - b)});
    return out;
}

std::vector<double> inverse_frequency_weights(std::span<const Sequence> data) {
    std::vector<double> count(kClasses, 0.0);
    double total = 0.0;
    for (const auto& s : data)
        for (auto y : s.labels)
            if (y != kIgnoreLabel) {
                if (y >= kClasses) throw InvalidArgument("label " + std::to_string(y) + " out of range");
                count[y] += 1.0;
                total += 1.0;
            }
    const auto present = static_cast<double>(std::count_if(count.begin(), count.end(), [](double c) { return c > 0; }));
    std::vector<double> w(kClasses, 0.0);
    for (std::size_t c = 0; c < kClasses; ++c)
        if (count[c] > 0) w[c] = total / (present * count[c]);
    return w;
}

void fit_input_normalization(ModelParams<float>& params, std::span<const Sequence> data) {
    const std::size_t bins = params.config.input_bins;
    std::vector<double> sum(bins, 0.0), sq(bins, 0.0);
    std::size_t n = 0;
    for (const auto& s : data) {
        check_sequence(s, bins);
        for (std::size_t t = 0; t < s.frames; ++t)
            for (std::size_t b = 0; b < bins; ++b) {
                const double x = s.features[t * bins + b];
                sum[b] += x;
                sq[b] += x * x;
            }
        n += s.frames;
    }
    if (n == 0) throw InvalidArgument("no frames to fit input normalization on");
    auto& mean = params.at("input_norm.mean").data;
    auto& scale = params.at("input_norm.scale").data;
    for (std::size_t b = 0; b < bins; ++b) {
        const double mu = sum[b] / static_cast<double>(n);
        const double var = std::max(0.0, sq[b] / static_cast<double>(n) - mu * mu);
        mean[b] = static_cast<float>(mu);
        scale[b] = static_cast<float>(1.0 / std::max(std::sqrt(var), kMinStd));
    }
}

std::vector<EpochStats> train(ModelParams<float>& params, std::span<const Sequence> data, const TrainConfig& config,
                              const EpochCallback& on_epoch) {
    const std::size_t bins = params.config.input_bins;
    if (data.empty()) throw InvalidArgument("training dataset is empty");
    if (config.batch_size == 0) throw InvalidArgument("batch_size must be positive");
    if (!(config.learning_rate >= 0)) throw InvalidArgument("learning_rate must be non-negative");
    for (const auto& s : data) check_sequence(s, bins);
    if (config.fit_input_normalization) fit_input_normalization(params, data);

    std::vector<Chunk> chunks;
    for (const auto& c : make_chunks(data, params.config.sequence_length))
        if (count_labelled(data[c.sequence], c) > 0) chunks.push_back(c);
    if (chunks.empty()) throw UndefinedLossError("training data has no labelled frames");

    const std::vector<double> weights = config.class_weighting ? inverse_frequency_weights(data) : std::vector<double>{};
    Adam adam(params);
    std::mt19937_64 rng(config.seed);
    auto grads = zeros_like(params);
    std::vector<EpochStats> history;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        for (std::size_t i = chunks.size(); i > 1; --i) std::swap(chunks[i - 1], chunks[rng() % i]);
        double loss_sum = 0.0, weight_sum = 0.0;
        std::size_t frames = 0, correct = 0;
        for (std::size_t b = 0; b < chunks.size(); b += config.batch_size) {
            const std::size_t e = std::min(chunks.size(), b + config.batch_size);
            double batch_weight = 0.0;
            for (std::size_t k = b; k < e; ++k) batch_weight += label_weight(data[chunks[k].sequence], chunks[k], weights);
            weight_sum += batch_weight;
            for (auto& t : grads.tensors) std::fill(t.data.begin(), t.data.end(), 0.0f);
            for (std::size_t k = b; k < e; ++k) {
                const auto& c = chunks[k];
                const auto& s = data[c.sequence];
                const std::span<const float> x(s.features.data() + c.begin * bins, c.valid * bins);
                const std::span<const std::uint8_t> y(s.labels.data() + c.begin, c.valid);
                const auto [sum, n] =
                    accumulate_gradients<float>(params, x, c.valid, c.valid, y, 1.0 / batch_weight, grads, weights);
                loss_sum += sum;
                frames += n;
            }
            adam.apply(params, grads, config);
        }
        // Accuracy with the end-of-epoch weights.
        for (const auto& c : chunks) {
            const auto& s = data[c.sequence];
            const auto logits = forward<float>(params, {s.features.data() + c.begin * bins, c.valid * bins}, c.valid, c.valid);
            const auto pred = argmax_rows(logits);
            for (std::size_t t = 0; t < c.valid; ++t) {
                const auto y = s.labels[c.begin + t];
                correct += y != kIgnoreLabel && pred[t] == y;
            }
        }
        EpochStats st{epoch, loss_sum / weight_sum,
                      static_cast<double>(correct) / static_cast<double>(frames)};
        history.push_back(st);
        if (on_epoch) on_epoch(st);
    }
    return history;
}

EpochCallback jsonl_epoch_logger(const std::filesystem::path& path) {
    auto out = std::make_shared<std::ofstream>(path, std::ios::app);
    if (!*out) throw InvalidArgument("cannot open training log " + path.string());
    return [out](const EpochStats& s) {
        *out << to_json(s).dump() << '\n';
        out->flush();
    };
}

std::vector<float> predict_logits(const ModelParams<float>& params, std::span<const float> features,
                                  std::size_t frames) {
    const std::size_t bins = params.config.input_bins, len = params.config.sequence_length;
    if (features.size() != frames * bins) throw ShapeError("feature matrix does not match the model's input bins");
    std::vector<float> out(frames * kClasses);
    for (std::size_t b = 0; b < frames; b += len) {
        const std::size_t n = std::min(len, frames - b);
        const auto z = forward<float>(params, features.subspan(b * bins, n * bins), n, n);
        std::copy(z.begin(), z.end(), out.begin() + static_cast<std::ptrdiff_t>(b * kClasses));
    }
    return out;
}

std::vector<std::uint8_t> predict(const ModelParams<float>& params, std::span<const float> features,
                                  std::size_t frames) {
    return argmax_rows(predict_logits(params, features, frames));
}

std::vector<std::uint8_t> encode_checkpoint(const ModelParams<float>& params) {
    io::ByteWriter w;
    w.bytes(kMagic, 4);
    w.u32(kCheckpointVersion);
    const auto cfg = to_json(params.config).dump();
    w.u32(static_cast<std::uint32_t>(cfg.size()));
    w.str(cfg);
    for (const auto& t : params.tensors) {
        w.u16(static_cast<std::uint16_t>(t.name.size()));
        w.str(t.name);
        w.u8(static_cast<std::uint8_t>(t.shape.size()));
        for (auto d : t.shape) w.u32(static_cast<std::uint32_t>(d));
        for (float v : t.data) w.f32(v);
    }
    return w.take();
}

ModelParams<float> decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    io::ByteReader r(bytes, "DYNM");
    if (r.str(4) != std::string_view(kMagic, 4)) throw ParseError("not a DYNM checkpoint (bad magic)");
    const auto version = r.u32();
    if (version != kCheckpointVersion) throw ParseError("unsupported DYNM version " + std::to_string(version));
    ModelConfig config;
    try {
        config = model_config_from_json(nlohmann::ordered_json::parse(r.str(r.u32())));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("DYNM config is not valid JSON: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw ParseError(std::string("DYNM config is invalid: ") + e.what());
    }
    // The expected layout comes from the config; the file must match it.
    auto params = init_model<float>(config);
    for (auto& t : params.tensors) {
        if (r.remaining() == 0) throw ParseError("DYNM is missing tensor " + t.name);
        const auto name = r.str(r.u16());
        if (name != t.name) throw ParseError("DYNM tensor '" + name + "' found where '" + t.name + "' was expected");
        const auto rank = r.u8();
        std::vector<std::size_t> shape(rank);
        for (auto& d : shape) d = r.u32();
        if (shape != t.shape) throw ParseError("DYNM tensor '" + name + "' has the wrong shape");
        for (auto& v : t.data) v = r.f32();
    }
    if (r.remaining() != 0) throw ParseError("DYNM has trailing data after the last tensor");
    return params;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams<float>& params) {
    io::write_file_atomic(path, encode_checkpoint(params));
}

ModelParams<float> load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(io::read_file(path));
}

}  // namespace vocaldyn::model
