#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "vocaldyn/model/model.hpp"
#include "vocaldyn/simd/kernels.hpp"

namespace vocaldyn::model {
namespace {

template <class T>
using CM = simd::ConstMatrixRef<T>;
template <class T>
using MM = simd::MatrixRef<T>;

template <class T>
CM<T> cview(const std::vector<T>& v, std::size_t rows, std::size_t cols) {
    return {v.data(), rows, cols, cols};
}
template <class T>
MM<T> view(std::vector<T>& v, std::size_t rows, std::size_t cols) {
    return {v.data(), rows, cols, cols};
}

struct LayerSpec {
    std::string name;
    std::vector<std::size_t> shape;
    bool trainable;
    std::size_t fan_in;
};

// Tensor order is fixed; Net indexes tensors positionally.
std::vector<LayerSpec> layout(const ModelConfig& c) {
    const std::size_t b = c.input_bins, c0 = c.channels[0], c1 = c.channels[1], d = c.attention_dim;
    const std::size_t s = c.conv_scales.size();
    std::vector<LayerSpec> out;
    out.push_back({"input_norm.mean", {b}, false, 0});
    out.push_back({"input_norm.scale", {b}, false, 0});
    out.push_back({"embed.weight", {b, c0}, true, b});
    out.push_back({"embed.bias", {c0}, true, b});
    for (std::size_t i = 0; i < s; ++i) {
        const auto k = c.conv_scales[i];
        const std::string p = "conv1.s" + std::to_string(i);
        out.push_back({p + ".weight", {k, c0, c0}, true, k * c0});
        out.push_back({p + ".bias", {c0}, true, k * c0});
    }
    out.push_back({"conv2.weight", {3, s * c0, c1}, true, 3 * s * c0});
    out.push_back({"conv2.bias", {c1}, true, 3 * s * c0});
    for (const char* n : {"attn.query", "attn.key", "attn.value"}) {
        out.push_back({std::string(n) + ".weight", {c1, d}, true, c1});
        out.push_back({std::string(n) + ".bias", {d}, true, c1});
    }
    out.push_back({"attn.out.weight", {d, c1}, true, d});
    out.push_back({"attn.out.bias", {c1}, true, d});
    out.push_back({"head.weight", {c1, c.classes}, true, c1});
    out.push_back({"head.bias", {c.classes}, true, c1});
    return out;
}

std::size_t product(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

// splitmix64: small, fully specified generator so initialization does not
// depend on the standard library's distributions.
struct SplitMix {
    std::uint64_t state;
    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

template <class T>
T gelu(T z) {
    const double x = z;
    return static_cast<T>(0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x))));
}

template <class T>
T gelu_grad(T z) {
    const double x = z;
    const double th = std::tanh(kGeluC * (x + kGeluA * x * x * x));
    return static_cast<T>(0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * kGeluA * x * x));
}

template <class T>
void add_bias(MM<T> y, const T* b) {
    for (std::size_t t = 0; t < y.rows; ++t) std::copy(b, b + y.cols, y.row(t));
}

template <class T>
void bias_grad(CM<T> dy, T* db) {
    for (std::size_t t = 0; t < dy.rows; ++t) {
        const T* r = dy.row(t);
        for (std::size_t c = 0; c < dy.cols; ++c) db[c] += r[c];
    }
}

// Ranges of output frames t for tap offset o whose source t + o lies inside
// [0, L): [lo, hi). Frames outside read the clamped edge frame.
struct TapRange {
    std::size_t lo, hi;
};
TapRange tap_range(long o, std::size_t len) {
    const long L = static_cast<long>(len);
    const long lo = std::clamp<long>(-o, 0, L);
    const long hi = std::clamp<long>(L - o, lo, L);
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}
std::size_t clamp_row(long t, std::size_t len) {
    return static_cast<std::size_t>(std::clamp<long>(t, 0, static_cast<long>(len) - 1));
}

// y += conv(x, w) with w laid out k x cin x cout, replicate padding.
template <class T>
void conv_forward(CM<T> x, const T* w, std::size_t k, MM<T> y) {
    const std::size_t len = x.rows, cin = x.cols, cout = y.cols;
    const long half = static_cast<long>(k - 1) / 2;
    for (std::size_t j = 0; j < k; ++j) {
        const long o = static_cast<long>(j) - half;
        const CM<T> wj(w + j * cin * cout, cin, cout, cout);
        const auto [lo, hi] = tap_range(o, len);
        if (hi > lo)
            simd::gemm_nn<T>(CM<T>(x.row(lo + o), hi - lo, cin, x.stride), wj, MM<T>{y.row(lo), hi - lo, cout, y.stride});
        for (std::size_t t = 0; t < len; ++t) {
            if (t >= lo && t < hi) {
                t = hi - 1;
                continue;
            }
            const auto src = clamp_row(static_cast<long>(t) + o, len);
            simd::gemm_nn<T>(CM<T>(x.row(src), 1, cin, x.stride), wj, MM<T>{y.row(t), 1, cout, y.stride});
        }
    }
}

// dw += d/dw, dx += d/dx (dx may be null) for y = conv(x, w).
template <class T>
void conv_backward(CM<T> x, const T* w, std::size_t k, CM<T> dy, T* dw, MM<T>* dx) {
    const std::size_t len = x.rows, cin = x.cols, cout = dy.cols;
    const long half = static_cast<long>(k - 1) / 2;
    for (std::size_t j = 0; j < k; ++j) {
        const long o = static_cast<long>(j) - half;
        const CM<T> wj(w + j * cin * cout, cin, cout, cout);
        const MM<T> dwj{dw + j * cin * cout, cin, cout, cout};
        const auto [lo, hi] = tap_range(o, len);
        if (hi > lo) {
            const CM<T> xs(x.row(lo + o), hi - lo, cin, x.stride);
            const CM<T> dys(dy.row(lo), hi - lo, cout, dy.stride);
            simd::gemm_tn<T>(xs, dys, dwj);
            if (dx) simd::gemm_nt<T>(dys, wj, MM<T>{dx->row(lo + o), hi - lo, cin, dx->stride});
        }
        for (std::size_t t = 0; t < len; ++t) {
            if (t >= lo && t < hi) {
                t = hi - 1;
                continue;
            }
            const auto src = clamp_row(static_cast<long>(t) + o, len);
            const CM<T> xr(x.row(src), 1, cin, x.stride);
            const CM<T> dyr(dy.row(t), 1, cout, dy.stride);
            simd::gemm_tn<T>(xr, dyr, dwj);
            if (dx) simd::gemm_nt<T>(dyr, wj, MM<T>{dx->row(src), 1, cin, dx->stride});
        }
    }
}

template <class T>
void softmax_inplace(std::span<T> a) {
    const T mx = *std::max_element(a.begin(), a.end());
    for (auto& v : a) v -= mx;
    simd::exp_inplace<T>(a);
    T sum = 0;
    for (auto v : a) sum += v;
    const T inv = T(1) / sum;
    for (auto& v : a) v *= inv;
}

template <class T>
std::vector<T> transpose(const std::vector<T>& m, std::size_t rows, std::size_t cols) {
    std::vector<T> out(m.size());
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = m[r * cols + c];
    return out;
}

template <class T>
class Net {
public:
    Net(const ModelParams<T>& p, std::span<const T> x, std::size_t frames, std::size_t valid)
        : p_(p), cfg_(p.config), len_(valid) {
        if (x.size() != frames * cfg_.input_bins)
            throw ShapeError("feature window has " + std::to_string(x.size()) + " values, expected " +
                             std::to_string(frames) + " x " + std::to_string(cfg_.input_bins));
        if (valid > frames) throw ShapeError("valid length exceeds window length");
        if (p.tensors.size() != layout(cfg_).size()) throw ShapeError("parameter set does not match its config");
        run(x);
    }

    const std::vector<T>& logits() const { return logits_; }
    std::size_t valid() const { return len_; }

    void backprop(std::vector<T>& dlogits, ModelParams<T>& g) const;

private:
    const T* w(std::size_t i) const { return p_.tensors[i].data.data(); }
    std::size_t conv1_index(std::size_t s) const { return 4 + 2 * s; }
    std::size_t conv2_index() const { return 4 + 2 * cfg_.conv_scales.size(); }
    std::size_t qkv_index(std::size_t which) const { return conv2_index() + 2 + 2 * which; }
    std::size_t out_index() const { return conv2_index() + 8; }
    std::size_t head_index() const { return conv2_index() + 10; }

    void run(std::span<const T> x);
    void attention_row(std::size_t h, std::size_t t, std::vector<T>& a) const;

    const ModelParams<T>& p_;
    const ModelConfig& cfg_;
    std::size_t len_;
    std::vector<T> xn_, e_, h1_, pool_, z2_, g_, q_, k_, v_, kt_, vt_, o_, r_, logits_;
    std::vector<std::vector<T>> z1_;
};

template <class T>
void Net<T>::run(std::span<const T> x) {
    const std::size_t L = len_, B = cfg_.input_bins, C0 = cfg_.channels[0], C1 = cfg_.channels[1];
    const std::size_t S = cfg_.conv_scales.size(), D = cfg_.attention_dim, K = cfg_.classes;
    if (L == 0) return;

    xn_.resize(L * B);
    const T* mean = w(0);
    const T* scale = w(1);
    for (std::size_t t = 0; t < L; ++t)
        for (std::size_t b = 0; b < B; ++b) xn_[t * B + b] = (x[t * B + b] - mean[b]) * scale[b];

    e_.resize(L * C0);
    add_bias(view(e_, L, C0), w(3));
    simd::gemm_nn<T>(cview(xn_, L, B), CM<T>(w(2), B, C0, C0), view(e_, L, C0));

    h1_.assign(L * S * C0, T(0));
    z1_.assign(S, {});
    for (std::size_t s = 0; s < S; ++s) {
        auto& z = z1_[s];
        z.resize(L * C0);
        add_bias(view(z, L, C0), w(conv1_index(s) + 1));
        conv_forward<T>(cview(e_, L, C0), w(conv1_index(s)), cfg_.conv_scales[s], view(z, L, C0));
        for (std::size_t t = 0; t < L; ++t)
            for (std::size_t c = 0; c < C0; ++c) h1_[t * S * C0 + s * C0 + c] = gelu(z[t * C0 + c]);
    }

    const std::size_t W = S * C0;
    pool_.resize(L * W);
    for (std::size_t t = 0; t < L; ++t) {
        const T* a = &h1_[clamp_row(static_cast<long>(t) - 1, L) * W];
        const T* b = &h1_[t * W];
        const T* c = &h1_[clamp_row(static_cast<long>(t) + 1, L) * W];
        for (std::size_t i = 0; i < W; ++i) pool_[t * W + i] = (a[i] + b[i] + c[i]) / T(3);
    }

    z2_.resize(L * C1);
    add_bias(view(z2_, L, C1), w(conv2_index() + 1));
    conv_forward<T>(cview(pool_, L, W), w(conv2_index()), 3, view(z2_, L, C1));
    g_.resize(L * C1);
    for (std::size_t i = 0; i < g_.size(); ++i) g_[i] = gelu(z2_[i]);

    std::vector<T>* proj[3] = {&q_, &k_, &v_};
    for (std::size_t m = 0; m < 3; ++m) {
        auto& y = *proj[m];
        y.resize(L * D);
        add_bias(view(y, L, D), w(qkv_index(m) + 1));
        simd::gemm_nn<T>(cview(g_, L, C1), CM<T>(w(qkv_index(m)), C1, D, D), view(y, L, D));
    }
    kt_ = transpose(k_, L, D);
    vt_ = transpose(v_, L, D);

    const std::size_t H = cfg_.attention_heads, dh = D / H;
    o_.assign(L * D, T(0));
    std::vector<T> a(L);
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t t = 0; t < L; ++t) {
            attention_row(h, t, a);
            for (std::size_t d = 0; d < dh; ++d) {
                const std::size_t col = h * dh + d;
                o_[t * D + col] = simd::dot<T>(a, std::span<const T>(&vt_[col * L], L));
            }
        }

    r_ = g_;
    {
        std::vector<T> tmp(L * C1);
        add_bias(view(tmp, L, C1), w(out_index() + 1));
        simd::gemm_nn<T>(cview(o_, L, D), CM<T>(w(out_index()), D, C1, C1), view(tmp, L, C1));
        for (std::size_t i = 0; i < r_.size(); ++i) r_[i] += tmp[i];
    }

    logits_.resize(L * K);
    add_bias(view(logits_, L, K), w(head_index() + 1));
    simd::gemm_nn<T>(cview(r_, L, C1), CM<T>(w(head_index()), C1, K, K), view(logits_, L, K));
}

// Softmax weights of query t in head h over all valid keys.
template <class T>
void Net<T>::attention_row(std::size_t h, std::size_t t, std::vector<T>& a) const {
    const std::size_t L = len_, D = cfg_.attention_dim, dh = D / cfg_.attention_heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));
    std::fill(a.begin(), a.end(), T(0));
    for (std::size_t d = 0; d < dh; ++d) {
        const std::size_t col = h * dh + d;
        simd::axpy<T>(q_[t * D + col] * scale, std::span<const T>(&kt_[col * L], L), a);
    }
    softmax_inplace<T>(a);
}

template <class T>
void Net<T>::backprop(std::vector<T>& dlogits, ModelParams<T>& grads) const {
    const std::size_t L = len_, B = cfg_.input_bins, C0 = cfg_.channels[0], C1 = cfg_.channels[1];
    const std::size_t S = cfg_.conv_scales.size(), D = cfg_.attention_dim, K = cfg_.classes;
    const std::size_t H = cfg_.attention_heads, dh = D / H, W = S * C0;
    if (L == 0) return;
    auto gw = [&](std::size_t i) { return grads.tensors[i].data.data(); };

    // head
    simd::gemm_tn<T>(cview(r_, L, C1), cview(dlogits, L, K), MM<T>{gw(head_index()), C1, K, K});
    bias_grad<T>(cview(dlogits, L, K), gw(head_index() + 1));
    std::vector<T> dr(L * C1, T(0));
    simd::gemm_nt<T>(cview(dlogits, L, K), CM<T>(w(head_index()), C1, K, K), view(dr, L, C1));

    // residual + output projection
    std::vector<T> dg = dr;
    simd::gemm_tn<T>(cview(o_, L, D), cview(dr, L, C1), MM<T>{gw(out_index()), D, C1, C1});
    bias_grad<T>(cview(dr, L, C1), gw(out_index() + 1));
    std::vector<T> dout(L * D, T(0));
    simd::gemm_nt<T>(cview(dr, L, C1), CM<T>(w(out_index()), D, C1, C1), view(dout, L, D));

    // attention, recomputing each softmax row
    std::vector<T> dq(L * D, T(0)), dkt(D * L, T(0)), dvt(D * L, T(0));
    std::vector<T> a(L), da(L);
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t t = 0; t < L; ++t) {
            attention_row(h, t, a);
            std::fill(da.begin(), da.end(), T(0));
            for (std::size_t d = 0; d < dh; ++d) {
                const std::size_t col = h * dh + d;
                const T go = dout[t * D + col];
                simd::axpy<T>(go, std::span<const T>(&vt_[col * L], L), da);
                simd::axpy<T>(go, std::span<const T>(a), std::span<T>(&dvt[col * L], L));
            }
            const T s = simd::dot<T>(a, da);
            for (std::size_t i = 0; i < L; ++i) da[i] = a[i] * (da[i] - s);  // d scores
            for (std::size_t d = 0; d < dh; ++d) {
                const std::size_t col = h * dh + d;
                dq[t * D + col] = scale * simd::dot<T>(da, std::span<const T>(&kt_[col * L], L));
                simd::axpy<T>(scale * q_[t * D + col], std::span<const T>(da), std::span<T>(&dkt[col * L], L));
            }
        }
    const std::vector<T> dk = transpose(dkt, D, L), dv = transpose(dvt, D, L);
    const std::vector<T>* dproj[3] = {&dq, &dk, &dv};
    for (std::size_t m = 0; m < 3; ++m) {
        const auto& dy = *dproj[m];
        simd::gemm_tn<T>(cview(g_, L, C1), cview(dy, L, D), MM<T>{gw(qkv_index(m)), C1, D, D});
        bias_grad<T>(cview(dy, L, D), gw(qkv_index(m) + 1));
        simd::gemm_nt<T>(cview(dy, L, D), CM<T>(w(qkv_index(m)), C1, D, D), view(dg, L, C1));
    }

    // conv stage 2
    std::vector<T> dz2(L * C1);
    for (std::size_t i = 0; i < dz2.size(); ++i) dz2[i] = dg[i] * gelu_grad(z2_[i]);
    bias_grad<T>(cview(dz2, L, C1), gw(conv2_index() + 1));
    std::vector<T> dpool(L * W, T(0));
    MM<T> dpool_view = view(dpool, L, W);
    conv_backward<T>(cview(pool_, L, W), w(conv2_index()), 3, cview(dz2, L, C1), gw(conv2_index()), &dpool_view);

    // pooling
    std::vector<T> dh1(L * W, T(0));
    for (std::size_t t = 0; t < L; ++t) {
        const std::size_t rows[3] = {clamp_row(static_cast<long>(t) - 1, L), t, clamp_row(static_cast<long>(t) + 1, L)};
        for (std::size_t r : rows)
            for (std::size_t i = 0; i < W; ++i) dh1[r * W + i] += dpool[t * W + i] / T(3);
    }

    // multi-scale stage
    std::vector<T> de(L * C0, T(0));
    MM<T> de_view = view(de, L, C0);
    std::vector<T> dz(L * C0);
    for (std::size_t s = 0; s < S; ++s) {
        const auto& z = z1_[s];
        for (std::size_t t = 0; t < L; ++t)
            for (std::size_t c = 0; c < C0; ++c) dz[t * C0 + c] = dh1[t * W + s * C0 + c] * gelu_grad(z[t * C0 + c]);
        bias_grad<T>(cview(dz, L, C0), gw(conv1_index(s) + 1));
        conv_backward<T>(cview(e_, L, C0), w(conv1_index(s)), cfg_.conv_scales[s], cview(dz, L, C0),
                         gw(conv1_index(s)), &de_view);
    }

    // embedding
    simd::gemm_tn<T>(cview(xn_, L, B), cview(de, L, C0), MM<T>{gw(2), B, C0, C0});
    bias_grad<T>(cview(de, L, C0), gw(3));
}

template <class T>
std::vector<T> full_logits(const Net<T>& net, std::size_t frames, std::size_t classes) {
    std::vector<T> out(frames * classes, T(0));
    std::copy(net.logits().begin(), net.logits().end(), out.begin());
    return out;
}

// Loss sum and d(sum)/dlogits * scale over labelled frames below `valid`.
template <class T>
std::pair<double, std::size_t> ce_and_grad(std::span<const T> logits, std::span<const std::uint8_t> labels,
                                           std::size_t valid, std::size_t classes, double scale,
                                           std::vector<T>* dlogits, std::span<const double> weights = {}) {
    double total = 0.0;
    std::size_t counted = 0;
    std::vector<double> prob(classes);
    for (std::size_t t = 0; t < valid; ++t) {
        const auto y = labels[t];
        if (y == kIgnoreLabel) continue;
        if (y >= classes) throw InvalidArgument("label " + std::to_string(y) + " out of range");
        const T* z = logits.data() + t * classes;
        double mx = z[0];
        for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, static_cast<double>(z[c]));
        double sum = 0.0;
        for (std::size_t c = 0; c < classes; ++c) sum += (prob[c] = std::exp(static_cast<double>(z[c]) - mx));
        const double wy = weights.empty() ? 1.0 : weights[y];
        total += wy * (std::log(sum) + mx - static_cast<double>(z[y]));
        ++counted;
        if (dlogits) {
            T* g = dlogits->data() + t * classes;
            for (std::size_t c = 0; c < classes; ++c)
                g[c] = static_cast<T>(scale * wy * (prob[c] / sum - (c == y ? 1.0 : 0.0)));
        }
    }
    return {total, counted};
}

}  // namespace

void ModelConfig::validate() const {
    if (input_bins == 0) throw InvalidArgument("input_bins must be positive");
    if (conv_scales.empty()) throw InvalidArgument("conv_scales must not be empty");
    for (auto k : conv_scales)
        if (k == 0 || k % 2 == 0) throw InvalidArgument("conv kernel sizes must be odd and positive");
    if (channels.size() != 2 || channels[0] == 0 || channels[1] == 0)
        throw InvalidArgument("channels must list two positive stage widths");
    if (attention_heads == 0 || attention_dim == 0 || attention_dim % attention_heads != 0)
        throw InvalidArgument("attention_dim must be a positive multiple of attention_heads");
    if (classes != kClasses) throw InvalidArgument("classes must be 10");
    if (sequence_length == 0) throw InvalidArgument("sequence_length must be positive");
}

std::size_t ModelConfig::parameter_count() const {
    validate();
    std::size_t n = 0;
    for (const auto& l : layout(*this))
        if (l.trainable) n += product(l.shape);
    return n;
}

nlohmann::ordered_json to_json(const ModelConfig& c) {
    return {{"input_bins", c.input_bins},         {"conv_scales", c.conv_scales},
            {"channels", c.channels},             {"attention_heads", c.attention_heads},
            {"attention_dim", c.attention_dim},   {"classes", c.classes},
            {"sequence_length", c.sequence_length}, {"seed", c.seed}};
}

ModelConfig model_config_from_json(const nlohmann::ordered_json& j) {
    ModelConfig c;
    try {
        c.input_bins = j.value("input_bins", c.input_bins);
        c.conv_scales = j.value("conv_scales", c.conv_scales);
        c.channels = j.value("channels", c.channels);
        c.attention_heads = j.value("attention_heads", c.attention_heads);
        c.attention_dim = j.value("attention_dim", c.attention_dim);
        c.classes = j.value("classes", c.classes);
        c.sequence_length = j.value("sequence_length", c.sequence_length);
        c.seed = j.value("seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid model config: ") + e.what());
    }
    c.validate();
    return c;
}

template <class T>
Tensor<T>& ModelParams<T>::at(std::string_view name) {
    for (auto& t : tensors)
        if (t.name == name) return t;
    throw InvalidArgument("no tensor named " + std::string(name));
}

template <class T>
const Tensor<T>& ModelParams<T>::at(std::string_view name) const {
    for (const auto& t : tensors)
        if (t.name == name) return t;
    throw InvalidArgument("no tensor named " + std::string(name));
}

template <class T>
std::size_t ModelParams<T>::trainable_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors)
        if (t.trainable) n += t.size();
    return n;
}

template <class T>
ModelParams<T> init_model(const ModelConfig& config) {
    config.validate();
    ModelParams<T> p;
    p.config = config;
    SplitMix rng{config.seed};
    for (const auto& l : layout(config)) {
        Tensor<T> t{l.name, l.shape, std::vector<T>(product(l.shape)), l.trainable};
        if (l.name == "input_norm.scale") {
            std::fill(t.data.begin(), t.data.end(), T(1));
        } else if (l.trainable) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(l.fan_in));
            for (auto& v : t.data) v = static_cast<T>((2.0 * rng.uniform() - 1.0) * bound);
        }
        p.tensors.push_back(std::move(t));
    }
    return p;
}

template <class T>
ModelParams<T> zeros_like(const ModelParams<T>& params) {
    ModelParams<T> g = params;
    for (auto& t : g.tensors) std::fill(t.data.begin(), t.data.end(), T(0));
    return g;
}

template <class T>
std::vector<T> forward(const ModelParams<T>& params, std::span<const T> features, std::size_t frames,
                       std::size_t valid) {
    const Net<T> net(params, features, frames, valid);
    return full_logits(net, frames, params.config.classes);
}

template <class T>
double masked_cross_entropy(std::span<const T> logits, std::span<const std::uint8_t> labels) {
    if (logits.size() != labels.size() * kClasses) throw ShapeError("logits and labels disagree on frame count");
    const auto [sum, counted] = ce_and_grad<T>(logits, labels, labels.size(), kClasses, 1.0, nullptr);
    if (counted == 0) throw UndefinedLossError("every frame is masked; the loss is undefined");
    return sum / static_cast<double>(counted);
}

template <class T>
std::pair<double, std::size_t> accumulate_gradients(const ModelParams<T>& params, std::span<const T> features,
                                                    std::size_t frames, std::size_t valid,
                                                    std::span<const std::uint8_t> labels, double scale,
                                                    ModelParams<T>& gradients, std::span<const double> class_weights) {
    if (labels.size() != frames) throw ShapeError("labels and features disagree on frame count");
    if (gradients.tensors.size() != params.tensors.size()) throw ShapeError("gradient layout mismatch");
    if (!class_weights.empty() && class_weights.size() != params.config.classes)
        throw ShapeError("class_weights needs one entry per class");
    const Net<T> net(params, features, frames, valid);
    std::vector<T> dlogits(valid * params.config.classes, T(0));
    const auto result = ce_and_grad<T>(net.logits(), labels, valid, params.config.classes, scale, &dlogits,
                                       class_weights);
    if (result.second > 0) net.backprop(dlogits, gradients);
    return result;
}

template <class T>
LossAndGradients<T> backward(const ModelParams<T>& params, std::span<const T> features, std::size_t frames,
                             std::size_t valid, std::span<const std::uint8_t> labels) {
    if (labels.size() != frames) throw ShapeError("labels and features disagree on frame count");
    std::size_t counted = 0;
    for (std::size_t t = 0; t < valid; ++t) counted += labels[t] != kIgnoreLabel;
    if (counted == 0) throw UndefinedLossError("every frame is masked; the loss is undefined");
    LossAndGradients<T> out;
    out.gradients = zeros_like(params);
    const auto [sum, n] =
        accumulate_gradients<T>(params, features, frames, valid, labels, 1.0 / static_cast<double>(counted), out.gradients);
    out.loss = sum / static_cast<double>(n);
    out.counted = n;
    return out;
}

namespace {
template <class T>
std::vector<std::uint8_t> argmax_impl(std::span<const T> logits, std::size_t classes) {
    if (classes == 0 || logits.size() % classes != 0) throw ShapeError("logit count is not a multiple of classes");
    std::vector<std::uint8_t> out(logits.size() / classes);
    for (std::size_t t = 0; t < out.size(); ++t) {
        const T* z = logits.data() + t * classes;
        std::size_t best = 0;
        for (std::size_t c = 1; c < classes; ++c)
            if (z[c] > z[best]) best = c;
        out[t] = static_cast<std::uint8_t>(best);
    }
    return out;
}
}  // namespace

std::vector<std::uint8_t> argmax_rows(std::span<const float> logits, std::size_t classes) {
    return argmax_impl(logits, classes);
}
std::vector<std::uint8_t> argmax_rows(std::span<const double> logits, std::size_t classes) {
    return argmax_impl(logits, classes);
}

#define VOCALDYN_MODEL_INSTANTIATE(T)                                                                              \
    template struct ModelParams<T>;                                                                                \
    template ModelParams<T> init_model<T>(const ModelConfig&);                                                     \
    template ModelParams<T> zeros_like<T>(const ModelParams<T>&);                                                  \
    template std::vector<T> forward<T>(const ModelParams<T>&, std::span<const T>, std::size_t, std::size_t);      \
    template double masked_cross_entropy<T>(std::span<const T>, std::span<const std::uint8_t>);                   \
    template std::pair<double, std::size_t> accumulate_gradients<T>(                                              \
        const ModelParams<T>&, std::span<const T>, std::size_t, std::size_t, std::span<const std::uint8_t>, double, \
        ModelParams<T>&, std::span<const double>);                                                                                        \
    template LossAndGradients<T> backward<T>(const ModelParams<T>&, std::span<const T>, std::size_t, std::size_t, \
                                             std::span<const std::uint8_t>);

VOCALDYN_MODEL_INSTANTIATE(float)
VOCALDYN_MODEL_INSTANTIATE(double)

#undef VOCALDYN_MODEL_INSTANTIATE

}  // namespace vocaldyn::model
