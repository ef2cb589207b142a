#include "vocaldyn/dsp/spectral.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "vocaldyn/error.hpp"

namespace vocaldyn::dsp {

Fft::Fft(std::size_t n) : n_(n) {
    if (n == 0 || (n & (n - 1)) != 0) throw InvalidArgument("FFT size must be a power of two");
    bitrev_.resize(n);
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n) ++bits;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t r = 0;
        for (std::size_t b = 0; b < bits; ++b)
            if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
        bitrev_[i] = r;
    }
    twiddle_.resize(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k)
        twiddle_[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
}

void Fft::forward(std::span<std::complex<double>> a) const {
    if (a.size() != n_) throw ShapeError("FFT input length mismatch");
    for (std::size_t i = 0; i < n_; ++i)
        if (i < bitrev_[i]) std::swap(a[i], a[bitrev_[i]]);
    for (std::size_t len = 2; len <= n_; len <<= 1) {
        const std::size_t half = len / 2;
        const std::size_t step = n_ / len;
        for (std::size_t i = 0; i < n_; i += len) {
            for (std::size_t j = 0; j < half; ++j) {
                const auto w = twiddle_[j * step];
                const auto u = a[i + j];
                const auto v = a[i + j + half] * w;
                a[i + j] = u + v;
                a[i + j + half] = u - v;
            }
        }
    }
}

std::vector<double> hann_window(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
    return w;
}

MagnitudeStft::MagnitudeStft(std::size_t n_fft) : fft_(n_fft), window_(hann_window(n_fft)) {}

namespace {

long reflect_index(long i, long n) {
    if (n == 1) return 0;
    const long period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

}  // namespace

std::vector<float> MagnitudeStft::compute(std::span<const float> x, std::span<const long> centers) const {
    const std::size_t n = fft_.size();
    const std::size_t nb = n_bins();
    const long len = static_cast<long>(x.size());
    const long half = static_cast<long>(n / 2);
    std::vector<float> out(centers.size() * nb, 0.0f);
    if (len == 0) return out;
    std::vector<std::complex<double>> buf(n);
    for (std::size_t f = 0; f < centers.size(); ++f) {
        const long start = centers[f] - half;
        for (std::size_t i = 0; i < n; ++i) {
            long idx = start + static_cast<long>(i);
            if (idx < 0 || idx >= len) idx = reflect_index(idx, len);
            buf[i] = {x[static_cast<std::size_t>(idx)] * window_[i], 0.0};
        }
        fft_.forward(buf);
        float* row = out.data() + f * nb;
        for (std::size_t k = 0; k < nb; ++k) row[k] = static_cast<float>(std::abs(buf[k]));
    }
    return out;
}

namespace {

double bessel_i0(double x) {
    double sum = 1.0, term = 1.0;
    const double q = x * x / 4.0;
    for (int k = 1; k < 64; ++k) {
        term *= q / (static_cast<double>(k) * k);
        sum += term;
        if (term < 1e-17 * sum) break;
    }
    return sum;
}

constexpr double kKaiserBeta = 8.6;
constexpr int kZeroCrossings = 16;
constexpr double kRolloff = 0.945;
constexpr long kMaxTablePhases = 4096;

double kernel(double tau, double fc, double half_width, double i0_beta) {
    if (std::abs(tau) >= half_width) return 0.0;
    const double arg = fc * tau;
    const double sinc = arg == 0.0 ? 1.0 : std::sin(std::numbers::pi * arg) / (std::numbers::pi * arg);
    const double r = tau / half_width;
    const double win = bessel_i0(kKaiserBeta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0_beta;
    return fc * sinc * win;
}

}  // namespace

AudioBuffer resample(const AudioBuffer& audio, int target_rate) {
    if (target_rate <= 0) throw InvalidArgument("target sample rate must be positive");
    const int src = audio.sample_rate();
    if (src == target_rate) return audio;
    if (audio.empty()) return AudioBuffer({}, target_rate);

    const long g = std::gcd(static_cast<long>(src), static_cast<long>(target_rate));
    const long up = target_rate / g;
    const long down = src / g;
    const double fc = std::min(1.0, static_cast<double>(target_rate) / src) * kRolloff;
    const double half_width = kZeroCrossings / fc;
    const long taps_half = static_cast<long>(std::ceil(half_width));
    const double i0_beta = bessel_i0(kKaiserBeta);

    const auto x = audio.samples();
    const long n_in = static_cast<long>(x.size());
    const long n_out = (n_in * up + down - 1) / down;

    auto phase_coeffs = [&](long phase, std::vector<double>& c) {
        // output time = base + phase/up input samples; taps at base + k
        const double frac = static_cast<double>(phase) / static_cast<double>(up);
        c.resize(static_cast<std::size_t>(2 * taps_half + 1));
        double sum = 0.0;
        for (long k = -taps_half; k <= taps_half; ++k) {
            const double v = kernel(frac - static_cast<double>(k), fc, half_width, i0_beta);
            c[static_cast<std::size_t>(k + taps_half)] = v;
            sum += v;
        }
        for (auto& v : c) v /= sum;
    };

    std::vector<std::vector<double>> table;
    if (up <= kMaxTablePhases) {
        table.resize(static_cast<std::size_t>(up));
        for (long p = 0; p < up; ++p) phase_coeffs(p, table[static_cast<std::size_t>(p)]);
    }

    std::vector<float> out(static_cast<std::size_t>(n_out));
    std::vector<double> scratch;
    for (long n = 0; n < n_out; ++n) {
        const long num = n * down;
        const long base = num / up;
        const long phase = num % up;
        const std::vector<double>* c;
        if (!table.empty()) {
            c = &table[static_cast<std::size_t>(phase)];
        } else {
            phase_coeffs(phase, scratch);
            c = &scratch;
        }
        double acc = 0.0;
        const long lo = std::max(-taps_half, -base);
        const long hi = std::min(taps_half, n_in - 1 - base);
        for (long k = lo; k <= hi; ++k) acc += (*c)[static_cast<std::size_t>(k + taps_half)] * x[static_cast<std::size_t>(base + k)];
        out[static_cast<std::size_t>(n)] = static_cast<float>(acc);
    }
    return AudioBuffer(std::move(out), target_rate);
}

}  // namespace vocaldyn::dsp
