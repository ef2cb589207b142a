#include "vocaldyn/dsp/loudness.hpp"

#include <algorithm>
#include <cmath>

#include "vocaldyn/error.hpp"

namespace vocaldyn::dsp {
namespace {

constexpr int kLevelRate = 2000;
constexpr std::size_t kLevelDecimation = kLoudnessSampleRate / kLevelRate;  // 24
constexpr std::size_t kOutputDecimation = 4;                               // 0.5 ms -> 2 ms
constexpr int kInnerSteps = 24;  // virtual upsampling of the 2 kHz loudness signals
constexpr double kReferencePressureSq = 4e-10;
constexpr double kTinyIntensity = 1e-12;

// Reference second-order sections shared by every band; each band subtracts
// its own deviations from the denominators.
constexpr double kSectionRef[3][6] = {
    {1, 2, 1, 1, -2, 1},
    {1, 0, -1, 1, -2, 1},
    {1, -2, 1, 1, -2, 1},
};

// Per band, per section: deviation of (a1, a2) from the reference section.
constexpr double kSectionDelta[kThirdOctaveBands][3][2] = {
    {{-6.70260e-004, 6.59453e-004}, {-3.75071e-004, 3.61926e-004}, {-3.06523e-004, 2.97634e-004}},
    {{-8.47258e-004, 8.30131e-004}, {-4.76448e-004, 4.55616e-004}, {-3.88773e-004, 3.74685e-004}},
    {{-1.07210e-003, 1.04496e-003}, {-6.06567e-004, 5.73553e-004}, {-4.94004e-004, 4.71677e-004}},
    {{-1.35836e-003, 1.31535e-003}, {-7.74327e-004, 7.22007e-004}, {-6.29154e-004, 5.93771e-004}},
    {{-1.72380e-003, 1.65564e-003}, {-9.91780e-004, 9.08866e-004}, {-8.03529e-004, 7.47455e-004}},
    {{-2.19188e-003, 2.08388e-003}, {-1.27545e-003, 1.14406e-003}, {-1.02976e-003, 9.40900e-004}},
    {{-2.79386e-003, 2.62274e-003}, {-1.64828e-003, 1.44006e-003}, {-1.32520e-003, 1.18438e-003}},
    {{-3.57182e-003, 3.30071e-003}, {-2.14252e-003, 1.81258e-003}, {-1.71397e-003, 1.49082e-003}},
    {{-4.58305e-003, 4.15355e-003}, {-2.80413e-003, 2.28135e-003}, {-2.23006e-003, 1.87646e-003}},
    {{-5.90655e-003, 5.22622e-003}, {-3.69947e-003, 2.87118e-003}, {-2.92205e-003, 2.36178e-003}},
    {{-7.65243e-003, 6.57493e-003}, {-4.92540e-003, 3.61318e-003}, {-3.86007e-003, 2.97240e-003}},
    {{-1.00023e-002, 8.29610e-003}, {-6.63788e-003, 4.55999e-003}, {-5.15982e-003, 3.75306e-003}},
    {{-1.31230e-002, 1.04220e-002}, {-9.02274e-003, 5.73132e-003}, {-6.94543e-003, 4.71734e-003}},
    {{-1.73693e-002, 1.30947e-002}, {-1.24176e-002, 7.20526e-003}, {-9.46002e-003, 5.93145e-003}},
    {{-2.31934e-002, 1.64308e-002}, {-1.73009e-002, 9.04761e-003}, {-1.30358e-002, 7.44926e-003}},
    {{-3.13292e-002, 2.06370e-002}, {-2.44342e-002, 1.13731e-002}, {-1.82108e-002, 9.36778e-003}},
    {{-4.28261e-002, 2.59325e-002}, {-3.49619e-002, 1.43046e-002}, {-2.57855e-002, 1.17912e-002}},
    {{-5.91733e-002, 3.25054e-002}, {-5.06072e-002, 1.79513e-002}, {-3.69401e-002, 1.48094e-002}},
    {{-8.26348e-002, 4.05894e-002}, {-7.40348e-002, 2.24476e-002}, {-5.34977e-002, 1.85371e-002}},
    {{-1.17018e-001, 5.08116e-002}, {-1.09516e-001, 2.81387e-002}, {-7.85097e-002, 2.32872e-002}},
    {{-1.67714e-001, 6.37872e-002}, {-1.63378e-001, 3.53729e-002}, {-1.16419e-001, 2.93723e-002}},
    {{-2.42528e-001, 7.98576e-002}, {-2.45161e-001, 4.43370e-002}, {-1.73972e-001, 3.70015e-002}},
    {{-3.53142e-001, 9.96330e-002}, {-3.69163e-001, 5.53535e-002}, {-2.61399e-001, 4.65428e-002}},
    {{-5.16316e-001, 1.24177e-001}, {-5.55473e-001, 6.89403e-002}, {-3.93998e-001, 5.86715e-002}},
    {{-7.56635e-001, 1.55023e-001}, {-8.34281e-001, 8.58123e-002}, {-5.94547e-001, 7.43960e-002}},
    {{-1.10165e000, 1.91713e-001}, {-1.23939e000, 1.05243e-001}, {-8.91666e-001, 9.40354e-002}},
    {{-1.58477e000, 2.39049e-001}, {-1.80505e000, 1.28794e-001}, {-1.32500e000, 1.21333e-001}},
    {{-2.50630e000, 1.42308e-001}, {-2.19464e000, 2.76470e-001}, {-1.90231e000, 1.47304e-001}},
};

constexpr double kBandGain[kThirdOctaveBands] = {
    4.30764e-011, 8.59340e-011, 1.71424e-010, 3.41944e-010, 6.82035e-010, 1.36026e-009, 2.71261e-009,
    5.40870e-009, 1.07826e-008, 2.14910e-008, 4.28228e-008, 8.54316e-008, 1.70009e-007, 3.38215e-007,
    6.71990e-007, 1.33531e-006, 2.65172e-006, 5.25477e-006, 1.03780e-005, 2.04870e-005, 4.05198e-005,
    7.97914e-005, 1.56511e-004, 3.04954e-004, 5.99157e-004, 1.16544e-003, 2.27488e-003, 3.91006e-003,
};

// Level ranges and reductions for the bands below 315 Hz (equal-loudness
// contours).
constexpr double kLowRanges[8] = {45, 55, 65, 71, 80, 90, 100, 120};
constexpr double kLowReduction[8][11] = {
    {-32, -24, -16, -10, -5, 0, -7, -3, 0, -2, 0}, {-29, -22, -15, -10, -4, 0, -7, -2, 0, -2, 0},
    {-27, -19, -14, -9, -4, 0, -6, -2, 0, -2, 0},  {-25, -17, -12, -9, -3, 0, -5, -2, 0, -2, 0},
    {-23, -16, -11, -7, -3, 0, -4, -1, 0, -1, 0},  {-20, -14, -10, -6, -3, 0, -4, -1, 0, -1, 0},
    {-18, -12, -9, -6, -2, 0, -3, -1, 0, -1, 0},   {-15, -10, -8, -4, -2, 0, -3, -1, 0, -1, 0},
};

// Critical-band threshold in quiet, outer-ear transmission, free/diffuse
// difference and third-octave to critical-band adaptation.
constexpr double kThresholdQuiet[20] = {30, 18, 12, 8, 7, 6, 5, 4, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3};
constexpr double kTransmission[20] = {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, -0.5, -1.6, -3.2, -5.4, -5.6, -4, -1.5, 2, 5, 12};
constexpr double kDiffuseDelta[20] = {0,   0,  0.5,  0.9, 1.2, 1.6, 2.3, 2.8, 3, 2,
                                      0, -1.4, -2, -1.9, -1,  0.5, 3,   4,   4.3, 4};
constexpr double kBandAdaptation[20] = {-0.25, -0.6, -0.8, -0.8, -0.5, 0,   0.5, 1.1, 1.5, 1.7,
                                        1.8,   1.8,  1.7,  1.6,  1.4,  1.2, 0.8, 0.5, 0,   -0.5};

// Upper edges (Bark) of the approximated critical bands.
constexpr double kBandUpperEdge[kCoreBands] = {0.9,  1.8,  2.8,  3.5,  4.4,  5.4,  6.6,  7.9,  9.2,  10.6, 12.3,
                                               13.8, 15.2, 16.7, 18.1, 19.3, 20.6, 21.8, 22.7, 23.6, 24.0};
// Specific-loudness ranges selecting the upper-slope steepness.
constexpr double kSlopeRanges[18] = {21.5, 18.0, 15.1, 11.5, 9.0,  6.1,  4.4,   3.1, 2.13,
                                     1.36, 0.82, 0.42, 0.30, 0.22, 0.15, 0.10, 0.035, 0.0};
// Upper-slope steepness (sone/Bark per Bark) by range and band group.
constexpr double kUpperSlope[18][8] = {
    {13.0, 8.2, 6.3, 5.5, 5.5, 5.5, 5.5, 5.5},         {9.0, 7.5, 6.0, 5.1, 4.5, 4.5, 4.5, 4.5},
    {7.8, 6.7, 5.6, 4.9, 4.4, 3.9, 3.9, 3.9},          {6.2, 5.4, 4.6, 4.0, 3.5, 3.2, 3.2, 3.2},
    {4.5, 3.8, 3.6, 3.2, 2.9, 2.7, 2.7, 2.7},          {3.7, 3.0, 2.8, 2.35, 2.2, 2.2, 2.2, 2.2},
    {2.9, 2.3, 2.1, 1.9, 1.8, 1.7, 1.7, 1.7},          {2.4, 1.7, 1.5, 1.35, 1.3, 1.3, 1.3, 1.3},
    {1.95, 1.45, 1.3, 1.15, 1.1, 1.1, 1.1, 1.1},       {1.5, 1.2, 0.94, 0.86, 0.82, 0.82, 0.82, 0.82},
    {0.72, 0.67, 0.64, 0.63, 0.62, 0.62, 0.62, 0.62},  {0.59, 0.53, 0.51, 0.50, 0.42, 0.42, 0.42, 0.42},
    {0.40, 0.33, 0.26, 0.24, 0.24, 0.22, 0.22, 0.22},  {0.27, 0.21, 0.20, 0.18, 0.17, 0.17, 0.17, 0.17},
    {0.16, 0.15, 0.14, 0.12, 0.11, 0.11, 0.11, 0.11},  {0.12, 0.11, 0.10, 0.08, 0.08, 0.08, 0.08, 0.08},
    {0.09, 0.08, 0.07, 0.06, 0.06, 0.06, 0.06, 0.05},  {0.06, 0.05, 0.03, 0.02, 0.02, 0.02, 0.02, 0.02},
};

double band_center_hz(std::size_t band) {
    return 1000.0 * std::pow(10.0, (static_cast<double>(band) - 16.0) / 10.0);
}

// Nonlinear temporal decay of core loudness (two-capacitor model).
class NonlinearDecay {
public:
    NonlinearDecay() {
        constexpr double t_short = 0.005, t_long = 0.015, t_var = 0.075;
        const double dt = 1.0 / (kLevelRate * kInnerSteps);
        const double p = (t_var + t_long) / (t_var * t_short);
        const double q = 1.0 / (t_short * t_var);
        const double l1 = -p / 2 + std::sqrt(p * p / 4 - q);
        const double l2 = -p / 2 - std::sqrt(p * p / 4 - q);
        const double den = t_var * (l1 - l2);
        const double e1 = std::exp(l1 * dt);
        const double e2 = std::exp(l2 * dt);
        b_[0] = (e1 - e2) / den;
        b_[1] = ((t_var * l2 + 1) * e1 - (t_var * l1 + 1) * e2) / den;
        b_[2] = ((t_var * l1 + 1) * e1 - (t_var * l2 + 1) * e2) / den;
        b_[3] = (t_var * l1 + 1) * (t_var * l2 + 1) * (e1 - e2) / den;
        b_[4] = std::exp(-dt / t_long);
        b_[5] = std::exp(-dt / t_var);
    }

    double step(double ui) {
        double uo = ui;
        if (uo_last_ > u2_last_) {
            const double c = uo_last_ * b_[2] - u2_last_ * b_[3];
            if (c >= ui) uo = c;
        } else {
            const double c = uo_last_ * b_[4];
            if (c >= ui) uo = c;
        }
        double u2 = uo;
        if (ui < uo_last_ && uo_last_ > u2_last_) {
            const double c = uo_last_ * b_[0] - u2_last_ * b_[1];
            if (c <= uo) u2 = c;
        }
        if (ui >= uo_last_ && !(std::abs(ui - uo_last_) < 1e-5 && uo <= u2_last_))
            u2 = (u2_last_ - ui) * b_[5] + ui;
        uo_last_ = uo;
        u2_last_ = u2;
        return uo;
    }

private:
    double b_[6];
    double uo_last_ = 0.0;
    double u2_last_ = 0.0;
};

// First-order low pass run on a signal linearly interpolated kInnerSteps
// times between 2 kHz samples; returns the output at the original instants.
std::vector<double> interpolated_lowpass(const std::vector<double>& x, double tau) {
    const double a1 = std::exp(-1.0 / (kLevelRate * kInnerSteps * tau));
    const double b0 = 1.0 - a1;
    std::vector<double> y(x.size());
    double state = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) {
        const double next = t + 1 < x.size() ? x[t + 1] : 0.0;
        const double delta = (next - x[t]) / kInnerSteps;
        for (int k = 0; k < kInnerSteps; ++k) {
            state = b0 * (x[t] + k * delta) + a1 * state;
            if (k == 0) y[t] = state;
        }
    }
    return y;
}

}  // namespace

double pascal_per_unit(double calibration_db_spl_fs) {
    return std::sqrt(2.0) * 2e-5 * std::pow(10.0, calibration_db_spl_fs / 20.0);
}

std::vector<double> third_octave_levels(std::span<const double> pressure) {
    const std::size_t n = pressure.size();
    const std::size_t frames = (n + kLevelDecimation - 1) / kLevelDecimation;
    std::vector<double> levels(frames * kThirdOctaveBands);
    std::vector<double> y(n);
    for (std::size_t band = 0; band < kThirdOctaveBands; ++band) {
        std::copy(pressure.begin(), pressure.end(), y.begin());
        for (int s = 0; s < 3; ++s) {
            const double b0 = kSectionRef[s][0], b1 = kSectionRef[s][1], b2 = kSectionRef[s][2];
            const double a1 = kSectionRef[s][4] - kSectionDelta[band][s][0];
            const double a2 = kSectionRef[s][5] - kSectionDelta[band][s][1];
            double z1 = 0.0, z2 = 0.0;  // transposed direct form II
            for (std::size_t i = 0; i < n; ++i) {
                const double x = y[i];
                const double out = b0 * x + z1;
                z1 = b1 * x - a1 * out + z2;
                z2 = b2 * x - a2 * out;
                y[i] = out;
            }
        }
        const double fc = band_center_hz(band);
        const double tau = fc <= 1000.0 ? 2.0 / (3.0 * fc) : 2.0 / 3000.0;
        const double a = std::exp(-1.0 / (kLoudnessSampleRate * tau));
        const double b = 1.0 - a;
        const double gain = kBandGain[band];
        double s1 = 0.0, s2 = 0.0, s3 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = gain * y[i];
            s1 = b * v * v + a * s1;
            s2 = b * s1 + a * s2;
            s3 = b * s2 + a * s3;
            if (i % kLevelDecimation == 0)
                levels[(i / kLevelDecimation) * kThirdOctaveBands + band] =
                    10.0 * std::log10((s3 + kTinyIntensity) / kReferencePressureSq);
        }
    }
    return levels;
}

std::array<double, kCoreBands> core_loudness(std::span<const double, kThirdOctaveBands> level, SoundField field) {
    double intensity[11];
    for (std::size_t i = 0; i < 11; ++i) {
        std::size_t j = 0;
        while (j < 7 && level[i] > kLowRanges[j] - kLowReduction[j][i]) ++j;
        intensity[i] = std::pow(10.0, (level[i] + kLowReduction[j][i]) / 10.0);
    }
    const double group[3] = {
        intensity[0] + intensity[1] + intensity[2] + intensity[3] + intensity[4] + intensity[5],
        intensity[6] + intensity[7] + intensity[8],
        intensity[9] + intensity[10],
    };

    std::array<double, kCoreBands> core{};
    constexpr double s = 0.25;
    for (std::size_t i = 0; i < 20; ++i) {
        double le = i < 3 ? (group[i] > 0 ? 10.0 * std::log10(group[i]) : 0.0) : level[i + 8];
        le -= kTransmission[i];
        if (field == SoundField::diffuse) le += kDiffuseDelta[i];
        if (le > kThresholdQuiet[i]) {
            le -= kBandAdaptation[i];
            const double mp1 = 0.0635 * std::pow(10.0, 0.025 * kThresholdQuiet[i]);
            const double mp2 = std::pow(1.0 - s + s * std::pow(10.0, (le - kThresholdQuiet[i]) / 10.0), 0.25) - 1.0;
            core[i] = std::max(0.0, mp1 * mp2);
        }
    }
    // lowest band: threshold varies inside the band
    const double korry = 0.4 + 0.32 * std::pow(core[0], 0.2);
    if (korry <= 1.0) core[0] *= korry;
    core[20] = 0.0;
    return core;
}

double spread_specific_loudness(std::span<const double, kCoreBands> nm, std::span<float> specific) {
    const bool fill = !specific.empty();
    if (fill && specific.size() != kBarkBins) throw ShapeError("specific loudness row must have 240 bins");
    double total = 0.0, z1 = 0.0, n1 = 0.0;
    std::size_t iz = 0;
    std::size_t j = 17;
    auto z_of = [](std::size_t k) { return static_cast<double>(k + 1) * kBarkResolution; };
    constexpr double kEdgeEps = 1e-4;
    constexpr double kFillEps = 1e-9;

    for (std::size_t i = 0; i < kCoreBands; ++i) {
        const double zup = kBandUpperEdge[i] + kEdgeEps;
        const std::size_t group = i == 0 ? 7 : std::min<std::size_t>(i - 1, 7);
        bool first = true;
        while (first || z1 < zup) {
            first = false;
            double n2, z2;
            if (n1 <= nm[i]) {
                if (n1 < nm[i]) {
                    j = 0;
                    while (j < 17 && kSlopeRanges[j] > nm[i]) ++j;
                }
                z2 = zup;
                n2 = nm[i];
                total += n2 * (z2 - z1);
                for (; iz < kBarkBins && z_of(iz) <= z2 + kFillEps; ++iz)
                    if (fill) specific[iz] = static_cast<float>(n2);
            } else {
                const double slope = kUpperSlope[j][group];
                n2 = std::max(kSlopeRanges[j], nm[i]);
                double dz = (n1 - n2) / slope;
                z2 = z1 + dz;
                if (z2 > zup) {
                    z2 = zup;
                    dz = z2 - z1;
                    n2 = n1 - dz * slope;
                }
                total += dz * (n1 + n2) / 2.0;
                for (; iz < kBarkBins && z_of(iz) <= z2 + kFillEps; ++iz)
                    if (fill) specific[iz] = static_cast<float>(std::max(0.0, n1 - (z_of(iz) - z1) * slope));
                while (j < 17 && n2 <= kSlopeRanges[j]) ++j;
            }
            z1 = z2;
            n1 = n2;
        }
    }
    if (fill)
        for (; iz < kBarkBins; ++iz) specific[iz] = 0.0f;
    return std::max(0.0, total);
}

LoudnessTrace zwicker_time_varying(const AudioBuffer& audio, const LoudnessConfig& cfg) {
    if (audio.sample_rate() != kLoudnessSampleRate)
        throw SampleRateError("Zwicker loudness requires 48000 Hz audio, got " + std::to_string(audio.sample_rate()));

    const double scale = pascal_per_unit(cfg.calibration_db_spl_fs);
    std::vector<double> pressure(audio.size());
    const auto x = audio.samples();
    for (std::size_t i = 0; i < x.size(); ++i) pressure[i] = scale * x[i];

    const auto levels = third_octave_levels(pressure);
    const std::size_t steps = levels.size() / kThirdOctaveBands;

    std::vector<std::array<double, kCoreBands>> core(steps);
    for (std::size_t t = 0; t < steps; ++t)
        core[t] = core_loudness(std::span<const double, kThirdOctaveBands>(levels.data() + t * kThirdOctaveBands,
                                                                           kThirdOctaveBands),
                                cfg.field);

    for (std::size_t band = 0; band < kCoreBands; ++band) {
        NonlinearDecay decay;
        double held = 0.0;
        for (std::size_t t = 0; t < steps; ++t) {
            const double cur = core[t][band];
            const double next = t + 1 < steps ? core[t + 1][band] : 0.0;
            const double delta = (next - cur) / kInnerSteps;
            for (int k = 0; k < kInnerSteps; ++k) {
                const double out = decay.step(cur + k * delta);
                if (k == 0) held = out;
            }
            core[t][band] = held;
        }
    }

    const std::size_t frames = (steps + kOutputDecimation - 1) / kOutputDecimation;
    LoudnessTrace trace;
    trace.specific = FeatureMatrix(FeatureKind::bark_loudness, frames, kBarkBins, kLoudnessHopSeconds,
                                   audio.sample_rate());
    std::vector<double> total(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        std::span<float> row;
        if (t % kOutputDecimation == 0) row = trace.specific.row(t / kOutputDecimation);
        total[t] = spread_specific_loudness(core[t], row);
    }

    const auto fast = interpolated_lowpass(total, 3.5e-3);
    const auto slow = interpolated_lowpass(total, 70e-3);
    trace.total.resize(frames);
    for (std::size_t f = 0; f < frames; ++f) {
        const std::size_t t = f * kOutputDecimation;
        trace.total[f] = 0.47 * fast[t] + 0.53 * slow[t];
    }
    return trace;
}

FeatureMatrix bark_specific_loudness(const AudioBuffer& audio, const LoudnessConfig& cfg) {
    return zwicker_time_varying(audio, cfg).specific;
}

std::vector<double> total_loudness(const FeatureMatrix& specific) {
    if (specific.kind != FeatureKind::bark_loudness)
        throw InvalidArgument("total_loudness requires a bark_loudness matrix");
    std::vector<double> out(specific.frames);
    for (std::size_t t = 0; t < specific.frames; ++t) {
        double acc = 0.0;
        for (float v : specific.row(t)) acc += v;
        out[t] = acc * kBarkResolution;
    }
    return out;
}

}  // namespace vocaldyn::dsp
