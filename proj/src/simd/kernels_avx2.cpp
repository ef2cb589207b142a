// Compiled with -mavx2 -mfma. Nothing in this file may run unless
// isa_supported(Isa::avx2) returned true.

#include "vocaldyn/simd/kernels.hpp"

#include <immintrin.h>

#include <cmath>

namespace vocaldyn::simd::detail {
namespace {

template <class T>
struct Lane;

template <>
struct Lane<float> {
    using V = __m256;
    static constexpr std::size_t width = 8;
    static V zero() { return _mm256_setzero_ps(); }
    static V load(const float* p) { return _mm256_loadu_ps(p); }
    static void store(float* p, V v) { _mm256_storeu_ps(p, v); }
    static V set1(float x) { return _mm256_set1_ps(x); }
    static V fmadd(V a, V b, V c) { return _mm256_fmadd_ps(a, b, c); }
    static V add(V a, V b) { return _mm256_add_ps(a, b); }
    static float hsum(V v) {
        __m128 lo = _mm256_castps256_ps128(v);
        __m128 hi = _mm256_extractf128_ps(v, 1);
        lo = _mm_add_ps(lo, hi);
        __m128 sh = _mm_movehdup_ps(lo);
        __m128 s = _mm_add_ps(lo, sh);
        sh = _mm_movehl_ps(sh, s);
        s = _mm_add_ss(s, sh);
        return _mm_cvtss_f32(s);
    }
};

template <>
struct Lane<double> {
    using V = __m256d;
    static constexpr std::size_t width = 4;
    static V zero() { return _mm256_setzero_pd(); }
    static V load(const double* p) { return _mm256_loadu_pd(p); }
    static void store(double* p, V v) { _mm256_storeu_pd(p, v); }
    static V set1(double x) { return _mm256_set1_pd(x); }
    static V fmadd(V a, V b, V c) { return _mm256_fmadd_pd(a, b, c); }
    static V add(V a, V b) { return _mm256_add_pd(a, b); }
    static double hsum(V v) {
        __m128d lo = _mm256_castpd256_pd128(v);
        __m128d hi = _mm256_extractf128_pd(v, 1);
        lo = _mm_add_pd(lo, hi);
        __m128d h = _mm_unpackhi_pd(lo, lo);
        return _mm_cvtsd_f64(_mm_add_sd(lo, h));
    }
};

template <class T>
T dot_avx2(const T* a, const T* b, std::size_t n) {
    using L = Lane<T>;
    constexpr std::size_t w = L::width;
    auto acc0 = L::zero();
    auto acc1 = L::zero();
    std::size_t i = 0;
    for (; i + 2 * w <= n; i += 2 * w) {
        acc0 = L::fmadd(L::load(a + i), L::load(b + i), acc0);
        acc1 = L::fmadd(L::load(a + i + w), L::load(b + i + w), acc1);
    }
    for (; i + w <= n; i += w) acc0 = L::fmadd(L::load(a + i), L::load(b + i), acc0);
    T acc = L::hsum(L::add(acc0, acc1));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

template <class T>
inline void axpy_inline(T alpha, const T* x, T* y, std::size_t n) {
    using L = Lane<T>;
    constexpr std::size_t w = L::width;
    const auto va = L::set1(alpha);
    std::size_t i = 0;
    for (; i + w <= n; i += w) L::store(y + i, L::fmadd(va, L::load(x + i), L::load(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

template <class T>
void axpy_avx2(T alpha, const T* x, T* y, std::size_t n) {
    axpy_inline(alpha, x, y, n);
}

template <class T>
void gemm_nn_avx2(ConstMatrixRef<T> a, ConstMatrixRef<T> b, MatrixRef<T> c) {
    for (std::size_t i = 0; i < a.rows; ++i) {
        T* crow = c.row(i);
        const T* arow = a.row(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            if (arow[k] == T(0)) continue;
            axpy_inline(arow[k], b.row(k), crow, b.cols);
        }
    }
}

template <class T>
void gemm_nt_avx2(ConstMatrixRef<T> a, ConstMatrixRef<T> b, MatrixRef<T> c) {
    for (std::size_t i = 0; i < a.rows; ++i) {
        T* crow = c.row(i);
        for (std::size_t j = 0; j < b.rows; ++j) crow[j] += dot_avx2(a.row(i), b.row(j), a.cols);
    }
}

template <class T>
void gemm_tn_avx2(ConstMatrixRef<T> a, ConstMatrixRef<T> b, MatrixRef<T> c) {
    for (std::size_t k = 0; k < a.rows; ++k) {
        const T* arow = a.row(k);
        const T* brow = b.row(k);
        for (std::size_t i = 0; i < a.cols; ++i) {
            if (arow[i] == T(0)) continue;
            axpy_inline(arow[i], brow, c.row(i), b.cols);
        }
    }
}

// Cephes-style range reduction and degree-5 polynomial; relative error
// below 2 ulp over the clamped domain.
inline __m256 exp256_ps(__m256 x) {
    const __m256 hi = _mm256_set1_ps(88.3762626647949f);
    const __m256 lo = _mm256_set1_ps(-87.3365478515625f);
    x = _mm256_min_ps(_mm256_max_ps(x, lo), hi);

    __m256 fx = _mm256_fmadd_ps(x, _mm256_set1_ps(1.44269504088896341f), _mm256_set1_ps(0.5f));
    fx = _mm256_floor_ps(fx);
    x = _mm256_fnmadd_ps(fx, _mm256_set1_ps(0.693359375f), x);
    x = _mm256_fnmadd_ps(fx, _mm256_set1_ps(-2.12194440e-4f), x);

    __m256 y = _mm256_set1_ps(1.9875691500e-4f);
    y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.3981999507e-3f));
    y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(8.3334519073e-3f));
    y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(4.1665795894e-2f));
    y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.6666665459e-1f));
    y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(5.0000001201e-1f));
    const __m256 x2 = _mm256_mul_ps(x, x);
    y = _mm256_fmadd_ps(y, x2, x);
    y = _mm256_add_ps(y, _mm256_set1_ps(1.0f));

    __m256i n = _mm256_cvttps_epi32(fx);
    n = _mm256_add_epi32(n, _mm256_set1_epi32(127));
    n = _mm256_slli_epi32(n, 23);
    return _mm256_mul_ps(y, _mm256_castsi256_ps(n));
}

void exp_avx2_f32(float* x, std::size_t n) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) _mm256_storeu_ps(x + i, exp256_ps(_mm256_loadu_ps(x + i)));
    if (i < n) {
        alignas(32) float tail[8] = {0, 0, 0, 0, 0, 0, 0, 0};
        for (std::size_t k = i; k < n; ++k) tail[k - i] = x[k];
        _mm256_store_ps(tail, exp256_ps(_mm256_load_ps(tail)));
        for (std::size_t k = i; k < n; ++k) x[k] = tail[k - i];
    }
}

void exp_f64(double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] = std::exp(x[i]);
}

const KernelTable<float> kFloat{&dot_avx2<float>,     &axpy_avx2<float>,    &gemm_nn_avx2<float>,
                                &gemm_nt_avx2<float>, &gemm_tn_avx2<float>, &exp_avx2_f32};
const KernelTable<double> kDouble{&dot_avx2<double>,     &axpy_avx2<double>,    &gemm_nn_avx2<double>,
                                  &gemm_nt_avx2<double>, &gemm_tn_avx2<double>, &exp_f64};

}  // namespace

template <>
const KernelTable<float>* avx2_kernels<float>() {
    return &kFloat;
}
template <>
const KernelTable<double>* avx2_kernels<double>() {
    return &kDouble;
}

}  // namespace vocaldyn::simd::detail
