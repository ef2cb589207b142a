#include <doctest.h>

#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "vocaldyn/error.hpp"
#include "vocaldyn/simd/kernels.hpp"

using namespace vocaldyn;
using namespace vocaldyn::simd;

namespace {

template <class T>
std::vector<T> random_vec(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<T> v(n);
    for (auto& x : v) x = static_cast<T>(u(rng));
    return v;
}

// Naive triple loops used as the oracle for every table.
template <class T>
void ref_gemm(const T* a, std::size_t as, const T* b, std::size_t bs, T* c, std::size_t cs, std::size_t m,
              std::size_t k, std::size_t n, bool ta, bool tb) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            long double s = 0;
            for (std::size_t p = 0; p < k; ++p) {
                const T av = ta ? a[p * as + i] : a[i * as + p];
                const T bv = tb ? b[j * bs + p] : b[p * bs + j];
                s += static_cast<long double>(av) * bv;
            }
            c[i * cs + j] += static_cast<T>(s);
        }
}

template <class T>
double tol() {
    return sizeof(T) == 4 ? 1e-4 : 1e-11;
}

template <class T>
void check_table(const KernelTable<T>& kt) {
    std::mt19937_64 rng(7);
    for (std::size_t n : {0u, 1u, 3u, 7u, 8u, 9u, 16u, 31u, 100u}) {
        auto a = random_vec<T>(n, rng), b = random_vec<T>(n, rng);
        long double ref = 0;
        for (std::size_t i = 0; i < n; ++i) ref += static_cast<long double>(a[i]) * b[i];
        CHECK(static_cast<double>(kt.dot(a.data(), b.data(), n)) == doctest::Approx(static_cast<double>(ref)).epsilon(tol<T>()));

        auto y = b;
        kt.axpy(T(0.5), a.data(), y.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(y[i] == doctest::Approx(b[i] + 0.5 * a[i]).epsilon(tol<T>()));
    }
    // Odd shapes and padded strides exercise the vector tails.
    using Shape = std::array<std::size_t, 3>;
    for (const auto& [m, k, n] : {Shape{1, 1, 1}, Shape{3, 5, 7}, Shape{9, 17, 13}, Shape{16, 8, 24}, Shape{5, 33, 2}}) {
        const std::size_t pad = 3;
        auto a = random_vec<T>(m * (k + pad), rng);
        auto at = random_vec<T>(k * (m + pad), rng);
        auto b = random_vec<T>(k * (n + pad), rng);
        auto bt = random_vec<T>(n * (k + pad), rng);
        auto c0 = random_vec<T>(m * (n + pad), rng);

        auto c = c0, r = c0;
        kt.gemm_nn({a.data(), m, k, k + pad}, {b.data(), k, n, n + pad}, {c.data(), m, n, n + pad});
        ref_gemm(a.data(), k + pad, b.data(), n + pad, r.data(), n + pad, m, k, n, false, false);
        for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(r[i]).epsilon(tol<T>()));

        c = c0, r = c0;
        kt.gemm_nt({a.data(), m, k, k + pad}, {bt.data(), n, k, k + pad}, {c.data(), m, n, n + pad});
        ref_gemm(a.data(), k + pad, bt.data(), k + pad, r.data(), n + pad, m, k, n, false, true);
        for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(r[i]).epsilon(tol<T>()));

        c = c0, r = c0;
        kt.gemm_tn({at.data(), k, m, m + pad}, {b.data(), k, n, n + pad}, {c.data(), m, n, n + pad});
        ref_gemm(at.data(), m + pad, b.data(), n + pad, r.data(), n + pad, m, k, n, true, false);
        for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(r[i]).epsilon(tol<T>()));
    }
    std::vector<T> x;
    for (double v = -80.0; v <= 80.0; v += 0.37) x.push_back(static_cast<T>(v));
    x.push_back(T(0));
    auto e = x;
    kt.exp_inplace(e.data(), e.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(e[i] == doctest::Approx(std::exp(static_cast<double>(x[i]))).epsilon(sizeof(T) == 4 ? 2e-6 : 1e-12));
}

}  // namespace

TEST_CASE("scalar kernels match naive loops") {
    check_table(detail::scalar_kernels<float>());
    check_table(detail::scalar_kernels<double>());
}

TEST_CASE("avx2 kernels match naive loops") {
    if (!isa_supported(Isa::avx2)) {
        MESSAGE("AVX2 not available; skipped");
        return;
    }
    check_table(kernels_for<float>(Isa::avx2));
    check_table(kernels_for<double>(Isa::avx2));
}

TEST_CASE("avx2 and scalar agree on the same inputs") {
    if (!isa_supported(Isa::avx2)) return;
    std::mt19937_64 rng(11);
    const std::size_t m = 37, k = 29, n = 45;
    auto a = random_vec<float>(m * k, rng), b = random_vec<float>(k * n, rng);
    std::vector<float> c1(m * n, 0.0f), c2(m * n, 0.0f);
    kernels_for<float>(Isa::scalar).gemm_nn({a.data(), m, k, k}, {b.data(), k, n, n}, {c1.data(), m, n, n});
    kernels_for<float>(Isa::avx2).gemm_nn({a.data(), m, k, k}, {b.data(), k, n, n}, {c2.data(), m, n, n});
    for (std::size_t i = 0; i < c1.size(); ++i) CHECK(c1[i] == doctest::Approx(c2[i]).epsilon(1e-5));
}

TEST_CASE("dispatch selection and shape checks") {
    const auto saved = active_isa();
    CHECK(isa_supported(Isa::scalar));
    set_active_isa(Isa::scalar);
    CHECK(active_isa() == Isa::scalar);
    CHECK(isa_name(Isa::avx2) == "avx2");
    if (!isa_supported(Isa::avx2)) CHECK_THROWS_AS(set_active_isa(Isa::avx2), InvalidArgument);
    set_active_isa(saved);

    std::vector<double> a(3), b(4);
    CHECK_THROWS_AS(dot<double>(a, b), ShapeError);
    std::vector<double> m(6), c(4);
    CHECK_THROWS_AS(gemm_nn<double>({m.data(), 2, 3, 3}, {m.data(), 2, 3, 3}, {c.data(), 2, 2, 2}), ShapeError);
}
