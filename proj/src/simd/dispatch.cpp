#include <atomic>
#include <cstdlib>
#include <string>

#include "vocaldyn/error.hpp"
#include "vocaldyn/simd/kernels.hpp"

namespace vocaldyn::simd {
namespace {

bool cpu_has_avx2() {
#if defined(VOCALDYN_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Isa initial_isa() {
    Isa isa = best_supported_isa();
    if (const char* env = std::getenv("VOCALDYN_ISA")) {
        const std::string name(env);
        if (name == "scalar") isa = Isa::scalar;
        else if (name == "avx2" && isa_supported(Isa::avx2)) isa = Isa::avx2;
    }
    return isa;
}

std::atomic<Isa>& current() {
    static std::atomic<Isa> isa{initial_isa()};
    return isa;
}

void check_gemm(std::size_t m, std::size_t n, std::size_t k, std::size_t cm, std::size_t cn,
                std::size_t k2) {
    if (k != k2 || cm != m || cn != n) throw ShapeError("gemm: incompatible operand shapes");
}

}  // namespace

std::string_view isa_name(Isa isa) {
    return isa == Isa::avx2 ? "avx2" : "scalar";
}

bool isa_supported(Isa isa) {
    if (isa == Isa::scalar) return true;
    static const bool has_avx2 = cpu_has_avx2();
    return has_avx2;
}

Isa best_supported_isa() {
    return isa_supported(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

Isa active_isa() {
    return current().load(std::memory_order_relaxed);
}

void set_active_isa(Isa isa) {
    if (!isa_supported(isa))
        throw InvalidArgument("instruction set not supported on this CPU: " + std::string(isa_name(isa)));
    current().store(isa, std::memory_order_relaxed);
}

template <class T>
const KernelTable<T>& kernels_for(Isa isa) {
    if (isa == Isa::avx2 && isa_supported(Isa::avx2)) {
        if (const auto* table = detail::avx2_kernels<T>()) return *table;
    }
    return detail::scalar_kernels<T>();
}

template <class T>
T dot(std::span<const T> a, std::span<const T> b) {
    if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
    return kernels<T>().dot(a.data(), b.data(), a.size());
}

template <class T>
void axpy(T alpha, std::span<const T> x, std::span<T> y) {
    if (x.size() != y.size()) throw ShapeError("axpy: length mismatch");
    kernels<T>().axpy(alpha, x.data(), y.data(), x.size());
}

template <class T>
void gemm_nn(ConstMatrixRef<T> a, ConstMatrixRef<T> b, MatrixRef<T> c) {
    check_gemm(a.rows, b.cols, a.cols, c.rows, c.cols, b.rows);
    kernels<T>().gemm_nn(a, b, c);
}

template <class T>
void gemm_nt(ConstMatrixRef<T> a, ConstMatrixRef<T> b, MatrixRef<T> c) {
    check_gemm(a.rows, b.rows, a.cols, c.rows, c.cols, b.cols);
    kernels<T>().gemm_nt(a, b, c);
}

template <class T>
void gemm_tn(ConstMatrixRef<T> a, ConstMatrixRef<T> b, MatrixRef<T> c) {
    check_gemm(a.cols, b.cols, a.rows, c.rows, c.cols, b.rows);
    kernels<T>().gemm_tn(a, b, c);
}

template <class T>
void exp_inplace(std::span<T> x) {
    kernels<T>().exp_inplace(x.data(), x.size());
}

#define VOCALDYN_INSTANTIATE(T)                                                      \
    template const KernelTable<T>& kernels_for<T>(Isa);                              \
    template T dot<T>(std::span<const T>, std::span<const T>);                       \
    template void axpy<T>(T, std::span<const T>, std::span<T>);                      \
    template void gemm_nn<T>(ConstMatrixRef<T>, ConstMatrixRef<T>, MatrixRef<T>);    \
    template void gemm_nt<T>(ConstMatrixRef<T>, ConstMatrixRef<T>, MatrixRef<T>);    \
    template void gemm_tn<T>(ConstMatrixRef<T>, ConstMatrixRef<T>, MatrixRef<T>);    \
    template void exp_inplace<T>(std::span<T>);

VOCALDYN_INSTANTIATE(float)
VOCALDYN_INSTANTIATE(double)

#undef VOCALDYN_INSTANTIATE

#if !defined(VOCALDYN_HAVE_AVX2)
namespace detail {
template <>
const KernelTable<float>* avx2_kernels<float>() {
    return nullptr;
}
template <>
const KernelTable<double>* avx2_kernels<double>() {
    return nullptr;
}
}  // namespace detail
#endif

}  // namespace vocaldyn::simd
