#pragma once

// Dense arithmetic kernels with a scalar reference implementation and an
// AVX2/FMA variant. The variant is picked once at startup from CPU features
// and can be pinned with VOCALDYN_ISA=scalar|avx2 or set_active_isa().
//
// All matrix arguments are row-major views; `stride` is the distance in
// elements between consecutive rows.

#include <cstddef>
#include <span>
#include <string_view>

namespace vocaldyn::simd {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);
bool isa_supported(Isa isa);
Isa best_supported_isa();
Isa active_isa();
/// Throws InvalidArgument when the CPU lacks the requested instruction set.
void set_active_isa(Isa isa);

template <class T>
struct MatrixRef {
    T* data;
    std::size_t rows;
    std::size_t cols;
    std::size_t stride;
    T* row(std::size_t r) const { return data + r * stride; }
};

template <class T>
struct ConstMatrixRef {
    const T* data;
    std::size_t rows;
    std::size_t cols;
    std::size_t stride;
    ConstMatrixRef(const T* d, std::size_t r, std::size_t c, std::size_t s)
        : data(d), rows(r), cols(c), stride(s) {}
    ConstMatrixRef(MatrixRef<T> m) : data(m.data), rows(m.rows), cols(m.cols), stride(m.stride) {}
    const T* row(std::size_t r) const { return data + r * stride; }
};

template <class T>
struct KernelTable {
    T (*dot)(const T* a, const T* b, std::size_t n);
    void (*axpy)(T alpha, const T* x, T* y, std::size_t n);
    /// c += a * b
    void (*gemm_nn)(ConstMatrixRef<T> a, ConstMatrixRef<T> b, MatrixRef<T> c);
    /// c += a * b^T
    void (*gemm_nt)(ConstMatrixRef<T> a, ConstMatrixRef<T> b, MatrixRef<T> c);
    /// c += a^T * b
    void (*gemm_tn)(ConstMatrixRef<T> a, ConstMatrixRef<T> b, MatrixRef<T> c);
    /// x[i] = exp(x[i])
    void (*exp_inplace)(T* x, std::size_t n);
};

template <class T>
const KernelTable<T>& kernels_for(Isa isa);

template <class T>
const KernelTable<T>& kernels() {
    return kernels_for<T>(active_isa());
}

// Convenience wrappers over the active table. Shapes are checked and
// mismatches raise ShapeError.
template <class T>
T dot(std::span<const T> a, std::span<const T> b);
template <class T>
void axpy(T alpha, std::span<const T> x, std::span<T> y);
template <class T>
void gemm_nn(ConstMatrixRef<T> a, ConstMatrixRef<T> b, MatrixRef<T> c);
template <class T>
void gemm_nt(ConstMatrixRef<T> a, ConstMatrixRef<T> b, MatrixRef<T> c);
template <class T>
void gemm_tn(ConstMatrixRef<T> a, ConstMatrixRef<T> b, MatrixRef<T> c);
template <class T>
void exp_inplace(std::span<T> x);

namespace detail {
// Per-ISA tables, defined in separate translation units so that only the
// AVX2 unit is compiled with -mavx2 -mfma.
template <class T>
const KernelTable<T>& scalar_kernels();
template <class T>
const KernelTable<T>* avx2_kernels();  // nullptr when not compiled in
}  // namespace detail

}  // namespace vocaldyn::simd
