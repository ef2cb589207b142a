#include "vocaldyn/simd/kernels.hpp"

#include <cmath>

namespace vocaldyn::simd::detail {
namespace {

template <class T>
T dot_ref(const T* a, const T* b, std::size_t n) {
    T acc = 0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

template <class T>
void axpy_ref(T alpha, const T* x, T* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <class T>
void gemm_nn_ref(ConstMatrixRef<T> a, ConstMatrixRef<T> b, MatrixRef<T> c) {
    for (std::size_t i = 0; i < a.rows; ++i) {
        T* crow = c.row(i);
        const T* arow = a.row(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const T aik = arow[k];
            if (aik == T(0)) continue;
            const T* brow = b.row(k);
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
}

template <class T>
void gemm_nt_ref(ConstMatrixRef<T> a, ConstMatrixRef<T> b, MatrixRef<T> c) {
    for (std::size_t i = 0; i < a.rows; ++i) {
        T* crow = c.row(i);
        for (std::size_t j = 0; j < b.rows; ++j) crow[j] += dot_ref(a.row(i), b.row(j), a.cols);
    }
}

template <class T>
void gemm_tn_ref(ConstMatrixRef<T> a, ConstMatrixRef<T> b, MatrixRef<T> c) {
    for (std::size_t k = 0; k < a.rows; ++k) {
        const T* arow = a.row(k);
        const T* brow = b.row(k);
        for (std::size_t i = 0; i < a.cols; ++i) {
            const T aki = arow[i];
            if (aki == T(0)) continue;
            T* crow = c.row(i);
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aki * brow[j];
        }
    }
}

template <class T>
void exp_ref(T* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] = std::exp(x[i]);
}

template <class T>
const KernelTable<T> kTable{&dot_ref<T>,     &axpy_ref<T>,    &gemm_nn_ref<T>,
                            &gemm_nt_ref<T>, &gemm_tn_ref<T>, &exp_ref<T>};

}  // namespace

template <>
const KernelTable<float>& scalar_kernels<float>() {
    return kTable<float>;
}
template <>
const KernelTable<double>& scalar_kernels<double>() {
    return kTable<double>;
}

}  // namespace vocaldyn::simd::detail
