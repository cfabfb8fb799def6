#include "ftlab/mat.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ftlab {

namespace {
int g_threads = 1;
}

void set_num_threads(int n) {
    if (n < 1) n = 1;
    g_threads = n;
#ifdef _OPENMP
    omp_set_num_threads(n);
#endif
}

int num_threads() { return g_threads; }

template <class T>
void gemm_nn(const Mat<T>& A, const Mat<T>& B, Mat<T>& C, bool accumulate) {
    assert(A.cols == B.rows);
    const int m = A.rows, k = A.cols, n = B.cols;
    if (!accumulate) C.ensure(m, n);
    assert(C.rows == m && C.cols == n);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        T* c = C.row(i);
        if (!accumulate) {
            for (int j = 0; j < n; ++j) c[j] = T(0);
        }
        const T* arow = A.row(i);
        for (int t = 0; t < k; ++t) {
            const T av = arow[t];
            const T* b = B.row(t);
#pragma omp simd
            for (int j = 0; j < n; ++j) {
                c[j] += av * b[j];
            }
        }
    }
}

template <class T>
void gemm_nt(const Mat<T>& A, const Mat<T>& B, Mat<T>& C, bool accumulate) {
    assert(A.cols == B.cols);
    const int m = A.rows, k = A.cols, n = B.rows;
    if (!accumulate) C.ensure(m, n);
    assert(C.rows == m && C.cols == n);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        const T* arow = A.row(i);
        T* c = C.row(i);
        for (int j = 0; j < n; ++j) {
            const T* brow = B.row(j);
            T s = T(0);
#pragma omp simd reduction(+ : s)
            for (int t = 0; t < k; ++t) {
                s += arow[t] * brow[t];
            }
            c[j] = accumulate ? c[j] + s : s;
        }
    }
}

template <class T>
void gemm_tn(const Mat<T>& A, const Mat<T>& B, Mat<T>& C, bool accumulate) {
    assert(A.rows == B.rows);
    const int k = A.rows, m = A.cols, n = B.cols;
    if (!accumulate) C.ensure(m, n);
    assert(C.rows == m && C.cols == n);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        T* c = C.row(i);
        if (!accumulate) {
            for (int j = 0; j < n; ++j) c[j] = T(0);
        }
        for (int t = 0; t < k; ++t) {
            const T av = A.at(t, i);
            const T* b = B.row(t);
#pragma omp simd
            for (int j = 0; j < n; ++j) {
                c[j] += av * b[j];
            }
        }
    }
}

template <class T>
T dot(const T* x, const T* y, int n) {
    T s = T(0);
#pragma omp simd reduction(+ : s)
    for (int i = 0; i < n; ++i) {
        s += x[i] * y[i];
    }
    return s;
}

template <class T>
void axpy(T alpha, const T* x, T* y, int n) {
#pragma omp simd
    for (int i = 0; i < n; ++i) {
        y[i] += alpha * x[i];
    }
}

template void gemm_nn<float>(const Mat<float>&, const Mat<float>&, Mat<float>&, bool);
template void gemm_nn<double>(const Mat<double>&, const Mat<double>&, Mat<double>&, bool);
template void gemm_nt<float>(const Mat<float>&, const Mat<float>&, Mat<float>&, bool);
template void gemm_nt<double>(const Mat<double>&, const Mat<double>&, Mat<double>&, bool);
template void gemm_tn<float>(const Mat<float>&, const Mat<float>&, Mat<float>&, bool);
template void gemm_tn<double>(const Mat<double>&, const Mat<double>&, Mat<double>&, bool);
template float dot<float>(const float*, const float*, int);
template double dot<double>(const double*, const double*, int);
template void axpy<float>(float, const float*, float*, int);
template void axpy<double>(double, const double*, double*, int);

}  // namespace ftlab
