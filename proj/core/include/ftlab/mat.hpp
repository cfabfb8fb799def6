#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace ftlab {

// Row-major dense matrix. Everything the trainers do is expressed through
// the three gemm shapes below plus elementwise loops, all parallelized over
// disjoint output rows with a fixed inner summation order. No cross-thread
// reduction exists anywhere, so results are bit-identical for any thread
// count.
template <class T>
struct Mat {
    int rows{0};
    int cols{0};
    std::vector<T> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * static_cast<std::size_t>(c)) {}

    T* row(int i) { return a.data() + static_cast<std::size_t>(i) * cols; }
    const T* row(int i) const { return a.data() + static_cast<std::size_t>(i) * cols; }

    T& at(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
    T at(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

    std::size_t size() const { return a.size(); }
    T* data() { return a.data(); }
    const T* data() const { return a.data(); }

    void zero() { a.assign(a.size(), T(0)); }
    void resize(int r, int c) {
        rows = r;
        cols = c;
        a.assign(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), T(0));
    }
    // reallocate only on shape change; contents otherwise left as-is
    void ensure(int r, int c) {
        if (r != rows || c != cols) resize(r, c);
    }
};

void set_num_threads(int n);
int num_threads();

// C = A * B (+C if accumulate). A: m×k, B: k×n.
template <class T>
void gemm_nn(const Mat<T>& A, const Mat<T>& B, Mat<T>& C, bool accumulate = false);

// C = A * B^T (+C if accumulate). A: m×k, B: n×k.
template <class T>
void gemm_nt(const Mat<T>& A, const Mat<T>& B, Mat<T>& C, bool accumulate = false);

// C = A^T * B (+C if accumulate). A: k×m, B: k×n, C: m×n.
template <class T>
void gemm_tn(const Mat<T>& A, const Mat<T>& B, Mat<T>& C, bool accumulate = false);

template <class T>
T dot(const T* x, const T* y, int n);

template <class T>
void axpy(T alpha, const T* x, T* y, int n);

// Neumaier-compensated accumulator: loss statistics stay near one ulp of
// the exact sum no matter how many terms go in.
struct KahanSum {
    double sum{0.0};
    double comp{0.0};

    void add(double v) {
        double t = sum + v;
        if (std::abs(sum) >= std::abs(v)) {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    double value() const { return sum + comp; }
};

}  // namespace ftlab
