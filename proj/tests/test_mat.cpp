#include <doctest.h>

#include <cmath>

#include "ftlab/mat.hpp"
#include "ftlab/rng.hpp"

using ftlab::KahanSum;
using ftlab::Mat;
using ftlab::Rng;

namespace {

Mat<double> random_mat(int r, int c, Rng& rng) {
    Mat<double> m(r, c);
    for (auto& v : m.a) v = rng.normal();
    return m;
}

// same k-order accumulation as the kernels
Mat<double> naive_nn(const Mat<double>& A, const Mat<double>& B) {
    Mat<double> C(A.rows, B.cols);
    for (int i = 0; i < A.rows; ++i)
        for (int t = 0; t < A.cols; ++t)
            for (int j = 0; j < B.cols; ++j) C.at(i, j) += A.at(i, t) * B.at(t, j);
    return C;
}

}  // namespace

TEST_CASE("gemm_nn matches hand computation") {
    Mat<double> A(2, 3), B(3, 2);
    double av[] = {1, 2, 3, 4, 5, 6};
    double bv[] = {7, 8, 9, 10, 11, 12};
    std::copy(av, av + 6, A.a.begin());
    std::copy(bv, bv + 6, B.a.begin());
    Mat<double> C(2, 2);
    ftlab::gemm_nn(A, B, C);
    CHECK(C.at(0, 0) == 58);
    CHECK(C.at(0, 1) == 64);
    CHECK(C.at(1, 0) == 139);
    CHECK(C.at(1, 1) == 154);

    // accumulate adds on top
    ftlab::gemm_nn(A, B, C, true);
    CHECK(C.at(0, 0) == 116);
}

TEST_CASE("gemm_nn equals naive loop bit-for-bit") {
    auto rng = Rng::substream(1, "gemm");
    auto A = random_mat(5, 7, rng);
    auto B = random_mat(7, 4, rng);
    Mat<double> C(5, 4);
    ftlab::gemm_nn(A, B, C);
    auto R = naive_nn(A, B);
    for (std::size_t i = 0; i < C.a.size(); ++i) CHECK(C.a[i] == R.a[i]);
}

TEST_CASE("gemm_nt and gemm_tn agree with transposed naive products") {
    auto rng = Rng::substream(2, "gemm");
    auto A = random_mat(5, 7, rng);
    auto B = random_mat(4, 7, rng);  // B^T is 7x4
    Mat<double> C(5, 4);
    ftlab::gemm_nt(A, B, C);
    Mat<double> Bt(7, 4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 7; ++j) Bt.at(j, i) = B.at(i, j);
    auto R = naive_nn(A, Bt);
    for (std::size_t i = 0; i < C.a.size(); ++i)
        CHECK(C.a[i] == doctest::Approx(R.a[i]).epsilon(1e-12));

    auto A2 = random_mat(7, 5, rng);  // A2^T is 5x7
    auto B2 = random_mat(7, 4, rng);
    Mat<double> C2(5, 4);
    ftlab::gemm_tn(A2, B2, C2);
    Mat<double> A2t(5, 7);
    for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 5; ++j) A2t.at(j, i) = A2.at(i, j);
    auto R2 = naive_nn(A2t, B2);
    for (std::size_t i = 0; i < C2.a.size(); ++i)
        CHECK(C2.a[i] == doctest::Approx(R2.a[i]).epsilon(1e-12));
}

TEST_CASE("results are bit-identical across thread counts") {
    auto rng = Rng::substream(3, "gemm");
    auto A = random_mat(33, 17, rng);
    auto B = random_mat(17, 29, rng);

    ftlab::set_num_threads(1);
    Mat<double> C1(33, 29);
    ftlab::gemm_nn(A, B, C1);
    Mat<double> D1(33, 17);
    ftlab::gemm_nn(C1, random_mat(29, 17, rng), D1);

    ftlab::set_num_threads(4);
    Mat<double> C4(33, 29);
    ftlab::gemm_nn(A, B, C4);
    CHECK(C1.a == C4.a);

    Mat<double> Cnt1(33, 33), Cnt4(33, 33);
    ftlab::set_num_threads(1);
    ftlab::gemm_nt(C1, C1, Cnt1);
    ftlab::set_num_threads(4);
    ftlab::gemm_nt(C1, C1, Cnt4);
    CHECK(Cnt1.a == Cnt4.a);
    ftlab::set_num_threads(1);
}

TEST_CASE("dot and axpy") {
    double x[] = {1, 2, 3};
    double y[] = {4, 5, 6};
    CHECK(ftlab::dot(x, y, 3) == 32.0);
    ftlab::axpy(2.0, x, y, 3);
    CHECK(y[0] == 6);
    CHECK(y[1] == 9);
    CHECK(y[2] == 12);
}

TEST_CASE("kahan accumulator survives catastrophic cancellation") {
    KahanSum k;
    k.add(1e16);
    k.add(1.0);
    k.add(-1e16);
    CHECK(k.value() == 1.0);

    // plain double loses the 1.0 entirely
    double plain = 1e16;
    plain += 1.0;
    plain += -1e16;
    CHECK(plain == 0.0);
}
