#include <benchmark/benchmark.h>

#include "ftlab/mat.hpp"
#include "ftlab/rng.hpp"

using ftlab::Mat;
using ftlab::Rng;

namespace {

Mat<float> random_mat(int r, int c, std::uint64_t seed) {
    auto rng = Rng::substream(seed, "bench");
    Mat<float> m(r, c);
    for (auto& v : m.a) v = static_cast<float>(rng.normal());
    return m;
}

void bm_gemm_nn(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    auto A = random_mat(n, n, 1);
    auto B = random_mat(n, n, 2);
    Mat<float> C(n, n);
    for (auto _ : state) {
        ftlab::gemm_nn(A, B, C);
        benchmark::DoNotOptimize(C.data());
    }
    state.SetItemsProcessed(state.iterations() * 2ll * n * n * n);
}

void bm_gemm_nt(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    auto A = random_mat(n, n, 3);
    auto B = random_mat(n, n, 4);
    Mat<float> C(n, n);
    for (auto _ : state) {
        ftlab::gemm_nt(A, B, C);
        benchmark::DoNotOptimize(C.data());
    }
    state.SetItemsProcessed(state.iterations() * 2ll * n * n * n);
}

}  // namespace

BENCHMARK(bm_gemm_nn)->Arg(128)->Arg(512);
BENCHMARK(bm_gemm_nt)->Arg(128)->Arg(512);

BENCHMARK_MAIN();
