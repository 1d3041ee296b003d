#include <benchmark/benchmark.h>

#include "specstab/diagnostics.hpp"
#include "specstab/linalg.hpp"
#include "specstab/net.hpp"
#include "specstab/ntk.hpp"

using namespace specstab;

static void BM_Svd(benchmark::State& state) {
    Rng rng(1);
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix a = rng.gaussian_matrix(n, n);
    for (auto _ : state)
        benchmark::DoNotOptimize(singular_values(a));
}
BENCHMARK(BM_Svd)->Arg(16)->Arg(64)->Arg(128);

static void BM_SymEig(benchmark::State& state) {
    Rng rng(2);
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix a = gram_rows(rng.gaussian_matrix(n, n));
    for (auto _ : state)
        benchmark::DoNotOptimize(sym_eig(a));
}
BENCHMARK(BM_SymEig)->Arg(16)->Arg(64)->Arg(128);

static void BM_TopEigenvalueLanczos(benchmark::State& state) {
    Rng rng(3);
    const Matrix a = gram_rows(rng.gaussian_matrix(400, 400));
    for (auto _ : state)
        benchmark::DoNotOptimize(top_eigenvalue(a));
}
BENCHMARK(BM_TopEigenvalueLanczos);

static Mlp bench_net(std::size_t width) {
    Rng rng(4);
    return init_mlp({{width, width, width, 10}}, 1.0, rng);
}

static void BM_InputJacobianReverse(benchmark::State& state) {
    const auto w = static_cast<std::size_t>(state.range(0));
    const Mlp net = bench_net(w);
    Rng rng(5);
    const Vector x = rng.gaussian_vector(w);
    for (auto _ : state)
        benchmark::DoNotOptimize(input_jacobian(net, x));
}
BENCHMARK(BM_InputJacobianReverse)->Arg(32)->Arg(128);

static void BM_InputJacobianProduct(benchmark::State& state) {
    const auto w = static_cast<std::size_t>(state.range(0));
    const Mlp net = bench_net(w);
    Rng rng(5);
    const ForwardTrace t = forward(net, rng.gaussian_vector(w));
    for (auto _ : state)
        benchmark::DoNotOptimize(input_jacobian_product(net, t));
}
BENCHMARK(BM_InputJacobianProduct)->Arg(32)->Arg(128);

static void BM_Gram(benchmark::State& state) {
    const Mlp net = bench_net(16);
    Rng rng(6);
    std::vector<Vector> xs;
    for (std::int64_t i = 0; i < state.range(0); ++i)
        xs.push_back(rng.gaussian_vector(16));
    for (auto _ : state)
        benchmark::DoNotOptimize(gram(net, xs));
}
BENCHMARK(BM_Gram)->Arg(16)->Arg(64);

static void BM_LossHessian(benchmark::State& state) {
    Rng rng(7);
    const Mlp net = init_mlp({{8, 16, 3}}, 1.0, rng);
    const Vector x = rng.gaussian_vector(8);
    const Vector y{1, 0, 0};
    for (auto _ : state)
        benchmark::DoNotOptimize(loss_hessian(net, x, y, Loss::cross_entropy));
}
BENCHMARK(BM_LossHessian);
BENCHMARK_MAIN();
