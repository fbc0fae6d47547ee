// OpenMP kernels against the serial reference at the shapes the 32x32 model uses.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "blockscramble/kernels.hpp"
#include "blockscramble/model.hpp"

using namespace blockscramble;

namespace {

std::vector<double> reals(std::size_t n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

// ELE adaptation: 64 blocks, 96 inputs, 48 outputs, one weight set per block.
constexpr std::size_t kBlocks = 64, kLen = 96, kDepth = 48;

void BM_SubnetForwardKernel(benchmark::State& st) {
    const auto x = reals(kBlocks * kLen, 1), w = reals(kBlocks * kDepth * kLen, 2), b = reals(kBlocks * kDepth, 3);
    std::vector<double> out(kBlocks * kDepth);
    for (auto _ : st) {
        kernels::subnet_forward(x, kBlocks, kLen, w, b, kBlocks, kDepth, out);
        benchmark::DoNotOptimize(out.data());
    }
}

void BM_SubnetForwardReference(benchmark::State& st) {
    const auto x = reals(kBlocks * kLen, 1), w = reals(kBlocks * kDepth * kLen, 2), b = reals(kBlocks * kDepth, 3);
    std::vector<double> out(kBlocks * kDepth);
    for (auto _ : st) {
        reference::subnet_forward(x, kBlocks, kLen, w, b, kBlocks, kDepth, out);
        benchmark::DoNotOptimize(out.data());
    }
}

void BM_PermApplyKernel(benchmark::State& st) {
    const auto u = reals(kBlocks * kBlocks, 4), f = reals(kBlocks * kDepth, 5);
    std::vector<double> out(kBlocks * kDepth);
    for (auto _ : st) {
        kernels::perm_apply(u, kBlocks, f, kDepth, out);
        benchmark::DoNotOptimize(out.data());
    }
}

void BM_PermApplyReference(benchmark::State& st) {
    const auto u = reals(kBlocks * kBlocks, 4), f = reals(kBlocks * kDepth, 5);
    std::vector<double> out(kBlocks * kDepth);
    for (auto _ : st) {
        reference::perm_apply(u, kBlocks, f, kDepth, out);
        benchmark::DoNotOptimize(out.data());
    }
}

// First head convolution: 32x32x3 -> 16 channels; second: 16x16x16 -> 32.
void BM_ConvKernel(benchmark::State& st) {
    const auto h = static_cast<std::size_t>(st.range(0)), c = static_cast<std::size_t>(st.range(1)),
               o = static_cast<std::size_t>(st.range(2));
    const auto in = reals(h * h * c, 6), w = reals(o * 9 * c, 7), b = reals(o, 8), g = reals(h * h * o, 9);
    std::vector<double> cols(h * h * 9 * c), out(h * h * o), gw(w.size()), gb(o), gi(in.size());
    for (auto _ : st) {
        kernels::im2col3x3(in, h, h, c, cols);
        kernels::conv3x3_forward(cols, h, h, c, w, b, o, out);
        kernels::conv3x3_backward(cols, h, h, c, w, o, g, gw, gb, gi);
        benchmark::DoNotOptimize(gi.data());
    }
}

void BM_ConvReference(benchmark::State& st) {
    const auto h = static_cast<std::size_t>(st.range(0)), c = static_cast<std::size_t>(st.range(1)),
               o = static_cast<std::size_t>(st.range(2));
    const auto in = reals(h * h * c, 6), w = reals(o * 9 * c, 7), b = reals(o, 8), g = reals(h * h * o, 9);
    std::vector<double> out(h * h * o), gw(w.size()), gb(o), gi(in.size());
    for (auto _ : st) {
        reference::conv3x3_forward(in, h, h, c, w, b, o, out);
        reference::conv3x3_backward(in, h, h, c, w, o, g, gw, gb, gi);
        benchmark::DoNotOptimize(gi.data());
    }
}

void BM_BatchStep(benchmark::State& st) {
    const Model model = Model::initialize(ModelConfig{}, 1);
    std::mt19937_64 rng(10);
    std::vector<LabeledExample> data;
    for (int i = 0; i < 32; ++i) {
        Image8 img(32, 32, 3);
        for (auto& v : img.data()) v = static_cast<std::uint8_t>(rng());
        data.push_back({std::move(img), static_cast<std::size_t>(i % 10)});
    }
    std::vector<const LabeledExample*> batch;
    for (const auto& e : data) batch.push_back(&e);
    BatchEngine engine(model);
    Model grads = model.zeros_like();
    for (auto _ : st) benchmark::DoNotOptimize(engine.run(model, batch, 0.001, 0.1, &grads).loss.total);
    st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(batch.size()));
}

} // namespace

BENCHMARK(BM_SubnetForwardKernel);
BENCHMARK(BM_SubnetForwardReference);
BENCHMARK(BM_PermApplyKernel);
BENCHMARK(BM_PermApplyReference);
BENCHMARK(BM_ConvKernel)->Args({32, 3, 16})->Args({16, 16, 32});
BENCHMARK(BM_ConvReference)->Args({32, 3, 16})->Args({16, 16, 32});
BENCHMARK(BM_BatchStep)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
