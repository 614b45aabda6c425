#include <benchmark/benchmark.h>

#include "ddci/cascade.hpp"
#include "ddci/fourier.hpp"
#include "ddci/layers.hpp"
#include "ddci/metrics.hpp"
#include "ddci/phantom.hpp"

namespace {

using namespace ddci;

RealTensor random_tensor(std::vector<std::size_t> shape, Rng& rng) {
    RealTensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1, 1);
    return t;
}

void BM_Conv2dForward(benchmark::State& state) {
    Rng rng(1);
    const std::size_t ch = static_cast<std::size_t>(state.range(0));
    RealTensor x = random_tensor({ch, 64, 64}, rng);
    ConvParams p{random_tensor({ch, ch, 3, 3}, rng), random_tensor({ch}, rng)};
    for (auto _ : state) {
        RealTensor y = conv2d_forward(x, p, nullptr);
        benchmark::DoNotOptimize(y.data());
    }
}
BENCHMARK(BM_Conv2dForward)->Arg(8)->Arg(32);

void BM_Conv2dBackward(benchmark::State& state) {
    Rng rng(2);
    const std::size_t ch = static_cast<std::size_t>(state.range(0));
    RealTensor x = random_tensor({ch, 64, 64}, rng);
    ConvParams p{random_tensor({ch, ch, 3, 3}, rng), random_tensor({ch}, rng)};
    RealTensor gy = random_tensor({ch, 64, 64}, rng);
    for (auto _ : state) {
        Tape tape;
        RealTensor y = conv2d_forward(x, p, &tape);
        ConvGrads g = conv2d_backward(gy, tape);
        benchmark::DoNotOptimize(g.w.data());
    }
}
BENCHMARK(BM_Conv2dBackward)->Arg(32);

void BM_Fft2c(benchmark::State& state) {
    Rng rng(3);
    ComplexImage x(4, 64, 64);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = cplx(rng.uniform(-1, 1), rng.uniform(-1, 1));
    for (auto _ : state) {
        ComplexImage k = fft2c(x);
        benchmark::DoNotOptimize(k.data());
    }
}
BENCHMARK(BM_Fft2c);

void BM_SubnetForward(benchmark::State& state) {
    Rng rng(4);
    SubnetConfig cfg{8, 32, 3, 8, 2};
    SubnetParams p = init_subnet_params(cfg, rng);
    RealTensor x = random_tensor({8, 64, 64}, rng);
    for (auto _ : state) {
        RealTensor y = subnet_forward(x, p, cfg, nullptr);
        benchmark::DoNotOptimize(y.data());
    }
}
BENCHMARK(BM_SubnetForward);

void BM_CascadeStep(benchmark::State& state) {
    Rng rng(5);
    auto cases = generate_dataset(1, 64, 64, 4, 0.15, Rng(11));
    SamplingMask mask = make_mask(64, 4.0, 0.08, MaskPattern::random_lines, Rng(12));
    UndersampledSample sample = apply_mask(cases[0].k_full, mask);
    CascadeConfig cfg;
    cfg.subnet.in_channels = 8;
    ModelParams params = init_model(cfg, rng);
    for (auto _ : state) {
        CascadeTrace trace = cascade_forward(sample, params, cfg);
        ModelParams grads = cascade_backward(trace, sample, cfg);
        benchmark::DoNotOptimize(grads.inets.data());
    }
}
BENCHMARK(BM_CascadeStep);

void BM_Ssim(benchmark::State& state) {
    Rng rng(6);
    RealTensor a = random_tensor({64, 64}, rng);
    RealTensor b = random_tensor({64, 64}, rng);
    for (auto _ : state) {
        double v = ssim(a, b);
        benchmark::DoNotOptimize(v);
    }
}
BENCHMARK(BM_Ssim);

}  // namespace

BENCHMARK_MAIN();
