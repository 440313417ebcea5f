#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>

#include "cyl/floer.hpp"
#include "cyl/scales.hpp"

using namespace cyl;

namespace {

const CylinderGrid& grid() {
    static const CylinderGrid g = make_grid(40.0, 3201, 32);
    return g;
}

const Field& field() {
    static const Field f = sample_field(grid(), 1, [](double s, double t, int) {
        return std::exp(-0.1 * s * s) * std::polar(1.0 + 0.3 * s, 2 * std::numbers::pi * t);
    });
    return f;
}

const FieldOperator& op() {
    static const FieldOperator L = linearize_cr(TwistedModel(1.0, 0.3), 0.5 * field());
    return L;
}

void BM_diff_s(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(diff_s(field()));
}
void BM_diff_s_serial(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(diff_s_serial(field()));
}
void BM_diff_t(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(diff_t(field()));
}
void BM_diff_t_serial(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(diff_t_serial(field()));
}
void BM_weighted_norm(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(weighted_norm(field(), 2, 0.2));
}
void BM_weighted_norm_serial(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(weighted_norm_serial(field(), 2, 0.2));
}
void BM_apply(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(op().apply({field()}));
}
void BM_apply_serial(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(op().apply_serial({field()}));
}

}  // namespace

BENCHMARK(BM_diff_s)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_diff_s_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_diff_t)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_diff_t_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_weighted_norm)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_weighted_norm_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_apply)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_apply_serial)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
