#include <benchmark/benchmark.h>

#include <string>

#include "cavio/analysis.hpp"
#include "cavio/fit.hpp"
#include "cavio/io.hpp"
#include "cavio/scattering.hpp"
#include "cavio/sweep.hpp"

namespace {

cavio::SystemModel fixture(const char* name) {
    return cavio::load_model(std::string(CAVIO_DATA_DIR) + "/models/" + name);
}

void BM_Evaluate(benchmark::State& state) {
    const cavio::ScatteringEngine eng(fixture("row_m10.00_pos1.json"), cavio::FieldPoint(0.4));
    double f = 11.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(eng.evaluate(f));
        f = f < 12.0 ? f + 1e-4 : 11.0;
    }
}
BENCHMARK(BM_Evaluate);

void BM_Sweep(benchmark::State& state) {
    const auto model = fixture("row_m10.00_pos1.json");
    const auto grid = cavio::Grid::linear(11.0, 12.0, 401, 0.38, 0.42, 41);
    const cavio::SweepOptions opt{static_cast<unsigned>(state.range(0))};
    for (auto _ : state) benchmark::DoNotOptimize(cavio::run_sweep(model, grid, opt));
    state.SetItemsProcessed(state.iterations() * 401 * 41);
}
BENCHMARK(BM_Sweep)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_TransmissionZeros(benchmark::State& state) {
    const auto model = fixture("row_m10.00_pos1.json");
    for (auto _ : state) benchmark::DoNotOptimize(cavio::transmission_zeros(model, cavio::FieldPoint(0.4)));
}
BENCHMARK(BM_TransmissionZeros);

void BM_Excursion(benchmark::State& state) {
    const auto model = fixture("row_m6.00_pos3.json");
    for (auto _ : state) benchmark::DoNotOptimize(cavio::antiresonance_excursion(model));
}
BENCHMARK(BM_Excursion)->Unit(benchmark::kMillisecond);

void BM_Fit(benchmark::State& state) {
    const auto truth = fixture("empty_cavity.json");
    const auto start = fixture("empty_cavity_start.json");
    const auto f = cavio::linspace(3.3, 15.7, 2481);
    const cavio::FitProblem pr{start, cavio::FieldPoint(0.0), f, cavio::transmission_db(truth, cavio::FieldPoint(0.0), f),
                               {}, cavio::dissipation_parameters(start)};
    for (auto _ : state) benchmark::DoNotOptimize(cavio::levenberg_marquardt(pr));
}
BENCHMARK(BM_Fit)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
