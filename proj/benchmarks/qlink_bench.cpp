#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "qlink/apt.hpp"
#include "qlink/experiments.hpp"
#include "qlink/quantum.hpp"
#include "qlink/source.hpp"
#include "qlink/timing.hpp"

namespace {

void BM_TeleportProject(benchmark::State& state) {
    const auto chi = qlink::quantum::PureState::single(0.6, {0.0, 0.8});
    for (auto _ : state) {
        for (auto k : qlink::quantum::kAllBellIndices) benchmark::DoNotOptimize(qlink::quantum::teleport_project(chi, k));
    }
}
BENCHMARK(BM_TeleportProject);

void BM_TeleportThrough(benchmark::State& state) {
    const auto rho = qlink::source::bell_diagonal_from_visibilities(0.91, 0.90).density();
    const auto chi = qlink::quantum::polarization_state(qlink::quantum::Polarization::Plus);
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            qlink::experiments::teleport_through(chi, rho, 0.6, qlink::quantum::BellIndex::PhiPlus));
    }
}
BENCHMARK(BM_TeleportThrough);

void BM_FidelitySurface(benchmark::State& state) {
    const auto rates = qlink::source::local_rates(qlink::source::SourceParams{0.1, 0.236, 76e6, 1, 1}, 6.5e5);
    qlink::experiments::SurfaceGrid grid;
    grid.loss_points = grid.dark_points = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(qlink::experiments::fidelity_surface(rates, grid, {26.3}, 1.0));
    }
}
BENCHMARK(BM_FidelitySurface)->Arg(50)->Arg(200);

void BM_NoiseTags(benchmark::State& state) {
    qlink::timing::DetectorParams d;
    d.dark_rate = 200.0;
    for (auto _ : state) benchmark::DoNotOptimize(qlink::timing::generate_noise_tags(d, 600.0, 1));
}
BENCHMARK(BM_NoiseTags)->Unit(benchmark::kMillisecond);

void BM_MatchCoincidences(benchmark::State& state) {
    qlink::timing::DetectorParams d;
    d.dark_rate = static_cast<double>(state.range(0));
    const auto a = qlink::timing::generate_noise_tags(d, 1.0, 1);
    const auto b = qlink::timing::generate_noise_tags(d, 1.0, 2);
    for (auto _ : state) benchmark::DoNotOptimize(qlink::timing::match_coincidences(a, b, {2.0}, 0));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(a.size() + b.size()));
}
BENCHMARK(BM_MatchCoincidences)->Arg(100'000)->Arg(1'000'000);

void BM_GaussianFit(benchmark::State& state) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g(0.0, 394.0);
    std::vector<qlink::timing::Picoseconds> samples(100'000);
    for (auto& s : samples) s = static_cast<qlink::timing::Picoseconds>(std::floor(g(rng) / 100.0) * 100.0);
    for (auto _ : state) benchmark::DoNotOptimize(qlink::timing::fit_gaussian_histogram(samples));
}
BENCHMARK(BM_GaussianFit)->Unit(benchmark::kMillisecond);

void BM_TrackingLoop(benchmark::State& state) {
    qlink::apt::LoopStage coarse{"coarse", 400, 5, 15000, {}, 10, true};
    qlink::apt::LoopStage fine{"fine", 20000, 1, 1000, {}, 200, true};
    const std::vector<qlink::apt::LoopStage> stages{qlink::apt::autotune(coarse), qlink::apt::autotune(fine)};
    qlink::apt::DisturbanceSpec d;
    d.turbulence_rms_urad = 20.0;
    d.turbulence_knee_hz = 5.0;
    for (auto _ : state) benchmark::DoNotOptimize(qlink::apt::simulate_loop(stages, d, 1.0, 25e-6, 1));
}
BENCHMARK(BM_TrackingLoop)->Unit(benchmark::kMillisecond);

void BM_Chsh(benchmark::State& state) {
    qlink::experiments::ChshSetup c;
    c.source = {0.1, 0.269, 76e6, 0.9, 0.9};
    c.state = qlink::source::bell_diagonal_from_visibilities(0.9, 0.9);
    c.alice_loss_db = c.bob_loss_db = 30.0;
    c.alice.dark_rate = c.bob.dark_rate = 200.0;
    c.duration_s = 100.0;
    qlink::experiments::default_chsh_angles(c);
    for (auto _ : state) benchmark::DoNotOptimize(qlink::experiments::run_chsh(c));
}
BENCHMARK(BM_Chsh)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
