#include <benchmark/benchmark.h>

#include <random>

#include "cslab/algebra.hpp"
#include "cslab/evolution.hpp"
#include "cslab/thermal.hpp"
#include "cslab/wigner.hpp"

using namespace cslab;

namespace {

CscoSpec scalar_csco() {
    CscoSpec c;
    c.degeneracy = 1;
    c.n_momenta = 1;
    c.n_isolating = 1;
    return c;
}

Observable gaussian_kernel(const SpectrumGrid& g, double center, double sigma) {
    Observable o = zero_observable(g, scalar_csco());
    SeparableTerm t;
    t.u.resize(g.size());
    t.v.resize(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
        const double gk = std::exp(-0.5 * std::pow((g.nodes[k] - center) / sigma, 2));
        t.u[k] = Cmat::Constant(1, 1, gk);
        t.v[k] = Cmat::Constant(1, 1, gk);
    }
    o.full.terms.push_back(std::move(t));
    return o;
}

}  // namespace

static void BM_BuildGrid(benchmark::State& state) {
    for (auto _ : state)
        benchmark::DoNotOptimize(
            build_grid(QuadScheme::GaussLegendre, static_cast<int>(state.range(0)), 30.0));
}
BENCHMARK(BM_BuildGrid)->Arg(64)->Arg(256);

static void BM_Integrate(benchmark::State& state) {
    const auto g = build_grid(QuadScheme::GaussLegendre, static_cast<int>(state.range(0)), 30.0);
    std::vector<double> f(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) f[k] = std::exp(-g.nodes[k]);
    for (auto _ : state) benchmark::DoNotOptimize(integrate(g, f));
}
BENCHMARK(BM_Integrate)->Arg(64)->Arg(1024);

static void BM_ComposeDense(benchmark::State& state) {
    const auto g = build_grid(QuadScheme::GaussLegendre, static_cast<int>(state.range(0)), 30.0);
    Observable a = gaussian_kernel(g, 5.0, 1.0);
    Observable b = gaussian_kernel(g, 6.0, 1.2);
    a.full = densify(a.full, g.size(), 1);
    b.full = densify(b.full, g.size(), 1);
    for (auto _ : state) benchmark::DoNotOptimize(compose(a, b));
}
BENCHMARK(BM_ComposeDense)->Arg(64)->Arg(128);

static void BM_MeanAt(benchmark::State& state) {
    const auto g = build_grid(QuadScheme::GaussLegendre, 128, 30.0);
    StateFunctional rho = zero_state(g, scalar_csco());
    double z = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) z += g.weights[k] * std::exp(-g.nodes[k]);
    for (std::size_t k = 0; k < g.size(); ++k) rho.cc_diag[k](0, 0) = std::exp(-g.nodes[k]) / z;
    rho.full = gaussian_kernel(g, 5.0, 1.0).full;
    const Observable obs = gaussian_kernel(g, 5.5, 1.1);
    double t = 0.0;
    for (auto _ : state) {
        t += 0.1;
        benchmark::DoNotOptimize(mean_at(rho, obs, t));
    }
}
BENCHMARK(BM_MeanAt);

static void BM_KmsStrip(benchmark::State& state) {
    const auto g = build_grid(QuadScheme::GaussLegendre, 64, 30.0);
    const Observable a = gaussian_kernel(g, 5.0, 1.0);
    const Observable b = gaussian_kernel(g, 6.0, 1.2);
    ThermalParams params;
    params.beta = 1.0;
    std::vector<double> times, gammas;
    for (int i = 0; i <= 16; ++i) times.push_back(-2.0 + 0.25 * i);
    for (int r = 1; r <= 7; ++r) gammas.push_back(r / 8.0);
    for (auto _ : state)
        benchmark::DoNotOptimize(kms_correlators(a, b, params, times, gammas));
}
BENCHMARK(BM_KmsStrip);

static void BM_WignerTransform(benchmark::State& state) {
    const double hbar = 1.0;
    const PhaseGrid g = PhaseGrid::conjugate(8.0, static_cast<int>(state.range(0)), hbar);
    PositionKernel rho;
    rho.smooth.resize(g.nq(), g.nq());
    for (int i = 0; i < g.nq(); ++i)
        for (int j = 0; j < g.nq(); ++j)
            rho.smooth(i, j) = std::pow(kPi * hbar, -0.5) *
                               std::exp(-(g.q_nodes[i] * g.q_nodes[i] +
                                          g.q_nodes[j] * g.q_nodes[j]) /
                                        (2 * hbar));
    for (auto _ : state) benchmark::DoNotOptimize(wigner_transform_state(rho, g));
}
BENCHMARK(BM_WignerTransform)->Arg(129)->Arg(257);

BENCHMARK_MAIN();
