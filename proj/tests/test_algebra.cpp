#include "doctest.h"

#include <cmath>

#include "cslab/algebra.hpp"
#include "test_helpers.hpp"

using namespace cslab;
using namespace cslab::testing;

namespace {

SpectrumGrid grid32() { return build_grid(QuadScheme::GaussLegendre, 32, 10.0); }

CscoSpec csco(int m, bool bound = false) {
    CscoSpec c;
    c.degeneracy = m;
    c.n_momenta = 1;
    c.n_isolating = 1;
    if (bound) c.bound_energy = -1.0;
    return c;
}

}  // namespace

TEST_CASE("identity satisfies its invariants and pairs to the norm") {
    const auto g = grid32();
    const auto c = csco(2, true);
    const Observable id = make_identity(g, c);
    CHECK(validate(id).hermiticity_residual == 0.0);

    std::mt19937_64 rng(11);
    const StateFunctional rho = random_state(rng, g, c);
    CHECK(std::abs(state_norm(rho) - 1.0) < 1e-12);
    CHECK(pair(rho, id) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(pair_complex(rho, id).imag()) < 1e-12);
}

TEST_CASE("compose with identity is exact") {
    const auto g = grid32();
    const auto c = csco(2);
    std::mt19937_64 rng(7);
    const Observable a = random_observable(rng, g, c);
    const Observable id = make_identity(g, c);
    const Observable ia = compose(id, a);
    const Observable ai = compose(a, id);
    CHECK(max_kernel_deviation(ia, a) < 1e-13);
    CHECK(max_kernel_deviation(ai, a) < 1e-13);
}

TEST_CASE("pairing matches the brute-force oracle, linear in both slots") {
    const auto g = grid32();
    const auto c = csco(2, true);
    std::mt19937_64 rng(23);
    const StateFunctional rho = random_state(rng, g, c);
    const Observable a = random_observable(rng, g, c);
    const Observable b = random_observable(rng, g, c);

    CHECK(std::abs(pair_complex(rho, a) - pair_oracle(rho, a)) < 1e-11);

    // linearity in the observable slot
    const Observable lc = lin_comb(1.75, a, complexd(0.0, -0.5), b);
    const complexd direct = pair_complex(rho, lc);
    const complexd sum =
        1.75 * pair_complex(rho, a) + complexd(0.0, -0.5) * pair_complex(rho, b);
    CHECK(std::abs(direct - sum) < 1e-12);

    // linearity in the state slot (real combination of two states)
    const StateFunctional rho2 = random_state(rng, g, c);
    StateFunctional mix = rho;
    mix.bb = 0.25 * rho.bb + 0.75 * rho2.bb;
    for (std::size_t k = 0; k < g.size(); ++k) {
        mix.cc_diag[k] = 0.25 * rho.cc_diag[k] + 0.75 * rho2.cc_diag[k];
        mix.cross_lo[k] = 0.25 * rho.cross_lo[k] + 0.75 * rho2.cross_lo[k];
        mix.cross_ol[k] = 0.25 * rho.cross_ol[k] + 0.75 * rho2.cross_ol[k];
    }
    mix.full.terms.clear();
    for (auto t : rho.full.terms) {
        for (auto& m : t.u) m *= 0.25;
        mix.full.terms.push_back(std::move(t));
    }
    for (auto t : rho2.full.terms) {
        for (auto& m : t.u) m *= 0.75;
        mix.full.terms.push_back(std::move(t));
    }
    CHECK(std::abs(pair_complex(mix, a) -
                   (0.25 * pair_complex(rho, a) + 0.75 * pair_complex(rho2, a))) < 1e-12);
}

TEST_CASE("hermitian pair values are real") {
    const auto g = grid32();
    const auto c = csco(3, true);
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const StateFunctional rho = random_state(rng, g, c);
        const Observable a = random_observable(rng, g, c);
        CHECK(hermiticity_residual(rho) < 1e-12);
        CHECK(hermiticity_residual(a) < 1e-12);
        CHECK(std::abs(pair_complex(rho, a).imag()) < 1e-10);
    }
}

TEST_CASE("block orthogonality: off-diagonal state vs diagonal observable") {
    const auto g = grid32();
    const auto c = csco(2, true);
    std::mt19937_64 rng(3);
    StateFunctional rho = zero_state(g, c);
    rho.full = random_separable_hermitian(rng, g, c.degeneracy);
    Observable obs = zero_observable(g, c);
    obs.bb = random_hermitian(rng, 2);
    for (auto& blk : obs.cc_diag) blk = random_hermitian(rng, 2);
    CHECK(std::abs(pair_complex(rho, obs)) == 0.0);
}

TEST_CASE("diagonal exponential state against the hamiltonian observable") {
    // rho(w) = e^{-w}/Z diagonal, O = H: mean is the unit-exponential mean.
    const auto g = build_grid(QuadScheme::GaussLegendre, 64, 30.0);
    const auto c = csco(1);
    StateFunctional rho = zero_state(g, c);
    double z = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) z += g.weights[k] * std::exp(-g.nodes[k]);
    for (std::size_t k = 0; k < g.size(); ++k)
        rho.cc_diag[k](0, 0) = std::exp(-g.nodes[k]) / z;
    Observable h = zero_observable(g, c);
    for (std::size_t k = 0; k < g.size(); ++k) h.cc_diag[k](0, 0) = g.nodes[k];
    CHECK(pair(rho, h) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("compose: separable path against the dense brute-force oracle") {
    const auto g = build_grid(QuadScheme::GaussLegendre, 24, 6.0);
    const auto c = csco(2);
    std::mt19937_64 rng(41);
    const Observable a = random_observable(rng, g, c);
    const Observable b = random_observable(rng, g, c);
    REQUIRE(!a.full.is_dense());

    const Observable fast = compose(a, b);
    const Observable oracle = compose_oracle(a, b);
    CHECK(max_kernel_deviation(fast, oracle) < 1e-10);
}

TEST_CASE("compose: rank-one kernels contract to the coupling integral") {
    const auto g = build_grid(QuadScheme::GaussLegendre, 48, 8.0);
    const auto c = csco(1);
    std::mt19937_64 rng(4);
    // A = u (x) v, B = x (x) y with scalar profiles
    const Eigen::VectorXcd u = smooth_profile(rng, g), v = smooth_profile(rng, g);
    const Eigen::VectorXcd x = smooth_profile(rng, g), y = smooth_profile(rng, g);
    Observable a = zero_observable(g, c), b = zero_observable(g, c);
    SeparableTerm ta, tb;
    ta.u.resize(g.size());
    ta.v.resize(g.size());
    tb.u.resize(g.size());
    tb.v.resize(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
        ta.u[k] = Cmat::Constant(1, 1, u(k));
        ta.v[k] = Cmat::Constant(1, 1, v(k));
        tb.u[k] = Cmat::Constant(1, 1, x(k));
        tb.v[k] = Cmat::Constant(1, 1, y(k));
    }
    a.full.terms.push_back(ta);
    b.full.terms.push_back(tb);

    complexd coupling = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) coupling += g.weights[k] * v(k) * x(k);

    const Observable prod = compose(a, b);
    REQUIRE(!prod.full.is_dense());
    const KernelBlock dense = densify(prod.full, g.size(), 1);
    for (std::size_t i = 0; i < g.size(); i += 7)
        for (std::size_t j = 0; j < g.size(); j += 5)
            CHECK(std::abs(dense.planes[0](i, j) - coupling * u(i) * y(j)) < 1e-10);
}

TEST_CASE("compose: dense and separable representations agree") {
    const auto g = build_grid(QuadScheme::GaussLegendre, 24, 6.0);
    const auto c = csco(2);
    std::mt19937_64 rng(19);
    const Observable a = random_observable(rng, g, c);
    const Observable b = random_observable(rng, g, c);

    Observable a_dense = a, b_dense = b;
    a_dense.full = densify(a.full, g.size(), 2);
    b_dense.full = densify(b.full, g.size(), 2);

    const Observable sep = compose(a, b);
    const Observable dense = compose(a_dense, b_dense);
    const Observable mixed = compose(a_dense, b);
    CHECK(max_kernel_deviation(sep, dense) < 1e-10);
    CHECK(max_kernel_deviation(sep, mixed) < 1e-10);
    CHECK(dense.full.is_dense());
    CHECK(!sep.full.is_dense());
}

TEST_CASE("compose is associative within quadrature error") {
    const auto g = build_grid(QuadScheme::GaussLegendre, 20, 5.0);
    const auto c = csco(2);
    std::mt19937_64 rng(13);
    const Observable a = random_observable(rng, g, c);
    const Observable b = random_observable(rng, g, c);
    const Observable d = random_observable(rng, g, c);
    const Observable left = compose(compose(a, b), d);
    const Observable right = compose(a, compose(b, d));
    CHECK(max_kernel_deviation(left, right) < 1e-9);
}

TEST_CASE("compose rejects grid mismatch and cross blocks") {
    const auto g = grid32();
    const auto g2 = build_grid(QuadScheme::GaussLegendre, 16, 10.0);
    const auto c = csco(2, true);
    std::mt19937_64 rng(2);
    const Observable a = random_observable(rng, g, c);
    const Observable b = random_observable(rng, g2, c);
    CHECK_THROWS_AS((void)compose(a, b), InvalidArgument);

    Observable with_cross = random_observable(rng, g, c);
    with_cross.cross_lo[0](0, 0) = 1.0;
    with_cross.cross_ol[0](0, 0) = 1.0;
    const Observable plain = random_observable(rng, g, c);
    CHECK_THROWS_AS((void)compose(with_cross, plain), InvalidArgument);
}

TEST_CASE("trace: identity value and thermal exponential") {
    const auto g = build_grid(QuadScheme::UniformTrapezoid, 4001, 30.0);
    CscoSpec c = csco(1, true);
    const Observable id = make_identity(g, c);
    // M + M * omega_max on a bound-inclusive uniform grid
    CHECK(op_trace(id).real() == doctest::Approx(1.0 + 30.0).epsilon(1e-12));

    CscoSpec c2 = csco(1);
    Observable boltz = zero_observable(g, c2);
    for (std::size_t k = 0; k < g.size(); ++k) boltz.cc_diag[k](0, 0) = std::exp(-g.nodes[k]);
    CHECK(op_trace(boltz).real() == doctest::Approx(1.0 - std::exp(-30.0)).epsilon(1e-5));
}

TEST_CASE("cyclic trace on random pairs") {
    const auto g = grid32();
    const auto c = csco(2);
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 8; ++trial) {
        const Observable a = random_observable(rng, g, c);
        const Observable b = random_observable(rng, g, c);
        const complexd ab = op_trace(compose(a, b));
        const complexd ba = op_trace(compose(b, a));
        CHECK(std::abs(ab - ba) < 1e-10);
    }
}

TEST_CASE("validate flags broken states") {
    const auto g = grid32();
    const auto c = csco(2);
    std::mt19937_64 rng(8);
    StateFunctional rho = random_state(rng, g, c);
    CHECK(validate(rho).ok());

    StateFunctional bad = rho;
    bad.cc_diag[4](1, 1) = -0.1;
    const auto rep = validate(bad);
    CHECK(rep.min_diagonal_entry < 0.0);
    CHECK(!rep.ok());

    StateFunctional scaled = rho;
    for (auto& blk : scaled.cc_diag) blk *= 2.0;
    CHECK(validate(scaled).normalization_deviation == doctest::Approx(1.0).epsilon(1e-9));
}
