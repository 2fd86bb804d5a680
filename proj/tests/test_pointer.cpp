#include "doctest.h"

#include <cmath>

#include "cslab/pointer.hpp"
#include "test_helpers.hpp"

using namespace cslab;
using namespace cslab::testing;

namespace {

CscoSpec csco_m(int m, int n_momenta = 1) {
    CscoSpec c;
    c.degeneracy = m;
    c.n_momenta = n_momenta;
    c.n_isolating = 1;
    return c;
}

// Normalized state with smoothly omega-dependent hermitian PSD blocks.
StateFunctional smooth_block_state(std::mt19937_64& rng, const SpectrumGrid& g, int m) {
    StateFunctional s = zero_state(g, csco_m(m));
    const Cmat base = random_psd(rng, m);
    const Cmat drift = random_hermitian(rng, m);
    double norm = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const double x = g.nodes[k] / g.omega_max;
        Cmat blk = base + 0.3 * std::sin(2.0 * x) * drift;
        Eigen::SelfAdjointEigenSolver<Cmat> es(blk);
        if (es.eigenvalues().minCoeff() < 0.05)
            blk += (0.05 - es.eigenvalues().minCoeff()) * Cmat::Identity(m, m);
        blk *= std::exp(-g.nodes[k]);
        s.cc_diag[k] = blk;
        norm += g.weights[k] * blk.trace().real();
    }
    for (auto& blk : s.cc_diag) blk /= norm;
    return s;
}

}  // namespace

TEST_CASE("already-diagonal blocks give permutation-trivial unitaries") {
    const auto g = build_grid(QuadScheme::GaussLegendre, 16, 4.0);
    StateFunctional s = zero_state(g, csco_m(2));
    for (std::size_t k = 0; k < g.size(); ++k) {
        s.cc_diag[k](0, 0) = 0.2;
        s.cc_diag[k](1, 1) = 0.7;
    }
    const PointerBasis basis = diagonalize_sections(s);
    CHECK(basis.unitarity_residual() < 1e-12);
    for (std::size_t k = 0; k < g.size(); ++k) {
        CHECK(basis.eigen_nodes[k](0) == doctest::Approx(0.7));
        CHECK(basis.eigen_nodes[k](1) == doctest::Approx(0.2));
        // descending at every node, columns are unit vectors
        CHECK(std::abs(std::abs(basis.u_nodes[k](1, 0)) - 1.0) < 1e-12);
    }
}

TEST_CASE("constant 2x2 block matches the closed-form eigenvalues") {
    const auto g = build_grid(QuadScheme::GaussLegendre, 12, 3.0);
    StateFunctional s = zero_state(g, csco_m(2));
    for (std::size_t k = 0; k < g.size(); ++k) {
        s.cc_diag[k](0, 0) = 0.6;
        s.cc_diag[k](0, 1) = 0.2;
        s.cc_diag[k](1, 0) = 0.2;
        s.cc_diag[k](1, 1) = 0.4;
    }
    const PointerBasis basis = diagonalize_sections(s);
    const double disc = std::sqrt(0.05);  // closed-form 2x2 eigensolve oracle
    for (std::size_t k = 0; k < g.size(); ++k) {
        CHECK(basis.eigen_nodes[k](0) == doctest::Approx(0.5 + disc).epsilon(1e-12));
        CHECK(basis.eigen_nodes[k](1) == doctest::Approx(0.5 - disc).epsilon(1e-12));
        CHECK(basis.continuity_overlap[k] > 0.999999);
    }
}

TEST_CASE("random PSD families: reconstruction and residual contracts") {
    std::mt19937_64 rng(2024);
    const auto g = build_grid(QuadScheme::GaussLegendre, 32, 8.0);
    for (int trial = 0; trial < 10; ++trial) {
        const int m = 2 + trial % 3;
        const StateFunctional s = smooth_block_state(rng, g, m);
        const PointerBasis basis = diagonalize_sections(s);
        CHECK(basis.unitarity_residual() < 1e-10);
        CHECK(basis.offdiag_residual(s.cc_diag) < 1e-10);
        for (std::size_t k = 0; k < g.size(); ++k) {
            // U diag U^dag reconstructs the block
            const Cmat recon = basis.u_nodes[k] *
                               basis.eigen_nodes[k].cast<complexd>().asDiagonal() *
                               basis.u_nodes[k].adjoint();
            CHECK((recon - s.cc_diag[k]).cwiseAbs().maxCoeff() < 1e-10);
            CHECK(basis.eigen_nodes[k].minCoeff() > -1e-12);
            // eigenvalue sum equals the block trace, node by node
            CHECK(basis.eigen_nodes[k].sum() ==
                  doctest::Approx(s.cc_diag[k].trace().real()).epsilon(1e-12));
            if (k > 0) CHECK(basis.continuity_overlap[k] > 0.9);
        }
    }
}

TEST_CASE("pointer observables: labels, commutation, moment table") {
    std::mt19937_64 rng(99);
    const auto g = build_grid(QuadScheme::GaussLegendre, 24, 6.0);
    const int m = 2;
    const StateFunctional star = smooth_block_state(rng, g, m);
    const PointerBasis basis = diagonalize_sections(star);
    const auto ps = pointer_observables(basis, g, star.csco);
    REQUIRE(ps.size() == 1);
    const Observable& p1 = ps[0];
    CHECK(validate(p1).hermiticity_residual < 1e-12);

    // diagonal in the pointer basis with eigenvalues {0, 1} at every node
    for (std::size_t k = 0; k < g.size(); ++k) {
        const Cmat d = basis.u_nodes[k].adjoint() * p1.cc_diag[k] * basis.u_nodes[k];
        CHECK(std::abs(d(0, 0).real() - 0.0) < 1e-10);
        CHECK(std::abs(d(1, 1).real() - 1.0) < 1e-10);
        CHECK(std::abs(d(0, 1)) < 1e-10);
    }

    // commutes with the hamiltonian's diagonal kernel
    Observable h = zero_observable(g, star.csco);
    for (std::size_t k = 0; k < g.size(); ++k)
        h.cc_diag[k] = g.nodes[k] * Cmat::Identity(m, m);
    const Observable c1 = compose(p1, h);
    const Observable c2 = compose(h, p1);
    CHECK(max_kernel_deviation(c1, c2) < 1e-10);

    // moment identities: (rho*|P^n) = sum_r r^n rho_r-weight for n = 0,1,2
    std::vector<double> weights(m, 0.0);
    for (std::size_t k = 0; k < g.size(); ++k)
        for (int r = 0; r < m; ++r)
            weights[r] += g.weights[k] * basis.eigen_nodes[k](r);
    // pointer labels are 0..m-1 assigned to the matched columns
    Observable pn = make_identity(g, star.csco);
    for (int n = 0; n <= 2; ++n) {
        double expected = 0.0;
        for (int r = 0; r < m; ++r) expected += std::pow(r, n) * weights[r];
        CHECK(pair(star, pn) == doctest::Approx(expected).epsilon(1e-9));
        pn = compose(pn, p1);
    }
}

TEST_CASE("multiple pointer observables commute pairwise") {
    std::mt19937_64 rng(61);
    const auto g = build_grid(QuadScheme::GaussLegendre, 16, 4.0);
    const StateFunctional star = [&] {
        StateFunctional s = smooth_block_state(rng, g, 4);
        s.csco.n_momenta = 2;
        s.csco.n_isolating = 2;
        return s;
    }();
    const PointerBasis basis = diagonalize_sections(star);
    const auto ps = pointer_observables(basis, g, star.csco);
    REQUIRE(ps.size() == 2);
    // mixed-radix labels: both observables nontrivial for M = 4 = 2 x 2
    const Observable c12 = compose(ps[0], ps[1]);
    const Observable c21 = compose(ps[1], ps[0]);
    CHECK(max_kernel_deviation(c12, c21) < 1e-10);

    Observable h = zero_observable(g, star.csco);
    for (std::size_t k = 0; k < g.size(); ++k)
        h.cc_diag[k] = g.nodes[k] * Cmat::Identity(4, 4);
    for (const auto& p : ps)
        CHECK(max_kernel_deviation(compose(p, h), compose(h, p)) < 1e-10);
}

TEST_CASE("commutator mean residual vanishes on the asymptotic state") {
    std::mt19937_64 rng(7);
    const auto g = build_grid(QuadScheme::GaussLegendre, 24, 6.0);
    const StateFunctional star = smooth_block_state(rng, g, 2);
    const PointerBasis basis = diagonalize_sections(star);
    const auto ps = pointer_observables(basis, g, star.csco);

    std::vector<Observable> testset;
    testset.push_back(make_identity(g, star.csco));
    testset.push_back(ps[0]);
    for (int i = 0; i < 20; ++i) testset.push_back(random_observable(rng, g, star.csco));
    CHECK(commutator_mean_residual(star, ps[0], testset) < 1e-8);
}

TEST_CASE("basis invariance of the pairing under conjugation") {
    std::mt19937_64 rng(55);
    const auto g = build_grid(QuadScheme::GaussLegendre, 20, 5.0);
    const StateFunctional s = smooth_block_state(rng, g, 2);
    const Observable o = random_observable(rng, g, s.csco, false);
    const PointerBasis basis = diagonalize_sections(s);

    StateFunctional s_rot = s;
    Observable o_rot = o;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const Cmat& u = basis.u_nodes[k];
        s_rot.cc_diag[k] = u.adjoint() * s.cc_diag[k] * u;
        o_rot.cc_diag[k] = u.adjoint() * o.cc_diag[k] * u;
    }
    CHECK(pair(s_rot, o_rot) == doctest::Approx(pair(s, o)).epsilon(1e-10));
}

TEST_CASE("trace away non-isolating labels") {
    std::mt19937_64 rng(123);
    const auto g = build_grid(QuadScheme::GaussLegendre, 20, 5.0);

    SUBCASE("m_m = 1 is the identity reduction") {
        const StateFunctional s = smooth_block_state(rng, g, 3);
        const StateFunctional red = trace_away_nonisolating(s, 3, 1);
        for (std::size_t k = 0; k < g.size(); ++k)
            CHECK((red.cc_diag[k] - s.cc_diag[k]).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("product state reduces to its r factor") {
        const int mr = 2, mm = 2;
        CscoSpec c = csco_m(mr * mm, 2);
        StateFunctional s = zero_state(g, c);
        std::mt19937_64 rng2(5);
        const Cmat sigma = random_psd(rng2, mr);
        Cmat tau = random_psd(rng2, mm);
        tau /= tau.trace().real();  // unit-trace m factor
        double norm = 0.0;
        std::vector<double> profile(g.size());
        for (std::size_t k = 0; k < g.size(); ++k) {
            profile[k] = std::exp(-g.nodes[k]);
            norm += g.weights[k] * profile[k] * sigma.trace().real();
        }
        for (std::size_t k = 0; k < g.size(); ++k) {
            Cmat kron(mr * mm, mr * mm);
            for (int r = 0; r < mr; ++r)
                for (int rp = 0; rp < mr; ++rp)
                    for (int a = 0; a < mm; ++a)
                        for (int b = 0; b < mm; ++b)
                            kron(r * mm + a, rp * mm + b) = sigma(r, rp) * tau(a, b);
            s.cc_diag[k] = profile[k] / norm * kron;
        }
        const StateFunctional red = trace_away_nonisolating(s, mr, mm);
        CHECK(std::abs(state_norm(red) - 1.0) < 1e-12);
        for (std::size_t k = 0; k < g.size(); ++k) {
            const Cmat expected = profile[k] / norm * sigma;
            CHECK((red.cc_diag[k] - expected).cwiseAbs().maxCoeff() < 1e-12);
        }
    }

    SUBCASE("restricted observables pair equally, embedded or reduced") {
        const int mr = 2, mm = 3;
        CscoSpec c = csco_m(mr * mm, 2);
        StateFunctional s = zero_state(g, c);
        std::mt19937_64 rng3(31);
        double norm = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k) {
            s.cc_diag[k] = std::exp(-g.nodes[k]) * random_psd(rng3, mr * mm);
            norm += g.weights[k] * s.cc_diag[k].trace().real();
        }
        for (auto& blk : s.cc_diag) blk /= norm;

        // O(w)_{rr'} delta_{mm'} embedded into the composite space
        const StateFunctional red = trace_away_nonisolating(s, mr, mm);
        Observable obs_red = zero_observable(g, red.csco);
        Observable obs_big = zero_observable(g, c);
        for (std::size_t k = 0; k < g.size(); ++k) {
            const Cmat o = random_hermitian(rng3, mr);
            obs_red.cc_diag[k] = o;
            for (int r = 0; r < mr; ++r)
                for (int rp = 0; rp < mr; ++rp)
                    for (int a = 0; a < mm; ++a)
                        obs_big.cc_diag[k](r * mm + a, rp * mm + a) = o(r, rp);
        }
        CHECK(pair(red, obs_red) == doctest::Approx(pair(s, obs_big)).epsilon(1e-12));
    }

    SUBCASE("non-factorizable split is rejected") {
        const StateFunctional s = smooth_block_state(rng, g, 3);
        CHECK_THROWS_AS((void)trace_away_nonisolating(s, 2, 2), InvalidArgument);
    }
}

TEST_CASE("degenerate eigenvalues are flagged and resolved deterministically") {
    const auto g = build_grid(QuadScheme::GaussLegendre, 8, 2.0);
    StateFunctional s = zero_state(g, csco_m(2));
    for (auto& blk : s.cc_diag) blk = 0.5 * Cmat::Identity(2, 2);
    const PointerBasis b1 = diagonalize_sections(s);
    const PointerBasis b2 = diagonalize_sections(s);
    for (std::size_t k = 0; k < g.size(); ++k) {
        CHECK(b1.degenerate[k]);
        CHECK((b1.u_nodes[k] - b2.u_nodes[k]).cwiseAbs().maxCoeff() == 0.0);
        CHECK(b1.eigen_nodes[k](0) == 0.5);
        CHECK(b1.eigen_nodes[k](1) == 0.5);
    }
    CHECK(b1.unitarity_residual() < 1e-12);
}

TEST_CASE("non-hermitian diagonal block is rejected") {
    const auto g = build_grid(QuadScheme::GaussLegendre, 8, 2.0);
    StateFunctional s = zero_state(g, csco_m(2));
    for (auto& blk : s.cc_diag) blk = Cmat::Identity(2, 2);
    s.cc_diag[3](0, 1) = complexd(0.5, 0.5);  // no conjugate partner
    CHECK_THROWS_AS((void)diagonalize_sections(s), InvalidState);
}
