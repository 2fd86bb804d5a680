#pragma once

#include <functional>
#include <random>

#include "cslab/algebra.hpp"

namespace cslab::testing {

inline Cmat random_matrix(std::mt19937_64& rng, int m) {
    std::normal_distribution<double> n(0.0, 1.0);
    Cmat a(m, m);
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < m; ++c) a(r, c) = complexd(n(rng), n(rng));
    return a;
}

inline Cmat random_hermitian(std::mt19937_64& rng, int m) {
    const Cmat a = random_matrix(rng, m);
    return 0.5 * (a + a.adjoint().eval());
}

inline Cmat random_psd(std::mt19937_64& rng, int m) {
    const Cmat a = random_matrix(rng, m);
    return a * a.adjoint() + 0.05 * Cmat::Identity(m, m);
}

/// Smooth scalar node profile c + sum of a few gaussians in omega.
inline Eigen::VectorXcd smooth_profile(std::mt19937_64& rng, const SpectrumGrid& g) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double c1 = u(rng), c2 = u(rng);
    const double mu1 = g.omega_max * u(rng), mu2 = g.omega_max * u(rng);
    const double s1 = 0.2 + 0.5 * g.omega_max * u(rng), s2 = 0.2 + 0.5 * g.omega_max * u(rng);
    Eigen::VectorXcd f(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
        const double w = g.nodes[k];
        f(k) = complexd(c1 * std::exp(-0.5 * std::pow((w - mu1) / s1, 2)),
                        c2 * std::exp(-0.5 * std::pow((w - mu2) / s2, 2)));
    }
    return f;
}

/// Separable Hermitian kernel S + S^dag built from random smooth profiles.
inline KernelBlock random_separable_hermitian(std::mt19937_64& rng, const SpectrumGrid& g,
                                              int m, int n_terms = 2) {
    KernelBlock block;
    for (int t = 0; t < n_terms; ++t) {
        SeparableTerm fwd, adj;
        const Eigen::VectorXcd pu = smooth_profile(rng, g), pv = smooth_profile(rng, g);
        const Cmat cu = random_matrix(rng, m), cv = random_matrix(rng, m);
        fwd.u.resize(g.size());
        fwd.v.resize(g.size());
        adj.u.resize(g.size());
        adj.v.resize(g.size());
        for (std::size_t k = 0; k < g.size(); ++k) {
            fwd.u[k] = pu(k) * cu;
            fwd.v[k] = pv(k) * cv;
            adj.u[k] = std::conj(pv(k)) * cv.adjoint();
            adj.v[k] = std::conj(pu(k)) * cu.adjoint();
        }
        block.terms.push_back(std::move(fwd));
        block.terms.push_back(std::move(adj));
    }
    return block;
}

inline Observable random_observable(std::mt19937_64& rng, const SpectrumGrid& g,
                                    const CscoSpec& c, bool with_kernel = true) {
    Observable o = zero_observable(g, c);
    if (c.has_bound()) o.bb = random_hermitian(rng, c.degeneracy);
    for (std::size_t k = 0; k < g.size(); ++k) o.cc_diag[k] = random_hermitian(rng, c.degeneracy);
    if (with_kernel) o.full = random_separable_hermitian(rng, g, c.degeneracy);
    return o;
}

/// Random valid state: hermitian PSD diagonal blocks normalized to one, plus
/// an optional hermitian off-diagonal kernel.
inline StateFunctional random_state(std::mt19937_64& rng, const SpectrumGrid& g,
                                    const CscoSpec& c, bool with_kernel = true) {
    StateFunctional s = zero_state(g, c);
    double norm = 0.0;
    if (c.has_bound()) {
        s.bb = random_psd(rng, c.degeneracy);
        norm += s.bb.trace().real();
    }
    for (std::size_t k = 0; k < g.size(); ++k) {
        s.cc_diag[k] = random_psd(rng, c.degeneracy);
        norm += g.weights[k] * s.cc_diag[k].trace().real();
    }
    if (c.has_bound()) s.bb /= norm;
    for (auto& b : s.cc_diag) b /= norm;
    if (with_kernel) {
        s.full = random_separable_hermitian(rng, g, c.degeneracy, 1);
        if (c.has_bound()) {
            const Eigen::VectorXcd p = smooth_profile(rng, g);
            const Cmat cl = random_matrix(rng, c.degeneracy);
            for (std::size_t k = 0; k < g.size(); ++k) {
                s.cross_lo[k] = p(k) * cl;
                s.cross_ol[k] = std::conj(p(k)) * cl.adjoint();
            }
        }
    }
    return s;
}

/// Brute-force pairing with everything densified; the independent oracle for
/// the optimized pairing/composition paths.
inline complexd pair_oracle(const StateFunctional& rho, const Observable& obs) {
    const std::size_t n = rho.n_nodes();
    const int md = rho.m_dim();
    const auto& w = rho.grid.weights;
    complexd acc = 0.0;
    if (rho.csco.has_bound())
        for (int m = 0; m < md; ++m)
            for (int mp = 0; mp < md; ++mp) acc += std::conj(rho.bb(m, mp)) * obs.bb(m, mp);
    for (std::size_t k = 0; k < n; ++k)
        for (int m = 0; m < md; ++m)
            for (int mp = 0; mp < md; ++mp) {
                acc += w[k] * std::conj(rho.cc_diag[k](m, mp)) * obs.cc_diag[k](m, mp);
                if (rho.csco.has_bound()) {
                    acc += w[k] * std::conj(rho.cross_lo[k](m, mp)) * obs.cross_lo[k](m, mp);
                    acc += w[k] * std::conj(rho.cross_ol[k](m, mp)) * obs.cross_ol[k](m, mp);
                }
            }
    if (!rho.full.is_zero() && !obs.full.is_zero()) {
        const KernelBlock rd = densify(rho.full, n, md);
        const KernelBlock od = densify(obs.full, n, md);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                for (int b = 0; b < md * md; ++b)
                    acc += w[i] * w[j] * std::conj(rd.planes[b](i, j)) * od.planes[b](i, j);
    }
    return acc;
}

/// Brute-force dense composition oracle (triple loop over node indices).
inline Observable compose_oracle(const Observable& a, const Observable& b) {
    const std::size_t n = a.n_nodes();
    const int md = a.m_dim();
    const auto& w = a.grid.weights;
    Observable c = zero_observable(a.grid, a.csco);
    c.bb = a.bb * b.bb;
    for (std::size_t k = 0; k < n; ++k) c.cc_diag[k] = a.cc_diag[k] * b.cc_diag[k];
    const KernelBlock ad = densify(a.full, n, md);
    const KernelBlock bd = densify(b.full, n, md);
    const bool a_has = !a.full.is_zero(), b_has = !b.full.is_zero();
    c.full.planes.assign(md * md, Cmat::Zero(n, n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            Cmat acc = Cmat::Zero(md, md);
            if (a_has && b_has)
                for (std::size_t k = 0; k < n; ++k)
                    acc += w[k] * ad.at(i, k, md) * bd.at(k, j, md);
            if (b_has) acc += a.cc_diag[i] * bd.at(i, j, md);
            if (a_has) acc += ad.at(i, j, md) * b.cc_diag[j];
            for (int m = 0; m < md; ++m)
                for (int mp = 0; mp < md; ++mp) c.full.planes[m * md + mp](i, j) = acc(m, mp);
        }
    return c;
}

inline double max_kernel_deviation(const Observable& a, const Observable& b) {
    const std::size_t n = a.n_nodes();
    const int md = a.m_dim();
    double r = 0.0;
    const KernelBlock ad = densify(a.full, n, md);
    const KernelBlock bd = densify(b.full, n, md);
    for (int p = 0; p < md * md; ++p)
        r = std::max(r, (ad.planes[p] - bd.planes[p]).cwiseAbs().maxCoeff());
    for (std::size_t k = 0; k < n; ++k)
        r = std::max(r, (a.cc_diag[k] - b.cc_diag[k]).cwiseAbs().maxCoeff());
    r = std::max(r, (a.bb - b.bb).cwiseAbs().maxCoeff());
    return r;
}

}  // namespace cslab::testing
