#include "cslab/pointer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cslab {

namespace {

constexpr double kDegenerateGap = 1e-10;

void fix_phases(Cmat& u) {
    for (int c = 0; c < u.cols(); ++c) {
        int imax = 0;
        double amax = 0.0;
        for (int r = 0; r < u.rows(); ++r) {
            const double a = std::abs(u(r, c));
            if (a > amax) {
                amax = a;
                imax = r;
            }
        }
        if (amax > 0.0) u.col(c) *= std::conj(u(imax, c)) / amax;
    }
}

bool lex_less(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
    for (int i = 0; i < a.size(); ++i) {
        if (a(i).real() != b(i).real()) return a(i).real() < b(i).real();
        if (a(i).imag() != b(i).imag()) return a(i).imag() < b(i).imag();
    }
    return false;
}

struct Section {
    Cmat u;
    Eigen::VectorXd ev;
    bool degenerate = false;
};

Section solve_section(const Cmat& block) {
    if ((block - block.adjoint().eval()).cwiseAbs().maxCoeff() > 1e-9)
        throw InvalidState("diagonalize_sections: diagonal block is not Hermitian");
    Eigen::SelfAdjointEigenSolver<Cmat> es(block);
    Section s;
    const int m = static_cast<int>(block.rows());
    s.u.resize(m, m);
    s.ev.resize(m);
    // Eigen returns ascending order; flip to descending.
    for (int c = 0; c < m; ++c) {
        s.u.col(c) = es.eigenvectors().col(m - 1 - c);
        s.ev(c) = es.eigenvalues()(m - 1 - c);
    }
    for (int c = 0; c + 1 < m; ++c)
        if (std::abs(s.ev(c) - s.ev(c + 1)) < kDegenerateGap) s.degenerate = true;
    // Deterministic tie-break: order degenerate groups lexicographically.
    if (s.degenerate) {
        int c = 0;
        while (c < m) {
            int e = c + 1;
            while (e < m && std::abs(s.ev(e) - s.ev(c)) < kDegenerateGap) ++e;
            if (e - c > 1) {
                std::vector<int> idx(e - c);
                std::iota(idx.begin(), idx.end(), c);
                std::sort(idx.begin(), idx.end(), [&](int a, int b) {
                    return lex_less(s.u.col(a), s.u.col(b));
                });
                Cmat tmp(m, e - c);
                for (int t = 0; t < e - c; ++t) tmp.col(t) = s.u.col(idx[t]);
                for (int t = 0; t < e - c; ++t) s.u.col(c + t) = tmp.col(t);
            }
            c = e;
        }
    }
    fix_phases(s.u);
    return s;
}

// Greedy maximal-overlap assignment of current columns to previous ones.
std::vector<int> match_columns(const Cmat& u_prev, const Cmat& u_cur, double& score) {
    const int m = static_cast<int>(u_prev.cols());
    const Cmat ov = u_prev.adjoint() * u_cur;
    std::vector<int> assign(m, -1);
    std::vector<bool> row_used(m, false), col_used(m, false);
    score = 1.0;
    for (int pick = 0; pick < m; ++pick) {
        int br = -1, bc = -1;
        double best = -1.0;
        for (int r = 0; r < m; ++r) {
            if (row_used[r]) continue;
            for (int c = 0; c < m; ++c) {
                if (col_used[c]) continue;
                const double a = std::abs(ov(r, c));
                if (a > best) {
                    best = a;
                    br = r;
                    bc = c;
                }
            }
        }
        assign[br] = bc;
        row_used[br] = true;
        col_used[bc] = true;
        score = std::min(score, best);
    }
    return assign;
}

}  // namespace

double PointerBasis::unitarity_residual() const {
    double r = 0.0;
    auto check = [&](const Cmat& u) {
        const Cmat d = u.adjoint() * u - Cmat::Identity(u.rows(), u.cols());
        r = std::max(r, d.cwiseAbs().maxCoeff());
    };
    if (u_bound) check(*u_bound);
    for (const auto& u : u_nodes) check(u);
    return r;
}

double PointerBasis::offdiag_residual(const std::vector<Cmat>& blocks) const {
    double r = 0.0;
    for (std::size_t k = 0; k < u_nodes.size() && k < blocks.size(); ++k) {
        Cmat d = u_nodes[k].adjoint() * blocks[k] * u_nodes[k];
        d.diagonal().setZero();
        r = std::max(r, d.cwiseAbs().maxCoeff());
    }
    return r;
}

PointerBasis diagonalize_sections(const StateFunctional& rho) {
    PointerBasis basis;
    const std::size_t n = rho.n_nodes();
    const int m = rho.m_dim();
    basis.u_nodes.reserve(n);
    basis.eigen_nodes.reserve(n);
    basis.continuity_overlap.reserve(n);
    basis.degenerate.reserve(n);

    if (rho.csco.has_bound()) {
        Section s = solve_section(rho.bb);
        basis.u_bound = s.u;
        basis.eigen_bound = s.ev;
    }

    for (std::size_t k = 0; k < n; ++k) {
        Section s = solve_section(rho.cc_diag[k]);
        if (k == 0) {
            basis.continuity_overlap.push_back(1.0);
        } else {
            double score = 0.0;
            const auto assign = match_columns(basis.u_nodes.back(), s.u, score);
            Cmat u(m, m);
            Eigen::VectorXd ev(m);
            for (int r = 0; r < m; ++r) {
                u.col(r) = s.u.col(assign[r]);
                ev(r) = s.ev(assign[r]);
            }
            s.u = std::move(u);
            s.ev = std::move(ev);
            basis.continuity_overlap.push_back(score);
        }
        basis.u_nodes.push_back(std::move(s.u));
        basis.eigen_nodes.push_back(std::move(s.ev));
        basis.degenerate.push_back(s.degenerate);
    }
    return basis;
}

std::vector<Observable> pointer_observables(const PointerBasis& basis,
                                            const SpectrumGrid& grid, const CscoSpec& csco) {
    const int m = csco.degeneracy;
    const auto radices = csco.label_radices();
    std::vector<Observable> out;
    out.reserve(radices.size());
    for (std::size_t i = 0; i < radices.size(); ++i) {
        Observable p;
        static_cast<FiveBlocks&>(p) = zero_blocks(grid, csco);
        Eigen::VectorXd labels(m);
        for (int r = 0; r < m; ++r) labels(r) = csco.label_digits(r)[i];
        const Cmat d = labels.cast<complexd>().asDiagonal();
        if (csco.has_bound() && basis.u_bound) p.bb = (*basis.u_bound) * d * basis.u_bound->adjoint();
        for (std::size_t k = 0; k < grid.size(); ++k)
            p.cc_diag[k] = basis.u_nodes[k] * d * basis.u_nodes[k].adjoint();
        out.push_back(std::move(p));
    }
    return out;
}

double commutator_mean_residual(const StateFunctional& rho_star, const Observable& p,
                                const std::vector<Observable>& testset) {
    double worst = 0.0;
    for (const auto& o : testset) {
        const Observable po = compose(p, o);
        const Observable op = compose(o, p);
        const Observable comm = lin_comb(1.0, po, -1.0, op);
        worst = std::max(worst, std::abs(pair_complex(rho_star, comm)));
    }
    return worst;
}

StateFunctional trace_away_nonisolating(const StateFunctional& rho, int m_r, int m_m) {
    const int m = rho.m_dim();
    if (m_r < 1 || m_m < 1 || m_r * m_m != m)
        throw InvalidArgument("trace_away_nonisolating: degeneracy does not factorize as requested");

    CscoSpec reduced_csco = rho.csco;
    reduced_csco.degeneracy = m_r;
    reduced_csco.n_momenta = std::max(0, rho.csco.n_isolating - 1);
    reduced_csco.n_isolating = std::min(reduced_csco.n_momenta + 1, rho.csco.n_isolating);

    StateFunctional red;
    static_cast<FiveBlocks&>(red) = zero_blocks(rho.grid, reduced_csco);

    auto reduce_block = [&](const Cmat& big) {
        Cmat small = Cmat::Zero(m_r, m_r);
        for (int r = 0; r < m_r; ++r)
            for (int rp = 0; rp < m_r; ++rp)
                for (int mm = 0; mm < m_m; ++mm)
                    small(r, rp) += big(r * m_m + mm, rp * m_m + mm);
        return small;
    };

    if (rho.csco.has_bound()) red.bb = reduce_block(rho.bb);
    const std::size_t n = rho.n_nodes();
    for (std::size_t k = 0; k < n; ++k) {
        red.cc_diag[k] = reduce_block(rho.cc_diag[k]);
        red.cross_lo[k] = reduce_block(rho.cross_lo[k]);
        red.cross_ol[k] = reduce_block(rho.cross_ol[k]);
    }
    if (!rho.full.is_zero()) {
        const KernelBlock dense = densify(rho.full, n, m);
        red.full.planes.assign(m_r * m_r, Cmat::Zero(n, n));
        for (int r = 0; r < m_r; ++r)
            for (int rp = 0; rp < m_r; ++rp)
                for (int mm = 0; mm < m_m; ++mm)
                    red.full.planes[r * m_r + rp] +=
                        dense.planes[(r * m_m + mm) * m + (rp * m_m + mm)];
    }
    return red;
}

}  // namespace cslab
