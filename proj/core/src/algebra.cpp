#include "cslab/algebra.hpp"

#include <algorithm>
#include <cmath>

namespace cslab {

namespace {

double max_abs(const Cmat& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace

Cmat KernelBlock::at(std::size_t i, std::size_t j, int m_dim) const {
    Cmat out = Cmat::Zero(m_dim, m_dim);
    if (is_dense()) {
        for (int m = 0; m < m_dim; ++m)
            for (int mp = 0; mp < m_dim; ++mp) out(m, mp) = planes[m * m_dim + mp](i, j);
    } else {
        for (const auto& t : terms) out += t.u[i] * t.v[j];
    }
    return out;
}

KernelBlock densify(const KernelBlock& block, std::size_t n_nodes, int m_dim) {
    KernelBlock out;
    out.planes.assign(m_dim * m_dim, Cmat::Zero(n_nodes, n_nodes));
    if (block.is_dense()) {
        out.planes = block.planes;
        return out;
    }
    for (const auto& t : block.terms) {
        for (int m = 0; m < m_dim; ++m) {
            for (int mu = 0; mu < m_dim; ++mu) {
                Eigen::VectorXcd ucol(n_nodes), vrow(n_nodes);
                for (std::size_t i = 0; i < n_nodes; ++i) ucol(i) = t.u[i](m, mu);
                for (std::size_t j = 0; j < n_nodes; ++j) vrow(j) = t.v[j](mu, 0);
                // accumulate over the middle index mu for every target column
                for (int mp = 0; mp < m_dim; ++mp) {
                    for (std::size_t j = 0; j < n_nodes; ++j) vrow(j) = t.v[j](mu, mp);
                    out.planes[m * m_dim + mp].noalias() += ucol * vrow.transpose();
                }
            }
        }
    }
    return out;
}

bool FiveBlocks::has_cross() const {
    for (const auto& m : cross_lo)
        if (max_abs(m) != 0.0) return true;
    for (const auto& m : cross_ol)
        if (max_abs(m) != 0.0) return true;
    return false;
}

FiveBlocks zero_blocks(const SpectrumGrid& grid, const CscoSpec& csco) {
    csco.check();
    FiveBlocks b;
    b.grid = grid;
    b.csco = csco;
    const int m = csco.degeneracy;
    b.bb = Cmat::Zero(m, m);
    b.cc_diag.assign(grid.size(), Cmat::Zero(m, m));
    b.cross_lo.assign(grid.size(), Cmat::Zero(m, m));
    b.cross_ol.assign(grid.size(), Cmat::Zero(m, m));
    return b;
}

bool same_grid(const FiveBlocks& a, const FiveBlocks& b) {
    return a.grid.omega_max == b.grid.omega_max && a.grid.nodes == b.grid.nodes &&
           a.csco.degeneracy == b.csco.degeneracy &&
           a.csco.has_bound() == b.csco.has_bound();
}

Observable make_identity(const SpectrumGrid& grid, const CscoSpec& csco) {
    Observable o;
    static_cast<FiveBlocks&>(o) = zero_blocks(grid, csco);
    const int m = csco.degeneracy;
    if (csco.has_bound()) o.bb = Cmat::Identity(m, m);
    for (auto& d : o.cc_diag) d = Cmat::Identity(m, m);
    return o;
}

complexd pair_complex(const StateFunctional& rho, const Observable& obs) {
    if (!same_grid(rho, obs)) throw InvalidArgument("pair: grid/csco mismatch");
    const auto& w = rho.grid.weights;
    const std::size_t n = rho.n_nodes();
    const int md = rho.m_dim();

    complexd acc = 0.0;
    if (rho.csco.has_bound()) acc += (rho.bb.conjugate().cwiseProduct(obs.bb)).sum();
    for (std::size_t k = 0; k < n; ++k) {
        acc += w[k] * (rho.cc_diag[k].conjugate().cwiseProduct(obs.cc_diag[k])).sum();
        if (rho.csco.has_bound()) {
            acc += w[k] * (rho.cross_lo[k].conjugate().cwiseProduct(obs.cross_lo[k])).sum();
            acc += w[k] * (rho.cross_ol[k].conjugate().cwiseProduct(obs.cross_ol[k])).sum();
        }
    }

    if (!rho.full.is_zero() && !obs.full.is_zero()) {
        if (!rho.full.is_dense() && !obs.full.is_dense()) {
            // Both separable: the double integral factorizes term by term,
            //   sum_ij w_i w_j tr[(s.u_i s.v_j)^dag (t.u_i t.v_j)] = tr(Q P).
            for (const auto& s : rho.full.terms) {
                for (const auto& t : obs.full.terms) {
                    Cmat p = Cmat::Zero(md, md), q = Cmat::Zero(md, md);
                    for (std::size_t k = 0; k < n; ++k) {
                        p.noalias() += w[k] * (s.u[k].adjoint() * t.u[k]);
                        q.noalias() += w[k] * (t.v[k] * s.v[k].adjoint());
                    }
                    acc += (q * p).trace();
                }
            }
        } else {
            const Eigen::VectorXcd wv =
                Eigen::Map<const Eigen::VectorXd>(w.data(), n).cast<complexd>();
            const KernelBlock rd = densify(rho.full, n, md);
            const KernelBlock od = densify(obs.full, n, md);
            for (int b = 0; b < md * md; ++b) {
                const Cmat prod = rd.planes[b].conjugate().cwiseProduct(od.planes[b]);
                acc += (wv.transpose() * prod * wv).value();
            }
        }
    }
    return acc;
}

double pair(const StateFunctional& rho, const Observable& obs) {
    return pair_complex(rho, obs).real();
}

namespace {

// Dense kernel-kernel composition: C(m,mp) = sum_mu A(m,mu) W B(mu,mp).
void compose_dense_full(const KernelBlock& a_full, const KernelBlock& b_full,
                        const std::vector<Cmat>& a_diag, const std::vector<Cmat>& b_diag,
                        const SpectrumGrid& grid, int md, KernelBlock& out) {
    const std::size_t n = grid.size();
    const KernelBlock ad = densify(a_full, n, md);
    const KernelBlock bd = densify(b_full, n, md);
    Eigen::VectorXd wv = Eigen::Map<const Eigen::VectorXd>(grid.weights.data(), n);
    out.planes.assign(md * md, Cmat::Zero(n, n));

    const bool a_has = !a_full.is_zero();
    const bool b_has = !b_full.is_zero();
    for (int m = 0; m < md; ++m) {
        for (int mp = 0; mp < md; ++mp) {
            Cmat& c = out.planes[m * md + mp];
            for (int mu = 0; mu < md; ++mu) {
                if (a_has && b_has)
                    c.noalias() += ad.planes[m * md + mu] * wv.asDiagonal() * bd.planes[mu * md + mp];
                if (b_has) {  // diag(A) acting from the left, row by row
                    for (std::size_t i = 0; i < n; ++i)
                        c.row(i) += a_diag[i](m, mu) * bd.planes[mu * md + mp].row(i);
                }
                if (a_has) {  // diag(B) acting from the right, column by column
                    for (std::size_t j = 0; j < n; ++j)
                        c.col(j) += ad.planes[m * md + mu].col(j) * b_diag[j](mu, mp);
                }
            }
        }
    }
}

void compose_separable_full(const Observable& a, const Observable& b, KernelBlock& out) {
    const std::size_t n = a.n_nodes();
    const auto& w = a.grid.weights;
    // diag(A) * kernel(B)
    for (const auto& t : b.full.terms) {
        SeparableTerm nt;
        nt.u.resize(n);
        nt.v = t.v;
        for (std::size_t i = 0; i < n; ++i) nt.u[i] = a.cc_diag[i] * t.u[i];
        out.terms.push_back(std::move(nt));
    }
    // kernel(A) * diag(B)
    for (const auto& s : a.full.terms) {
        SeparableTerm nt;
        nt.u = s.u;
        nt.v.resize(n);
        for (std::size_t j = 0; j < n; ++j) nt.v[j] = s.v[j] * b.cc_diag[j];
        out.terms.push_back(std::move(nt));
    }
    // kernel(A) * kernel(B): couple through G = integral of v_a u_b
    for (const auto& s : a.full.terms) {
        for (const auto& t : b.full.terms) {
            Cmat g = Cmat::Zero(a.m_dim(), a.m_dim());
            for (std::size_t k = 0; k < n; ++k) g.noalias() += w[k] * (s.v[k] * t.u[k]);
            SeparableTerm nt;
            nt.u.resize(n);
            nt.v = t.v;
            for (std::size_t i = 0; i < n; ++i) nt.u[i] = s.u[i] * g;
            out.terms.push_back(std::move(nt));
        }
    }
}

}  // namespace

Observable compose(const Observable& a, const Observable& b) {
    if (!same_grid(a, b)) throw InvalidArgument("compose: grid/csco mismatch");
    if (a.has_cross() || b.has_cross())
        throw InvalidArgument("compose: bound-continuum cross blocks are not supported");

    Observable c;
    static_cast<FiveBlocks&>(c) = zero_blocks(a.grid, a.csco);
    if (a.csco.has_bound()) c.bb = a.bb * b.bb;
    const std::size_t n = a.n_nodes();
    for (std::size_t k = 0; k < n; ++k) c.cc_diag[k] = a.cc_diag[k] * b.cc_diag[k];

    const bool both_separable = !a.full.is_dense() && !b.full.is_dense();
    if (a.full.is_zero() && b.full.is_zero()) return c;
    if (both_separable) {
        compose_separable_full(a, b, c.full);
    } else {
        compose_dense_full(a.full, b.full, a.cc_diag, b.cc_diag, a.grid, a.m_dim(), c.full);
    }
    return c;
}

complexd op_trace(const Observable& a) {
    complexd acc = 0.0;
    if (a.csco.has_bound()) acc += a.bb.trace();
    for (std::size_t k = 0; k < a.n_nodes(); ++k)
        acc += a.grid.weights[k] * a.cc_diag[k].trace();
    return acc;
}

double hermiticity_residual(const FiveBlocks& x) {
    const int md = x.m_dim();
    const std::size_t n = x.n_nodes();
    double r = 0.0;
    if (x.csco.has_bound()) r = std::max(r, max_abs(x.bb - x.bb.adjoint().eval()));
    for (std::size_t k = 0; k < n; ++k)
        r = std::max(r, max_abs(x.cc_diag[k] - x.cc_diag[k].adjoint().eval()));
    if (x.csco.has_bound()) {
        for (std::size_t k = 0; k < n; ++k)
            r = std::max(r, max_abs(x.cross_ol[k] - x.cross_lo[k].adjoint().eval()));
    }
    if (!x.full.is_zero()) {
        const KernelBlock d = densify(x.full, n, md);
        for (int m = 0; m < md; ++m)
            for (int mp = 0; mp < md; ++mp)
                r = std::max(r, max_abs(d.planes[m * md + mp] -
                                        d.planes[mp * md + m].adjoint().eval()));
    }
    return r;
}

double state_norm(const StateFunctional& rho) {
    double acc = 0.0;
    if (rho.csco.has_bound()) acc += rho.bb.trace().real();
    for (std::size_t k = 0; k < rho.n_nodes(); ++k)
        acc += rho.grid.weights[k] * rho.cc_diag[k].trace().real();
    return acc;
}

Observable lin_comb(complexd alpha, const Observable& a, complexd beta, const Observable& b) {
    if (!same_grid(a, b)) throw InvalidArgument("lin_comb: grid/csco mismatch");
    Observable c;
    static_cast<FiveBlocks&>(c) = zero_blocks(a.grid, a.csco);
    c.bb = alpha * a.bb + beta * b.bb;
    const std::size_t n = a.n_nodes();
    for (std::size_t k = 0; k < n; ++k) {
        c.cc_diag[k] = alpha * a.cc_diag[k] + beta * b.cc_diag[k];
        c.cross_lo[k] = alpha * a.cross_lo[k] + beta * b.cross_lo[k];
        c.cross_ol[k] = alpha * a.cross_ol[k] + beta * b.cross_ol[k];
    }
    if (a.full.is_zero() && b.full.is_zero()) return c;
    if (!a.full.is_dense() && !b.full.is_dense()) {
        auto scaled = [&](const std::vector<SeparableTerm>& terms, complexd s) {
            for (const auto& t : terms) {
                SeparableTerm nt = t;
                for (auto& m : nt.u) m *= s;
                c.full.terms.push_back(std::move(nt));
            }
        };
        scaled(a.full.terms, alpha);
        scaled(b.full.terms, beta);
    } else {
        const int md = a.m_dim();
        const KernelBlock ad = densify(a.full, n, md);
        const KernelBlock bd = densify(b.full, n, md);
        c.full.planes.resize(md * md);
        for (int p = 0; p < md * md; ++p)
            c.full.planes[p] = alpha * ad.planes[p] + beta * bd.planes[p];
    }
    return c;
}

ValidationReport validate(const Observable& obs) {
    ValidationReport rep;
    rep.hermiticity_residual = hermiticity_residual(obs);
    return rep;
}

ValidationReport validate(const StateFunctional& rho) {
    ValidationReport rep;
    rep.hermiticity_residual = hermiticity_residual(rho);
    rep.normalization_deviation = std::abs(state_norm(rho) - 1.0);

    double min_diag = std::numeric_limits<double>::infinity();
    double min_eig = std::numeric_limits<double>::infinity();
    auto scan = [&](const Cmat& blk) {
        for (int m = 0; m < blk.rows(); ++m) min_diag = std::min(min_diag, blk(m, m).real());
        Eigen::SelfAdjointEigenSolver<Cmat> es(0.5 * (blk + blk.adjoint().eval()));
        min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
    };
    if (rho.csco.has_bound()) scan(rho.bb);
    for (const auto& blk : rho.cc_diag) scan(blk);
    rep.min_diagonal_entry = min_diag;
    rep.min_diag_block_eigenvalue = min_eig;
    rep.psd_warning = min_eig < -1e-10;
    return rep;
}

}  // namespace cslab
