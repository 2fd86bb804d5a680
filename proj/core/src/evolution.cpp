#include "cslab/evolution.hpp"

#include <algorithm>
#include <cmath>

#include "cslab/stats.hpp"

namespace cslab {

namespace {

// Phases act on the stored (density-kernel) coefficients; the mean-value
// formula then carries e^{+i(w-w')t} against the conjugated coefficients.
complexd phase(double energy, double t) { return std::exp(complexd(0.0, -energy * t)); }

}  // namespace

StateFunctional evolve(const StateFunctional& rho, double t) {
    StateFunctional out = rho;
    if (t == 0.0) return out;
    const std::size_t n = rho.n_nodes();
    const double w0 = rho.csco.bound_energy.value_or(0.0);

    if (rho.csco.has_bound()) {
        for (std::size_t k = 0; k < n; ++k) {
            out.cross_lo[k] *= phase(rho.grid.nodes[k] - w0, t);
            out.cross_ol[k] *= phase(w0 - rho.grid.nodes[k], t);
        }
    }
    if (!out.full.is_zero()) {
        std::vector<complexd> ph(n);
        for (std::size_t k = 0; k < n; ++k) ph[k] = phase(rho.grid.nodes[k], t);
        if (out.full.is_dense()) {
            for (auto& plane : out.full.planes)
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < n; ++j)
                        plane(i, j) *= ph[i] * std::conj(ph[j]);
        } else {
            for (auto& term : out.full.terms)
                for (std::size_t k = 0; k < n; ++k) {
                    term.u[k] *= ph[k];
                    term.v[k] *= std::conj(ph[k]);
                }
        }
    }
    return out;
}

double mean_at(const StateFunctional& rho, const Observable& obs, double t) {
    if (!same_grid(rho, obs)) throw InvalidArgument("mean_at: grid/csco mismatch");
    const auto& w = rho.grid.weights;
    const auto& omega = rho.grid.nodes;
    const std::size_t n = rho.n_nodes();
    const int md = rho.m_dim();
    const double w0 = rho.csco.bound_energy.value_or(0.0);

    complexd acc = 0.0;
    if (rho.csco.has_bound()) acc += (rho.bb.conjugate().cwiseProduct(obs.bb)).sum();
    for (std::size_t k = 0; k < n; ++k)
        acc += w[k] * (rho.cc_diag[k].conjugate().cwiseProduct(obs.cc_diag[k])).sum();

    if (rho.csco.has_bound()) {
        for (std::size_t k = 0; k < n; ++k) {
            const complexd up = std::exp(complexd(0.0, (omega[k] - w0) * t));
            acc += w[k] * up *
                   (rho.cross_lo[k].conjugate().cwiseProduct(obs.cross_lo[k])).sum();
            acc += w[k] * std::conj(up) *
                   (rho.cross_ol[k].conjugate().cwiseProduct(obs.cross_ol[k])).sum();
        }
    }

    if (!rho.full.is_zero() && !obs.full.is_zero()) {
        Eigen::VectorXcd lp(n), rp(n);
        for (std::size_t k = 0; k < n; ++k) {
            lp(k) = w[k] * std::exp(complexd(0.0, omega[k] * t));
            rp(k) = w[k] * std::exp(complexd(0.0, -omega[k] * t));
        }
        const KernelBlock rd = densify(rho.full, n, md);
        const KernelBlock od = densify(obs.full, n, md);
        for (int b = 0; b < md * md; ++b) {
            const Cmat prod = rd.planes[b].conjugate().cwiseProduct(od.planes[b]);
            acc += (lp.transpose() * prod * rp).value();
        }
    }
    return acc.real();
}

StateFunctional asymptotic_state(const StateFunctional& rho) {
    StateFunctional out = rho;
    const int md = rho.m_dim();
    out.cross_lo.assign(rho.n_nodes(), Cmat::Zero(md, md));
    out.cross_ol.assign(rho.n_nodes(), Cmat::Zero(md, md));
    out.full = KernelBlock{};
    return out;
}

double revival_horizon(const SpectrumGrid& grid) { return 2.0 * kPi / grid.min_spacing(); }

DecoherenceCurve decoherence_curve(const StateFunctional& rho, const Observable& obs,
                                   std::vector<double> times, bool allow_beyond_revival) {
    if (times.empty()) throw InvalidArgument("decoherence_curve: empty time list");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (times[i] <= times[i - 1])
            throw InvalidArgument("decoherence_curve: times must be strictly increasing");

    DecoherenceCurve curve;
    curve.revival_time = revival_horizon(rho.grid);
    if (!allow_beyond_revival && times.back() > 0.5 * curve.revival_time)
        throw InvalidArgument(
            "decoherence_curve: requested time exceeds half the grid revival horizon (" +
            std::to_string(0.5 * curve.revival_time) + "); pass the override to proceed");

    const StateFunctional star = asymptotic_state(rho);
    curve.asymptotic_mean = pair(star, obs);
    curve.times = std::move(times);
    curve.means.reserve(curve.times.size());
    curve.residuals.reserve(curve.times.size());
    for (const double t : curve.times) {
        const double m = mean_at(rho, obs, t);
        curve.means.push_back(m);
        curve.residuals.push_back(std::abs(m - curve.asymptotic_mean));
    }

    // Diagnostic envelope fit: log-residual against t^2 (gaussian) and
    // against log t (power law); keep whichever explains more variance.
    std::vector<double> xg, xp, yg, yp;
    for (std::size_t i = 0; i < curve.times.size(); ++i) {
        const double t = curve.times[i], r = curve.residuals[i];
        if (r <= 0.0) continue;
        xg.push_back(t * t);
        yg.push_back(std::log(r));
        if (t > 0.0) {
            xp.push_back(std::log(t));
            yp.push_back(std::log(r));
        }
    }
    const LineFit fg = fit_line(xg, yg);
    const LineFit fp = fit_line(xp, yp);
    if (fg.count >= 3 || fp.count >= 3) {
        DecayFit fit;
        if (fg.count >= 3 && (fp.count < 3 || fg.r_squared >= fp.r_squared) && fg.slope < 0.0) {
            fit.model = DecayModel::Gaussian;
            fit.rate = -fg.slope;
            fit.half_life = std::sqrt(std::log(2.0) / fit.rate);
            fit.r_squared = fg.r_squared;
            curve.fitted_decay = fit;
        } else if (fp.count >= 3 && fp.slope < 0.0) {
            fit.model = DecayModel::PowerLaw;
            fit.rate = -fp.slope;
            const double t0 = std::exp(xp.front());
            fit.half_life = t0 * std::pow(2.0, 1.0 / fit.rate);
            fit.r_squared = fp.r_squared;
            curve.fitted_decay = fit;
        }
    }
    return curve;
}

}  // namespace cslab
