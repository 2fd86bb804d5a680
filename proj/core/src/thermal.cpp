#include "cslab/thermal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cslab {

namespace {

// Grid moments of the canonical density, overflow-safe for any beta sign.
struct Moments {
    double mean = 0.0;
    double var = 0.0;
    double partition = 0.0;  // sum_k w_k e^{-beta w_k}, exact scale
};

Moments grid_moments(const SpectrumGrid& grid, double beta) {
    const std::size_t n = grid.size();
    double xmax = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) xmax = std::max(xmax, -beta * grid.nodes[k]);
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double e = grid.weights[k] * std::exp(-beta * grid.nodes[k] - xmax);
        s0 += e;
        s1 += e * grid.nodes[k];
        s2 += e * grid.nodes[k] * grid.nodes[k];
    }
    Moments m;
    m.mean = s1 / s0;
    m.var = s2 / s0 - m.mean * m.mean;
    m.partition = s0 * std::exp(xmax);
    return m;
}

// Mean of r in {0..radix-1} with weights e^{-gamma r}.
double label_mean(int radix, double gamma) {
    double s0 = 0.0, s1 = 0.0;
    for (int r = 0; r < radix; ++r) {
        const double e = std::exp(-gamma * r);
        s0 += e;
        s1 += e * r;
    }
    return s1 / s0;
}

double label_var(int radix, double gamma) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (int r = 0; r < radix; ++r) {
        const double e = std::exp(-gamma * r);
        s0 += e;
        s1 += e * r;
        s2 += e * r * r;
    }
    const double mu = s1 / s0;
    return s2 / s0 - mu * mu;
}

}  // namespace

ThermalParams solve_thermal_params(const SpectrumGrid& grid, const CscoSpec& csco,
                                   const ThermalTargets& targets) {
    const double e_target = targets.energy;
    if (!(e_target > 0.0) || e_target >= grid.omega_max)
        throw InfeasibleTarget("solve_thermal_params: mean energy outside (0, omega_max)");
    if (e_target <= grid.nodes.front() || e_target >= grid.nodes.back())
        throw InfeasibleTarget("solve_thermal_params: mean energy outside the grid-attainable range");

    const double tol = 1e-12 * std::max(1.0, std::abs(e_target));
    double lo = -1.0, hi = 1.0;  // E(beta) is strictly decreasing
    while (grid_moments(grid, lo).mean < e_target) lo *= 2.0;
    while (grid_moments(grid, hi).mean > e_target) hi *= 2.0;

    double beta = 0.5 * (lo + hi);
    double resid = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 200; ++it) {
        const Moments m = grid_moments(grid, beta);
        resid = m.mean - e_target;
        if (std::abs(resid) <= tol) break;
        if (resid > 0.0)
            lo = beta;
        else
            hi = beta;
        double next = beta + resid / m.var;  // Newton: dE/dbeta = -var
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        beta = next;
    }
    if (std::abs(resid) > 1e3 * tol)
        throw SolverFailure("solve_thermal_params: beta iteration stalled, residual " +
                            std::to_string(resid));

    ThermalParams params;
    params.beta = beta;
    params.z = grid_moments(grid, beta).partition;
    params.truncation_err = truncation_bound(grid, beta);

    if (targets.momentum_means) {
        const auto radices = csco.label_radices();
        const auto& means = *targets.momentum_means;
        if (means.size() != radices.size())
            throw InvalidArgument("solve_thermal_params: one momentum mean per momentum required");
        params.gammas.resize(means.size(), 0.0);
        for (std::size_t i = 0; i < means.size(); ++i) {
            const int radix = radices[i];
            if (radix == 1) {
                if (std::abs(means[i]) > 1e-12)
                    throw InfeasibleTarget("solve_thermal_params: trivial label cannot match mean");
                continue;
            }
            if (!(means[i] > 0.0) || !(means[i] < radix - 1.0))
                throw InfeasibleTarget("solve_thermal_params: label mean outside (0, radix-1)");
            double glo = -1.0, ghi = 1.0;
            while (label_mean(radix, glo) < means[i]) glo *= 2.0;
            while (label_mean(radix, ghi) > means[i]) ghi *= 2.0;
            double gamma = 0.0;
            for (int it = 0; it < 200; ++it) {
                const double r = label_mean(radix, gamma) - means[i];
                if (std::abs(r) <= 1e-13 * radix) break;
                if (r > 0.0)
                    glo = gamma;
                else
                    ghi = gamma;
                double next = gamma + r / label_var(radix, gamma);
                if (!(next > glo && next < ghi)) next = 0.5 * (glo + ghi);
                gamma = next;
            }
            params.gammas[i] = gamma;
        }
    }
    return params;
}

double shannon_entropy(const SpectrumGrid& grid, std::span<const double> density) {
    if (density.size() != grid.size())
        throw InvalidArgument("shannon_entropy: sample count does not match grid");
    double acc = 0.0;
    for (std::size_t k = 0; k < density.size(); ++k) {
        const double p = density[k];
        if (p < 0.0) throw InvalidArgument("shannon_entropy: negative density entry");
        if (p > 0.0) acc -= grid.weights[k] * p * std::log(p);
    }
    return acc;
}

namespace {

// Label weights e^{-gamma.digits(r)} for r = 0..M-1 (ones when canonical).
std::vector<double> label_weights(const CscoSpec& csco, const std::vector<double>& gammas) {
    const int m = csco.degeneracy;
    std::vector<double> w(m, 1.0);
    if (gammas.empty()) return w;
    const auto radices = csco.label_radices();
    if (gammas.size() != radices.size())
        throw InvalidArgument("label weights: gamma count does not match momenta");
    for (int r = 0; r < m; ++r) {
        const auto digits = csco.label_digits(r);
        double s = 0.0;
        for (std::size_t i = 0; i < digits.size(); ++i) s += gammas[i] * digits[i];
        w[r] = std::exp(-s);
    }
    return w;
}

void require_continuum_only(const CscoSpec& csco, const char* who) {
    if (csco.has_bound())
        throw InvalidArgument(std::string(who) + ": continuum-only simplification, no bound state");
}

}  // namespace

StateFunctional build_kms_state(const SpectrumGrid& grid, const CscoSpec& csco,
                                const ThermalParams& params) {
    require_continuum_only(csco, "build_kms_state");
    StateFunctional rho;
    static_cast<FiveBlocks&>(rho) = zero_blocks(grid, csco);
    const auto lw = label_weights(csco, params.gammas);
    double lw_sum = 0.0;
    for (double x : lw) lw_sum += x;

    double z_cont = 0.0;
    std::vector<double> boltz(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
        boltz[k] = std::exp(-params.beta * grid.nodes[k]);
        z_cont += grid.weights[k] * boltz[k];
    }
    const double z_total = z_cont * lw_sum;
    for (std::size_t k = 0; k < grid.size(); ++k)
        for (int r = 0; r < csco.degeneracy; ++r)
            rho.cc_diag[k](r, r) = boltz[k] * lw[r] / z_total;
    return rho;
}

double thermal_functional(const Observable& a, const CscoSpec& csco,
                          const ThermalParams& params) {
    require_continuum_only(csco, "thermal_functional");
    if (!(params.beta > 0.0))
        throw InvalidArgument("thermal_functional: beta must be positive (trace diverges)");
    const auto& grid = a.grid;
    const auto lw = label_weights(csco, params.gammas);
    complexd num = 0.0;
    double den = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double we = grid.weights[k] * std::exp(-params.beta * grid.nodes[k]);
        for (int r = 0; r < csco.degeneracy; ++r) {
            num += we * lw[r] * a.cc_diag[k](r, r);
            den += we * lw[r];
        }
    }
    return (num / den).real();
}

KmsCorrelators kms_correlators(const Observable& a, const Observable& b,
                               const ThermalParams& params, std::vector<double> t_grid,
                               std::vector<double> gamma_grid) {
    if (!same_grid(a, b)) throw InvalidArgument("kms_correlators: grid/csco mismatch");
    require_continuum_only(a.csco, "kms_correlators");
    if (!params.gammas.empty())
        throw InvalidArgument("kms_correlators: canonical weight only (no label multipliers)");
    const double beta = params.beta;
    if (!(beta > 0.0)) throw InvalidArgument("kms_correlators: beta must be positive");
    for (double g : gamma_grid)
        if (!(g > 0.0 && g < beta))
            throw InvalidArgument("kms_correlators: strip rows must satisfy 0 < gamma < beta");

    const std::size_t n = a.n_nodes();
    const int md = a.m_dim();
    const auto& w = a.grid.weights;
    const auto& omega = a.grid.nodes;

    const KernelBlock ad = densify(a.full, n, md);
    const KernelBlock bd = densify(b.full, n, md);
    const bool a_has = !a.full.is_zero();
    const bool b_has = !b.full.is_zero();

    // S(k,j) = w_k w_j tr[B(k,j) A(j,k)]; T(k,j) = w_k w_j tr[A(k,j) B(j,k)].
    Cmat s = Cmat::Zero(n, n), tmat = Cmat::Zero(n, n);
    if (a_has && b_has) {
        for (int m = 0; m < md; ++m)
            for (int mu = 0; mu < md; ++mu) {
                s += bd.planes[m * md + mu].cwiseProduct(ad.planes[mu * md + m].transpose());
                tmat += ad.planes[m * md + mu].cwiseProduct(bd.planes[mu * md + m].transpose());
            }
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t j = 0; j < n; ++j) {
                s(k, j) *= w[k] * w[j];
                tmat(k, j) *= w[k] * w[j];
            }
    }

    // t-independent diagonal contributions (phases cancel on the diagonal).
    double z = 0.0;
    complexd c_ba = 0.0, c_ab = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double we = w[k] * std::exp(-beta * omega[k]);
        z += we * md;
        complexd ba = (b.cc_diag[k] * a.cc_diag[k]).trace();
        complexd ab = (a.cc_diag[k] * b.cc_diag[k]).trace();
        if (a_has) {
            ba += (b.cc_diag[k] * ad.at(k, k, md)).trace();
            ab += (ad.at(k, k, md) * b.cc_diag[k]).trace();
        }
        if (b_has) {
            ba += (bd.at(k, k, md) * a.cc_diag[k]).trace();
            ab += (a.cc_diag[k] * bd.at(k, k, md)).trace();
        }
        c_ba += we * ba;
        c_ab += we * ab;
    }

    auto eval_f = [&](double t, double gamma) {
        // F(t+i gamma) = [C + sum_kj S_kj e^{(it-gamma) w_j} e^{(-it-(beta-gamma)) w_k}] / Z
        Eigen::VectorXcd uj(n), vk(n);
        for (std::size_t k = 0; k < n; ++k) {
            uj(k) = std::exp(complexd(-gamma * omega[k], t * omega[k]));
            vk(k) = std::exp(complexd(-(beta - gamma) * omega[k], -t * omega[k]));
        }
        complexd acc = c_ba;
        if (a_has && b_has) acc += (vk.transpose() * s * uj).value();
        return acc / z;
    };
    auto eval_g = [&](double t) {
        // G(t) = [C' + sum_kj T_kj e^{-beta w_k} e^{i(w_k - w_j) t}] / Z
        Eigen::VectorXcd uk(n), vj(n);
        for (std::size_t k = 0; k < n; ++k) {
            uk(k) = std::exp(complexd(-beta * omega[k], t * omega[k]));
            vj(k) = std::exp(complexd(0.0, -t * omega[k]));
        }
        complexd acc = c_ab;
        if (a_has && b_has) acc += (uk.transpose() * tmat * vj).value();
        return acc / z;
    };

    KmsCorrelators corr;
    corr.beta = beta;
    corr.t_grid = std::move(t_grid);
    corr.gamma_grid = std::move(gamma_grid);
    corr.f_values.reserve(corr.t_grid.size());
    corr.g_values.reserve(corr.t_grid.size());
    corr.f_at_ibeta.reserve(corr.t_grid.size());
    for (double t : corr.t_grid) {
        corr.f_values.push_back(eval_f(t, 0.0));
        corr.g_values.push_back(eval_g(t));
        corr.f_at_ibeta.push_back(eval_f(t, beta));
    }
    corr.strip.resize(corr.gamma_grid.size());
    for (std::size_t r = 0; r < corr.gamma_grid.size(); ++r) {
        corr.strip[r].reserve(corr.t_grid.size());
        for (double t : corr.t_grid) corr.strip[r].push_back(eval_f(t, corr.gamma_grid[r]));
    }
    return corr;
}

KmsReport verify_kms(const KmsCorrelators& corr, const ThermalParams& params) {
    if (corr.beta != params.beta)
        throw InvalidArgument("verify_kms: correlators were computed at a different beta");
    KmsReport rep;
    for (std::size_t i = 0; i < corr.t_grid.size(); ++i) {
        rep.boundary_residual = std::max(
            rep.boundary_residual, std::abs(corr.g_values[i] - corr.f_at_ibeta[i]));
        rep.boundary_scale = std::max(rep.boundary_scale, std::abs(corr.g_values[i]));
    }

    // Cauchy-Riemann defect d_t F + i d_gamma F on the uniform strip lattice,
    // with the gamma = 0 and gamma = beta rows as boundary neighbors.
    const std::size_t nt = corr.t_grid.size();
    const std::size_t ng = corr.gamma_grid.size();
    if (nt < 3 || ng < 1) return rep;
    const double ht = corr.t_grid[1] - corr.t_grid[0];
    for (std::size_t i = 2; i < nt; ++i)
        if (std::abs((corr.t_grid[i] - corr.t_grid[i - 1]) - ht) > 1e-9 * std::abs(ht))
            throw InvalidArgument("verify_kms: non-uniform t grid");
    std::vector<double> gamma_all;
    gamma_all.push_back(0.0);
    gamma_all.insert(gamma_all.end(), corr.gamma_grid.begin(), corr.gamma_grid.end());
    gamma_all.push_back(corr.beta);
    const double hg = gamma_all[1] - gamma_all[0];
    for (std::size_t i = 2; i < gamma_all.size(); ++i)
        if (std::abs((gamma_all[i] - gamma_all[i - 1]) - hg) > 1e-9 * std::abs(hg))
            throw InvalidArgument("verify_kms: non-uniform gamma lattice");

    auto row = [&](std::size_t r) -> const std::vector<complexd>& {
        if (r == 0) return corr.f_values;
        if (r == ng + 1) return corr.f_at_ibeta;
        return corr.strip[r - 1];
    };
    for (std::size_t r = 1; r <= ng; ++r) {
        for (std::size_t i = 1; i + 1 < nt; ++i) {
            const complexd dt = (row(r)[i + 1] - row(r)[i - 1]) / (2.0 * ht);
            const complexd dg = (row(r + 1)[i] - row(r - 1)[i]) / (2.0 * hg);
            const double resid = std::abs(dt + complexd(0.0, 1.0) * dg);
            rep.cr_samples.push_back({corr.t_grid[i], gamma_all[r], resid});
            rep.analyticity_residual = std::max(rep.analyticity_residual, resid);
        }
    }
    return rep;
}

}  // namespace cslab
